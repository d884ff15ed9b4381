#pragma once

// Flat checkpoint container.
//
// Layout (all integers little-endian):
//   8 bytes  magic "AESLABCK"
//   u32      format version
//   u64      metadata length, then that many bytes of UTF-8 text
//   u64      entry count, then per entry:
//              u32 name length, name bytes,
//              u32 rank, rank x u64 extents,
//              product(extents) x float64 payload (IEEE-754, little-endian)

#include <algorithm>
#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <map>
#include <sstream>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "aeslab/errors.hpp"
#include "aeslab/tensor.hpp"

namespace aeslab {

inline constexpr std::string_view kCheckpointMagic = "AESLABCK";
inline constexpr std::uint32_t kCheckpointVersion = 1;

class Checkpoint {
 public:
  std::string metadata;

  void put(const std::string& name, const Tensor& t) {
    for (auto& [n, v] : entries_) {
      if (n == name) {
        v = t.detach();
        return;
      }
    }
    entries_.emplace_back(name, t.detach());
  }

  bool contains(const std::string& name) const {
    return std::any_of(entries_.begin(), entries_.end(), [&](const auto& e) { return e.first == name; });
  }

  const Tensor& get(const std::string& name) const {
    for (const auto& [n, v] : entries_) {
      if (n == name) return v;
    }
    throw LoadError("checkpoint: missing entry '" + name + "'");
  }

  // Copies a stored entry into an existing leaf of identical shape.
  void restore(const std::string& name, Tensor& target) const {
    const Tensor& src = get(name);
    if (src.shape() != target.shape()) {
      throw LoadError("checkpoint: entry '" + name + "' has shape " + src.shape().str() + ", expected " +
                      target.shape().str());
    }
    auto dst = target.data();
    std::copy(src.values().begin(), src.values().end(), dst.begin());
  }

  const std::vector<std::pair<std::string, Tensor>>& entries() const { return entries_; }

 private:
  std::vector<std::pair<std::string, Tensor>> entries_;
};

namespace detail {

inline void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFFu));
}

inline void put_u64(std::string& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFFu));
}

class ByteReader {
 public:
  explicit ByteReader(std::string_view bytes) : bytes_(bytes) {}

  std::uint64_t uint(int width) {
    need(static_cast<std::size_t>(width));
    std::uint64_t v = 0;
    for (int i = 0; i < width; ++i) {
      v |= static_cast<std::uint64_t>(static_cast<unsigned char>(bytes_[pos_ + static_cast<std::size_t>(i)])) << (8 * i);
    }
    pos_ += static_cast<std::size_t>(width);
    return v;
  }

  std::string_view take(std::size_t n) {
    need(n);
    auto s = bytes_.substr(pos_, n);
    pos_ += n;
    return s;
  }

  bool done() const { return pos_ == bytes_.size(); }

 private:
  void need(std::size_t n) const {
    if (bytes_.size() - pos_ < n) throw LoadError("checkpoint: truncated file");
  }

  std::string_view bytes_;
  std::size_t pos_ = 0;
};

}  // namespace detail

inline std::string serialize(const Checkpoint& ckpt) {
  std::string out(kCheckpointMagic);
  detail::put_u32(out, kCheckpointVersion);
  detail::put_u64(out, ckpt.metadata.size());
  out += ckpt.metadata;
  detail::put_u64(out, ckpt.entries().size());
  for (const auto& [name, t] : ckpt.entries()) {
    detail::put_u32(out, static_cast<std::uint32_t>(name.size()));
    out += name;
    detail::put_u32(out, 2);
    detail::put_u64(out, t.rows());
    detail::put_u64(out, t.cols());
    for (double v : t.values()) detail::put_u64(out, std::bit_cast<std::uint64_t>(v));
  }
  return out;
}

inline Checkpoint deserialize(std::string_view bytes) {
  detail::ByteReader in(bytes);
  if (in.take(kCheckpointMagic.size()) != kCheckpointMagic) throw LoadError("checkpoint: bad magic");
  const auto version = in.uint(4);
  if (version != kCheckpointVersion) {
    throw LoadError("checkpoint: unsupported version " + std::to_string(version));
  }
  Checkpoint ckpt;
  ckpt.metadata = std::string(in.take(in.uint(8)));
  const auto count = in.uint(8);
  for (std::uint64_t e = 0; e < count; ++e) {
    std::string name(in.take(in.uint(4)));
    const auto rank = in.uint(4);
    if (rank > 2) throw LoadError("checkpoint: entry '" + name + "' has unsupported rank " + std::to_string(rank));
    std::uint64_t dims[2] = {1, 1};
    for (std::uint64_t k = 0; k < rank; ++k) dims[2 - rank + k] = in.uint(8);
    if (dims[0] != 0 && dims[1] > (std::uint64_t{1} << 40) / dims[0]) {
      throw LoadError("checkpoint: entry '" + name + "' is implausibly large");
    }
    std::vector<double> values(dims[0] * dims[1]);
    for (double& v : values) v = std::bit_cast<double>(in.uint(8));
    ckpt.put(name, Tensor::from(dims[0], dims[1], std::move(values)));
  }
  if (!in.done()) throw LoadError("checkpoint: trailing bytes after last entry");
  return ckpt;
}

inline void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw Error("cannot open '" + path.string() + "' for writing");
  const std::string bytes = serialize(ckpt);
  os.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!os) throw Error("write failed for '" + path.string() + "'");
}

inline Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw LoadError("cannot open checkpoint '" + path.string() + "'");
  std::string bytes((std::istreambuf_iterator<char>(is)), std::istreambuf_iterator<char>());
  return deserialize(bytes);
}

}  // namespace aeslab
