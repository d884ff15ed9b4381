#pragma once

// Flat key=value run configuration. '#' starts a comment; keys are unique;
// unknown keys are rejected.

#include <charconv>
#include <functional>
#include <istream>
#include <map>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "aeslab/errors.hpp"
#include "aeslab/scorer.hpp"
#include "aeslab/segmenter.hpp"

namespace aeslab {

using KeyValues = std::vector<std::pair<std::string, std::string>>;

namespace detail {

inline std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

}  // namespace detail

inline KeyValues parse_key_values(std::istream& in) {
  KeyValues kv;
  std::map<std::string, std::size_t> seen;
  std::string line;
  std::size_t no = 0;
  while (std::getline(in, line)) {
    ++no;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    const auto text = detail::trim(line);
    if (text.empty()) continue;
    const auto eq = text.find('=');
    if (eq == std::string::npos) throw ConfigError("config line " + std::to_string(no) + ": expected key = value");
    auto key = detail::trim(std::string_view(text).substr(0, eq));
    auto value = detail::trim(std::string_view(text).substr(eq + 1));
    if (key.empty()) throw ConfigError("config line " + std::to_string(no) + ": empty key");
    if (seen.count(key)) {
      throw ConfigError("config line " + std::to_string(no) + ": duplicate key '" + key + "' (first on line " +
                        std::to_string(seen[key]) + ")");
    }
    seen[key] = no;
    kv.emplace_back(std::move(key), std::move(value));
  }
  return kv;
}

inline KeyValues parse_key_values(const std::string& text) {
  std::istringstream in(text);
  return parse_key_values(in);
}

namespace detail {

inline double parse_double(const std::string& key, const std::string& v) {
  double x = 0;
  const auto r = std::from_chars(v.data(), v.data() + v.size(), x);
  if (r.ec != std::errc() || r.ptr != v.data() + v.size()) throw ConfigError(key + ": '" + v + "' is not a number");
  return x;
}

inline std::size_t parse_count(const std::string& key, const std::string& v) {
  std::size_t x = 0;
  const auto r = std::from_chars(v.data(), v.data() + v.size(), x);
  if (r.ec != std::errc() || r.ptr != v.data() + v.size()) {
    throw ConfigError(key + ": '" + v + "' is not a non-negative integer");
  }
  return x;
}

inline bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  throw ConfigError(key + ": '" + v + "' is not a boolean");
}

inline std::string show(double x) {
  char buf[64];
  const auto r = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, r.ptr);
}

struct Field {
  std::function<void(const std::string&)> set;
  std::function<std::string()> get;
};

using FieldTable = std::vector<std::pair<std::string, Field>>;

inline Field real(const std::string& key, double& x) {
  return {[&x, key](const std::string& v) { x = parse_double(key, v); }, [&x] { return show(x); }};
}
inline Field count(const std::string& key, std::size_t& x) {
  return {[&x, key](const std::string& v) { x = parse_count(key, v); }, [&x] { return std::to_string(x); }};
}
inline Field flag(const std::string& key, bool& x) {
  return {[&x, key](const std::string& v) { x = parse_bool(key, v); }, [&x] { return x ? "true" : "false"; }};
}

inline FieldTable segmenter_fields(SegmenterConfig& c) {
  FieldTable t;
  auto add = [&](const std::string& k, Field f) { t.emplace_back(k, std::move(f)); };
  add("learning_rate", real("learning_rate", c.learning_rate));
  add("weight_decay", real("weight_decay", c.weight_decay));
  add("keep_prob", real("keep_prob", c.encoder.keep_prob));
  add("ema_decay", real("ema_decay", c.ema_decay));
  add("max_grad_norm", real("max_grad_norm", c.max_grad_norm));
  add("batch_size", count("batch_size", c.batch_size));
  add("epochs", count("epochs", c.epochs));
  add("window", count("window", c.encoder.window));
  add("embed_dim", count("embed_dim", c.encoder.embed_dim));
  add("hidden", count("hidden", c.encoder.hidden));
  add("validation_fraction", real("validation_fraction", c.validation_fraction));
  add("decoration", {[&c](const std::string& v) {
                       const auto d = parse_edu_decoration(v);
                       if (!d) throw ConfigError("decoration: expected none, predicted or gold, got '" + v + "'");
                       c.decoration = *d;
                     },
                     [&c] { return to_string(c.decoration); }});
  return t;
}

inline FieldTable scorer_fields(ScorerConfig& c) {
  FieldTable t;
  auto add = [&](const std::string& k, Field f) { t.emplace_back(k, std::move(f)); };
  add("alpha", real("alpha", c.alpha));
  add("beta", real("beta", c.beta));
  add("epochs", count("epochs", c.epochs));
  add("learning_rate", real("learning_rate", c.learning_rate));
  add("dropout", real("dropout", c.dropout));
  add("batch_size", count("batch_size", c.batch_size));
  add("patience", count("patience", c.patience));
  add("margin", real("margin", c.margin));
  add("max_grad_norm", real("max_grad_norm", c.max_grad_norm));
  add("folds", count("folds", c.folds));
  add("seeds", count("seeds", c.seeds));
  add("embed_dim", count("embed_dim", c.embed_dim));
  add("hidden", count("hidden", c.hidden));
  add("window", count("window", c.window));
  add("head_hidden", count("head_hidden", c.head_hidden));
  add("seq_hidden", count("seq_hidden", c.seq_hidden));
  add("context", {[&c](const std::string& v) {
                    const auto ctx = parse_context(v);
                    if (!ctx) throw ConfigError("context: unknown configuration '" + v + "'");
                    c.context = *ctx;
                  },
                  [&c] { return to_string(c.context); }});
  add("prompt_specific", flag("prompt_specific", c.prompt_specific));
  add("raw_features", flag("raw_features", c.raw_features));
  return t;
}

inline void apply(FieldTable table, const KeyValues& kv, const char* what) {
  for (const auto& [k, v] : kv) {
    const auto it = std::find_if(table.begin(), table.end(), [&](const auto& f) { return f.first == k; });
    if (it == table.end()) throw ConfigError(std::string("unknown ") + what + " config key '" + k + "'");
    it->second.set(v);
  }
}

inline KeyValues dump(FieldTable table) {
  KeyValues kv;
  for (auto& [k, f] : table) kv.emplace_back(k, f.get());
  return kv;
}

}  // namespace detail

inline void apply_config(SegmenterConfig& c, const KeyValues& kv) {
  detail::apply(detail::segmenter_fields(c), kv, "segmenter");
}

inline void apply_config(ScorerConfig& c, const KeyValues& kv) {
  detail::apply(detail::scorer_fields(c), kv, "scorer");
  c.validate();
}

inline KeyValues config_values(SegmenterConfig c) { return detail::dump(detail::segmenter_fields(c)); }
inline KeyValues config_values(ScorerConfig c) { return detail::dump(detail::scorer_fields(c)); }

inline std::string format_key_values(const KeyValues& kv) {
  std::string out;
  for (const auto& [k, v] : kv) out += k + " = " + v + "\n";
  return out;
}

}  // namespace aeslab
