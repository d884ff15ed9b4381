#include "aeslab/checkpoint.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <limits>

#include "aeslab/optim.hpp"

namespace aeslab {
namespace {

Checkpoint sample() {
  Checkpoint c;
  c.metadata = R"({"kind":"EDU"})";
  c.put("w", Tensor::from(2, 3, {1.5, -0.0, 3e-300, std::numeric_limits<double>::infinity(), 1.0 / 3.0, -7}));
  c.put("empty", Tensor::zeros(0, 4));
  c.put("s", Tensor::scalar(42));
  return c;
}

TEST(Checkpoint, ByteExactRoundTrip) {
  const std::string bytes = serialize(sample());
  const Checkpoint back = deserialize(bytes);
  EXPECT_EQ(back.metadata, sample().metadata);
  EXPECT_EQ(serialize(back), bytes);
  EXPECT_EQ(back.get("w").shape(), (Shape{2, 3}));
  EXPECT_TRUE(std::signbit(back.get("w").values()[1]));
  EXPECT_EQ(back.get("empty").shape(), (Shape{0, 4}));
}

TEST(Checkpoint, LayoutStartsWithMagicAndVersion) {
  const std::string bytes = serialize(sample());
  ASSERT_GE(bytes.size(), 12u);
  EXPECT_EQ(bytes.substr(0, 8), "AESLABCK");
  EXPECT_EQ(bytes[8], '\x01');
  EXPECT_EQ(bytes.substr(9, 3), std::string(3, '\0'));
}

TEST(Checkpoint, CorruptInputsAreLoadErrors) {
  std::string bytes = serialize(sample());
  EXPECT_THROW(deserialize(bytes.substr(0, bytes.size() - 3)), LoadError);
  EXPECT_THROW(deserialize(bytes + "x"), LoadError);
  std::string bad = bytes;
  bad[0] = 'X';
  EXPECT_THROW(deserialize(bad), LoadError);
  bad = bytes;
  bad[8] = '\x07';
  EXPECT_THROW(deserialize(bad), LoadError);
  EXPECT_THROW(deserialize(""), LoadError);
}

TEST(Checkpoint, FileRoundTripAndRestore) {
  const auto path = std::filesystem::temp_directory_path() / "aeslab_ckpt_test.bin";
  save_checkpoint(path, sample());
  const Checkpoint back = load_checkpoint(path);
  Tensor target = Tensor::parameter(2, 3, std::vector<double>(6, 0.0));
  back.restore("w", target);
  EXPECT_DOUBLE_EQ(target.values()[0], 1.5);
  Tensor wrong = Tensor::parameter(3, 2, std::vector<double>(6, 0.0));
  EXPECT_THROW(back.restore("w", wrong), LoadError);
  EXPECT_THROW(back.get("missing"), LoadError);
  std::filesystem::remove(path);
  EXPECT_THROW(load_checkpoint(path), LoadError);
}

TEST(Checkpoint, OptimizerStateUnderReservedPrefixes) {
  ParamList params = {{"a", Tensor::parameter(1, 2, {1, 2})}, {"b", Tensor::parameter(2, 1, {3, 4})}};
  AdamState adam;
  adam.lr = 0.05;
  adam_step(adam, params, {{0.1, -0.2}, {0.3, 0.4}});
  RmspropState rms;
  rmsprop_step(rms, params, {{1, 2}, {3, 4}});
  EmaState ema = EmaState::track(params, 0.99);

  Checkpoint c;
  store_state(c, adam, params);
  store_state(c, rms, params);
  store_state(c, ema, params);
  const Checkpoint back = deserialize(serialize(c));
  for (const auto& [name, t] : back.entries()) {
    const bool reserved = name.rfind("adam.", 0) == 0 || name.rfind("rmsprop.", 0) == 0 || name.rfind("ema.", 0) == 0;
    EXPECT_TRUE(reserved) << name;
  }
  const AdamState a2 = load_adam_state(back, params);
  EXPECT_EQ(a2.t, 1);
  EXPECT_EQ(a2.m, adam.m);
  EXPECT_EQ(a2.v, adam.v);
  EXPECT_DOUBLE_EQ(a2.lr, 0.05);
  EXPECT_EQ(load_rmsprop_state(back, params).eg2, rms.eg2);
  EXPECT_EQ(load_ema_state(back, params).shadow, ema.shadow);
}

}  // namespace
}  // namespace aeslab
