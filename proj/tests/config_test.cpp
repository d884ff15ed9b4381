#include "aeslab/config.hpp"

#include <gtest/gtest.h>

namespace aeslab {
namespace {

// The two hyperparameter tables, value for value.
TEST(Defaults, SpanLabellingTable) {
  const SegmenterConfig c;
  EXPECT_EQ(c.learning_rate, 0.001);
  EXPECT_EQ(c.weight_decay, 1e-4);
  EXPECT_EQ(c.encoder.keep_prob, 0.9);
  EXPECT_EQ(c.ema_decay, 0.9999);
  EXPECT_EQ(c.max_grad_norm, 5.0);
  EXPECT_EQ(c.batch_size, 32u);
  EXPECT_EQ(c.epochs, 50u);
  EXPECT_EQ(c.encoder.window, 5u);
}

TEST(Defaults, AesTable) {
  const ScorerConfig c;
  EXPECT_EQ(c.alpha, 0.9);
  EXPECT_EQ(c.beta, 0.1);
  EXPECT_EQ(c.epochs, 150u);
  EXPECT_EQ(c.learning_rate, 3e-5);
  EXPECT_EQ(c.dropout, 0.4);
  EXPECT_EQ(c.batch_size, 128u);
  EXPECT_EQ(c.patience, 15u);
  EXPECT_EQ(c.margin, 0.0);
}

TEST(KeyValue, ParsesCommentsAndWhitespace) {
  const auto kv = parse_key_values("# run\n\n epochs = 3  # short\nlearning_rate=0.01\r\n");
  ASSERT_EQ(kv.size(), 2u);
  EXPECT_EQ(kv[0], (std::pair<std::string, std::string>{"epochs", "3"}));
  EXPECT_EQ(kv[1], (std::pair<std::string, std::string>{"learning_rate", "0.01"}));
}

TEST(KeyValue, Malformed) {
  EXPECT_THROW(parse_key_values("epochs 3\n"), ConfigError);
  EXPECT_THROW(parse_key_values("= 3\n"), ConfigError);
  EXPECT_THROW(parse_key_values("epochs = 3\nepochs = 4\n"), ConfigError);
}

TEST(Apply, SegmenterKeys) {
  SegmenterConfig c;
  apply_config(c, parse_key_values("epochs = 7\nkeep_prob = 0.5\ndecoration = gold\nwindow = 2\n"));
  EXPECT_EQ(c.epochs, 7u);
  EXPECT_EQ(c.encoder.keep_prob, 0.5);
  EXPECT_EQ(c.decoration, EduDecoration::gold);
  EXPECT_EQ(c.encoder.window, 2u);
  EXPECT_THROW(apply_config(c, parse_key_values("alpha = 0.5\n")), ConfigError);
  EXPECT_THROW(apply_config(c, parse_key_values("epochs = -1\n")), ConfigError);
  EXPECT_THROW(apply_config(c, parse_key_values("epochs = 3x\n")), ConfigError);
  EXPECT_THROW(apply_config(c, parse_key_values("decoration = maybe\n")), ConfigError);
}

TEST(Apply, ScorerKeys) {
  ScorerConfig c;
  apply_config(c, parse_key_values("alpha = 0.7\nbeta = 0.3\ncontext = mr+ac+prompt+features\nprompt_specific = true\n"));
  EXPECT_EQ(c.alpha, 0.7);
  EXPECT_EQ(c.context, Context::mr_ac_prompt_features);
  EXPECT_TRUE(c.prompt_specific);
  EXPECT_THROW(apply_config(c, parse_key_values("weight_decay = 0.1\n")), ConfigError);
  EXPECT_THROW(apply_config(c, parse_key_values("context = everything\n")), ConfigError);
  ScorerConfig d;
  EXPECT_THROW(apply_config(d, parse_key_values("alpha = 0.5\n")), ConfigError);  // beta stays 0.1
}

TEST(Apply, DumpRoundTrips) {
  ScorerConfig c;
  c.learning_rate = 0.0123;
  c.context = Context::mr_edu;
  ScorerConfig d;
  apply_config(d, config_values(c));
  EXPECT_EQ(to_json(d).dump(), to_json(c).dump());
  SegmenterConfig s;
  s.weight_decay = 0.5;
  SegmenterConfig t;
  apply_config(t, config_values(s));
  EXPECT_EQ(to_json(t).dump(), to_json(s).dump());
}

TEST(Contexts, AblationRowNames) {
  const std::vector<std::string> names = {"none",  "mr",           "mr+prompt",           "mr+edu",
                                          "mr+ac", "mr+ac+prompt", "mr+ac+prompt+features"};
  for (const auto& n : names) {
    const auto c = parse_context(n);
    ASSERT_TRUE(c.has_value()) << n;
    EXPECT_EQ(to_string(*c), n);
  }
  EXPECT_FALSE(parse_context("ac").has_value());
  const auto f = flags_of(Context::mr_ac_prompt_features);
  EXPECT_TRUE(f.mr && f.ac && f.prompt && f.features && !f.edu);
  EXPECT_FALSE(flags_of(Context::none).mr);
}

}  // namespace
}  // namespace aeslab
