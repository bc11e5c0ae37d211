#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>

#include "xmt/config.hpp"
#include "xmt/json_io.hpp"

using namespace xmt;

namespace {

std::string error_of(const std::string& text) {
  try {
    parse_config_text(text);
  } catch (const ConfigError& e) {
    return e.what();
  }
  return "";
}

}  // namespace

TEST(Config, EmptyObjectGivesDefaults) {
  const RunConfig c = parse_config_text("{}");
  EXPECT_EQ(c.train.lr, 2e-4);
  EXPECT_EQ(c.train.beta1, 0.5);
  EXPECT_EQ(c.train.epochs_const, 100);
  EXPECT_EQ(c.train.lambda_L1, 100.0);
  EXPECT_EQ(c.train.objective.kind, GanKind::vanilla);
  EXPECT_EQ(c.train.load_size, 256);
  EXPECT_EQ(c.unet.target_size, 256);
  EXPECT_EQ(c.unet.depth, 8);
  EXPECT_EQ(c.patchgan.in_channels, 4);
  EXPECT_EQ(c.experiment, Experiment::custom);
  EXPECT_FALSE(c.max_steps.has_value());
}

TEST(Config, InvalidValuesNameTheKey) {
  EXPECT_NE(error_of(R"({"lr": -1})").find("'lr'"), std::string::npos);
  EXPECT_NE(error_of(R"({"beta1": 1.0})").find("'beta1'"), std::string::npos);
  EXPECT_NE(error_of(R"({"load_size": 100})").find("'load_size'"), std::string::npos);
  EXPECT_NE(error_of(R"({"lambda_L1": "ten"})").find("'lambda_L1'"), std::string::npos);
  EXPECT_NE(error_of(R"({"objective": "hinge"})").find("hinge"), std::string::npos);
  EXPECT_NE(error_of("[1, 2]").find("object"), std::string::npos);
  EXPECT_NE(error_of("{not json").find("invalid JSON"), std::string::npos);
}

TEST(Config, TypoGetsSuggestion) {
  const std::string msg = error_of(R"({"lamda_L1": 10})");
  EXPECT_NE(msg.find("'lamda_L1'"), std::string::npos) << msg;
  EXPECT_NE(msg.find("did you mean 'lambda_L1'"), std::string::npos) << msg;
  const std::string far = error_of(R"({"zzzzzzzz": 1})");
  EXPECT_NE(far.find("unknown key"), std::string::npos);
  EXPECT_EQ(far.find("did you mean"), std::string::npos);
}

TEST(Config, Levenshtein) {
  EXPECT_EQ(levenshtein("kitten", "sitting"), 3u);
  EXPECT_EQ(levenshtein("", "abc"), 3u);
  EXPECT_EQ(levenshtein("lamda_L1", "lambda_L1"), 1u);
}

TEST(Config, ExperimentPresetsFixLoadSize) {
  EXPECT_EQ(parse_config_text(R"({"experiment": "whole_slice", "unet_base_filters": 1, "d_base_filters": 1})")
                .train.load_size,
            4096);
  EXPECT_EQ(parse_config_text(R"({"experiment": "patches_1024"})").train.load_size, 1024);
  EXPECT_EQ(parse_config_text(R"({"experiment": "patches_256"})").train.load_size, 256);
  const RunConfig small = parse_config_text(R"({"experiment": "whole_slice", "scale_divisor": 64})");
  EXPECT_EQ(small.train.load_size, 64);
  EXPECT_EQ(small.unet.target_size, 64);
  EXPECT_EQ(small.unet.depth, 6);
  EXPECT_NE(error_of(R"({"experiment": "patches_256", "load_size": 128})").find("fixes load_size"), std::string::npos);
  EXPECT_NO_THROW(parse_config_text(R"({"experiment": "patches_256", "load_size": 256})"));
  EXPECT_NE(error_of(R"({"experiment": "patches_256", "scale_divisor": 3})").find("scale_divisor"), std::string::npos);
}

TEST(Config, ModelKeys) {
  const RunConfig c = parse_config_text(
      R"({"load_size": 32, "unet_depth": 4, "unet_base_filters": 8, "d_layers": 2, "d_base_filters": 4,
          "input_channels": 3, "output_channels": 1, "dropout_p": 0.25, "max_steps": 10, "data_A": "a"})");
  EXPECT_EQ(c.unet.depth, 4);
  EXPECT_EQ(c.unet.base_filters, 8);
  EXPECT_EQ(c.unet.in_channels, 3);
  EXPECT_EQ(c.unet.out_channels, 1);
  EXPECT_EQ(c.unet.dropout_p, 0.25);
  EXPECT_EQ(c.patchgan.in_channels, 4);
  EXPECT_EQ(c.patchgan.n_layers, 2);
  EXPECT_EQ(*c.max_steps, 10);
  EXPECT_EQ(*c.data_A, "a");
  EXPECT_NE(error_of(R"({"load_size": 16, "unet_depth": 5})").find("'unet_depth'"), std::string::npos);
  EXPECT_NE(error_of(R"({"load_size": 16, "d_layers": 5})").find("'d_layers'"), std::string::npos);
}

TEST(Config, JsonRoundTrip) {
  const RunConfig c = parse_config_text(
      R"({"objective": "wgangp", "lr": 2e-5, "beta1": 0.4, "lambda_L1": 10, "load_size": 64, "seed": 12345678901234,
          "critic_steps": 3, "checkpoint_every": 2, "out_dir": "runs/x"})");
  const RunConfig back = parse_config_json(to_json(c));
  EXPECT_EQ(back.train, c.train);
  EXPECT_EQ(back.unet, c.unet);
  EXPECT_EQ(back.patchgan, c.patchgan);
  EXPECT_EQ(back.out_dir, c.out_dir);
  EXPECT_EQ(back.checkpoint_every, 2);
  EXPECT_EQ(back.train.seed, 12345678901234ULL);
}

TEST(Config, FromFile) {
  const auto path = std::filesystem::temp_directory_path() / "xmt_test_config.json";
  std::ofstream(path) << R"({"lambda_L1": 50})";
  EXPECT_EQ(parse_config(path).train.lambda_L1, 50.0);
  EXPECT_THROW(parse_config("/nonexistent/config.json"), IoError);
}

TEST(JsonIo, TrainConfigRoundTrip) {
  TrainConfig t;
  t.objective.kind = GanKind::lsgan;
  t.lr = 1.2345678901234567e-4;
  t.seed = ~0ULL;
  EXPECT_EQ(train_config_from_json(to_json(t)), t);
  UNetConfig g;
  g.depth = 3;
  g.target_size = 32;
  EXPECT_EQ(unet_config_from_json(to_json(g)), g);
  PatchGANConfig d;
  d.n_layers = 1;
  EXPECT_EQ(patchgan_config_from_json(to_json(d)), d);
}
