#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>

#include "json.hpp"
#include "xmt/models.hpp"
#include "xmt/training.hpp"

namespace xmt {

/// whole_slice, patches_1024 and patches_256 fix load_size to 4096, 1024 and
/// 256, divided by scale_divisor for desk-sized runs.
enum class Experiment { whole_slice, patches_1024, patches_256, custom };

std::string to_string(Experiment e);
Experiment experiment_from_string(const std::string& name);
int preset_load_size(Experiment e);

struct RunConfig {
  TrainConfig train;
  UNetConfig unet;
  PatchGANConfig patchgan;
  Experiment experiment = Experiment::custom;
  int scale_divisor = 1;
  std::optional<std::int64_t> max_steps;
  int checkpoint_every = 0;
  std::optional<std::string> data_A;
  std::optional<std::string> data_B;
  std::optional<std::string> out_dir;
};

/// Flat JSON object; every key is optional and unknown keys are rejected.
/// Errors name the offending key.
RunConfig parse_config_json(const nlohmann::json& j);
RunConfig parse_config_text(const std::string& text);
RunConfig parse_config(const std::filesystem::path& path);

nlohmann::json to_json(const RunConfig& c);

/// Edit distance, used for "did you mean" hints.
std::size_t levenshtein(const std::string& a, const std::string& b);

}  // namespace xmt
