#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "xmt/models.hpp"
#include "xmt/rng.hpp"
#include "xmt/training.hpp"

namespace xmt {

/// Search grid. Fields not searched are taken from `base`.
struct SearchSpace {
  std::vector<GanKind> objectives{GanKind::vanilla, GanKind::lsgan, GanKind::wgangp};
  std::vector<double> lrs{2e-4, 2e-5};
  std::vector<double> beta1s{0.4, 0.5, 0.8};
  std::vector<double> lambdas{10.0, 50.0, 100.0};
  std::vector<int> epochs_const{100};
  TrainConfig base;

  std::size_t grid_size() const;
  void validate() const;
};

nlohmann::json to_json(const SearchSpace& s);
/// Accepts any subset of the axes plus an optional "base" object of TrainConfig fields.
SearchSpace search_space_from_json(const nlohmann::json& j);

/// One uniform draw per axis, in the order objective, lr, beta1, lambda_L1, epochs_const.
TrainConfig sample_config(const SearchSpace& space, RngStream& rng);

/// Same searched axes (seed and other fields ignored).
bool same_grid_point(const TrainConfig& a, const TrainConfig& b);

struct TrialResult {
  int index = 0;
  TrainConfig config;
  double endpoint = 0.0;  // validation L1
  std::optional<double> proxy_fid;
  double wall_seconds = 0.0;
  std::string checkpoint;  // relative to the search output directory
  bool failed = false;
  std::string failure;
};

struct SearchOptions {
  int budget = 8;
  std::uint64_t master_seed = 0;
  std::int64_t steps_per_trial = 30;
  bool proxy_fid = false;
  UNetConfig generator;
  PatchGANConfig discriminator;
  std::optional<std::filesystem::path> out_dir;
};

struct Leaderboard {
  std::vector<TrialResult> ranked;  // ascending by (endpoint, lambda_L1, index)
  std::vector<TrialResult> failed;
};

/// Trains one configuration for at most `steps` steps and scores it.
TrialResult run_trial(int index, const TrainConfig& cfg, std::span<const SamplePair> train,
                      std::span<const SamplePair> val, const SearchOptions& options);

/// Samples min(budget, grid size) distinct configurations and ranks them.
/// Throws when every trial fails.
Leaderboard run_search(const SearchSpace& space, std::span<const SamplePair> train, std::span<const SamplePair> val,
                       const SearchOptions& options);

/// Ascending by validation L1, ties broken by smaller lambda_L1, then earlier index.
void rank_trials(std::vector<TrialResult>& trials);

/// Top-k rows plus the failed trials. Wall times are left out so the
/// document is reproducible.
nlohmann::json leaderboard_report(const Leaderboard& board, int k = 2);
Leaderboard leaderboard_from_report(const nlohmann::json& report);
std::string leaderboard_table(const Leaderboard& board, int k = 2);

}  // namespace xmt
