#include "xmt/hpo.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <iomanip>
#include <sstream>

#include "xmt/image.hpp"
#include "xmt/json_io.hpp"
#include "xmt/metrics.hpp"

namespace xmt {

std::size_t SearchSpace::grid_size() const {
  return objectives.size() * lrs.size() * beta1s.size() * lambdas.size() * epochs_const.size();
}

void SearchSpace::validate() const {
  if (objectives.empty() || lrs.empty() || beta1s.empty() || lambdas.empty() || epochs_const.empty()) {
    throw ConfigError("search space: every axis needs at least one value");
  }
  base.validate();
  for (auto lr : lrs) {
    if (!(lr > 0)) throw ConfigError("search space: lr values must be > 0");
  }
  for (auto b : beta1s) {
    if (!(b >= 0 && b < 1)) throw ConfigError("search space: beta1 values must lie in [0, 1)");
  }
  for (auto l : lambdas) {
    if (!(l >= 0)) throw ConfigError("search space: lambda_L1 values must be >= 0");
  }
  for (auto e : epochs_const) {
    if (e < 0 || e + base.epochs_decay < 1) throw ConfigError("search space: invalid epochs_const value");
  }
}

nlohmann::json to_json(const SearchSpace& s) {
  nlohmann::json objectives = nlohmann::json::array();
  for (auto k : s.objectives) objectives.push_back(to_string(k));
  return {{"objective", objectives}, {"lr", s.lrs},           {"beta1", s.beta1s},
          {"lambda_L1", s.lambdas},  {"epochs_const", s.epochs_const}, {"base", to_json(s.base)}};
}

SearchSpace search_space_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw ConfigError("search space must be a JSON object");
  SearchSpace s;
  try {
    for (const auto& [key, value] : j.items()) {
      if (key == "objective") {
        s.objectives.clear();
        for (const auto& v : value) s.objectives.push_back(gan_kind_from_string(v.get<std::string>()));
      } else if (key == "lr") {
        s.lrs = value.get<std::vector<double>>();
      } else if (key == "beta1") {
        s.beta1s = value.get<std::vector<double>>();
      } else if (key == "lambda_L1") {
        s.lambdas = value.get<std::vector<double>>();
      } else if (key == "epochs_const") {
        s.epochs_const = value.get<std::vector<int>>();
      } else if (key == "base") {
        nlohmann::json merged = to_json(s.base);
        for (const auto& [k, v] : value.items()) {
          if (!merged.contains(k)) throw ConfigError("search space: unknown base key '" + k + "'");
          merged[k] = v;
        }
        s.base = train_config_from_json(merged);
      } else {
        throw ConfigError("search space: unknown key '" + key + "'");
      }
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("search space: ") + e.what());
  }
  s.validate();
  return s;
}

TrainConfig sample_config(const SearchSpace& space, RngStream& rng) {
  space.validate();
  TrainConfig c = space.base;
  c.objective.kind = space.objectives[rng.below(space.objectives.size())];
  c.lr = space.lrs[rng.below(space.lrs.size())];
  c.beta1 = space.beta1s[rng.below(space.beta1s.size())];
  c.lambda_L1 = space.lambdas[rng.below(space.lambdas.size())];
  c.epochs_const = space.epochs_const[rng.below(space.epochs_const.size())];
  return c;
}

bool same_grid_point(const TrainConfig& a, const TrainConfig& b) {
  return a.objective.kind == b.objective.kind && a.lr == b.lr && a.beta1 == b.beta1 && a.lambda_L1 == b.lambda_L1 &&
         a.epochs_const == b.epochs_const;
}

namespace {

constexpr std::uint64_t kSamplerStream = 0x53414D50ULL;
constexpr std::uint64_t kTrialStream = 0x545249414CULL;

std::vector<Raster> to_rasters(std::span<const Tensor> images) {
  std::vector<Raster> out;
  for (const auto& t : images) {
    for (std::int64_t n = 0; n < t.dim(0); ++n) out.push_back(tensor_to_raster(t, n));
  }
  return out;
}

}  // namespace

TrialResult run_trial(int index, const TrainConfig& cfg, std::span<const SamplePair> train,
                      std::span<const SamplePair> val, const SearchOptions& options) {
  TrialResult r;
  r.index = index;
  r.config = cfg;
  const auto start = std::chrono::steady_clock::now();
  try {
    FitOptions fo;
    fo.max_steps = options.steps_per_trial;
    if (options.out_dir) {
      std::ostringstream name;
      name << "trial_" << std::setw(3) << std::setfill('0') << index;
      fo.out_dir = *options.out_dir / name.str();
      r.checkpoint = name.str() + "/checkpoint_final.xmt";
    }
    const FitResult fit_result = fit(train, cfg, options.generator, options.discriminator, fo);
    const UNet& g = fit_result.checkpoint.generator;
    r.endpoint = evaluate_l1(g, val);
    if (!std::isfinite(r.endpoint)) throw NonFiniteError("validation L1 is not finite");
    if (options.proxy_fid) {
      std::vector<Tensor> fakes, reals;
      for (const auto& s : val) {
        fakes.push_back(translate(g, s.x));
        reals.push_back(s.y);
      }
      const auto fake_r = to_rasters(fakes), real_r = to_rasters(reals);
      r.proxy_fid = fid(fake_r, real_r, FeatureExtractor::create());
    }
  } catch (const Error& e) {
    r.failed = true;
    r.failure = e.what();
  }
  r.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return r;
}

Leaderboard run_search(const SearchSpace& space, std::span<const SamplePair> train, std::span<const SamplePair> val,
                       const SearchOptions& options) {
  space.validate();
  if (options.budget < 1) throw ConfigError("search budget must be >= 1");
  if (train.empty() || val.empty()) throw ConfigError("search needs non-empty train and validation sets");
  const std::size_t n = std::min<std::size_t>(static_cast<std::size_t>(options.budget), space.grid_size());

  RngStream sampler = RngStream(options.master_seed).derive(kSamplerStream);
  std::vector<TrainConfig> configs;
  for (std::size_t attempts = 0; configs.size() < n; ++attempts) {
    if (attempts > 1000000) throw Error("search: could not draw enough distinct configurations");
    TrainConfig c = sample_config(space, sampler);
    const bool seen = std::any_of(configs.begin(), configs.end(),
                                  [&](const TrainConfig& o) { return same_grid_point(o, c); });
    if (seen) continue;
    c.seed = RngStream(options.master_seed).derive(kTrialStream + configs.size()).next_u64();
    configs.push_back(c);
  }

  Leaderboard board;
  for (std::size_t i = 0; i < configs.size(); ++i) {
    TrialResult r = run_trial(static_cast<int>(i), configs[i], train, val, options);
    (r.failed ? board.failed : board.ranked).push_back(std::move(r));
  }
  if (board.ranked.empty()) {
    throw Error("search: all " + std::to_string(configs.size()) + " trials failed; first failure: " +
                board.failed.front().failure);
  }
  rank_trials(board.ranked);
  return board;
}

void rank_trials(std::vector<TrialResult>& trials) {
  std::sort(trials.begin(), trials.end(), [](const TrialResult& a, const TrialResult& b) {
    if (a.endpoint != b.endpoint) return a.endpoint < b.endpoint;
    if (a.config.lambda_L1 != b.config.lambda_L1) return a.config.lambda_L1 < b.config.lambda_L1;
    return a.index < b.index;
  });
}

namespace {

nlohmann::json trial_json(const TrialResult& r) {
  nlohmann::json j{{"trial", r.index}, {"config", to_json(r.config)}, {"checkpoint", r.checkpoint}};
  if (r.failed) {
    j["failure"] = r.failure;
  } else {
    j["endpoint_val_l1"] = r.endpoint;
    j["proxy_fid"] = r.proxy_fid ? nlohmann::json(*r.proxy_fid) : nlohmann::json(nullptr);
  }
  return j;
}

TrialResult trial_from_json(const nlohmann::json& j, bool failed) {
  TrialResult r;
  r.index = j.at("trial").get<int>();
  r.config = train_config_from_json(j.at("config"));
  r.checkpoint = j.at("checkpoint").get<std::string>();
  r.failed = failed;
  if (failed) {
    r.failure = j.at("failure").get<std::string>();
  } else {
    r.endpoint = j.at("endpoint_val_l1").get<double>();
    if (!j.at("proxy_fid").is_null()) r.proxy_fid = j.at("proxy_fid").get<double>();
  }
  return r;
}

}  // namespace

nlohmann::json leaderboard_report(const Leaderboard& board, int k) {
  if (k < 1) throw ConfigError("leaderboard: k must be >= 1");
  nlohmann::json rows = nlohmann::json::array();
  for (std::size_t i = 0; i < board.ranked.size() && i < static_cast<std::size_t>(k); ++i) {
    nlohmann::json row = trial_json(board.ranked[i]);
    row["rank"] = i + 1;
    rows.push_back(row);
  }
  nlohmann::json failed = nlohmann::json::array();
  for (const auto& r : board.failed) failed.push_back(trial_json(r));
  return {{"endpoint", "validation L1 (noise off)"},
          {"top_k", k},
          {"n_trials", board.ranked.size() + board.failed.size()},
          {"best_models", rows},
          {"failed", failed}};
}

Leaderboard leaderboard_from_report(const nlohmann::json& report) {
  try {
    Leaderboard board;
    for (const auto& row : report.at("best_models")) board.ranked.push_back(trial_from_json(row, false));
    for (const auto& row : report.at("failed")) board.failed.push_back(trial_from_json(row, true));
    return board;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("leaderboard report: ") + e.what());
  }
}

std::string leaderboard_table(const Leaderboard& board, int k) {
  std::ostringstream os;
  os << "rank  trial  objective  lr       beta1  lambda_L1  epochs  val_L1\n";
  for (std::size_t i = 0; i < board.ranked.size() && i < static_cast<std::size_t>(k); ++i) {
    const auto& r = board.ranked[i];
    os << std::left << std::setw(6) << i + 1 << std::setw(7) << r.index << std::setw(11)
       << to_string(r.config.objective.kind) << std::setw(9) << r.config.lr << std::setw(7) << r.config.beta1
       << std::setw(11) << r.config.lambda_L1 << std::setw(8) << r.config.epochs_const << std::setprecision(6)
       << r.endpoint << '\n';
  }
  for (const auto& r : board.failed) os << "failed trial " << r.index << ": " << r.failure << '\n';
  return os.str();
}

}  // namespace xmt
