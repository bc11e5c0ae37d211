#include "xmt/config.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include "xmt/json_io.hpp"

namespace xmt {

std::string to_string(Experiment e) {
  switch (e) {
    case Experiment::whole_slice: return "whole_slice";
    case Experiment::patches_1024: return "patches_1024";
    case Experiment::patches_256: return "patches_256";
    case Experiment::custom: return "custom";
  }
  return "custom";
}

Experiment experiment_from_string(const std::string& name) {
  if (name == "whole_slice") return Experiment::whole_slice;
  if (name == "patches_1024") return Experiment::patches_1024;
  if (name == "patches_256") return Experiment::patches_256;
  if (name == "custom") return Experiment::custom;
  throw ConfigError("unknown experiment '" + name + "' (expected whole_slice, patches_1024, patches_256 or custom)");
}

int preset_load_size(Experiment e) {
  switch (e) {
    case Experiment::whole_slice: return 4096;
    case Experiment::patches_1024: return 1024;
    case Experiment::patches_256: return 256;
    case Experiment::custom: return 0;
  }
  return 0;
}

std::size_t levenshtein(const std::string& a, const std::string& b) {
  std::vector<std::size_t> prev(b.size() + 1), cur(b.size() + 1);
  for (std::size_t j = 0; j <= b.size(); ++j) prev[j] = j;
  for (std::size_t i = 1; i <= a.size(); ++i) {
    cur[0] = i;
    for (std::size_t j = 1; j <= b.size(); ++j) {
      cur[j] = std::min({prev[j] + 1, cur[j - 1] + 1, prev[j - 1] + (a[i - 1] == b[j - 1] ? 0 : 1)});
    }
    std::swap(prev, cur);
  }
  return prev[b.size()];
}

namespace {

const std::vector<std::string> kKeys = {
    "objective",     "gp_weight",    "lr",           "beta1",          "beta2",
    "eps",           "epochs_const", "epochs_decay", "lambda_L1",      "load_size",
    "batch_size",    "seed",         "critic_steps", "dropout_p",      "experiment",
    "scale_divisor", "unet_depth",   "unet_base_filters", "d_layers",  "d_base_filters",
    "input_channels", "output_channels", "max_steps", "checkpoint_every", "data_A",
    "data_B",        "out_dir"};

[[noreturn]] void unknown_key(const std::string& key) {
  std::string best;
  std::size_t best_d = 3;
  for (const auto& k : kKeys) {
    const auto d = levenshtein(key, k);
    if (d < best_d) {
      best_d = d;
      best = k;
    }
  }
  std::string msg = "config: unknown key '" + key + "'";
  if (!best.empty()) msg += " (did you mean '" + best + "'?)";
  throw ConfigError(msg);
}

int log2_floor(int v) {
  int r = 0;
  while ((v >>= 1) != 0) ++r;
  return r;
}

}  // namespace

RunConfig parse_config_json(const nlohmann::json& j) {
  if (!j.is_object()) throw ConfigError("config: top level must be a JSON object");
  for (const auto& [key, value] : j.items()) {
    if (std::find(kKeys.begin(), kKeys.end(), key) == kKeys.end()) unknown_key(key);
  }
  std::string current;
  auto get = [&](const char* key, auto fallback) {
    current = key;
    if (!j.contains(key)) return fallback;
    return j.at(key).get<decltype(fallback)>();
  };
  auto check = [&](const char* key, bool ok, const std::string& what) {
    if (!ok) throw ConfigError("config: key '" + std::string(key) + "': " + what);
  };

  RunConfig c;
  try {
    c.experiment = experiment_from_string(get("experiment", std::string("custom")));
    c.scale_divisor = get("scale_divisor", 1);
    check("scale_divisor", c.scale_divisor >= 1, "must be >= 1");
    int load = 256;
    if (c.experiment != Experiment::custom) {
      load = preset_load_size(c.experiment) / c.scale_divisor;
      check("scale_divisor", load >= 1 && preset_load_size(c.experiment) % c.scale_divisor == 0,
            "must divide the preset load size");
      if (j.contains("load_size")) {
        check("load_size", get("load_size", 0) == load,
              "experiment " + to_string(c.experiment) + " fixes load_size to " + std::to_string(load));
      }
    } else {
      load = get("load_size", 256);
    }
    check("load_size", load >= 2 && (load & (load - 1)) == 0, "must be a power of two >= 2");

    auto& t = c.train;
    t.objective.kind = gan_kind_from_string(get("objective", std::string("vanilla")));
    t.objective.gp_weight = get("gp_weight", 10.0);
    check("gp_weight", t.objective.gp_weight >= 0, "must be >= 0");
    t.lr = get("lr", 2e-4);
    check("lr", t.lr > 0, "must be > 0");
    t.beta1 = get("beta1", 0.5);
    check("beta1", t.beta1 >= 0 && t.beta1 < 1, "must lie in [0, 1)");
    t.beta2 = get("beta2", 0.999);
    check("beta2", t.beta2 >= 0 && t.beta2 < 1, "must lie in [0, 1)");
    t.eps = get("eps", 1e-8);
    check("eps", t.eps > 0, "must be > 0");
    t.epochs_const = get("epochs_const", 100);
    check("epochs_const", t.epochs_const >= 0, "must be >= 0");
    t.epochs_decay = get("epochs_decay", 100);
    check("epochs_decay", t.epochs_decay >= 0 && t.total_epochs() >= 1, "must be >= 0 with at least one epoch");
    t.lambda_L1 = get("lambda_L1", 100.0);
    check("lambda_L1", t.lambda_L1 >= 0, "must be >= 0");
    t.load_size = load;
    t.batch_size = get("batch_size", 1);
    check("batch_size", t.batch_size >= 1, "must be >= 1");
    t.seed = get("seed", std::uint64_t{0});
    t.critic_steps = get("critic_steps", 1);
    check("critic_steps", t.critic_steps >= 1, "must be >= 1");
    t.dropout_p = get("dropout_p", 0.5);
    check("dropout_p", t.dropout_p >= 0 && t.dropout_p < 1, "must lie in [0, 1)");

    auto& g = c.unet;
    g.in_channels = get("input_channels", 1);
    check("input_channels", g.in_channels == 1 || g.in_channels == 3, "must be 1 or 3");
    g.out_channels = get("output_channels", 3);
    check("output_channels", g.out_channels == 1 || g.out_channels == 3, "must be 1 or 3");
    g.depth = get("unet_depth", std::min(8, log2_floor(load)));
    check("unet_depth", g.depth >= 2 && (load % (1 << std::min(g.depth, 30))) == 0,
          "must be >= 2 with 2^depth dividing load_size");
    g.base_filters = get("unet_base_filters", 64);
    check("unet_base_filters", g.base_filters >= 1, "must be >= 1");
    g.dropout_p = t.dropout_p;
    g.target_size = load;

    auto& d = c.patchgan;
    d.in_channels = g.in_channels + g.out_channels;
    d.n_layers = get("d_layers", 3);
    check("d_layers", d.n_layers >= 1, "must be >= 1");
    d.base_filters = get("d_base_filters", 64);
    check("d_base_filters", d.base_filters >= 1, "must be >= 1");
    check("d_layers", patchgan_output_size(d, load) >= 1, "too deep for load_size " + std::to_string(load));

    if (j.contains("max_steps")) {
      c.max_steps = get("max_steps", std::int64_t{0});
      check("max_steps", *c.max_steps >= 1, "must be >= 1");
    }
    c.checkpoint_every = get("checkpoint_every", 0);
    check("checkpoint_every", c.checkpoint_every >= 0, "must be >= 0");
    if (j.contains("data_A")) c.data_A = get("data_A", std::string());
    if (j.contains("data_B")) c.data_B = get("data_B", std::string());
    if (j.contains("out_dir")) c.out_dir = get("out_dir", std::string());
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("config: key '" + current + "': wrong type (" + e.what() + ")");
  }
  c.train.validate();
  c.unet.validate();
  c.patchgan.validate();
  return c;
}

RunConfig parse_config_text(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("config: invalid JSON: ") + e.what());
  }
  return parse_config_json(j);
}

RunConfig parse_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config_text(ss.str());
}

nlohmann::json to_json(const RunConfig& c) {
  nlohmann::json j = to_json(c.train);
  j.erase("load_size");
  j["experiment"] = to_string(c.experiment);
  j["scale_divisor"] = c.scale_divisor;
  if (c.experiment == Experiment::custom) j["load_size"] = c.train.load_size;
  j["unet_depth"] = c.unet.depth;
  j["unet_base_filters"] = c.unet.base_filters;
  j["d_layers"] = c.patchgan.n_layers;
  j["d_base_filters"] = c.patchgan.base_filters;
  j["input_channels"] = c.unet.in_channels;
  j["output_channels"] = c.unet.out_channels;
  if (c.max_steps) j["max_steps"] = *c.max_steps;
  j["checkpoint_every"] = c.checkpoint_every;
  if (c.data_A) j["data_A"] = *c.data_A;
  if (c.data_B) j["data_B"] = *c.data_B;
  if (c.out_dir) j["out_dir"] = *c.out_dir;
  return j;
}

}  // namespace xmt
