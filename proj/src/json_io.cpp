#include "xmt/json_io.hpp"

namespace xmt {

nlohmann::json to_json(const UNetConfig& c) {
  return {{"in_channels", c.in_channels}, {"out_channels", c.out_channels}, {"base_filters", c.base_filters},
          {"depth", c.depth},             {"dropout_p", c.dropout_p},       {"target_size", c.target_size}};
}

nlohmann::json to_json(const PatchGANConfig& c) {
  return {{"in_channels", c.in_channels}, {"base_filters", c.base_filters}, {"n_layers", c.n_layers}};
}

nlohmann::json to_json(const TrainConfig& c) {
  return {{"objective", to_string(c.objective.kind)},
          {"gp_weight", c.objective.gp_weight},
          {"lr", c.lr},
          {"beta1", c.beta1},
          {"beta2", c.beta2},
          {"eps", c.eps},
          {"epochs_const", c.epochs_const},
          {"epochs_decay", c.epochs_decay},
          {"lambda_L1", c.lambda_L1},
          {"load_size", c.load_size},
          {"batch_size", c.batch_size},
          {"seed", c.seed},
          {"critic_steps", c.critic_steps},
          {"dropout_p", c.dropout_p}};
}

UNetConfig unet_config_from_json(const nlohmann::json& j) {
  UNetConfig c;
  c.in_channels = j.at("in_channels").get<int>();
  c.out_channels = j.at("out_channels").get<int>();
  c.base_filters = j.at("base_filters").get<int>();
  c.depth = j.at("depth").get<int>();
  c.dropout_p = j.at("dropout_p").get<double>();
  c.target_size = j.at("target_size").get<int>();
  return c;
}

PatchGANConfig patchgan_config_from_json(const nlohmann::json& j) {
  PatchGANConfig c;
  c.in_channels = j.at("in_channels").get<int>();
  c.base_filters = j.at("base_filters").get<int>();
  c.n_layers = j.at("n_layers").get<int>();
  return c;
}

TrainConfig train_config_from_json(const nlohmann::json& j) {
  TrainConfig c;
  c.objective.kind = gan_kind_from_string(j.at("objective").get<std::string>());
  c.objective.gp_weight = j.at("gp_weight").get<double>();
  c.lr = j.at("lr").get<double>();
  c.beta1 = j.at("beta1").get<double>();
  c.beta2 = j.at("beta2").get<double>();
  c.eps = j.at("eps").get<double>();
  c.epochs_const = j.at("epochs_const").get<int>();
  c.epochs_decay = j.at("epochs_decay").get<int>();
  c.lambda_L1 = j.at("lambda_L1").get<double>();
  c.load_size = j.at("load_size").get<int>();
  c.batch_size = j.at("batch_size").get<int>();
  c.seed = j.at("seed").get<std::uint64_t>();
  c.critic_steps = j.at("critic_steps").get<int>();
  c.dropout_p = j.at("dropout_p").get<double>();
  return c;
}

}  // namespace xmt
