#pragma once

#include "json.hpp"
#include "xmt/models.hpp"
#include "xmt/objectives.hpp"
#include "xmt/training.hpp"

namespace xmt {

nlohmann::json to_json(const UNetConfig& c);
nlohmann::json to_json(const PatchGANConfig& c);
nlohmann::json to_json(const TrainConfig& c);

UNetConfig unet_config_from_json(const nlohmann::json& j);
PatchGANConfig patchgan_config_from_json(const nlohmann::json& j);
TrainConfig train_config_from_json(const nlohmann::json& j);

}  // namespace xmt
