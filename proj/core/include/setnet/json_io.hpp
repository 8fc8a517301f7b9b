#pragma once

#include <nlohmann/json.hpp>

#include "setnet/network.hpp"
#include "setnet/trainer.hpp"

namespace setnet {

nlohmann::json to_json(const NetworkConfig& cfg);
NetworkConfig network_config_from_json(const nlohmann::json& j);

nlohmann::json to_json(const TrainConfig& cfg);
TrainConfig train_config_from_json(const nlohmann::json& j);

/// git-style object id: SHA-1 of "blob <len>\0" + content, lower-case hex.
std::string git_blob_hash(const std::string& content);

}  // namespace setnet
