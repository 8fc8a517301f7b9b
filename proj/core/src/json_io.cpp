#include "setnet/json_io.hpp"

#include <openssl/sha.h>

#include <cstdio>
#include <stdexcept>

namespace setnet {

namespace {

std::string_view storage_name(HiddenStorage s) {
  switch (s) {
    case HiddenStorage::Sparse: return "sparse";
    case HiddenStorage::Dense: return "dense";
    case HiddenStorage::Auto: break;
  }
  return "auto";
}

HiddenStorage parse_storage(const std::string& s) {
  if (s == "auto") return HiddenStorage::Auto;
  if (s == "sparse") return HiddenStorage::Sparse;
  if (s == "dense") return HiddenStorage::Dense;
  throw std::invalid_argument("unknown hidden storage '" + s + "'");
}

}  // namespace

nlohmann::json to_json(const NetworkConfig& cfg) {
  return {{"layer_dims", cfg.layer_dims},
          {"activation", std::string(to_string(cfg.activation))},
          {"sparsity", cfg.sparsity},
          {"dropout_rate", cfg.dropout_rate},
          {"seed", cfg.seed},
          {"storage", std::string(storage_name(cfg.storage))}};
}

NetworkConfig network_config_from_json(const nlohmann::json& j) {
  NetworkConfig cfg;
  cfg.layer_dims = j.value("layer_dims", cfg.layer_dims);
  cfg.activation = parse_activation(j.value("activation", std::string("relu")));
  cfg.sparsity = j.value("sparsity", cfg.sparsity);
  cfg.dropout_rate = j.value("dropout_rate", cfg.dropout_rate);
  cfg.seed = j.value("seed", cfg.seed);
  cfg.storage = parse_storage(j.value("storage", std::string("auto")));
  return cfg;
}

nlohmann::json to_json(const TrainConfig& cfg) {
  return {{"learning_rate", cfg.learning_rate},
          {"momentum", cfg.momentum},
          {"zeta", cfg.zeta},
          {"batch_size", cfg.batch_size},
          {"dropout_rate", cfg.dropout_rate},
          {"epochs", cfg.epochs},
          {"seed", cfg.seed},
          {"evolution_enabled", cfg.evolution_enabled}};
}

TrainConfig train_config_from_json(const nlohmann::json& j) {
  TrainConfig cfg;
  cfg.learning_rate = j.value("learning_rate", cfg.learning_rate);
  cfg.momentum = j.value("momentum", cfg.momentum);
  cfg.zeta = j.value("zeta", cfg.zeta);
  cfg.batch_size = j.value("batch_size", cfg.batch_size);
  cfg.dropout_rate = j.value("dropout_rate", cfg.dropout_rate);
  cfg.epochs = j.value("epochs", cfg.epochs);
  cfg.seed = j.value("seed", cfg.seed);
  cfg.evolution_enabled = j.value("evolution_enabled", cfg.evolution_enabled);
  return cfg;
}

std::string git_blob_hash(const std::string& content) {
  const std::string object = "blob " + std::to_string(content.size()) + '\0' + content;
  unsigned char digest[SHA_DIGEST_LENGTH];
  SHA1(reinterpret_cast<const unsigned char*>(object.data()), object.size(), digest);
  std::string hex(2 * SHA_DIGEST_LENGTH, '0');
  for (int i = 0; i < SHA_DIGEST_LENGTH; ++i) {
    std::snprintf(hex.data() + 2 * i, 3, "%02x", digest[i]);
  }
  return hex;
}

}  // namespace setnet
