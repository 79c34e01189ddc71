#pragma once

// JSON forms of network weights and training configuration.

#include <string>

#include <nlohmann/json.hpp>

#include "hidvfs/rlcore.hpp"

namespace hidvfs {

nlohmann::json to_json(const rl::Mlp& net);
rl::Mlp mlp_from_json(const nlohmann::json& j);

nlohmann::json to_json(const rl::TrainConfig& cfg);
// Starts from `base` and applies the keys present in j. Unknown keys and type mismatches
// throw hidvfs::ConfigError naming `path`.<key>.
rl::TrainConfig train_config_from_json(const nlohmann::json& j, const rl::TrainConfig& base,
                                       const std::string& path);

// Typed field readers shared by the config parsers; errors name path.key.
double json_number(const nlohmann::json& j, const std::string& path);
int json_int(const nlohmann::json& j, const std::string& path);
bool json_bool(const nlohmann::json& j, const std::string& path);
std::string json_string(const nlohmann::json& j, const std::string& path);

}  // namespace hidvfs
