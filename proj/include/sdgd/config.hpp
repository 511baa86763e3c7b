#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "sdgd/trainer.hpp"

namespace sdgd {

/// Environment variable that overrides the configured output directory.
inline constexpr const char* kOutputDirEnv = "SDGD_OUTPUT_DIR";

/// Strict parse: unknown keys and type mismatches raise ConfigError naming
/// the dotted key path. Missing keys keep their defaults.
TrainConfig config_from_json(const nlohmann::json& doc, const std::vector<std::string>& overrides = {});

/// Reads `path` (may be empty for all defaults) and applies "key=value"
/// overrides with dotted key paths. Values are read as JSON when they parse,
/// otherwise as strings.
TrainConfig parse_config(const std::filesystem::path& path, const std::vector<std::string>& overrides = {});

nlohmann::json config_to_json(const TrainConfig& config);

/// Every recognised dotted key, in documentation order.
std::vector<std::string> config_keys();

}  // namespace sdgd
