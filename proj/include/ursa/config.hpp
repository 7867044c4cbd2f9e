#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "ursa/training.hpp"

namespace ursa {

// Flat key=value configuration. Keys match the long CLI flag names; '#'
// starts a comment. Unknown keys and malformed values raise ConfigError.
struct ConfigKey {
  std::string_view name;
  std::string_view help;
};

const std::vector<ConfigKey>& config_keys();

void apply_config_value(TrainConfig& config, std::string_view key, std::string_view value);
TrainConfig parse_config_text(std::string_view text, TrainConfig base = {});
TrainConfig load_config_file(const std::filesystem::path& path, TrainConfig base = {});

// Every key with its current value; parse_config_text inverts it exactly.
std::string to_config_text(const TrainConfig& config);
std::string config_value(const TrainConfig& config, std::string_view key);

// "32,64,128" → {32, 64, 128}. Rejects empty lists, non-integers and
// duplicates.
std::vector<std::size_t> parse_count_list(std::string_view text, std::string_view what);

std::string_view to_string(OptimizerKind kind);
std::string_view to_string(Precision precision);

}  // namespace ursa
