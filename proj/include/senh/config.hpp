#pragma once

#include <string>
#include <utility>
#include <vector>

#include "senh/network.hpp"
#include "senh/trainer.hpp"

namespace senh {

// Merged run configuration: model, training, data paths. One `seed` key
// drives both model initialization and data ordering.
struct CliConfig {
  ModelConfig model;
  TrainConfig train;
  std::string manifest;
};

// Parses flat `key = value` lines ('#' comments, optional double quotes,
// true/false booleans, depths as five comma-separated ints). Unknown and
// duplicate keys are errors naming the line; `origin` labels the messages.
CliConfig parse_config_text(const std::string& text, const std::string& origin);

CliConfig load_config(const std::string& path);

// Applies one key=value pair on top of an existing config (flag overrides).
void apply_override(CliConfig& cfg, const std::string& key, const std::string& value);

// Every config key with its default and a one-line description, in file
// order; used for --help and documentation.
struct ConfigKeyDoc {
  std::string key, default_value, help;
};
std::vector<ConfigKeyDoc> config_key_docs();

}  // namespace senh
