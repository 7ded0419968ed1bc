#pragma once

// Experiment configuration: a small TOML-style text format (sections, quoted
// strings, numbers, booleans, numeric arrays, # comments) flattened into
// dotted keys, with command-line overrides and canonical snapshot emission.

#include <map>
#include <string>
#include <variant>
#include <vector>

#include "tgeval/runner.hpp"

namespace tgeval {

using ConfigValue = std::variant<std::string, double, bool,
                                 std::vector<double>>;
using ConfigMap = std::map<std::string, ConfigValue>;

// Parses config text into a flat dotted-key map. Bare unquoted words parse
// as strings, so "style.placement = interleaved" works with or without
// quotes. Throws ConfigError with a line number on syntax errors and on
// duplicate keys.
ConfigMap parse_config_text(const std::string& text);

// Reads and parses a config file. Throws ConfigError when unreadable.
ConfigMap load_config_file(const std::string& path);

// Applies one "dotted.key=value" assignment on top of a parsed map; the
// value grammar matches the file format. Throws ConfigError on a malformed
// assignment.
void apply_override(ConfigMap& map, const std::string& assignment);

// Renders the map back to config text in a canonical section order with
// normalized quoting; parse_config_text(to_config_text(m)) == m.
std::string to_config_text(const ConfigMap& map);

// Every key the experiment config understands, for error listings and docs.
const std::vector<std::string>& known_config_keys();

// Validates the map (unknown keys are a ConfigError naming the valid keys,
// as are type or enum-value mismatches) and builds the runnable config.
ExperimentConfig build_experiment_config(const ConfigMap& map);

// Inverse of build_experiment_config, used for the config.toml snapshot an
// experiment writes next to its results.
ConfigMap config_map_from_experiment(const ExperimentConfig& cfg);

}  // namespace tgeval
