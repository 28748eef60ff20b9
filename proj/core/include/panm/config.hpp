#pragma once

#include <string>

#include "panm/engine.hpp"

namespace panm::engine {

// Applies one key=value entry onto a config. Unknown keys or unparseable
// values throw ConfigError naming the key.
void apply_config_entry(RunConfig& c, const std::string& key, const std::string& value);

// Parses key=value lines ('#' starts a comment, blank lines skipped).
RunConfig parse_config_text(const std::string& text);

RunConfig load_config_file(const std::string& path);

// Serializes every field as key=value lines; parse_config_text on the output
// reproduces the config exactly.
std::string serialize_config(const RunConfig& c);

}  // namespace panm::engine
