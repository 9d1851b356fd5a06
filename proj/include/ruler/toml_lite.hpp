#pragma once

#include <filesystem>
#include <string>

#include "json.hpp"

namespace ruler::cfg {

// Minimal TOML subset, parsed into the same JSON tree the JSON config path
// produces: [table] and [[array-of-tables]] headers, dotted keys, strings
// with basic escapes, integers, floats, booleans, and (possibly multi-line)
// arrays. Comments start with '#'. Anything else is a ConfigError naming the
// line.
nlohmann::json parse_toml_lite(const std::string& text);
nlohmann::json load_config_file(const std::filesystem::path& path);  // by extension

}  // namespace ruler::cfg
