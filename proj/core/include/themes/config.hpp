#pragma once

#include <functional>
#include <istream>
#include <string>
#include <vector>

#include "themes/pipeline.hpp"

namespace themes {

// One entry of the flat key=value configuration surface.
struct ConfigKey {
  std::string name;
  std::string help;
  std::function<std::string(const ThemesConfig&)> get;
  std::function<void(ThemesConfig&, const std::string&)> set;  // throws ConfigurationError
};

const std::vector<ConfigKey>& config_keys();

const ConfigKey* find_config_key(const std::string& name);

void set_config_value(ThemesConfig& config, const std::string& key, const std::string& value);

// Lines "key = value"; '#' starts a comment. Keys not present keep their
// current value in `base`.
ThemesConfig parse_config(std::istream& in, ThemesConfig base = {});
ThemesConfig load_config(const std::string& path, ThemesConfig base = {});

// Every key with its value, one per line; parses back to the same config.
std::string format_config(const ThemesConfig& config, bool with_help = false);

// Shortest decimal text that parses back to the same double.
std::string format_double(double v);

}  // namespace themes
