#pragma once

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "recur/simgen.hpp"

namespace recur {

struct ScenarioLibraryEntry {
    std::string name;  // setup/MS type/effect/heterogeneity
    ScenarioConfig config;
};

const std::vector<ScenarioLibraryEntry>& scenario_library();
std::optional<ScenarioConfig> find_scenario(const std::string& name);

// Flat `key = value` document; `#` starts a comment. A `scenario` key selects a library
// entry as the starting point, later keys override its fields.
ScenarioConfig parse_config(std::istream& in);
ScenarioConfig parse_config_file(const std::string& path);
// Applies a single key/value pair; throws Error(BAD_INPUT) for unknown keys or bad values.
void set_config_value(ScenarioConfig& cfg, const std::string& key, const std::string& value);
// Every scalar field as `key = value`, in a fixed order, parseable by parse_config.
std::string echo_config(const ScenarioConfig& cfg);

}  // namespace recur
