#pragma once

#include <string>
#include <vector>

#include "gdp/config.hpp"

namespace gdp::sim {

const std::vector<std::string>& builtin_scenario_names();
/// Throws Error(InvalidConfig) for an unknown name.
ScenarioConfig builtin_scenario(const std::string& name);

}  // namespace gdp::sim
