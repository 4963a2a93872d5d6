#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "gdp/config.hpp"
#include "gdp/sim/report.hpp"
#include "gdp/sim/scenarios.hpp"

namespace fs = std::filesystem;
using namespace gdp;

namespace {

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

// Set GDP_UPDATE_GOLDEN=1 to rewrite the expected reports.
TEST_SUITE("golden") {
  TEST_CASE("builtin scenario reports match the golden files") {
    const bool update = std::getenv("GDP_UPDATE_GOLDEN") != nullptr;
    const fs::path dir = GDP_GOLDEN_DIR;
    for (const auto& name : sim::builtin_scenario_names()) {
      CAPTURE(name);
      const auto report = sim::run_scenario(sim::builtin_scenario(name)).report;
      const auto path = dir / (name + ".json");
      if (update) {
        fs::create_directories(dir);
        std::ofstream(path, std::ios::binary) << sim::json_text(report);
        continue;
      }
      REQUIRE(fs::exists(path));
      const auto expected = sim::Json::parse(slurp(path));
      const auto changed = sim::diff_reports(expected, report);
      for (const auto& c : changed) MESSAGE("changed: " << c);
      CHECK(changed.empty());
      CHECK(sim::json_text(report) == slurp(path));
    }
  }

  TEST_CASE("shipped scenario files match the builtins") {
    const fs::path dir = GDP_SCENARIO_DIR;
    for (const auto& name : sim::builtin_scenario_names()) {
      CAPTURE(name);
      const auto path = dir / (name + ".json");
      REQUIRE(fs::exists(path));
      CHECK(config_to_json(config_from_json(slurp(path))) == config_to_json(sim::builtin_scenario(name)));
    }
  }
}
