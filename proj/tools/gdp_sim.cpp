#include <CLI11.hpp>

#include <fstream>
#include <iostream>
#include <sstream>

#include "gdp/config.hpp"
#include "gdp/error.hpp"
#include "gdp/sim/report.hpp"
#include "gdp/sim/scenarios.hpp"

namespace {

constexpr int kOk = 0;
constexpr int kUsage = 1;
constexpr int kSafety = 2;
constexpr int kDiffers = 3;

std::string read_file(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw gdp::Error(gdp::ErrorCode::InvalidConfig, "cannot read " + path);
  std::ostringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

/// A path to a JSON config, or the name of a built-in scenario.
gdp::ScenarioConfig load_config(const std::string& source) {
  for (const auto& name : gdp::sim::builtin_scenario_names())
    if (source == name) return gdp::sim::builtin_scenario(name);
  return gdp::config_from_json(read_file(source));
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Deterministic simulator for the witness/validator protocol"};
  app.require_subcommand(1);

  std::string config_path;
  std::string out_dir;
  std::optional<std::uint64_t> seed;
  std::vector<std::string> overrides;
  auto* run = app.add_subcommand("run", "Run a scenario and write report.json, snapshot.json and the CSV logs");
  run->add_option("--config", config_path, "Config file or built-in scenario name")->required();
  run->add_option("--out", out_dir, "Output directory")->required();
  run->add_option("--seed", seed, "Seed override");
  run->add_option("--set", overrides, "Override as dotted.path=value");

  auto* validate = app.add_subcommand("validate", "Parse and validate a config; print it with defaults filled");
  validate->add_option("--config", config_path, "Config file or built-in scenario name")->required();

  std::string report_a;
  std::string report_b;
  auto* diff = app.add_subcommand("diff", "Compare two report files field by field");
  diff->add_option("a", report_a)->required();
  diff->add_option("b", report_b)->required();

  std::string write_dir;
  auto* scenarios = app.add_subcommand("scenarios", "List built-in scenarios");
  scenarios->add_option("--write", write_dir, "Also write each scenario's config to <dir>/<name>.json");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kUsage;
  }

  try {
    if (*run) {
      auto cfg = load_config(config_path);
      if (seed) cfg.seed = *seed;
      for (const auto& o : overrides) gdp::apply_override(cfg, o);
      gdp::require_valid(cfg);
      const auto result = gdp::sim::run_scenario(cfg, out_dir);
      const auto& r = result.report;
      std::cout << "scenario " << cfg.name << " seed " << cfg.seed << "\n"
                << "submitted " << r["transactions"]["submitted"] << " committed " << r["transactions"]["committed"]
                << " false_commits " << result.false_commits << "\n"
                << "safety " << r["safety"].dump() << "\n"
                << "digest " << result.snapshot["digest"].get<std::string>() << "\n";
      return result.false_commits > 0 ? kSafety : kOk;
    }
    if (*validate) {
      const auto cfg = load_config(config_path);
      gdp::require_valid(cfg);
      std::cout << gdp::config_to_json(cfg) << "\n";
      return kOk;
    }
    if (*diff) {
      const auto a = gdp::sim::Json::parse(read_file(report_a));
      const auto b = gdp::sim::Json::parse(read_file(report_b));
      const auto paths = gdp::sim::diff_reports(a, b);
      for (const auto& p : paths) std::cout << p << "\n";
      return paths.empty() ? kOk : kDiffers;
    }
    if (*scenarios) {
      for (const auto& name : gdp::sim::builtin_scenario_names()) {
        std::cout << name << "\n";
        if (write_dir.empty()) continue;
        std::ofstream os(write_dir + "/" + name + ".json");
        os << gdp::config_to_json(gdp::sim::builtin_scenario(name)) << "\n";
      }
      return kOk;
    }
  } catch (const gdp::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kUsage;
  } catch (const nlohmann::json::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kUsage;
  }
  return kUsage;
}
