#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <algorithm>
#include <optional>
#include <string>
#include <vector>

#include "gdp/config.hpp"
#include "gdp/error.hpp"
#include "gdp/incentives.hpp"
#include "gdp/primitives.hpp"
#include "gdp/sim/report.hpp"
#include "gdp/sim/scenarios.hpp"
#include "gdp/sim/world.hpp"
#include "gdp/transmission.hpp"

namespace py = pybind11;
using namespace gdp;

namespace {

// A builtin name or JSON text, then a seed and dotted overrides on top.
ScenarioConfig resolve(const std::string& config, std::optional<std::uint64_t> seed,
                       const std::vector<std::string>& overrides) {
  const auto& names = sim::builtin_scenario_names();
  ScenarioConfig cfg = std::find(names.begin(), names.end(), config) != names.end() ? sim::builtin_scenario(config)
                                                                                      : config_from_json(config);
  for (const auto& o : overrides) apply_override(cfg, o);
  if (seed) cfg.seed = *seed;
  require_valid(cfg);
  return cfg;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Core of the gdp simulator";

  static py::exception<Error> error(m, "GdpError");
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const Error& e) {
      PyErr_SetString(error.ptr(), e.what());
    }
  });

  m.def("builtin_scenarios", [] { return sim::builtin_scenario_names(); });
  m.def("scenario_json", [](const std::string& config, std::optional<std::uint64_t> seed,
                            const std::vector<std::string>& overrides) {
    return config_to_json(resolve(config, seed, overrides));
  }, py::arg("config"), py::arg("seed") = py::none(), py::arg("overrides") = std::vector<std::string>{});
  m.def("validate", [](const std::string& text) { return validate(config_from_json(text)); });

  m.def("run_scenario", [](const std::string& config, std::optional<std::uint64_t> seed,
                           const std::vector<std::string>& overrides, std::optional<std::string> out) {
    const auto cfg = resolve(config, seed, overrides);
    std::optional<std::filesystem::path> dir;
    if (out) dir = *out;
    sim::RunResult r;
    {
      py::gil_scoped_release release;
      r = sim::run_scenario(cfg, dir);
    }
    return sim::json_text(r.report);
  }, py::arg("config"), py::arg("seed") = py::none(), py::arg("overrides") = std::vector<std::string>{},
     py::arg("out") = py::none());

  m.def("diff_reports", [](const std::string& a, const std::string& b) {
    return sim::diff_reports(sim::Json::parse(a), sim::Json::parse(b));
  });

  m.def("aggregate_rule", [](int valid, int invalid, int k, int quorum) {
    return std::string(transmission::to_string(transmission::aggregate_rule(valid, invalid, k, quorum)));
  }, py::arg("valid"), py::arg("invalid"), py::arg("k"), py::arg("quorum"));
  m.def("default_quorum", [](int k) {
    PanelConfig p;
    p.k = k;
    return p.effective_quorum();
  });
  m.def("deterrence_margin", &incentives::deterrence_margin, py::arg("reward"), py::arg("detection_prob"),
        py::arg("forfeit"));
  m.def("sha256_hex", [](const py::bytes& data) {
    const std::string s = data;
    return digest(std::string_view(s)).hex();
  });

  py::class_<sim::World>(m, "World")
      .def(py::init([](const std::string& config, std::optional<std::uint64_t> seed,
                       const std::vector<std::string>& overrides) {
             return std::make_unique<sim::World>(resolve(config, seed, overrides));
           }),
           py::arg("config"), py::arg("seed") = py::none(), py::arg("overrides") = std::vector<std::string>{})
      .def("step", [](sim::World& w) {
        std::vector<std::pair<std::string, std::string>> rows;
        for (const auto& e : w.step()) rows.emplace_back(std::string(channel_file(e.channel)), e.csv_line());
        return rows;
      })
      .def("run", [](sim::World& w) {
        py::gil_scoped_release release;
        w.run();
      })
      .def_property_readonly("tick", &sim::World::tick)
      .def_property_readonly("finished", &sim::World::finished)
      .def_property_readonly("event_count", [](const sim::World& w) { return w.log().size(); })
      .def("state_digest", [](const sim::World& w) { return w.state_digest().hex(); })
      .def("snapshot_json", &sim::World::snapshot_json);
}
