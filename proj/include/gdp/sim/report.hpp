#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "gdp/config.hpp"
#include "gdp/event_log.hpp"

namespace gdp::sim {

using Json = nlohmann::ordered_json;

/// Metrics computed from the channel rows alone, so the same report comes out
/// of a live log and of the CSV files it wrote.
Json derive_report(const ChannelRows& rows);

/// Canonical text of a report or snapshot file.
std::string json_text(const Json& j);

struct RunResult {
  Json report;
  Json snapshot;  // {"digest": ..., "state": ...}
  std::int64_t false_commits = 0;
};

/// Runs a scenario to completion. With an output directory, writes the CSVs,
/// report.json and snapshot.json there.
RunResult run_scenario(const ScenarioConfig& cfg, const std::optional<std::filesystem::path>& out = std::nullopt);

/// Steps a fresh world and compares each tick's events with `log`. Returns the
/// seq of the first event that differs, or nullopt if the whole log replays.
std::optional<std::uint64_t> replay_divergence(const ScenarioConfig& cfg, const EventLog& log);

/// Dotted paths whose values differ between two reports.
std::vector<std::string> diff_reports(const Json& a, const Json& b);

}  // namespace gdp::sim
