#include "gdp/sim/report.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <set>

#include "gdp/error.hpp"
#include "gdp/sim/world.hpp"

namespace gdp::sim {

namespace {

using Rows = std::vector<std::vector<std::string>>;

std::optional<std::string> kv(std::string_view detail, std::string_view key) {
  std::size_t pos = 0;
  while (pos < detail.size()) {
    auto end = detail.find(' ', pos);
    if (end == std::string_view::npos) end = detail.size();
    const auto word = detail.substr(pos, end - pos);
    if (word.size() > key.size() && word.substr(0, key.size()) == key && word[key.size()] == '=')
      return std::string(word.substr(key.size() + 1));
    pos = end + 1;
  }
  return std::nullopt;
}

Tick tick_of(const std::vector<std::string>& row) { return std::stoll(row.at(0)); }

double round6(double v) { return std::round(v * 1e6) / 1e6; }

Json distribution(std::vector<Tick> xs) {
  Json j;
  j["count"] = xs.size();
  if (xs.empty()) return j;
  std::sort(xs.begin(), xs.end());
  auto rank = [&](double q) {
    const auto i = static_cast<std::size_t>(std::ceil(q * static_cast<double>(xs.size())));
    return xs[std::min(xs.size() - 1, i == 0 ? 0 : i - 1)];
  };
  double sum = 0;
  for (auto x : xs) sum += static_cast<double>(x);
  j["min"] = xs.front();
  j["mean"] = round6(sum / static_cast<double>(xs.size()));
  j["p50"] = rank(0.5);
  j["p90"] = rank(0.9);
  j["p99"] = rank(0.99);
  j["max"] = xs.back();
  return j;
}

Tokens parse_tokens(const std::string& text) {
  const auto bar = text.find('|');
  return Tokens::from_double(std::stod(bar == std::string::npos ? text : text.substr(0, bar)));
}

void diff_into(const Json& a, const Json& b, const std::string& path, std::vector<std::string>& out) {
  if (a.is_object() && b.is_object()) {
    std::set<std::string> keys;
    for (auto it = a.begin(); it != a.end(); ++it) keys.insert(it.key());
    for (auto it = b.begin(); it != b.end(); ++it) keys.insert(it.key());
    for (const auto& k : keys) {
      const auto sub = path.empty() ? k : path + "." + k;
      if (!a.contains(k) || !b.contains(k))
        out.push_back(sub);
      else
        diff_into(a[k], b[k], sub, out);
    }
    return;
  }
  if (a.is_array() && b.is_array() && a.size() == b.size()) {
    for (std::size_t i = 0; i < a.size(); ++i) diff_into(a[i], b[i], path + "[" + std::to_string(i) + "]", out);
    return;
  }
  if (a != b) out.push_back(path.empty() ? "." : path);
}

}  // namespace

Json derive_report(const ChannelRows& rows) {
  Json r;
  Tick bound = 0;

  // World channel: tick,event,subject,detail
  std::map<std::string, bool> tampered;
  std::map<std::string, std::map<Tick, std::pair<double, int>>> trajectories;
  std::map<std::string, std::map<std::string, int>> census;
  std::map<std::string, int> world_counts;
  for (const auto& row : rows.of(Channel::World)) {
    const auto& event = row.at(1);
    const auto& subject = row.at(2);
    const auto& detail = row.at(3);
    if (event == "scenario") {
      r["scenario"] = subject;
      r["seed"] = std::stoull(kv(detail, "seed").value_or("0"));
      r["duration"] = std::stoll(kv(detail, "duration").value_or("0"));
      bound = std::stoll(kv(detail, "liveness_bound").value_or("0"));
    } else if (event == "ground_truth") {
      tampered[subject] = detail == "tampered=1";
    } else if (event == "reputation") {
      auto& cell = trajectories[kv(detail, "role").value_or("?") + "/" + kv(detail, "persona").value_or("?")][tick_of(row)];
      cell.first += std::stod(kv(detail, "score").value_or("0"));
      ++cell.second;
    } else if (event == "census") {
      ++census[kv(detail, "persona").value_or("?")][kv(detail, "status").value_or("?")];
    } else {
      ++world_counts[event];
    }
  }

  // Transactions channel: tick,txn_id,event,actor,detail
  std::map<std::string, Tick> submitted;
  std::map<std::string, Tick> committed;
  std::set<std::string> rejected;
  std::map<std::string, Tick> first_detection;
  for (const auto& row : rows.of(Channel::Transactions)) {
    const auto& id = row.at(1);
    const auto& event = row.at(2);
    if (event == "submit") submitted.emplace(id, tick_of(row));
    if (event == "committed") committed.emplace(id, tick_of(row));
    if (event == "rejected") {
      rejected.insert(id);
      first_detection.emplace(id, tick_of(row));
    }
  }

  std::int64_t tampered_submitted = 0;
  std::int64_t tampered_committed = 0;
  std::int64_t tampered_rejected = 0;
  std::int64_t honest_submitted = 0;
  std::int64_t honest_committed = 0;
  std::int64_t within_bound = 0;
  std::vector<Tick> latencies;
  for (const auto& [id, t0] : submitted) {
    const bool bad = tampered.count(id) && tampered.at(id);
    const auto c = committed.find(id);
    if (bad) {
      ++tampered_submitted;
      if (c != committed.end()) ++tampered_committed;
      if (rejected.count(id)) ++tampered_rejected;
      continue;
    }
    ++honest_submitted;
    if (c == committed.end()) continue;
    ++honest_committed;
    latencies.push_back(c->second - t0);
    if (c->second - t0 <= bound) ++within_bound;
  }

  Json txns;
  txns["submitted"] = submitted.size();
  txns["committed"] = committed.size();
  txns["rejected"] = rejected.size();
  txns["unresolved"] = submitted.size() - committed.size() - rejected.size();
  txns["tampered_submitted"] = tampered_submitted;
  txns["tampered_committed"] = tampered_committed;
  txns["tampered_rejected"] = tampered_rejected;
  txns["false_commit_count"] = tampered_committed;
  r["transactions"] = std::move(txns);

  Json live;
  live["bound"] = bound;
  live["honest_submitted"] = honest_submitted;
  live["honest_committed"] = honest_committed;
  live["within_bound"] = within_bound;
  live["commit_latency"] = distribution(latencies);
  r["liveness"] = std::move(live);

  // Inspections channel: tick,target_kind,target,passed,evidence_refs
  std::map<std::string, std::pair<int, int>> inspections;
  std::int64_t tampered_inspected = 0;
  std::int64_t tampered_detected = 0;
  for (const auto& row : rows.of(Channel::Inspections)) {
    const bool passed = row.at(3) == "1";
    auto& cell = inspections[row.at(1)];
    (passed ? cell.first : cell.second) += 1;
    if (row.at(1) != "Transaction") continue;
    const auto& id = row.at(2);
    if (!tampered.count(id) || !tampered.at(id) || !committed.count(id)) continue;
    ++tampered_inspected;
    if (!passed) {
      ++tampered_detected;
      first_detection.emplace(id, tick_of(row));
    }
  }
  std::vector<Tick> detection_latency;
  for (const auto& [id, t] : first_detection)
    if (tampered.count(id) && tampered.at(id) && submitted.count(id)) detection_latency.push_back(t - submitted.at(id));

  Json det;
  det["tampered_committed_inspected"] = tampered_inspected;
  det["tampered_committed_detected"] = tampered_detected;
  det["detected_fraction"] =
      tampered_committed > 0 ? round6(static_cast<double>(tampered_detected) / static_cast<double>(tampered_committed))
                             : 0.0;
  det["latency"] = distribution(detection_latency);
  r["detection"] = std::move(det);

  Json insp = Json::object();
  for (const auto& [kind, c] : inspections) insp[kind] = {{"passed", c.first}, {"failed", c.second}};
  r["inspections"] = std::move(insp);

  // Incentives channel: tick,subject,kind,delta,cause_ref
  std::map<std::string, std::pair<std::int64_t, Tokens>> flows;
  for (const auto& row : rows.of(Channel::Incentives)) {
    auto& cell = flows[row.at(2)];
    ++cell.first;
    const auto& kind = row.at(2);
    if (kind != "Enroll" && kind != "ReputationPenalty" && kind != "TempBan" && kind != "PermBan")
      cell.second += parse_tokens(row.at(3));
  }
  Json stake = Json::object();
  for (const auto& [kind, c] : flows) stake[kind] = {{"events", c.first}, {"tokens", c.second.str()}};
  r["stake_flows"] = std::move(stake);

  Json traj = Json::object();
  for (const auto& [key, series] : trajectories) {
    Json points = Json::array();
    for (const auto& [t, cell] : series) points.push_back({t, round6(cell.first / cell.second)});
    traj[key] = std::move(points);
  }
  r["reputation_trajectories"] = std::move(traj);

  // Disputes channel: tick,dispute_id,stage,detail
  std::map<std::string, std::string> last_close;
  std::int64_t opened = 0;
  std::int64_t appeals = 0;
  std::set<std::string> seen;
  for (const auto& row : rows.of(Channel::Disputes)) {
    const auto& id = row.at(1);
    if (seen.insert(id).second) ++opened;
    if (row.at(2) == "Appealed") ++appeals;
    if (row.at(2) == "Closed") last_close[id] = row.at(3);
  }
  std::map<std::string, int> by_body;
  std::int64_t at_fault = 0;
  for (const auto& [id, detail] : last_close) {
    ++by_body[detail.substr(0, detail.find(' '))];
    if (kv(detail, "at_fault").value_or("none") != "none") ++at_fault;
  }
  Json disputes;
  disputes["opened"] = opened;
  disputes["closed"] = last_close.size();
  disputes["at_fault"] = at_fault;
  disputes["cleared"] = static_cast<std::int64_t>(last_close.size()) - at_fault;
  disputes["appeals"] = appeals;
  disputes["by_body"] = by_body;
  r["disputes"] = std::move(disputes);

  // Alerts channel: tick,stream,subject,kind,z_score,value
  std::map<std::string, std::map<std::string, int>> alerts;
  for (const auto& row : rows.of(Channel::Alerts)) ++alerts[row.at(1)][row.at(3)];
  r["alerts"] = {{"total", rows.of(Channel::Alerts).size()}, {"by_stream", alerts}};

  Json ob;
  for (const char* e : {"actor", "onboarding_failed", "respawned", "compromise", "quarantined", "released", "banned",
                        "inspection_failed", "revalidation_failed", "dispute_skipped"})
    ob[e] = world_counts.count(e) ? world_counts.at(e) : 0;
  r["devices"] = std::move(ob);

  std::int64_t active_adversarial = 0;
  for (const auto& [persona, statuses] : census)
    if (persona != "Honest" && statuses.count("Active")) active_adversarial += statuses.at("Active");
  r["census"] = {{"by_persona", census}, {"active_adversarial", active_adversarial}};

  // Ledger channel: height,parent_hex,block_digest_hex,proposer,txn_count,accept_weight
  const auto& blocks = rows.of(Channel::Ledger);
  bool consistent = true;
  std::int64_t entries = 0;
  for (std::size_t i = 0; i < blocks.size(); ++i) {
    entries += std::stoll(blocks[i].at(4));
    if (std::stoull(blocks[i].at(0)) != i + 1) consistent = false;
    if (i > 0 && blocks[i].at(1) != blocks[i - 1].at(2)) consistent = false;
  }
  r["chain"] = {{"height", blocks.size()}, {"entries", entries}, {"consistent", consistent}};

  r["safety"] = {{"no_false_commits", tampered_committed == 0},
                 {"honest_liveness", honest_committed == honest_submitted && within_bound == honest_committed},
                 {"chain_consistent", consistent}};
  return r;
}

std::string json_text(const Json& j) { return j.dump(2) + "\n"; }

RunResult run_scenario(const ScenarioConfig& cfg, const std::optional<std::filesystem::path>& out) {
  World world(cfg);
  world.run();
  RunResult result;
  result.report = derive_report(ChannelRows::from_log(world.log()));
  result.snapshot = {{"digest", world.state_digest().hex()}, {"state", Json::parse(world.snapshot_json())}};
  result.false_commits = result.report["transactions"]["false_commit_count"].get<std::int64_t>();
  if (out) {
    std::filesystem::create_directories(*out);
    world.log().write_csv(*out);
    auto write = [&](const char* name, const Json& j) {
      std::ofstream os(*out / name, std::ios::binary);
      if (!os) fail(ErrorCode::InvalidConfig, "cannot write " + (*out / name).string());
      os << json_text(j);
    };
    write("report.json", result.report);
    write("snapshot.json", result.snapshot);
  }
  return result;
}

std::optional<std::uint64_t> replay_divergence(const ScenarioConfig& cfg, const EventLog& log) {
  World fresh(cfg);
  std::size_t i = 0;
  auto compare = [&](const LogEvent& e) {
    if (i >= log.size() || !(log.at(i) == e)) return false;
    ++i;
    return true;
  };
  for (const auto& e : fresh.log().events())
    if (!compare(e)) return i;
  while (!fresh.finished() && i < log.size())
    for (const auto& e : fresh.step())
      if (!compare(e)) return i;
  if (i != log.size()) return i;
  return std::nullopt;
}

std::vector<std::string> diff_reports(const Json& a, const Json& b) {
  std::vector<std::string> out;
  diff_into(a, b, "", out);
  return out;
}

}  // namespace gdp::sim
