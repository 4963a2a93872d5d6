#pragma once

#include <algorithm>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "gdp/consensus.hpp"
#include "gdp/error.hpp"
#include "gdp/sim/scenarios.hpp"
#include "gdp/sim/world.hpp"

namespace gdp::test {

struct InvariantRun {
  std::uint64_t ticks = 0;
  std::uint64_t checks = 0;
  std::uint64_t violations = 0;
  std::vector<std::string> first;  // first few messages
};

inline std::vector<std::string> split_words(const std::string& s) {
  std::vector<std::string> out;
  std::istringstream in(s);
  for (std::string w; in >> w;) out.push_back(w);
  return out;
}

template <class E>
bool stages_monotone(const std::vector<E>& history) {
  for (std::size_t i = 1; i < history.size(); ++i)
    if (static_cast<int>(history[i]) <= static_cast<int>(history[i - 1])) return false;
  return true;
}

// Closed -> Appealed is allowed once, then only Closed may follow.
inline bool dispute_stages_ok(const std::vector<arbitration::Stage>& history) {
  using S = arbitration::Stage;
  auto closed = std::find(history.begin(), history.end(), S::Closed);
  if (closed == history.end()) return stages_monotone(history);
  std::vector<S> head(history.begin(), closed + 1), tail(closed + 1, history.end());
  if (!stages_monotone(head)) return false;
  return tail.empty() || tail == std::vector<S>{S::Appealed, S::Closed} || tail == std::vector<S>{S::Appealed};
}

// Builtin scenario picked by seed, shortened.
inline ScenarioConfig invariant_config(std::uint64_t seed, Tick duration = 200) {
  const auto& names = sim::builtin_scenario_names();
  auto cfg = sim::builtin_scenario(names[seed % names.size()]);
  cfg.seed = seed;
  cfg.duration_ticks = duration;
  cfg.drain_ticks = std::min<Tick>(cfg.drain_ticks, duration / 4);
  for (auto& a : cfg.adversaries)
    if (a.kind == AdversaryKind::KeyCompromise) a.at_tick = std::min<Tick>(a.at_tick, duration / 2);
  return cfg;
}

inline InvariantRun check_invariants(const ScenarioConfig& cfg) {
  InvariantRun run;
  auto bad = [&](Tick t, const std::string& what) {
    if (run.violations++ < 20)
      run.first.push_back(cfg.name + " seed " + std::to_string(cfg.seed) + " tick " + std::to_string(t) + ": " + what);
  };

  sim::World w(cfg);
  while (!w.finished()) {
    w.step();
    const Tick t = w.tick();
    ++run.ticks;

    ++run.checks;
    if (!w.ledger().conservation_holds()) bad(t, "token conservation");

    for (const auto& p : w.registry().all()) {
      if (!w.ledger().enrolled(p.id)) continue;
      const double s = w.ledger().score(p.id);
      ++run.checks;
      if (!(s >= 0.0 && s <= 1.0)) bad(t, label(p.id) + " reputation " + std::to_string(s));
    }

    std::vector<const consensus::NodeLedger*> honest;
    for (const auto& [id, node] : w.nodes())
      if (w.actor(id).spec < 0) honest.push_back(&node);
    for (std::size_t i = 0; i < honest.size(); ++i)
      for (std::size_t j = i + 1; j < honest.size(); ++j) {
        ++run.checks;
        if (!consensus::prefix_consistent(*honest[i], *honest[j])) bad(t, "honest nodes diverge");
      }
  }
  const Tick end = w.tick();

  for (const auto& [id, node] : w.nodes()) {
    ++run.checks;
    try {
      node.verify_chain();
      const auto& blocks = node.blocks();
      for (std::size_t h = 1; h < blocks.size(); ++h)
        consensus::verify_block(blocks[h], blocks[h - 1].block_digest, h, cfg.consensus);
    } catch (const Error& e) {
      bad(end, label(id) + " chain: " + e.what());
    }
  }

  // ledger channel replays as a linked chain
  std::string prev;
  std::uint64_t expect_height = 1;
  for (const auto& e : w.log().events()) {
    if (e.channel != Channel::Ledger || e.event != "block") continue;
    ++run.checks;
    if (e.fields.size() < 6) {
      bad(e.tick, "short ledger row");
      continue;
    }
    if (std::stoull(e.fields[0]) != expect_height) bad(e.tick, "ledger height gap at " + e.fields[0]);
    if (!prev.empty() && e.fields[1] != prev) bad(e.tick, "ledger parent link at " + e.fields[0]);
    if (prev.empty() && expect_height == 1) {
      const auto& any = w.nodes().begin()->second.blocks();
      if (e.fields[1] != any.front().block_digest.hex()) bad(e.tick, "ledger genesis link");
    }
    prev = e.fields[2];
    ++expect_height;
  }

  for (const auto& s : w.onboarding().sessions()) {
    ++run.checks;
    if (!stages_monotone(s.history)) bad(end, "onboarding stages regress");
  }
  for (const auto& d : w.disputes().disputes()) {
    ++run.checks;
    if (!dispute_stages_ok(d.history)) {
      std::string h;
      for (auto st : d.history) h += std::string(" ") + arbitration::to_string(st);
      bad(end, "dispute D" + std::to_string(d.id) + " stages regress:" + h);
    }
  }

  // nobody quarantined or banned serves on a panel or proposes
  std::set<std::string> quarantined, banned;
  auto excluded = [&](const std::string& d) { return quarantined.contains(d) || banned.contains(d); };
  for (const auto& e : w.log().events()) {
    if (e.channel == Channel::World) {
      if (e.event == "quarantined") quarantined.insert(e.subject);
      else if (e.event == "banned") banned.insert(e.subject);
      else if (e.event == "released") quarantined.erase(e.subject);
      else if (e.event == "round") {
        ++run.checks;
        if (excluded(e.subject)) bad(e.tick, "excluded " + e.subject + " proposed");
      }
    } else if (e.channel == Channel::Transactions && e.event == "panel" && !e.fields.empty()) {
      for (const auto& m : split_words(e.fields.back())) {
        ++run.checks;
        if (excluded(m)) bad(e.tick, "excluded " + m + " on panel");
      }
    }
  }
  return run;
}

}  // namespace gdp::test
