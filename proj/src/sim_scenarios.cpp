#include "gdp/sim/scenarios.hpp"

#include "gdp/error.hpp"

namespace gdp::sim {

namespace {

AdversarySpec spec(AdversaryKind kind, int count) {
  AdversarySpec s;
  s.kind = kind;
  s.count = count;
  return s;
}

ScenarioConfig baseline() {
  ScenarioConfig c;
  c.name = "baseline";
  return c;
}

ScenarioConfig sybil_flood() {
  ScenarioConfig c;
  c.name = "sybil_flood";
  c.duration_ticks = 300;
  auto s = spec(AdversaryKind::SybilFlood, 1000);
  s.stake = Tokens{};
  c.adversaries.push_back(s);
  return c;
}

ScenarioConfig collusion_below_quorum() {
  ScenarioConfig c;
  c.name = "collusion_below_quorum";
  c.panel.k = 5;
  c.panel.quorum = 4;
  c.panel.diversity = 1;
  c.txn_arrival_rate = 5.0;
  c.max_transactions = 10000;
  c.duration_ticks = 2100;
  // Three colluder groups and diversity 1: at most three colluders per panel.
  auto colluders = spec(AdversaryKind::ColludingWitnesses, 6);
  colluders.groups = 3;
  auto senders = spec(AdversaryKind::TamperingSender, 5);
  senders.tamper_rate = 0.5;
  senders.respawn = true;
  c.adversaries = {colluders, senders};
  return c;
}

ScenarioConfig collusion_at_quorum() {
  ScenarioConfig c;
  c.name = "collusion_at_quorum";
  c.panel.k = 5;
  c.panel.quorum = 4;
  c.n_honest_devices = 5;
  c.n_witness_pool = 6;
  c.txn_arrival_rate = 5.0;
  c.duration_ticks = 2000;
  c.inspection.rate_txn = 0.0;
  c.inspection.rate_witness_deep = 0.0;
  c.inspection.rate_sync_verify = 0.0;
  c.inspection.rate_proposer_challenge = 0.0;
  c.inspection.rate_device = 0.0;
  c.arbitration.arbitrator_count = 7;
  auto colluders = spec(AdversaryKind::ColludingWitnesses, 9);
  colluders.strategic = true;
  colluders.respawn = true;
  auto senders = spec(AdversaryKind::TamperingSender, 5);
  senders.respawn = true;
  c.adversaries = {colluders, senders};
  return c;
}

ScenarioConfig lazy_witnesses() {
  ScenarioConfig c;
  c.name = "lazy_witnesses";
  auto s = spec(AdversaryKind::LazyWitness, 5);
  s.reveal_prob = 0.3;
  c.adversaries.push_back(s);
  return c;
}

ScenarioConfig equivocation() {
  ScenarioConfig c;
  c.name = "equivocation";
  auto s = spec(AdversaryKind::EquivocatingWitness, 5);
  s.flip_rate = 0.3;
  c.adversaries.push_back(s);
  return c;
}

ScenarioConfig forged_sync() {
  ScenarioConfig c;
  c.name = "forged_sync";
  c.consensus.random_validators = 3;
  c.inspection.rate_sync_verify = 0.2;
  c.adversaries.push_back(spec(AdversaryKind::ForgedSyncNode, 2));
  return c;
}

ScenarioConfig key_compromise() {
  ScenarioConfig c;
  c.name = "key_compromise";
  c.onboarding.revalidation_period = 200;
  auto s = spec(AdversaryKind::KeyCompromise, 3);
  s.at_tick = 100;
  s.tamper_rate = 0.5;
  c.adversaries.push_back(s);
  return c;
}

}  // namespace

const std::vector<std::string>& builtin_scenario_names() {
  static const std::vector<std::string> names = {"baseline",       "sybil_flood",  "collusion_below_quorum",
                                                 "collusion_at_quorum", "lazy_witnesses", "equivocation",
                                                 "forged_sync",    "key_compromise"};
  return names;
}

ScenarioConfig builtin_scenario(const std::string& name) {
  if (name == "baseline") return baseline();
  if (name == "sybil_flood") return sybil_flood();
  if (name == "collusion_below_quorum") return collusion_below_quorum();
  if (name == "collusion_at_quorum") return collusion_at_quorum();
  if (name == "lazy_witnesses") return lazy_witnesses();
  if (name == "equivocation") return equivocation();
  if (name == "forged_sync") return forged_sync();
  if (name == "key_compromise") return key_compromise();
  fail(ErrorCode::InvalidConfig, "scenario: unknown built-in '" + name + "'");
}

}  // namespace gdp::sim
