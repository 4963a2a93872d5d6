#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "gdp/types.hpp"

namespace gdp {

struct OnboardingConfig {
  Tick temp_credential_ttl = 50;
  Tick challenge_ttl = 10;
  Tick totp_window = 30;
  int totp_skew_windows = 1;
  Tick revalidation_period = 500;
  Tokens min_stake = Tokens::whole(100);
  double behavior_threshold = 0.5;
  // Behavior checklist weights.
  double weight_ordering = 0.25;
  double weight_retries = 0.25;
  double weight_latency = 0.25;
  double weight_lifetime = 0.25;
  int max_retries = 1;
  int statements_per_challenge = 3;
  std::vector<std::string> blacklist;  // hex public keys
};

struct PanelConfig {
  int k = 5;
  int quorum = 0;  // 0 means ceil(2k/3)
  int diversity = 1;
  Tick reveal_deadline = 20;
  int max_escalations = 2;

  int effective_quorum() const noexcept { return quorum > 0 ? quorum : (2 * k + 2) / 3; }
};

struct ConsensusConfig {
  int batch_cap = 32;
  double commit_threshold = 0.5;
  double contested_band = 0.10;
  double stake_weight = 0.5;
  double reputation_weight = 0.5;
  int random_validators = 0;  // 0 means every eligible node validates
  Tick round_ticks = 1;
  std::string mempool_order = "age";  // "age" | "reputation"
};

struct AnomalyConfig {
  int window = 100;
  double z_threshold = 3.0;
  double cusum_drift = 0.5;
  double cusum_limit = 5.0;
  Tick review_period = 100;
  Tick investigation_window = 50;
  Tick rate_epoch = 10;
};

struct IncentivesConfig {
  Tokens perf_reward = Tokens::whole(1);
  double perf_reputation_gain = 0.01;
  Tokens contribution_pool = Tokens::whole(10);
  Tick epoch_ticks = 100;
  Tick longevity_period = 1000;
  Tokens longevity_bonus = Tokens::whole(5);
  double longevity_min_score = 0.8;
  double penalty_factor = 0.8;
  double major_first_forfeit = 0.5;
  double ban_threshold = 0.2;
  Tick temp_ban_ticks = 200;
  double initial_reputation = 0.5;
};

struct ArbitrationConfig {
  int panel_size = 5;
  double community_threshold = 2.0 / 3.0;
  Tokens appeal_bond = Tokens::whole(20);
  double arbitrator_min_reputation = 0.8;
  int arbitrator_count = 12;
  double vetted_reputation = 0.9;
};

struct InspectionPolicy {
  double rate_txn = 0.05;
  double rate_witness_deep = 0.1;
  double rate_sync_verify = 0.02;
  double rate_proposer_challenge = 0.05;
  double rate_device = 0.05;
  int puzzle_difficulty = 8;
  std::uint64_t puzzle_budget = 1 << 16;
  Tick max_commit_delay = 5;
};

enum class AdversaryKind {
  TamperingSender,
  ColludingWitnesses,
  SybilFlood,
  LazyWitness,
  EquivocatingWitness,
  ForgedSyncNode,
  KeyCompromise,
};

const char* to_string(AdversaryKind k) noexcept;
std::optional<AdversaryKind> adversary_kind_from_string(const std::string& s) noexcept;

struct AdversarySpec {
  AdversaryKind kind = AdversaryKind::TamperingSender;
  int count = 0;
  double tamper_rate = 1.0;     // TamperingSender: fraction of its transactions tampered
  int groups = 0;               // ColludingWitnesses: operator groups spanned (0 = one each)
  bool strategic = false;       // ColludingWitnesses: lie only when allies on the panel reach quorum
  bool respawn = false;         // re-register (with stake) after a permanent ban
  Tokens stake{};               // SybilFlood: stake offered per identity
  bool as_validators = false;   // SybilFlood: identities join the validator set
  double reveal_prob = 0.0;     // LazyWitness: probability of revealing at all
  double flip_rate = 0.2;       // EquivocatingWitness: fraction of reveals flipped
  Tick at_tick = 100;           // KeyCompromise: when secrets are swapped
};

struct ScenarioConfig {
  int schema_version = 1;
  std::string name = "custom";
  std::uint64_t seed = 1;
  Tick duration_ticks = 1000;
  double txn_arrival_rate = 1.0;
  std::int64_t max_transactions = 0;  // 0 = unlimited
  Tick drain_ticks = 60;              // arrivals stop this many ticks before the end
  int n_honest_devices = 20;
  int n_witness_pool = 15;
  int n_validators = 7;
  Tokens stake_per_device = Tokens::whole(100);
  double payload_size_mean = 256.0;
  double payload_size_sd = 32.0;
  Tick report_interval = 100;
  std::vector<AdversarySpec> adversaries;

  OnboardingConfig onboarding;
  PanelConfig panel;
  ConsensusConfig consensus;
  AnomalyConfig anomaly;
  IncentivesConfig incentives;
  ArbitrationConfig arbitration;
  InspectionPolicy inspection;
};

/// Field-path messages for every constraint the config violates; empty if valid.
std::vector<std::string> validate(const ScenarioConfig& cfg);
/// Throws Error(InvalidConfig) listing every violation.
void require_valid(const ScenarioConfig& cfg);

/// JSON text <-> config. Missing fields take defaults; unknown fields and type
/// mismatches throw Error(InvalidConfig) naming the field path.
ScenarioConfig config_from_json(const std::string& text);
std::string config_to_json(const ScenarioConfig& cfg, int indent = 2);

/// Applies a dotted-path override such as "inspection.rate_txn=0.1".
void apply_override(ScenarioConfig& cfg, const std::string& assignment);

}  // namespace gdp
