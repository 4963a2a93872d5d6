#pragma once

#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "gdp/anomaly.hpp"
#include "gdp/arbitration.hpp"
#include "gdp/checks.hpp"
#include "gdp/config.hpp"
#include "gdp/consensus.hpp"
#include "gdp/event_log.hpp"
#include "gdp/incentives.hpp"
#include "gdp/onboarding.hpp"
#include "gdp/registry.hpp"
#include "gdp/rng.hpp"
#include "gdp/sim/policy.hpp"
#include "gdp/transmission.hpp"

namespace gdp::sim {

/// A device and the private state only it holds.
struct Actor {
  DeviceId id;
  KeyPair keys;
  SecretKey secret;  // attestation secret; a key compromise swaps it
  std::shared_ptr<const Policy> policy;
  std::uint64_t next_nonce = 1;
  std::string group;
  unsigned roles = 0;
  int spec = -1;  // index into config.adversaries, -1 for honest devices
};

/// What physically happened to a payload. `delivered` is what any observer
/// recomputes from the bytes; `tampered` is the metrics label.
struct GroundTruth {
  bool tampered = false;
  Digest delivered;
};

/// Vote that passed the tally and waits out its random commit delay.
struct InflightBlock {
  consensus::Proposal proposal;
  std::vector<consensus::Vote> votes;
  Tick commit_at = 0;
};

class World {
 public:
  /// Validates the config and onboards every device through the full pipeline.
  explicit World(ScenarioConfig cfg);

  World(const World&) = delete;
  World& operator=(const World&) = delete;

  /// Advances one tick; returns the events it appended.
  std::vector<LogEvent> step();
  void run();
  bool finished() const noexcept { return tick_ >= cfg_.duration_ticks; }

  Tick tick() const noexcept { return tick_; }
  const ScenarioConfig& config() const noexcept { return cfg_; }
  const EventLog& log() const noexcept { return log_; }

  const DeviceRegistry& registry() const noexcept { return registry_; }
  const incentives::Ledger& ledger() const noexcept { return ledger_; }
  const transmission::TransmissionPool& pool() const noexcept { return pool_; }
  const arbitration::DisputeBook& disputes() const noexcept { return disputes_; }
  const anomaly::QuarantineBook& quarantine() const noexcept { return quarantine_; }
  const onboarding::OnboardingService& onboarding() const noexcept { return onboarding_; }
  const std::map<DeviceId, consensus::NodeLedger>& nodes() const noexcept { return nodes_; }
  const std::vector<Actor>& actors() const noexcept { return actors_; }
  const Actor& actor(DeviceId id) const { return actors_.at(actor_index_.at(id)); }
  const GroundTruth* truth(const Digest& txn) const;

  /// Flips every ground-truth label the world records from now on. Used to
  /// show that protocol decisions never read the labels.
  void corrupt_truth_labels() noexcept { corrupt_labels_ = true; }

  /// Called with the proposal height and voter set right before vote weights
  /// are computed, while the ledger holds the state they are computed from.
  using WeighObserver = std::function<void(std::uint64_t height, const std::vector<DeviceId>& voters)>;
  void on_weigh(WeighObserver f) { weigh_observer_ = std::move(f); }

  /// Canonical JSON of the world state, and its digest.
  std::string snapshot_json() const;
  Digest state_digest() const;

 private:
  struct WitnessMemory {
    Verdict verdict = Verdict::Valid;
    transmission::Salt salt{};
    bool decided = false;
  };

  std::uint64_t log_world(const std::string& event, const std::string& subject, const std::string& detail);
  Actor& actor_mut(DeviceId id) { return actors_.at(actor_index_.at(id)); }
  void flush_incentives();
  SeededRng stream(std::string_view name, std::uint64_t a = 0, std::uint64_t b = 0) const;

  // population
  void build_population();
  std::optional<DeviceId> spawn_adversary(int spec, std::uint64_t index, SeededRng& rng);
  std::optional<DeviceId> enroll_device(std::shared_ptr<const Policy> policy, unsigned roles, std::string group,
                                        Tokens stake, double reputation, std::vector<std::string> expertise, int spec,
                                        SeededRng& rng);
  void respawn_banned();
  void on_perm_ban(DeviceId id);
  void compromise_keys();

  // transmission
  void arrivals();
  void submit_transaction(DeviceId sender, const std::vector<DeviceId>& active, std::uint64_t seq, SeededRng& rng);
  bool open_panel(const Digest& txn_id, const std::unordered_set<DeviceId>& excluded);
  void commit_panel(const Digest& txn_id);
  void retry_unpaneled();
  void reveals();
  void inspect_witness_reveal(const transmission::DataTransaction& txn, DeviceId witness);
  void aggregations();
  void handle_disputed(const Digest& txn_id);
  void evaluate(const Digest& txn_id);
  void apply_pool_penalties();

  // consensus
  std::vector<DeviceId> eligible_validators() const;
  void consensus_round();
  void finish_inflight();
  void apply_commit(const consensus::LedgerBlock& block);
  void deep_inspect(const transmission::DataTransaction& txn, std::uint64_t height);
  void escalate(const std::vector<Digest>& ids, const std::string& reason);
  bool sync_node(DeviceId node);
  void sync_lagging();

  // oversight
  void revalidations();
  void observe_streams();
  void observe(anomaly::StreamMonitor& monitor, const std::string& subject, double sample);
  void investigate_alert(const anomaly::AnomalyAlert& alert);
  void quarantine_device(DeviceId id, const std::string& reason);
  std::optional<DeviceId> system_complainant(const std::vector<DeviceId>& accused) const;
  void open_dispute(arbitration::Category category, std::vector<DeviceId> accused, std::vector<std::uint64_t> refs,
                    std::optional<Digest> txn, const std::string& summary);
  bool evidence_fault(const arbitration::Dispute& d) const;
  DisputeView view_for(const arbitration::Dispute& d, DeviceId who) const;
  void advance_disputes();
  void on_closed(std::uint64_t id);
  void incentive_epoch();
  void trajectory_rows();
  void census_rows();
  void inspection_row(const checks::InspectionOutcome& outcome);
  std::optional<std::uint64_t> last_event_seq(std::size_t from, std::string_view event) const;

  bool usable(DeviceId id) const;

  ScenarioConfig cfg_;
  SeededRng root_;
  Tick tick_ = 0;
  EventLog log_;
  DeviceRegistry registry_;
  incentives::Ledger ledger_;
  anomaly::QuarantineBook quarantine_;
  onboarding::OnboardingService onboarding_;
  transmission::TransmissionPool pool_;
  arbitration::DisputeBook disputes_;
  std::size_t incentives_logged_ = 0;

  std::vector<Actor> actors_;
  std::unordered_map<DeviceId, std::size_t> actor_index_;
  std::map<DeviceId, consensus::NodeLedger> nodes_;
  std::unordered_map<Digest, GroundTruth, DigestHash> truth_;
  std::map<std::pair<Digest, std::uint32_t>, WitnessMemory> memory_;
  std::vector<Digest> unpaneled_;
  std::unordered_set<Digest, DigestHash> objections_;
  std::optional<InflightBlock> inflight_;
  std::uint64_t consensus_round_ = 0;
  std::uint64_t spawned_ = 0;
  std::vector<int> respawn_queue_;  // adversary spec indices
  std::map<DeviceId, std::uint64_t> votes_cast_;
  std::set<std::uint64_t> cited_;
  std::uint64_t arrivals_this_epoch_ = 0;
  std::uint64_t alert_count_ = 0;
  std::map<std::uint64_t, Tick> dispute_touched_;
  std::vector<std::pair<std::string, double>> payload_samples_;
  std::vector<std::pair<std::string, double>> witness_samples_;
  std::vector<std::pair<std::string, double>> vote_samples_;
  std::int64_t txn_count_ = 0;
  bool compromised_ = false;
  bool corrupt_labels_ = false;
  WeighObserver weigh_observer_;

  anomaly::StreamMonitor payload_stream_;
  anomaly::StreamMonitor witness_stream_;
  anomaly::StreamMonitor vote_stream_;
  anomaly::StreamMonitor rate_stream_;
  SignatureCache sig_cache_;
};

}  // namespace gdp::sim
