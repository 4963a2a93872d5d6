#pragma once

#include <array>
#include <map>
#include <optional>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "gdp/config.hpp"
#include "gdp/event_log.hpp"
#include "gdp/incentives.hpp"
#include "gdp/registry.hpp"
#include "gdp/rng.hpp"

namespace gdp::transmission {

enum class TxnStatus { Pending, Witnessed, Committed, Rejected, Disputed };
const char* to_string(TxnStatus s) noexcept;

using Salt = std::array<std::uint8_t, 16>;

struct Attestation {
  DeviceId witness_id;
  PublicKey witness;
  Digest txn_id;
  Digest commit;
  std::optional<Verdict> revealed_verdict;
  std::optional<Salt> salt;
  Signature signature;
  bool equivocated = false;
  int round = 0;
};

struct DataTransaction {
  Digest id;
  std::uint64_t seq = 0;  // creation order
  DeviceId sender;
  DeviceId receiver;
  PublicKey sender_key;
  PublicKey receiver_key;
  Digest payload_digest;
  std::uint64_t nonce = 0;
  Tick created_tick = 0;
  double payload_size = 0.0;
  TxnStatus status = TxnStatus::Pending;

  std::vector<DeviceId> panel;
  std::vector<Attestation> attestations;  // current round
  std::vector<Attestation> history;       // closed rounds
  std::vector<std::vector<DeviceId>> prior_panels;
  int round = 0;
  int escalations = 0;
  Tick round_started = 0;
  Tick witnessed_tick = -1;
  Tick terminal_tick = -1;
  bool exhausted = false;  // escalation cap reached; outcome left to arbitration

  bool on_panel(DeviceId w) const;
  const Attestation* attestation_of(DeviceId w) const;
};

/// id = digest(sender key | receiver key | payload digest | nonce | created tick).
Digest transaction_id(const PublicKey& sender, const PublicKey& receiver, const Digest& payload_digest,
                      std::uint64_t nonce, Tick created_tick);

/// commit = digest(verdict byte | salt).
Digest verdict_commit(Verdict verdict, const Salt& salt);

/// Signed message of an attestation: txn id | commit.
Bytes attestation_message(const Digest& txn_id, const Digest& commit);

/// Builds a signed commit-phase attestation; the verdict stays with the witness.
Attestation make_attestation(const KeyPair& keys, DeviceId witness, const Digest& txn_id, Verdict verdict,
                             const Salt& salt);

/// Outcome of a closed reveal round under the quorum rule.
TxnStatus aggregate_rule(int valid, int invalid, int k, int quorum) noexcept;

/// Reputation-weighted, diversity-capped draw of k witnesses. Sender,
/// receiver, non-witnesses, non-Active devices and `excluded` never appear.
std::vector<DeviceId> select_witnesses(const DeviceRegistry& registry, const incentives::Ledger& ledger,
                                       const DataTransaction& txn, const PanelConfig& cfg, SeededRng& rng,
                                       const std::unordered_set<DeviceId>& excluded = {}, Tick tick = 0);

struct PenaltyRequest {
  DeviceId subject;
  incentives::Severity severity = incentives::Severity::Minor;
  Tick tick = 0;
  std::string cause;
};

struct WitnessEvaluation {
  DeviceId witness;
  bool correct = false;
  std::optional<incentives::Severity> penalty;
  bool penalized_earlier = false;  // equivocation or lazy penalty already requested
  std::string reason;
};

enum class EscalationResult { Reescalated, Exhausted };

/// All transactions of a world and their witnessing rounds.
class TransmissionPool {
 public:
  TransmissionPool(PanelConfig cfg, EventLog* log = nullptr) : cfg_(cfg), log_(log) {}

  const PanelConfig& config() const noexcept { return cfg_; }

  /// Registers a new transaction. Nonces must strictly increase per sender.
  DataTransaction& submit(DataTransaction txn, Tick tick);

  /// Starts a commit-reveal round with the given panel.
  void open_round(const Digest& txn_id, std::vector<DeviceId> panel, Tick tick);

  void witness_commit(const Digest& txn_id, const Attestation& attestation, const PublicKey& witness_key, Tick tick);
  void witness_reveal(const Digest& txn_id, DeviceId witness, Verdict verdict, const Salt& salt, Tick tick);

  bool all_committed(const DataTransaction& txn) const;
  bool all_revealed(const DataTransaction& txn) const;
  bool reveal_open(const DataTransaction& txn, Tick tick) const;
  bool ready_to_aggregate(const DataTransaction& txn, Tick tick) const;

  /// Closes the round. Non-revealers count as Invalid and get a lazy penalty.
  TxnStatus aggregate_attestations(const Digest& txn_id, Tick tick);

  /// Re-runs witnessing with a panel disjoint from every earlier one, or
  /// reports that the escalation cap is reached.
  EscalationResult reescalate_disputed(const Digest& txn_id, const DeviceRegistry& registry,
                                       const incentives::Ledger& ledger, SeededRng& rng, Tick tick);

  void mark_committed(const Digest& txn_id, Tick tick);
  /// Sends a Witnessed transaction back to conflict resolution.
  void mark_disputed(const Digest& txn_id, Tick tick, const std::string& reason);
  /// Terminal rejection; the transaction's nonce is voided.
  void mark_rejected(const Digest& txn_id, Tick tick, const std::string& reason);

  std::vector<WitnessEvaluation> evaluate_witnesses(const Digest& txn_id) const;

  DataTransaction& at(const Digest& txn_id);
  const DataTransaction& at(const Digest& txn_id) const;
  const DataTransaction* find(const Digest& txn_id) const;
  bool contains(const Digest& txn_id) const { return txns_.contains(txn_id); }

  /// Witnessed transactions in creation order.
  std::vector<const DataTransaction*> mempool() const;
  /// Transactions with an open round, in creation order.
  std::vector<Digest> open_rounds() const;

  std::uint64_t last_nonce(DeviceId sender) const;
  bool nonce_voided(DeviceId sender, std::uint64_t nonce) const;
  const std::vector<Digest>& order() const noexcept { return order_; }

  std::vector<PenaltyRequest> take_penalties();

  static std::string witness_label(DeviceId w) { return label(w); }

 private:
  void log(Tick tick, const DataTransaction& txn, const std::string& event, const std::string& actor,
           const std::string& detail);
  void set_status(DataTransaction& txn, TxnStatus status, Tick tick);

  PanelConfig cfg_;
  EventLog* log_;
  std::unordered_map<Digest, DataTransaction, DigestHash> txns_;
  std::vector<Digest> order_;
  std::map<std::uint64_t, Digest> witnessed_;  // seq -> id
  std::map<std::uint64_t, Digest> pending_;    // seq -> id, rounds in progress
  std::unordered_map<DeviceId, std::uint64_t> last_nonce_;
  std::unordered_map<DeviceId, std::unordered_set<std::uint64_t>> voided_;
  std::vector<PenaltyRequest> penalties_;
  SignatureCache sig_cache_;
};

}  // namespace gdp::transmission
