#pragma once

#include <functional>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "gdp/config.hpp"
#include "gdp/event_log.hpp"
#include "gdp/incentives.hpp"
#include "gdp/registry.hpp"
#include "gdp/rng.hpp"

namespace gdp::arbitration {

enum class Stage { Mediation, CommunityReview, PanelSelection, FinalArbitration, Appealed, Closed };
enum class Category { Equivocation, DisputedTransaction, FailedRevalidation, ProtocolViolation, InspectionFailure };
enum class Body { Mediator, Community, Panel, AppealPanel };

const char* to_string(Stage s) noexcept;
const char* to_string(Category c) noexcept;
const char* to_string(Body b) noexcept;

/// Expertise tag a mediator needs for a claim category.
std::string expertise_tag(Category c);

struct Claim {
  Category category = Category::ProtocolViolation;
  std::vector<std::uint64_t> event_refs;  // sequence numbers in the world event log
  std::optional<Digest> txn;
  std::string summary;
};

enum class RemedyKind { Penalty, Reward, Restoration, BondForfeit, BondReturn };

struct Remedy {
  DeviceId subject;
  RemedyKind kind = RemedyKind::Penalty;
  incentives::Severity severity = incentives::Severity::Major;
  std::string cause;
};

struct Verdict {
  std::vector<DeviceId> at_fault;
  std::vector<Remedy> remedies;
  Digest rationale_digest;
  Body deciding_body = Body::Mediator;
  std::optional<std::uint64_t> recorded_block;

  /// Digest recorded on the ledger.
  Digest digest(std::uint64_t dispute_id) const;
};

/// parties[0] is the complainant; the rest are accused.
struct Dispute {
  std::uint64_t id = 0;
  std::vector<DeviceId> parties;
  Claim claim;
  Stage stage = Stage::Mediation;
  std::optional<Verdict> decision;
  bool appeal_used = false;
  std::optional<DeviceId> mediator;
  std::vector<DeviceId> panel;
  std::vector<DeviceId> appeal_panel;
  std::optional<DeviceId> appellant;
  Tokens bond;
  Tick opened_tick = 0;
  std::vector<Stage> history;
  std::size_t remedies_dispatched = 0;  // remedies of `decision` already applied
  std::optional<Verdict> original_decision;

  DeviceId complainant() const { return parties.front(); }
  std::vector<DeviceId> accused() const { return {parties.begin() + 1, parties.end()}; }
};

/// A vote on whether the accused are at fault.
struct BallotVote {
  DeviceId voter;
  double weight = 1.0;
  bool fault = false;
};

/// Decentralized dispute pipeline: mediation, community review, panel, appeal.
class DisputeBook {
 public:
  DisputeBook(ArbitrationConfig cfg, DeviceRegistry& registry, incentives::Ledger& ledger, const EventLog& events,
              EventLog* log = nullptr);

  const ArbitrationConfig& config() const noexcept { return cfg_; }

  Dispute& open_dispute(std::vector<DeviceId> parties, Claim claim, SeededRng& rng, Tick tick);

  /// Ruling a mediator proposes for the dispute, with the standard remedies.
  Verdict propose_ruling(std::uint64_t id, bool fault) const;

  /// All parties accept the ruling -> Closed; otherwise CommunityReview.
  void mediate(std::uint64_t id, const std::optional<Verdict>& ruling,
               const std::function<bool(DeviceId party, const Verdict&)>& accepts, Tick tick);

  /// Voters eligible for community review: Active, not a party, not in a party's group.
  std::vector<DeviceId> community_voters(const Dispute& d) const;
  void community_review(std::uint64_t id, const std::vector<BallotVote>& votes, Tick tick);

  /// Reputation-weighted draw of panel_size conflict-free arbitrators.
  std::vector<DeviceId> select_panel(std::uint64_t id, SeededRng& rng, Tick tick);

  /// Majority of the panel decides; stage -> Closed.
  const Verdict& arbitrate(std::uint64_t id, const std::vector<BallotVote>& panel_votes, Tick tick);

  /// Posts the bond, draws a panel disjoint from the original and records its
  /// final verdict. `vote` gives each appeal arbitrator's ballot.
  const Verdict& appeal(std::uint64_t id, DeviceId appellant, SeededRng& rng,
                        const std::function<bool(DeviceId arbitrator)>& vote, Tick tick);

  /// Applies undispatched remedies of the current decision; each remedy is
  /// applied exactly once. Returns the incentive events emitted.
  std::vector<incentives::IncentiveEvent> dispatch_remedies(std::uint64_t id, Tick tick);

  /// Marks a verdict digest as included in a block.
  void record_on_ledger(const Digest& verdict_digest, std::uint64_t height);

  bool conflict_free(const Dispute& d, DeviceId candidate) const;
  std::vector<DeviceId> eligible_arbitrators(const Dispute& d, const std::vector<DeviceId>& also_exclude,
                                             Tick tick) const;

  Dispute& at(std::uint64_t id);
  const Dispute& at(std::uint64_t id) const;
  const std::vector<Dispute>& disputes() const noexcept { return disputes_; }
  std::vector<std::uint64_t> open_ids() const;

  /// Verdict digests awaiting a block, in decision order.
  std::vector<Digest> pending_records() const;

 private:
  Verdict make_verdict(const Dispute& d, bool fault, Body body, const std::string& rationale) const;
  void advance(Dispute& d, Stage stage, Tick tick, const std::string& detail);
  void decide(Dispute& d, Verdict v, Tick tick);

  ArbitrationConfig cfg_;
  DeviceRegistry& registry_;
  incentives::Ledger& ledger_;
  const EventLog& events_;
  EventLog* log_;
  std::vector<Dispute> disputes_;
  std::vector<std::pair<Digest, std::uint64_t>> unrecorded_;  // verdict digest, dispute id
};

}  // namespace gdp::arbitration
