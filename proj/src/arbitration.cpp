#include "gdp/arbitration.hpp"

#include <algorithm>
#include <unordered_set>

#include "gdp/error.hpp"

namespace gdp::arbitration {

const char* to_string(Stage s) noexcept {
  switch (s) {
    case Stage::Mediation: return "Mediation";
    case Stage::CommunityReview: return "CommunityReview";
    case Stage::PanelSelection: return "PanelSelection";
    case Stage::FinalArbitration: return "FinalArbitration";
    case Stage::Appealed: return "Appealed";
    case Stage::Closed: return "Closed";
  }
  return "Unknown";
}

const char* to_string(Category c) noexcept {
  switch (c) {
    case Category::Equivocation: return "Equivocation";
    case Category::DisputedTransaction: return "DisputedTransaction";
    case Category::FailedRevalidation: return "FailedRevalidation";
    case Category::ProtocolViolation: return "ProtocolViolation";
    case Category::InspectionFailure: return "InspectionFailure";
  }
  return "Unknown";
}

const char* to_string(Body b) noexcept {
  switch (b) {
    case Body::Mediator: return "Mediator";
    case Body::Community: return "Community";
    case Body::Panel: return "Panel";
    case Body::AppealPanel: return "AppealPanel";
  }
  return "Unknown";
}

std::string expertise_tag(Category c) { return to_string(c); }

Digest Verdict::digest(std::uint64_t dispute_id) const {
  Sha256 h;
  h.update("verdict");
  h.update_u64(dispute_id);
  h.update_u64(at_fault.size());
  for (auto d : at_fault) h.update_u64(d.value);
  h.update(to_string(deciding_body));
  h.update(rationale_digest);
  return h.finish();
}

DisputeBook::DisputeBook(ArbitrationConfig cfg, DeviceRegistry& registry, incentives::Ledger& ledger,
                         const EventLog& events, EventLog* log)
    : cfg_(std::move(cfg)), registry_(registry), ledger_(ledger), events_(events), log_(log) {}

Dispute& DisputeBook::at(std::uint64_t id) {
  if (id >= disputes_.size()) fail(ErrorCode::EmptyClaim, "unknown dispute " + std::to_string(id));
  return disputes_[id];
}

const Dispute& DisputeBook::at(std::uint64_t id) const { return const_cast<DisputeBook*>(this)->at(id); }

std::vector<std::uint64_t> DisputeBook::open_ids() const {
  std::vector<std::uint64_t> out;
  for (const auto& d : disputes_)
    if (d.stage != Stage::Closed) out.push_back(d.id);
  return out;
}

void DisputeBook::advance(Dispute& d, Stage stage, Tick tick, const std::string& detail) {
  d.stage = stage;
  d.history.push_back(stage);
  if (log_) {
    const auto id = "D" + std::to_string(d.id);
    log_->append(tick, Channel::Disputes, id, to_string(stage), {std::to_string(tick), id, to_string(stage), detail});
  }
}

bool DisputeBook::conflict_free(const Dispute& d, DeviceId candidate) const {
  const auto& group = registry_.at(candidate).operator_group;
  for (auto p : d.parties) {
    if (p == candidate) return false;
    if (registry_.at(p).operator_group == group) return false;
  }
  return true;
}

Dispute& DisputeBook::open_dispute(std::vector<DeviceId> parties, Claim claim, SeededRng& rng, Tick tick) {
  if (claim.event_refs.empty()) fail(ErrorCode::EmptyClaim, "claim cites no events");
  for (auto ref : claim.event_refs)
    if (!events_.contains(ref)) fail(ErrorCode::EmptyClaim, "event " + std::to_string(ref) + " does not exist");
  if (parties.size() < 2) fail(ErrorCode::UnknownParty, "a dispute needs a complainant and an accused party");
  for (auto p : parties) {
    if (!registry_.contains(p)) fail(ErrorCode::UnknownParty, label(p));
    if (registry_.at(p).status == DeviceStatus::Banned) fail(ErrorCode::UnknownParty, label(p) + " is banned");
  }

  Dispute d;
  d.id = disputes_.size();
  d.parties = std::move(parties);
  d.claim = std::move(claim);
  d.opened_tick = tick;

  const auto tag = expertise_tag(d.claim.category);
  std::vector<DeviceId> candidates;
  std::vector<double> weights;
  for (const auto& p : registry_.all()) {
    if (p.status != DeviceStatus::Active || !ledger_.enrolled(p.id) || ledger_.is_banned(p.id, tick)) continue;
    if (std::find(p.expertise.begin(), p.expertise.end(), tag) == p.expertise.end()) continue;
    if (!conflict_free(d, p.id)) continue;
    candidates.push_back(p.id);
    weights.push_back(ledger_.score(p.id));
  }
  const auto order = weighted_draw_order(rng, weights);
  if (!order.empty()) d.mediator = candidates[order.front()];

  disputes_.push_back(std::move(d));
  auto& ref = disputes_.back();
  std::string detail = std::string(to_string(ref.claim.category)) + " parties=";
  for (std::size_t i = 0; i < ref.parties.size(); ++i) detail += (i ? " " : "") + label(ref.parties[i]);
  detail += " mediator=" + (ref.mediator ? label(*ref.mediator) : std::string("none"));
  advance(ref, Stage::Mediation, tick, detail);
  return ref;
}

Verdict DisputeBook::make_verdict(const Dispute& d, bool fault, Body body, const std::string& rationale) const {
  Verdict v;
  v.deciding_body = body;
  Sha256 h;
  h.update(rationale);
  for (auto ref : d.claim.event_refs) h.update_u64(ref);
  v.rationale_digest = h.finish();
  if (fault) {
    v.at_fault = d.accused();
    for (auto a : v.at_fault) v.remedies.push_back({a, RemedyKind::Penalty, incentives::Severity::Major, "at_fault"});
    v.remedies.push_back({d.complainant(), RemedyKind::Reward, incentives::Severity::Minor, "whistleblower"});
  } else {
    for (auto a : d.accused())
      v.remedies.push_back({a, RemedyKind::Restoration, incentives::Severity::Minor, "exonerated"});
  }
  return v;
}

void DisputeBook::decide(Dispute& d, Verdict v, Tick tick) {
  d.decision = std::move(v);
  d.remedies_dispatched = 0;
  unrecorded_.emplace_back(d.decision->digest(d.id), d.id);
  std::string detail = std::string(to_string(d.decision->deciding_body)) + " at_fault=";
  for (std::size_t i = 0; i < d.decision->at_fault.size(); ++i) detail += (i ? " " : "") + label(d.decision->at_fault[i]);
  if (d.decision->at_fault.empty()) detail += "none";
  advance(d, Stage::Closed, tick, detail);
}

Verdict DisputeBook::propose_ruling(std::uint64_t id, bool fault) const {
  return make_verdict(at(id), fault, Body::Mediator, fault ? "mediator:fault" : "mediator:clear");
}

void DisputeBook::mediate(std::uint64_t id, const std::optional<Verdict>& ruling,
                          const std::function<bool(DeviceId, const Verdict&)>& accepts, Tick tick) {
  auto& d = at(id);
  if (d.stage != Stage::Mediation) fail(ErrorCode::WrongStage, to_string(d.stage));
  if (ruling && d.mediator) {
    bool all = true;
    for (auto p : d.parties) all = all && accepts(p, *ruling);
    if (all) {
      Verdict v = *ruling;
      v.deciding_body = Body::Mediator;
      decide(d, std::move(v), tick);
      return;
    }
  }
  advance(d, Stage::CommunityReview, tick, ruling ? "mediation rejected" : "no mediation ruling");
}

std::vector<DeviceId> DisputeBook::community_voters(const Dispute& d) const {
  std::vector<DeviceId> out;
  for (const auto& p : registry_.all())
    if (p.status == DeviceStatus::Active && ledger_.enrolled(p.id) && conflict_free(d, p.id)) out.push_back(p.id);
  return out;
}

void DisputeBook::community_review(std::uint64_t id, const std::vector<BallotVote>& votes, Tick tick) {
  auto& d = at(id);
  if (d.stage != Stage::CommunityReview) fail(ErrorCode::WrongStage, to_string(d.stage));
  double fault = 0.0;
  double clear = 0.0;
  for (const auto& v : votes) {
    if (!conflict_free(d, v.voter)) fail(ErrorCode::UnknownParty, label(v.voter) + " may not vote on its own dispute");
    (v.fault ? fault : clear) += v.weight;
  }
  const double total = fault + clear;
  const auto tally = "fault=" + std::to_string(fault) + " clear=" + std::to_string(clear);
  if (total > 0.0 && (fault >= cfg_.community_threshold * total || clear >= cfg_.community_threshold * total)) {
    decide(d, make_verdict(d, fault >= cfg_.community_threshold * total, Body::Community, tally), tick);
    return;
  }
  advance(d, Stage::PanelSelection, tick, tally);
}

std::vector<DeviceId> DisputeBook::eligible_arbitrators(const Dispute& d, const std::vector<DeviceId>& also_exclude,
                                                        Tick tick) const {
  std::vector<DeviceId> out;
  for (const auto& p : registry_.all()) {
    if (!p.has_role(role::kArbitrator) || p.status != DeviceStatus::Active) continue;
    if (!ledger_.enrolled(p.id) || ledger_.is_banned(p.id, tick)) continue;
    if (ledger_.score(p.id) < cfg_.arbitrator_min_reputation) continue;
    if (!conflict_free(d, p.id)) continue;
    if (d.mediator && *d.mediator == p.id) continue;
    if (std::find(also_exclude.begin(), also_exclude.end(), p.id) != also_exclude.end()) continue;
    out.push_back(p.id);
  }
  return out;
}

std::vector<DeviceId> DisputeBook::select_panel(std::uint64_t id, SeededRng& rng, Tick tick) {
  auto& d = at(id);
  if (d.stage != Stage::PanelSelection) fail(ErrorCode::WrongStage, to_string(d.stage));
  const auto pool = eligible_arbitrators(d, {}, tick);
  std::vector<double> weights;
  for (auto a : pool) weights.push_back(ledger_.score(a));
  const auto n = static_cast<std::size_t>(cfg_.panel_size);
  if (pool.size() < n)
    fail(ErrorCode::InsufficientArbitrators, std::to_string(pool.size()) + " eligible of " + std::to_string(n));
  d.panel = sample_without_replacement<DeviceId>(rng, pool, weights, n);
  std::string members;
  for (auto a : d.panel) members += (members.empty() ? "" : " ") + label(a);
  advance(d, Stage::FinalArbitration, tick, members);
  return d.panel;
}

const Verdict& DisputeBook::arbitrate(std::uint64_t id, const std::vector<BallotVote>& panel_votes, Tick tick) {
  auto& d = at(id);
  if (d.stage != Stage::FinalArbitration) fail(ErrorCode::WrongStage, to_string(d.stage));
  int fault = 0;
  int counted = 0;
  for (const auto& v : panel_votes) {
    if (std::find(d.panel.begin(), d.panel.end(), v.voter) == d.panel.end()) fail(ErrorCode::UnknownParty, label(v.voter));
    ++counted;
    if (v.fault) ++fault;
  }
  const bool at_fault = 2 * fault > counted;
  decide(d, make_verdict(d, at_fault, Body::Panel, std::to_string(fault) + "-" + std::to_string(counted - fault)),
         tick);
  return *d.decision;
}

const Verdict& DisputeBook::appeal(std::uint64_t id, DeviceId appellant, SeededRng& rng,
                                   const std::function<bool(DeviceId)>& vote, Tick tick) {
  auto& d = at(id);
  if (d.appeal_used) fail(ErrorCode::AppealExhausted, "D" + std::to_string(id));
  if (d.stage != Stage::Closed) fail(ErrorCode::WrongStage, to_string(d.stage));
  if (std::find(d.parties.begin(), d.parties.end(), appellant) == d.parties.end())
    fail(ErrorCode::UnknownParty, label(appellant) + " is not a party");

  std::vector<DeviceId> exclude = d.panel;
  const auto pool = eligible_arbitrators(d, exclude, tick);
  const auto n = static_cast<std::size_t>(cfg_.panel_size);
  if (pool.size() < n)
    fail(ErrorCode::InsufficientArbitrators, std::to_string(pool.size()) + " eligible of " + std::to_string(n));
  ledger_.post_bond(appellant, cfg_.appeal_bond, tick, "appeal D" + std::to_string(id));

  std::vector<double> weights;
  for (auto a : pool) weights.push_back(ledger_.score(a));
  d.appeal_panel = sample_without_replacement<DeviceId>(rng, pool, weights, n);
  d.appeal_used = true;
  d.appellant = appellant;
  d.bond = cfg_.appeal_bond;
  std::string members;
  for (auto a : d.appeal_panel) members += (members.empty() ? "" : " ") + label(a);
  advance(d, Stage::Appealed, tick, label(appellant) + " panel=" + members);

  int fault = 0;
  for (auto a : d.appeal_panel)
    if (vote(a)) ++fault;
  const bool new_fault = 2 * fault > static_cast<int>(d.appeal_panel.size());
  const bool old_fault = !d.decision->at_fault.empty();
  d.original_decision = d.decision;

  Verdict v;
  v.deciding_body = Body::AppealPanel;
  v.rationale_digest =
      Sha256().update("appeal").update(d.original_decision->rationale_digest).update_u64(static_cast<std::uint64_t>(fault)).finish();
  if (new_fault) v.at_fault = d.accused();
  if (new_fault == old_fault) {
    v.remedies.push_back({appellant, RemedyKind::BondForfeit, incentives::Severity::Minor, "appeal upheld original"});
  } else {
    v.remedies.push_back({appellant, RemedyKind::BondReturn, incentives::Severity::Minor, "appeal overturned"});
    if (new_fault) {
      for (auto a : d.accused()) v.remedies.push_back({a, RemedyKind::Penalty, incentives::Severity::Major, "at_fault"});
    } else {
      for (auto a : d.accused()) v.remedies.push_back({a, RemedyKind::Restoration, incentives::Severity::Minor, "restored"});
    }
  }
  decide(d, std::move(v), tick);
  return *d.decision;
}

std::vector<incentives::IncentiveEvent> DisputeBook::dispatch_remedies(std::uint64_t id, Tick tick) {
  auto& d = at(id);
  std::vector<incentives::IncentiveEvent> out;
  if (!d.decision) return out;
  const auto cause = "D" + std::to_string(d.id);
  auto& remedies = d.decision->remedies;
  for (; d.remedies_dispatched < remedies.size(); ++d.remedies_dispatched) {
    const auto& r = remedies[d.remedies_dispatched];
    const auto why = cause + " " + r.cause;
    switch (r.kind) {
      case RemedyKind::Penalty: {
        auto evs = ledger_.apply_penalty(r.subject, r.severity, tick, why);
        out.insert(out.end(), evs.begin(), evs.end());
        break;
      }
      case RemedyKind::Reward:
      case RemedyKind::Restoration:
        if (!ledger_.is_banned(r.subject, tick)) out.push_back(ledger_.apply_performance_reward(r.subject, tick, why));
        break;
      case RemedyKind::BondForfeit: out.push_back(ledger_.settle_bond(r.subject, d.bond, false, tick, why)); break;
      case RemedyKind::BondReturn: out.push_back(ledger_.settle_bond(r.subject, d.bond, true, tick, why)); break;
    }
  }
  return out;
}

void DisputeBook::record_on_ledger(const Digest& verdict_digest, std::uint64_t height) {
  for (auto it = unrecorded_.begin(); it != unrecorded_.end(); ++it) {
    if (it->first != verdict_digest) continue;
    auto& d = disputes_[it->second];
    if (d.decision && d.decision->digest(d.id) == verdict_digest) d.decision->recorded_block = height;
    unrecorded_.erase(it);
    return;
  }
}

std::vector<Digest> DisputeBook::pending_records() const {
  std::vector<Digest> out;
  for (const auto& [digest, _] : unrecorded_) out.push_back(digest);
  return out;
}

}  // namespace gdp::arbitration
