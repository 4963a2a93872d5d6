#include "gdp/incentives.hpp"

#include <algorithm>
#include <cstdio>

#include "gdp/error.hpp"

namespace gdp::incentives {

namespace {

constexpr std::pair<EventKind, const char*> kKindNames[] = {
    {EventKind::Enroll, "Enroll"},
    {EventKind::StakeDeposit, "StakeDeposit"},
    {EventKind::PerfReward, "PerfReward"},
    {EventKind::ContribReward, "ContribReward"},
    {EventKind::LongevityBonus, "LongevityBonus"},
    {EventKind::StakeForfeit, "StakeForfeit"},
    {EventKind::ReputationPenalty, "ReputationPenalty"},
    {EventKind::TempBan, "TempBan"},
    {EventKind::PermBan, "PermBan"},
    {EventKind::BondPosted, "BondPosted"},
    {EventKind::BondReturned, "BondReturned"},
    {EventKind::BondForfeit, "BondForfeit"},
};

double clamp01(double v) { return std::clamp(v, 0.0, 1.0); }

std::string format_real(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.9g", v);
  return buf;
}

}  // namespace

const char* to_string(EventKind k) noexcept {
  for (const auto& [kind, name] : kKindNames)
    if (kind == k) return name;
  return "Unknown";
}

std::optional<EventKind> event_kind_from_string(const std::string& s) noexcept {
  for (const auto& [kind, name] : kKindNames)
    if (s == name) return kind;
  return std::nullopt;
}

const char* to_string(Severity s) noexcept {
  switch (s) {
    case Severity::Minor: return "Minor";
    case Severity::Major: return "Major";
    case Severity::Critical: return "Critical";
  }
  return "Unknown";
}

std::string IncentiveEvent::delta_text() const {
  switch (kind) {
    case EventKind::Enroll:
    case EventKind::ReputationPenalty: return format_real(reputation_delta);
    case EventKind::TempBan:
    case EventKind::PermBan: return std::to_string(ticks);
    case EventKind::PerfReward:
      // tokens and reputation move together
      return tokens.str() + "|" + format_real(reputation_delta);
    default: return tokens.str();
  }
}

double deterrence_margin(double reward_per_cheat, double detection_prob, double forfeit_on_catch) {
  return reward_per_cheat * (1.0 - detection_prob) - forfeit_on_catch * detection_prob;
}

IncentiveEvent& Ledger::emit(IncentiveEvent e) {
  e.seq = events_.size();
  events_.push_back(std::move(e));
  return events_.back();
}

StakeAccount& Ledger::stake_mut(DeviceId owner) {
  auto it = stakes_.find(owner);
  if (it == stakes_.end()) fail(ErrorCode::UnknownDevice, "no stake account for device #" + std::to_string(owner.value));
  return it->second;
}

ReputationAccount& Ledger::rep_mut(DeviceId owner) {
  auto it = reps_.find(owner);
  if (it == reps_.end())
    fail(ErrorCode::UnknownDevice, "no reputation account for device #" + std::to_string(owner.value));
  return it->second;
}

const StakeAccount& Ledger::stake(DeviceId owner) const { return const_cast<Ledger*>(this)->stake_mut(owner); }

const ReputationAccount& Ledger::reputation(DeviceId owner) const {
  return const_cast<Ledger*>(this)->rep_mut(owner);
}

std::vector<IncentiveEvent> Ledger::enroll(DeviceId owner, Tokens stake, double reputation, Tick tick,
                                           const std::string& cause) {
  if (stakes_.contains(owner)) fail(ErrorCode::DuplicateDevice, "account exists for device #" + std::to_string(owner.value));
  stakes_.emplace(owner, StakeAccount{owner, {}, {}, {}, 0});
  ReputationAccount rep;
  rep.owner = owner;
  rep.score = 0.0;
  rep.onboarded_tick = tick;
  reps_.emplace(owner, rep);

  std::vector<IncentiveEvent> out;
  const double initial = clamp01(reputation);
  reps_[owner].score = initial;
  out.push_back(emit({0, tick, owner, EventKind::Enroll, {}, initial, 0, cause}));
  stakes_[owner].staked = stake;
  deposited_ += stake;
  out.push_back(emit({0, tick, owner, EventKind::StakeDeposit, stake, 0.0, 0, cause}));
  return out;
}

bool Ledger::is_banned(DeviceId owner, Tick tick) const {
  const auto& r = reputation(owner);
  return r.perm_banned || tick < r.banned_until;
}

Tokens Ledger::held() const {
  Tokens total;
  for (const auto& [_, s] : stakes_) total += s.staked + s.liquid + s.bonded;
  return total;
}

IncentiveEvent Ledger::apply_performance_reward(DeviceId owner, Tick tick, const std::string& cause) {
  if (is_banned(owner, tick)) fail(ErrorCode::SubjectBanned, "device #" + std::to_string(owner.value));
  auto& s = stake_mut(owner);
  auto& r = rep_mut(owner);
  const double before = r.score;
  r.score = clamp01(r.score + cfg_.perf_reputation_gain);
  r.last_reward_tick = tick;
  s.liquid += cfg_.perf_reward;
  minted_ += cfg_.perf_reward;
  return emit({0, tick, owner, EventKind::PerfReward, cfg_.perf_reward, r.score - before, 0, cause});
}

IncentiveEvent Ledger::apply_contribution_reward(DeviceId owner, double contributed_units, double total_units,
                                                 Tick tick, const std::string& cause) {
  if (!(total_units > 0.0) || !(contributed_units >= 0.0) || contributed_units > total_units)
    fail(ErrorCode::InvalidProportion,
         std::to_string(contributed_units) + " of " + std::to_string(total_units) + " units");
  if (is_banned(owner, tick)) fail(ErrorCode::SubjectBanned, "device #" + std::to_string(owner.value));
  auto& s = stake_mut(owner);
  const auto amount = Tokens{static_cast<std::int64_t>(static_cast<double>(cfg_.contribution_pool.micros) *
                                                       contributed_units / total_units)};
  s.liquid += amount;
  minted_ += amount;
  rep_mut(owner).last_reward_tick = tick;
  return emit({0, tick, owner, EventKind::ContribReward, amount, 0.0, 0, cause});
}

std::optional<IncentiveEvent> Ledger::apply_longevity_bonus(DeviceId owner, Tick tick) {
  auto& r = rep_mut(owner);
  auto& s = stake_mut(owner);
  if (r.perm_banned || tick < r.banned_until) return std::nullopt;
  if (tick - r.onboarded_tick < cfg_.longevity_period) return std::nullopt;
  if (s.offense_count != 0 || r.score < cfg_.longevity_min_score) return std::nullopt;
  if (r.last_longevity_tick >= 0 && tick - r.last_longevity_tick < cfg_.longevity_period) return std::nullopt;
  r.last_longevity_tick = tick;
  s.liquid += cfg_.longevity_bonus;
  minted_ += cfg_.longevity_bonus;
  return emit({0, tick, owner, EventKind::LongevityBonus, cfg_.longevity_bonus, 0.0, 0, "tenure"});
}

std::optional<IncentiveEvent> Ledger::maybe_temp_ban(DeviceId owner, Tick tick, const std::string& cause) {
  auto& r = rep_mut(owner);
  if (r.perm_banned || r.score >= cfg_.ban_threshold || tick < r.banned_until) return std::nullopt;
  r.banned_until = tick + cfg_.temp_ban_ticks;
  return emit({0, tick, owner, EventKind::TempBan, {}, 0.0, cfg_.temp_ban_ticks, cause});
}

std::vector<IncentiveEvent> Ledger::apply_penalty(DeviceId owner, Severity severity, Tick tick,
                                                  const std::string& cause) {
  std::vector<IncentiveEvent> out;
  auto& r = rep_mut(owner);
  auto& s = stake_mut(owner);
  if (r.perm_banned) return out;  // frozen

  auto degrade = [&] {
    const double before = r.score;
    r.score = clamp01(r.score * cfg_.penalty_factor);
    out.push_back(emit({0, tick, owner, EventKind::ReputationPenalty, {}, r.score - before, 0, cause}));
  };
  auto forfeit = [&](Tokens amount) {
    s.staked -= amount;
    treasury_ += amount;
    out.push_back(emit({0, tick, owner, EventKind::StakeForfeit, -amount, 0.0, 0, cause}));
  };

  switch (severity) {
    case Severity::Minor:
      degrade();
      break;
    case Severity::Major: {
      degrade();
      const Tokens amount =
          s.offense_count == 0
              ? Tokens{static_cast<std::int64_t>(static_cast<double>(s.staked.micros) * cfg_.major_first_forfeit)}
              : s.staked;
      forfeit(amount);
      ++s.offense_count;
      break;
    }
    case Severity::Critical:
      forfeit(s.staked);
      ++s.offense_count;
      r.perm_banned = true;
      out.push_back(emit({0, tick, owner, EventKind::PermBan, {}, 0.0, 0, cause}));
      if (perm_ban_hook_) perm_ban_hook_(owner);
      return out;
  }
  if (auto ban = maybe_temp_ban(owner, tick, cause)) out.push_back(*ban);
  return out;
}

IncentiveEvent Ledger::post_bond(DeviceId owner, Tokens amount, Tick tick, const std::string& cause) {
  auto& s = stake_mut(owner);
  if (s.liquid < amount)
    fail(ErrorCode::InsufficientBond, "liquid " + s.liquid.str() + " < bond " + amount.str());
  s.liquid -= amount;
  s.bonded += amount;
  return emit({0, tick, owner, EventKind::BondPosted, amount, 0.0, 0, cause});
}

IncentiveEvent Ledger::settle_bond(DeviceId owner, Tokens amount, bool returned, Tick tick, const std::string& cause) {
  auto& s = stake_mut(owner);
  amount = std::min(amount, s.bonded);
  s.bonded -= amount;
  if (returned) {
    s.liquid += amount;
    return emit({0, tick, owner, EventKind::BondReturned, amount, 0.0, 0, cause});
  }
  treasury_ += amount;
  return emit({0, tick, owner, EventKind::BondForfeit, -amount, 0.0, 0, cause});
}

}  // namespace gdp::incentives
