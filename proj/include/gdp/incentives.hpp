#pragma once

#include <functional>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "gdp/config.hpp"
#include "gdp/types.hpp"

namespace gdp::incentives {

enum class EventKind {
  Enroll,
  StakeDeposit,
  PerfReward,
  ContribReward,
  LongevityBonus,
  StakeForfeit,
  ReputationPenalty,
  TempBan,
  PermBan,
  BondPosted,
  BondReturned,
  BondForfeit,
};

enum class Severity { Minor, Major, Critical };

const char* to_string(EventKind k) noexcept;
const char* to_string(Severity s) noexcept;
std::optional<EventKind> event_kind_from_string(const std::string& s) noexcept;

struct StakeAccount {
  DeviceId owner;
  Tokens staked;
  Tokens liquid;
  Tokens bonded;  // appeal bonds held in escrow
  unsigned offense_count = 0;
};

struct ReputationAccount {
  DeviceId owner;
  double score = 0.5;
  Tick onboarded_tick = 0;
  Tick last_reward_tick = -1;
  Tick last_longevity_tick = -1;
  bool perm_banned = false;
  Tick banned_until = -1;  // temporary ban active while tick < banned_until
};

/// One mutation of one account. `tokens` and `reputation_delta` carry the
/// signed change; ban events carry the ban length in `ticks`.
struct IncentiveEvent {
  std::uint64_t seq = 0;
  Tick tick = 0;
  DeviceId subject;
  EventKind kind = EventKind::Enroll;
  Tokens tokens;
  double reputation_delta = 0.0;
  Tick ticks = 0;
  std::string cause;

  /// The CSV `delta` column: tokens, reputation change, or ban length.
  std::string delta_text() const;
};

/// Expected per-attempt payoff of cheating: reward*(1-p) - forfeit*p.
/// Negative means the attempt does not pay.
double deterrence_margin(double reward_per_cheat, double detection_prob, double forfeit_on_catch);

/// Stake and reputation accounts plus the append-only incentive event log.
///
/// Token identity maintained at all times:
///   sum(staked + liquid + bonded) + treasury == deposited + minted
class Ledger {
 public:
  explicit Ledger(IncentivesConfig cfg) : cfg_(std::move(cfg)) {}

  const IncentivesConfig& config() const noexcept { return cfg_; }

  std::vector<IncentiveEvent> enroll(DeviceId owner, Tokens stake, double reputation, Tick tick,
                                     const std::string& cause);
  bool enrolled(DeviceId owner) const { return stakes_.contains(owner); }

  const StakeAccount& stake(DeviceId owner) const;
  const ReputationAccount& reputation(DeviceId owner) const;
  double score(DeviceId owner) const { return reputation(owner).score; }

  bool is_banned(DeviceId owner, Tick tick) const;
  bool is_perm_banned(DeviceId owner) const { return reputation(owner).perm_banned; }

  IncentiveEvent apply_performance_reward(DeviceId owner, Tick tick, const std::string& cause);
  IncentiveEvent apply_contribution_reward(DeviceId owner, double contributed_units, double total_units, Tick tick,
                                           const std::string& cause);
  std::optional<IncentiveEvent> apply_longevity_bonus(DeviceId owner, Tick tick);
  std::vector<IncentiveEvent> apply_penalty(DeviceId owner, Severity severity, Tick tick, const std::string& cause);

  IncentiveEvent post_bond(DeviceId owner, Tokens amount, Tick tick, const std::string& cause);
  /// Releases a posted bond back to liquid, or forfeits it to the treasury.
  IncentiveEvent settle_bond(DeviceId owner, Tokens amount, bool returned, Tick tick, const std::string& cause);

  Tokens treasury() const noexcept { return treasury_; }
  Tokens minted() const noexcept { return minted_; }
  Tokens deposited() const noexcept { return deposited_; }
  Tokens held() const;
  bool conservation_holds() const { return held() + treasury_ == deposited_ + minted_; }

  const std::vector<IncentiveEvent>& events() const noexcept { return events_; }

  /// Called once when an account is permanently banned.
  void on_perm_ban(std::function<void(DeviceId)> hook) { perm_ban_hook_ = std::move(hook); }

 private:
  IncentiveEvent& emit(IncentiveEvent e);
  StakeAccount& stake_mut(DeviceId owner);
  ReputationAccount& rep_mut(DeviceId owner);
  std::optional<IncentiveEvent> maybe_temp_ban(DeviceId owner, Tick tick, const std::string& cause);

  IncentivesConfig cfg_;
  std::unordered_map<DeviceId, StakeAccount> stakes_;
  std::unordered_map<DeviceId, ReputationAccount> reps_;
  std::vector<IncentiveEvent> events_;
  Tokens treasury_;
  Tokens minted_;
  Tokens deposited_;
  std::function<void(DeviceId)> perm_ban_hook_;
};

}  // namespace gdp::incentives
