#include <doctest.h>

#include <map>

#include "../common/cheater.hpp"
#include "gdp/error.hpp"
#include "gdp/incentives.hpp"

using namespace gdp;
using namespace gdp::incentives;

namespace {

constexpr DeviceId A{1};
constexpr DeviceId B{2};

Ledger with_account(double rep = 0.5, Tokens stake = Tokens::whole(100), IncentivesConfig cfg = {}) {
  Ledger l(cfg);
  l.enroll(A, stake, rep, 0, "test");
  return l;
}

struct Replayed {
  Tokens staked;
  Tokens liquid;
  Tokens bonded;
  double score = 0.0;
};

/// Rebuilds every account from the event log alone.
std::map<DeviceId, Replayed> replay(const std::vector<IncentiveEvent>& events) {
  std::map<DeviceId, Replayed> out;
  for (const auto& e : events) {
    auto& r = out[e.subject];
    switch (e.kind) {
      case EventKind::Enroll: r.score = e.reputation_delta; break;
      case EventKind::StakeDeposit:
      case EventKind::StakeForfeit: r.staked += e.tokens; break;
      case EventKind::PerfReward:
        r.liquid += e.tokens;
        r.score += e.reputation_delta;
        break;
      case EventKind::ContribReward:
      case EventKind::LongevityBonus: r.liquid += e.tokens; break;
      case EventKind::ReputationPenalty: r.score += e.reputation_delta; break;
      case EventKind::BondPosted:
        r.liquid -= e.tokens;
        r.bonded += e.tokens;
        break;
      case EventKind::BondReturned:
        r.bonded -= e.tokens;
        r.liquid += e.tokens;
        break;
      case EventKind::BondForfeit: r.bonded += e.tokens; break;
      case EventKind::TempBan:
      case EventKind::PermBan: break;
    }
  }
  return out;
}

ErrorCode code_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("no error thrown");
  return ErrorCode::InvalidConfig;
}

}  // namespace

TEST_SUITE("incentives") {
  TEST_CASE("performance reward") {
    auto l = with_account(0.5);
    l.apply_performance_reward(A, 1, "ok");
    CHECK(l.score(A) == doctest::Approx(0.51));
    CHECK(l.stake(A).liquid == Tokens::whole(1));
    auto top = with_account(0.995);
    top.apply_performance_reward(A, 1, "ok");
    CHECK(top.score(A) == 1.0);
  }

  TEST_CASE("banned owners get nothing") {
    auto l = with_account(0.5);
    l.apply_penalty(A, Severity::Critical, 1, "x");
    const auto before = l.events().size();
    CHECK(code_of([&] { l.apply_performance_reward(A, 2, "ok"); }) == ErrorCode::SubjectBanned);
    CHECK(l.events().size() == before);
    CHECK(l.stake(A).liquid == Tokens{});
  }

  TEST_CASE("contribution reward is proportional") {
    auto l = with_account();
    CHECK(l.apply_contribution_reward(A, 5, 10, 1, "c").tokens == Tokens::whole(5));
    CHECK(l.apply_contribution_reward(A, 0, 10, 1, "c").tokens == Tokens{});
    CHECK(code_of([&] { l.apply_contribution_reward(A, 11, 10, 1, "c"); }) == ErrorCode::InvalidProportion);
    CHECK(code_of([&] { l.apply_contribution_reward(A, 1, 0, 1, "c"); }) == ErrorCode::InvalidProportion);
  }

  TEST_CASE("longevity bonus needs tenure, a clean record and a good score") {
    auto l = with_account(0.9);
    CHECK_FALSE(l.apply_longevity_bonus(A, 999));
    const auto bonus = l.apply_longevity_bonus(A, 1000);
    REQUIRE(bonus);
    CHECK(bonus->tokens == Tokens::whole(5));
    CHECK_FALSE(l.apply_longevity_bonus(A, 1500));
    CHECK(l.apply_longevity_bonus(A, 2000));

    auto dirty = with_account(0.99);
    dirty.apply_penalty(A, Severity::Major, 10, "x");
    CHECK_FALSE(dirty.apply_longevity_bonus(A, 2000));

    auto low = with_account(0.79);
    CHECK_FALSE(low.apply_longevity_bonus(A, 1000));
  }

  TEST_CASE("penalty ladder") {
    auto l = with_account(0.5);
    l.apply_penalty(A, Severity::Major, 1, "first");
    CHECK(l.stake(A).staked == Tokens::whole(50));
    CHECK(l.score(A) == doctest::Approx(0.4));
    CHECK(l.stake(A).offense_count == 1);
    l.apply_penalty(A, Severity::Major, 2, "second");
    CHECK(l.stake(A).staked == Tokens{});
    CHECK(l.treasury() == Tokens::whole(100));

    auto m = with_account(0.6);
    m.apply_penalty(A, Severity::Minor, 1, "lazy");
    CHECK(m.score(A) == doctest::Approx(0.48));
    CHECK(m.stake(A).staked == Tokens::whole(100));
    CHECK(m.stake(A).offense_count == 0);
  }

  TEST_CASE("minor penalty below the ban threshold triggers a temporary ban") {
    auto l = with_account(0.24);
    const auto events = l.apply_penalty(A, Severity::Minor, 10, "lazy");
    CHECK(l.score(A) == doctest::Approx(0.24 * 0.8));
    REQUIRE(events.size() == 2);
    CHECK(events[1].kind == EventKind::TempBan);
    CHECK(l.is_banned(A, 209));
    CHECK_FALSE(l.is_banned(A, 210));

    auto above = with_account(0.25);
    CHECK(above.apply_penalty(A, Severity::Minor, 10, "lazy").size() == 1);  // 0.2 is not below 0.2
  }

  TEST_CASE("critical penalty forfeits everything, bans and fires the hook once") {
    auto l = with_account(0.9);
    int calls = 0;
    l.on_perm_ban([&](DeviceId id) {
      CHECK(id == A);
      ++calls;
    });
    l.apply_penalty(A, Severity::Critical, 3, "forged");
    CHECK(l.is_perm_banned(A));
    CHECK(l.stake(A).staked == Tokens{});
    CHECK(l.apply_penalty(A, Severity::Critical, 4, "again").empty());
    CHECK(l.score(A) == doctest::Approx(0.9));  // frozen
    CHECK(calls == 1);
  }

  TEST_CASE("deterrence margin") {
    CHECK(deterrence_margin(1, 0.05, 50) == doctest::Approx(1 * 0.95 - 50 * 0.05));
    CHECK(deterrence_margin(1, 0.05, 50) == doctest::Approx(-1.55));
    CHECK(deterrence_margin(1, 0.05, 0) == doctest::Approx(0.95));
    CHECK(deterrence_margin(3, 1.0, 40) == doctest::Approx(-40));
  }

  TEST_CASE("simulated cheater payoff converges to the deterrence margin") {
    const auto run = gdp::test::run_cheater(11, 1000000, 0.05);
    const double expected = deterrence_margin(1, 0.05, 50);
    MESSAGE("cheater mean payoff " << run.mean_payoff << " over " << run.attempts << ", caught " << run.caught);
    CHECK(std::abs(run.mean_payoff - expected) <= 0.05 * std::abs(expected));
  }

  TEST_CASE("bonds move between liquid, escrow and treasury") {
    auto l = with_account();
    for (int i = 0; i < 30; ++i) l.apply_performance_reward(A, i, "r");
    CHECK(code_of([&] { l.post_bond(A, Tokens::whole(31), 30, "appeal"); }) == ErrorCode::InsufficientBond);
    l.post_bond(A, Tokens::whole(20), 30, "appeal");
    CHECK(l.stake(A).bonded == Tokens::whole(20));
    l.settle_bond(A, Tokens::whole(20), false, 31, "lost");
    CHECK(l.treasury() == Tokens::whole(20));
    CHECK(l.conservation_holds());
  }

  TEST_CASE("random event sequences keep bounds, conservation and an exact event trail") {
    for (std::uint64_t seed = 0; seed < 200; ++seed) {
      SeededRng rng(seed);
      Ledger l{IncentivesConfig{}};
      std::vector<DeviceId> ids;
      for (std::uint32_t i = 1; i <= 6; ++i) {
        ids.push_back(DeviceId{i});
        l.enroll(ids.back(), Tokens::whole(static_cast<std::int64_t>(rng.uniform_below(300))), rng.uniform01(), 0,
                 "seed");
      }
      for (Tick t = 1; t < 400; ++t) {
        const DeviceId who = ids[rng.uniform_below(ids.size())];
        try {
          switch (rng.uniform_below(7)) {
            case 0: l.apply_performance_reward(who, t, "r"); break;
            case 1: l.apply_contribution_reward(who, rng.uniform01() * 3, 3, t, "c"); break;
            case 2: l.apply_longevity_bonus(who, t * 10); break;
            case 3: l.apply_penalty(who, Severity::Minor, t, "m"); break;
            case 4: l.apply_penalty(who, Severity::Major, t, "M"); break;
            case 5:
              if (rng.bernoulli(0.1)) l.apply_penalty(who, Severity::Critical, t, "C");
              break;
            case 6: {
              const auto amount = Tokens::whole(1 + static_cast<std::int64_t>(rng.uniform_below(3)));
              l.post_bond(who, amount, t, "b");
              l.settle_bond(who, amount, rng.bernoulli(0.5), t, "s");
              break;
            }
          }
        } catch (const Error& e) {
          REQUIRE((e.code() == ErrorCode::SubjectBanned || e.code() == ErrorCode::InsufficientBond));
        }
        REQUIRE(l.conservation_holds());
        REQUIRE(l.score(who) >= 0.0);
        REQUIRE(l.score(who) <= 1.0);
      }
      const auto rebuilt = replay(l.events());
      for (auto id : ids) {
        const auto& r = rebuilt.at(id);
        REQUIRE(r.staked == l.stake(id).staked);
        REQUIRE(r.liquid == l.stake(id).liquid);
        REQUIRE(r.bonded == l.stake(id).bonded);
        REQUIRE(r.score == doctest::Approx(l.score(id)).epsilon(1e-12));
        REQUIRE(l.stake(id).staked >= Tokens{});
      }
    }
  }

  TEST_CASE("event kinds round-trip through their names") {
    for (auto k : {EventKind::Enroll, EventKind::StakeDeposit, EventKind::PerfReward, EventKind::ContribReward,
                   EventKind::LongevityBonus, EventKind::StakeForfeit, EventKind::ReputationPenalty,
                   EventKind::TempBan, EventKind::PermBan, EventKind::BondPosted, EventKind::BondReturned,
                   EventKind::BondForfeit})
      CHECK(event_kind_from_string(to_string(k)) == k);
    CHECK_FALSE(event_kind_from_string("Bogus"));
    Ledger l{IncentivesConfig{}};
    l.enroll(B, Tokens::whole(1), 0.5, 0, "x");
    CHECK(l.events()[0].delta_text() == "0.5");
    CHECK(code_of([&] { l.enroll(B, Tokens::whole(1), 0.5, 0, "x"); }) == ErrorCode::DuplicateDevice);
  }
}
