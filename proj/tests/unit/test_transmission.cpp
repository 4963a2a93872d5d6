#include <doctest.h>

#include <set>

#include "gdp/error.hpp"
#include "gdp/transmission.hpp"
#include "helpers.hpp"

using namespace gdp;
using namespace gdp::transmission;
using gdp::test::Device;
using gdp::test::Network;
using gdp::test::Bench;
using gdp::test::salt_of;

namespace {

ErrorCode code_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("no error thrown");
  return ErrorCode::InvalidConfig;
}

/// Brute-force statement of the quorum rule, independent of aggregate_rule.
TxnStatus rule_oracle(const std::vector<bool>& reveals, int quorum) {
  const int k = static_cast<int>(reveals.size());
  int valid = 0;
  for (bool v : reveals) valid += v ? 1 : 0;
  if (valid >= quorum) return TxnStatus::Witnessed;
  if (k - valid >= quorum) return TxnStatus::Rejected;
  return TxnStatus::Disputed;
}

const Verdict V = Verdict::Valid;
const Verdict I = Verdict::Invalid;

}  // namespace

TEST_SUITE("transmission") {
  TEST_CASE("aggregate rule matches brute force over every pattern, k <= 7") {
    for (int k = 1; k <= 7; ++k)
      for (int q = 1; q <= k; ++q)
        for (unsigned mask = 0; mask < (1u << k); ++mask) {
          std::vector<bool> reveals;
          for (int i = 0; i < k; ++i) reveals.push_back((mask >> i) & 1u);
          const int valid = __builtin_popcount(mask);
          REQUIRE(aggregate_rule(valid, k - valid, k, q) == rule_oracle(reveals, q));
        }
    CHECK(aggregate_rule(5, 0, 5, 4) == TxnStatus::Witnessed);
    CHECK(aggregate_rule(3, 2, 5, 4) == TxnStatus::Disputed);
    CHECK(aggregate_rule(1, 4, 5, 4) == TxnStatus::Rejected);
  }

  TEST_CASE("monotone safety: f liars reach Witnessed on a tampered txn only if f >= q") {
    // Honest witnesses say Invalid on a tampered payload; liars say Valid.
    for (int k = 1; k <= 7; ++k)
      for (int q = 1; q <= k; ++q)
        for (unsigned liars = 0; liars < (1u << k); ++liars) {
          const int f = __builtin_popcount(liars);
          const bool witnessed = aggregate_rule(f, k - f, k, q) == TxnStatus::Witnessed;
          REQUIRE(witnessed == (f >= q));
        }
  }

  TEST_CASE("default quorum is ceil(2k/3)") {
    for (int k = 1; k <= 12; ++k) {
      PanelConfig c;
      c.k = k;
      CHECK(c.effective_quorum() == (2 * k + 2) / 3);
      CHECK(c.effective_quorum() * 3 >= 2 * k);
    }
  }

  TEST_CASE("selection: exact pool, exclusions, diversity") {
    Bench b(5);
    SeededRng rng(1);
    const auto id = b.submit(1);
    auto panel = select_witnesses(b.net.registry, b.net.ledger, b.pool.at(id), b.pool.config(), rng);
    std::set<DeviceId> got(panel.begin(), panel.end());
    CHECK(got.size() == 5);
    for (const auto& w : b.witnesses) CHECK(got.count(w.id) == 1);

    // Sender also a witness: never drawn.
    Network net;
    const auto s = net.onboard(role::kSender | role::kWitness);
    const auto r = net.onboard(role::kSender);
    for (int i = 0; i < 6; ++i) net.onboard(role::kWitness);
    DataTransaction t;
    t.sender = s.id;
    t.receiver = r.id;
    PanelConfig cfg;
    for (std::uint64_t seed = 0; seed < 10000; ++seed) {
      SeededRng rr(seed);
      for (auto w : select_witnesses(net.registry, net.ledger, t, cfg, rr)) REQUIRE((w != s.id && w != r.id));
    }
  }

  TEST_CASE("selection respects operator-group diversity") {
    Network net;
    const auto s = net.onboard(role::kSender);
    const auto r = net.onboard(role::kSender);
    for (int g = 0; g < 5; ++g)
      for (int j = 0; j < 3; ++j) net.onboard(role::kWitness, "g" + std::to_string(g));
    DataTransaction t;
    t.sender = s.id;
    t.receiver = r.id;
    PanelConfig cfg;
    for (std::uint64_t seed = 0; seed < 500; ++seed) {
      SeededRng rng(seed);
      std::set<std::string> groups;
      for (auto w : select_witnesses(net.registry, net.ledger, t, cfg, rng)) groups.insert(net.registry.at(w).operator_group);
      REQUIRE(groups.size() == 5);
    }
    cfg.k = 6;
    SeededRng rng(1);
    CHECK(code_of([&] { select_witnesses(net.registry, net.ledger, t, cfg, rng); }) ==
          ErrorCode::InsufficientWitnesses);
  }

  TEST_CASE("selection frequency follows reputation 0.9 : 0.3") {
    Network net;
    const auto s = net.onboard(role::kSender);
    const auto r = net.onboard(role::kSender);
    const auto hi = net.onboard(role::kWitness, "", 0.9);
    const auto lo = net.onboard(role::kWitness, "", 0.3);
    DataTransaction t;
    t.sender = s.id;
    t.receiver = r.id;
    PanelConfig cfg;
    cfg.k = 1;
    int hi_count = 0;
    int lo_count = 0;
    for (std::uint64_t seed = 0; seed < 100000; ++seed) {
      SeededRng rng(seed);
      const auto w = select_witnesses(net.registry, net.ledger, t, cfg, rng).front();
      (w == hi.id ? hi_count : lo_count) += 1;
    }
    const double ratio = static_cast<double>(hi_count) / lo_count;
    CHECK(ratio == doctest::Approx(3.0).epsilon(0.05));
  }

  TEST_CASE("raising one reputation never lowers its selection frequency") {
    auto freq = [](double rep) {
      Network net;
      const auto s = net.onboard(role::kSender);
      const auto r = net.onboard(role::kSender);
      const auto target = net.onboard(role::kWitness, "", rep);
      for (int i = 0; i < 5; ++i) net.onboard(role::kWitness, "", 0.5);
      DataTransaction t;
      t.sender = s.id;
      t.receiver = r.id;
      PanelConfig cfg;
      cfg.k = 2;
      int hits = 0;
      for (std::uint64_t seed = 0; seed < 100000; ++seed) {
        SeededRng rng(seed);
        for (auto w : select_witnesses(net.registry, net.ledger, t, cfg, rng)) hits += w == target.id;
      }
      return hits / 100000.0;
    };
    double prev = 0.0;
    for (double rep : {0.1, 0.3, 0.5, 0.7, 0.9}) {
      const double f = freq(rep);
      CHECK(f >= prev - 0.01);
      prev = f;
    }
  }

  TEST_CASE("commit phase: hidden verdict, double commit, non-panel") {
    Bench b(6);
    const auto id = b.submit(1);
    b.witness(id, {V, V, V, V, V});
    const auto& txn = b.pool.at(id);
    for (const auto& a : txn.attestations) CHECK_FALSE(a.revealed_verdict);
    const auto& w = b.device(txn.panel[0]);
    CHECK(code_of([&] {
            b.pool.witness_commit(id, make_attestation(w.keys, w.id, id, V, salt_of(9)), w.keys.public_key(), 0);
          }) == ErrorCode::AlreadyCommitted);
    DeviceId outsider{};
    for (const auto& x : b.witnesses)
      if (!txn.on_panel(x.id)) outsider = x.id;
    const auto& o = b.device(outsider);
    CHECK(code_of([&] {
            b.pool.witness_commit(id, make_attestation(o.keys, o.id, id, V, salt_of(9)), o.keys.public_key(), 0);
          }) == ErrorCode::NotOnPanel);
  }

  TEST_CASE("commit with a forged signature is refused") {
    Bench b(5);
    const auto id = b.submit(1);
    SeededRng rng(1);
    b.pool.open_round(id, select_witnesses(b.net.registry, b.net.ledger, b.pool.at(id), b.pool.config(), rng), 0);
    const auto& w = b.device(b.pool.at(id).panel[0]);
    const auto& other = b.device(b.pool.at(id).panel[1]);
    auto a = make_attestation(other.keys, w.id, id, V, salt_of(1));
    a.witness = w.keys.public_key();
    CHECK(code_of([&] { b.pool.witness_commit(id, a, w.keys.public_key(), 0); }) == ErrorCode::BadSignature);
  }

  TEST_CASE("reveal: too early, matching, mismatched") {
    Bench b(5);
    const auto id = b.submit(1);
    SeededRng rng(1);
    b.pool.open_round(id, select_witnesses(b.net.registry, b.net.ledger, b.pool.at(id), b.pool.config(), rng), 0);
    const auto panel = b.pool.at(id).panel;
    const auto& w0 = b.device(panel[0]);
    b.pool.witness_commit(id, make_attestation(w0.keys, w0.id, id, V, salt_of(0)), w0.keys.public_key(), 0);
    CHECK(code_of([&] { b.pool.witness_reveal(id, w0.id, V, salt_of(0), 5); }) == ErrorCode::RevealTooEarly);
    for (std::size_t i = 1; i < panel.size(); ++i) {
      const auto& w = b.device(panel[i]);
      b.pool.witness_commit(id, make_attestation(w.keys, w.id, id, V, salt_of(static_cast<int>(i))),
                            w.keys.public_key(), 1);
    }
    b.pool.witness_reveal(id, w0.id, V, salt_of(0), 2);
    CHECK(b.pool.at(id).attestation_of(w0.id)->revealed_verdict == V);
    CHECK(code_of([&] { b.pool.witness_reveal(id, panel[1], I, salt_of(1), 2); }) == ErrorCode::CommitMismatch);
    CHECK(b.pool.at(id).attestation_of(panel[1])->equivocated);
    const auto pen = b.pool.take_penalties();
    REQUIRE(pen.size() == 1);
    CHECK(pen[0].subject == panel[1]);
    CHECK(pen[0].severity == incentives::Severity::Major);
  }

  TEST_CASE("reveal opens at the deadline even with missing commits") {
    Bench b(5);
    const auto id = b.submit(1);
    SeededRng rng(1);
    b.pool.open_round(id, select_witnesses(b.net.registry, b.net.ledger, b.pool.at(id), b.pool.config(), rng), 0);
    const auto& w = b.device(b.pool.at(id).panel[0]);
    b.pool.witness_commit(id, make_attestation(w.keys, w.id, id, V, salt_of(0)), w.keys.public_key(), 0);
    CHECK_FALSE(b.pool.reveal_open(b.pool.at(id), 19));
    CHECK(b.pool.reveal_open(b.pool.at(id), 20));
    b.pool.witness_reveal(id, w.id, V, salt_of(0), 20);
    CHECK(b.pool.aggregate_attestations(id, 20) == TxnStatus::Rejected);
    CHECK(b.pool.take_penalties().size() == 4);  // four lazy witnesses
  }

  TEST_CASE("aggregation outcomes for k=5, q=4") {
    PanelConfig cfg;
    cfg.quorum = 4;
    const std::vector<std::pair<std::vector<Verdict>, TxnStatus>> cases = {
        {{V, V, V, V, V}, TxnStatus::Witnessed},
        {{V, V, V, I, I}, TxnStatus::Disputed},
        {{V, I, I, I, I}, TxnStatus::Rejected},
    };
    for (const auto& [verdicts, expected] : cases) {
      Bench b(5, cfg);
      const auto id = b.submit(1);
      b.witness(id, verdicts);
      b.reveal_all(id, verdicts, 1);
      CHECK(b.pool.aggregate_attestations(id, 1) == expected);
    }
  }

  TEST_CASE("aggregation is invariant to reveal order") {
    PanelConfig cfg;
    cfg.quorum = 4;
    const std::vector<Verdict> verdicts{V, I, V, V, I};
    std::optional<TxnStatus> first;
    for (int perm = 0; perm < 5; ++perm) {
      Bench b(5, cfg);
      const auto id = b.submit(1);
      b.witness(id, verdicts);
      const auto panel = b.pool.at(id).panel;
      for (std::size_t j = 0; j < panel.size(); ++j) {
        const std::size_t i = (j + static_cast<std::size_t>(perm)) % panel.size();
        b.pool.witness_reveal(id, panel[i], verdicts[i], salt_of(static_cast<int>(i)), 1);
      }
      const auto st = b.pool.aggregate_attestations(id, 1);
      if (!first) first = st;
      CHECK(st == *first);
    }
  }

  TEST_CASE("re-escalation draws a disjoint panel; cap exhausts to rejection") {
    PanelConfig cfg;
    cfg.quorum = 4;
    for (std::uint64_t seed = 0; seed < 1000; ++seed) {
      Bench b(15, cfg);
      const auto id = b.submit(1);
      b.witness(id, {V, V, V, I, I}, 0, seed);
      b.reveal_all(id, {V, V, V, I, I}, 1);
      REQUIRE(b.pool.aggregate_attestations(id, 1) == TxnStatus::Disputed);
      const auto first = b.pool.at(id).panel;
      SeededRng rng(seed + 1);
      REQUIRE(b.pool.reescalate_disputed(id, b.net.registry, b.net.ledger, rng, 2) == EscalationResult::Reescalated);
      for (auto w : b.pool.at(id).panel)
        REQUIRE(std::find(first.begin(), first.end(), w) == first.end());
      if (seed > 20) continue;
      // Round 2 with an honest panel resolves the dispute.
      const auto& txn = b.pool.at(id);
      for (std::size_t i = 0; i < txn.panel.size(); ++i) {
        const auto& w = b.device(txn.panel[i]);
        b.pool.witness_commit(id, make_attestation(w.keys, w.id, id, V, salt_of(static_cast<int>(i))),
                              w.keys.public_key(), 2);
      }
      b.reveal_all(id, {V, V, V, V, V}, 3);
      CHECK(b.pool.aggregate_attestations(id, 3) == TxnStatus::Witnessed);
    }

    Bench b(15, cfg);
    const auto id = b.submit(1);
    const std::vector<Verdict> split{V, V, V, I, I};
    b.witness(id, split);
    b.reveal_all(id, split, 1);
    b.pool.aggregate_attestations(id, 1);
    for (int round = 0; round < 2; ++round) {
      SeededRng rng(static_cast<std::uint64_t>(round) + 50);
      REQUIRE(b.pool.reescalate_disputed(id, b.net.registry, b.net.ledger, rng, 2 + round * 2) ==
              EscalationResult::Reescalated);
      const auto& txn = b.pool.at(id);
      for (std::size_t i = 0; i < txn.panel.size(); ++i) {
        const auto& w = b.device(txn.panel[i]);
        b.pool.witness_commit(id, make_attestation(w.keys, w.id, id, split[i], salt_of(static_cast<int>(i))),
                              w.keys.public_key(), 2 + round * 2);
      }
      b.reveal_all(id, split, 3 + round * 2);
      REQUIRE(b.pool.aggregate_attestations(id, 3 + round * 2) == TxnStatus::Disputed);
    }
    SeededRng rng(99);
    CHECK(b.pool.reescalate_disputed(id, b.net.registry, b.net.ledger, rng, 10) == EscalationResult::Exhausted);
    CHECK(b.pool.at(id).exhausted);
    CHECK(b.pool.at(id).status == TxnStatus::Rejected);
    bool logged = false;
    for (const auto& e : b.net.log.events()) logged = logged || e.event == "escalation_exhausted";
    CHECK(logged);
  }

  TEST_CASE("witness evaluation after commit") {
    PanelConfig cfg;
    cfg.quorum = 4;
    {
      Bench b(5, cfg);
      const auto id = b.submit(1);
      b.witness(id, {V, V, V, V, V});
      b.reveal_all(id, {V, V, V, V, V}, 1);
      b.pool.aggregate_attestations(id, 1);
      b.pool.mark_committed(id, 2);
      const auto ev = b.pool.evaluate_witnesses(id);
      CHECK(std::count_if(ev.begin(), ev.end(), [](const auto& e) { return e.correct; }) == 5);
    }
    {
      Bench b(5, cfg);
      const auto id = b.submit(1);
      const std::vector<Verdict> v{V, V, V, V, I};
      b.witness(id, v);
      b.reveal_all(id, v, 1);
      b.pool.aggregate_attestations(id, 1);
      b.pool.mark_committed(id, 2);
      const auto ev = b.pool.evaluate_witnesses(id);
      CHECK(std::count_if(ev.begin(), ev.end(), [](const auto& e) { return e.correct; }) == 4);
      CHECK(std::count_if(ev.begin(), ev.end(), [](const auto& e) { return e.penalty.has_value(); }) == 1);
    }
    {
      // Equivocator: penalized whatever the outcome.
      Bench b(5, cfg);
      const auto id = b.submit(1);
      const std::vector<Verdict> v{V, V, V, V, V};
      b.witness(id, v);
      const auto panel = b.pool.at(id).panel;
      for (std::size_t i = 0; i < 4; ++i) b.pool.witness_reveal(id, panel[i], V, salt_of(static_cast<int>(i)), 1);
      CHECK_THROWS(b.pool.witness_reveal(id, panel[4], I, salt_of(4), 1));
      b.pool.aggregate_attestations(id, 1);
      b.pool.mark_committed(id, 2);
      const auto ev = b.pool.evaluate_witnesses(id);
      const auto it = std::find_if(ev.begin(), ev.end(), [&](const auto& e) { return e.witness == panel[4]; });
      REQUIRE(it != ev.end());
      CHECK(it->penalty == incentives::Severity::Major);
      CHECK(it->penalized_earlier);
    }
  }

  TEST_CASE("nonces strictly increase per sender") {
    Bench b(5);
    b.submit(3);
    CHECK(code_of([&] { b.submit(3, 1); }) == ErrorCode::NonceReplay);
    CHECK(code_of([&] { b.submit(2, 1); }) == ErrorCode::NonceReplay);
    b.submit(4, 1);
    CHECK(b.pool.last_nonce(b.sender.id) == 4);
  }

  TEST_CASE("commit binding holds for every accepted reveal") {
    Bench b(7);
    for (std::uint64_t n = 1; n <= 20; ++n) {
      const auto id = b.submit(n, static_cast<Tick>(n));
      std::vector<Verdict> v;
      for (int i = 0; i < 5; ++i) v.push_back((n + i) % 3 ? V : I);
      b.witness(id, v, static_cast<Tick>(n), n);
      b.reveal_all(id, v, static_cast<Tick>(n) + 1);
      for (const auto& a : b.pool.at(id).attestations) REQUIRE(verdict_commit(*a.revealed_verdict, *a.salt) == a.commit);
    }
  }
}
