#include <doctest.h>

#include <array>
#include <cmath>
#include <map>

#include "gdp/checks.hpp"
#include "gdp/error.hpp"
#include "helpers.hpp"

using namespace gdp;
using namespace gdp::checks;
using gdp::test::Bench;

TEST_SUITE("checks") {
  TEST_CASE("should_inspect extremes and rate") {
    const SeededRng base(3);
    int hits = 0;
    for (std::uint64_t t = 0; t < 100000; ++t) {
      REQUIRE_FALSE(should_inspect(base, 1, t, 0.0));
      REQUIRE(should_inspect(base, 1, t, 1.0));
      hits += should_inspect(base, 1, t, 0.05);
    }
    CHECK(std::abs(hits / 1e5 - 0.05) <= 0.003);
  }

  TEST_CASE("detected fraction stays within the binomial band") {
    const double p = 0.05;
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
      const SeededRng base(seed);
      const int n = 10000;
      int caught = 0;
      for (int i = 0; i < n; ++i) caught += should_inspect(base, static_cast<std::uint64_t>(i), 77, p);
      REQUIRE(std::abs(static_cast<double>(caught) / n - p) <= 3.0 * std::sqrt(p * (1 - p) / n) + 1e-12);
    }
  }

  TEST_CASE("draws depend only on seed, round and target") {
    const SeededRng base(9);
    std::vector<std::pair<std::uint64_t, std::uint64_t>> keys;
    for (std::uint64_t r = 0; r < 50; ++r)
      for (std::uint64_t t = 0; t < 40; ++t) keys.emplace_back(r, t * 7919);
    std::map<std::pair<std::uint64_t, std::uint64_t>, bool> forward;
    for (const auto& k : keys) forward[k] = should_inspect(base, k.first, k.second, 0.3);
    SeededRng shuffler(1);
    for (std::size_t i = keys.size(); i > 1; --i) std::swap(keys[i - 1], keys[shuffler.uniform_below(i)]);
    for (const auto& k : keys) REQUIRE(should_inspect(base, k.first, k.second, 0.3) == forward[k]);
    CHECK(base.counter() == 0);
    // Different rounds give different draws for the same target.
    int differ = 0;
    for (std::uint64_t r = 1; r < 200; ++r) differ += should_inspect(base, r, 5, 0.5) != should_inspect(base, 0, 5, 0.5);
    CHECK(differ > 50);
  }

  TEST_CASE("device inspection frequency over 1e4 onboardings") {
    const SeededRng base(21);
    int hits = 0;
    for (std::uint32_t id = 0; id < 10000; ++id) hits += should_inspect(base, 0, target_key(DeviceId{id}), 0.05);
    CHECK(std::abs(hits / 1e4 - 0.05) <= 0.01);
  }

  TEST_CASE("deep inspection of honest and tampered transactions") {
    Bench b(5);
    const auto id = b.witnessed(1);
    const auto& txn = b.pool.at(id);
    CHECK(deep_inspect_transaction(txn, txn.payload_digest, 3).passed);

    const auto bad = deep_inspect_transaction(txn, digest("tampered bytes"), 3);
    CHECK_FALSE(bad.passed);
    REQUIRE(bad.evidence.size() == 1);
    CHECK(bad.evidence[0].find(txn.payload_digest.hex()) != std::string::npos);
    CHECK(bad.row()[3] == "0");

    auto forged = txn;
    forged.attestations[2].revealed_verdict = Verdict::Invalid;
    const auto broken = deep_inspect_transaction(forged, txn.payload_digest, 3);
    CHECK_FALSE(broken.passed);
    CHECK(broken.evidence[0].rfind("commit_binding:", 0) == 0);
  }

  TEST_CASE("deep witness task compares the verdict against the recomputed digest") {
    Bench b(5);
    const auto id = b.witnessed(1);
    const auto& txn = b.pool.at(id);
    const auto& a = txn.attestations[0];
    CHECK(inspect_witness(a, txn, txn.payload_digest, 2).passed);
    CHECK_FALSE(inspect_witness(a, txn, digest("other"), 2).passed);
  }

  TEST_CASE("puzzle: expected attempts follow the geometric mean") {
    double total = 0.0;
    const int trials = 2000;
    for (int i = 0; i < trials; ++i) {
      const auto pd = digest("proposal" + std::to_string(i));
      const auto s = solve_puzzle(pd, 8, 1 << 20);
      REQUIRE(s.nonce);
      REQUIRE(puzzle_solved(pd, *s.nonce, 8));
      REQUIRE(leading_zero_bits(puzzle_digest(pd, *s.nonce)) >= 8);
      total += static_cast<double>(s.attempts);
    }
    const double mean = total / trials;
    MESSAGE("mean puzzle attempts " << mean);
    CHECK(std::abs(mean - 256.0) <= 25.6);
    CHECK(puzzle_solved(digest("x"), 12345, 0));
  }

  TEST_CASE("proposer challenge outcomes") {
    const auto pd = digest("p");
    const auto s = solve_puzzle(pd, 8, 1 << 20);
    CHECK(challenge_proposer(DeviceId{1}, pd, s.nonce, 8, 1).passed);
    CHECK_FALSE(challenge_proposer(DeviceId{1}, pd, std::nullopt, 8, 1).passed);
    std::uint64_t wrong = 0;
    while (puzzle_solved(pd, wrong, 8)) ++wrong;
    CHECK_FALSE(challenge_proposer(DeviceId{1}, pd, wrong, 8, 1).passed);
    CHECK(challenge_proposer(DeviceId{1}, pd, 0, 0, 1).passed);
  }

  TEST_CASE("leading zero bits") {
    Digest d{};
    CHECK(leading_zero_bits(d) == 256);
    d.bytes[0] = 0x01;
    CHECK(leading_zero_bits(d) == 7);
    d.bytes[0] = 0x00;
    d.bytes[1] = 0x40;
    CHECK(leading_zero_bits(d) == 9);
  }

  TEST_CASE("random validator subsets are uniform") {
    std::vector<DeviceId> eligible;
    for (std::uint32_t i = 0; i < 10; ++i) eligible.push_back(DeviceId{i});
    SeededRng rng(4);
    CHECK(pick_random_validators(eligible, rng, 10) == eligible);
    CHECK_THROWS_AS(pick_random_validators(eligible, rng, 11), Error);
    std::array<int, 10> counts{};
    const int rounds = 100000;
    for (int r = 0; r < rounds; ++r)
      for (auto v : pick_random_validators(eligible, rng, 3)) ++counts[v.value];
    for (int c : counts) CHECK(std::abs(static_cast<double>(c) / rounds - 0.3) <= 0.01);
  }

  TEST_CASE("commit delays are uniform on 0..max") {
    SeededRng rng(8);
    for (int i = 0; i < 1000; ++i) REQUIRE(random_commit_delay(rng, 0) == 0);
    std::array<int, 6> counts{};
    for (int i = 0; i < 100000; ++i) {
      const auto d = random_commit_delay(rng, 5);
      REQUIRE((d >= 0 && d <= 5));
      ++counts[static_cast<std::size_t>(d)];
    }
    for (int c : counts) CHECK(std::abs(c / 1e5 - 1.0 / 6.0) <= 0.01);
  }

  TEST_CASE("sync verification passes honest batches and names forgers") {
    gdp::test::Network net;
    std::vector<gdp::test::Device> voters;
    for (int i = 0; i < 3; ++i) voters.push_back(net.onboard(role::kValidator));
    std::vector<consensus::LedgerBlock> batch;
    Digest parent = consensus::genesis_block().block_digest;
    for (std::uint64_t h = 1; h <= 4; ++h) {
      consensus::LedgerBlock b;
      b.height = h;
      b.parent = parent;
      b.txn_ids = {digest("e" + std::to_string(h))};
      b.proposer = voters[0].id;
      b.proposer_key = voters[0].keys.public_key();
      b.block_digest = consensus::compute_block_digest(h, parent, b.txn_ids, b.proposer_key);
      for (const auto& v : voters) b.votes.push_back(consensus::make_vote(v.keys, v.id, b.block_digest, true, 1.0));
      parent = b.block_digest;
      batch.push_back(b);
    }
    const auto genesis = consensus::genesis_block().block_digest;
    CHECK(verify_sync_integrity(batch, genesis, 1, ConsensusConfig{}, "N1", 5).passed);

    const auto forger = net.onboard(role::kValidator);
    auto forged = batch;
    for (auto& v : forged[2].votes) v.signature = forger.keys.sign(consensus::vote_message(v.proposal_digest, v.accept));
    const auto out = verify_sync_integrity(forged, genesis, 1, ConsensusConfig{}, "N1", 5);
    CHECK_FALSE(out.passed);
    CHECK(out.evidence.size() == 3);
    CHECK(out.evidence[0].find(forger.keys.public_key().hex()) != std::string::npos);

    auto relinked = batch;
    relinked[1].txn_ids.push_back(digest("extra"));
    CHECK_FALSE(verify_sync_integrity(relinked, genesis, 1, ConsensusConfig{}, "N1", 5).passed);
  }
}
