#include <doctest.h>

#include "gdp/error.hpp"
#include "helpers.hpp"

using namespace gdp;
using namespace gdp::onboarding;
using gdp::test::Network;

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

struct Fresh {
  Network net;
  KeyPair keys;
  SecretKey secret;
  Fresh() : keys(KeyPair::generate(net.rng)), secret(test::secret_from(net.rng)) {}
  std::uint64_t submit(Tick tick = 0) { return net.onboarding.submit_registration(net.request(keys, secret), tick).id; }
};

}  // namespace

TEST_SUITE("onboarding") {
  TEST_CASE("registration issues a temp credential") {
    Fresh f;
    const auto sid = f.submit(3);
    const auto& s = f.net.onboarding.session(sid);
    CHECK(s.stage == Stage::TempCredentialed);
    REQUIRE(s.temp_credential);
    CHECK(s.temp_credential->expires == 3 + f.net.onboarding.config().temp_credential_ttl);
  }

  TEST_CASE("duplicate key and malformed metadata") {
    Fresh f;
    f.submit();
    CHECK(code_of([&] { f.submit(); }) == ErrorCode::DuplicateDevice);
    auto req = f.net.request(KeyPair::generate(f.net.rng), f.secret);
    req.model.clear();
    CHECK(code_of([&] { f.net.onboarding.submit_registration(req, 0); }) == ErrorCode::MalformedRequest);
    req.model = "m";
    req.version = "1.0";
    CHECK(code_of([&] { f.net.onboarding.submit_registration(req, 0); }) == ErrorCode::MalformedRequest);
  }

  TEST_CASE("blacklisted key is refused") {
    OnboardingConfig cfg;
    Network probe;
    const auto keys = KeyPair::generate(probe.rng);
    cfg.blacklist.push_back(keys.public_key().hex());
    Network net(1, cfg);
    CHECK(code_of([&] { net.onboarding.submit_registration(net.request(keys, test::secret_from(net.rng)), 0); }) ==
          ErrorCode::Blacklisted);
  }

  TEST_CASE("challenge stage and expiry errors") {
    Fresh f;
    const auto sid = f.submit(0);
    const auto c1 = f.net.onboarding.issue_challenge(sid, 0);
    const auto c2 = f.net.onboarding.issue_challenge(sid, 1);
    CHECK(c1.nonce != c2.nonce);
    CHECK(c2.ttl == 10);

    Fresh g;
    const auto late = g.submit(0);
    CHECK(code_of([&] { g.net.onboarding.issue_challenge(late, 51); }) == ErrorCode::CredentialExpired);

    Fresh h;
    const auto sid3 = h.net.pass_checks(h.keys, h.secret, 0);
    h.net.onboarding.finalize_device(sid3, Tokens::whole(100), 0, 0.5);
    CHECK(code_of([&] { h.net.onboarding.issue_challenge(sid3, 0); }) == ErrorCode::WrongStage);
  }

  TEST_CASE("challenge response: honest, random, replayed, expired") {
    Fresh f;
    const auto sid = f.submit();
    CHECK(code_of([&] { f.net.onboarding.verify_challenge_response(sid, Digest{}, 0); }) ==
          ErrorCode::NoActiveChallenge);
    const auto c = f.net.onboarding.issue_challenge(sid, 0);
    CHECK(f.net.onboarding.verify_challenge_response(sid, challenge_response(f.secret, c), 2));
    CHECK(f.net.onboarding.session(sid).stage == Stage::ChallengePassed);

    Fresh g;
    const auto s2 = g.submit();
    g.net.onboarding.issue_challenge(s2, 0);
    CHECK_FALSE(g.net.onboarding.verify_challenge_response(s2, digest("random"), 0));
    CHECK(g.net.onboarding.session(s2).stage == Stage::Rejected);

    // Replay: answer the first challenge, then present that answer to a reissued one.
    Fresh r;
    const auto s3 = r.submit();
    const auto old = r.net.onboarding.issue_challenge(s3, 0);
    const auto old_answer = challenge_response(r.secret, old);
    const auto fresh = r.net.onboarding.issue_challenge(s3, 1);
    CHECK(fresh.nonce != old.nonce);
    CHECK_FALSE(r.net.onboarding.verify_challenge_response(s3, old_answer, 1));

    Fresh e;
    const auto s4 = e.submit();
    const auto c4 = e.net.onboarding.issue_challenge(s4, 0);
    CHECK(code_of([&] { e.net.onboarding.verify_challenge_response(s4, challenge_response(e.secret, c4), 11); }) ==
          ErrorCode::ChallengeExpired);
  }

  TEST_CASE("totp windows: current and -1 accepted, -2 rejected") {
    for (int back : {0, 1, 2}) {
      Fresh f;
      const auto sid = f.submit(100);
      const auto c = f.net.onboarding.issue_challenge(sid, 100);
      f.net.onboarding.verify_challenge_response(sid, challenge_response(f.secret, c), 100);
      const std::int64_t w = 100 / 30;
      const bool ok = f.net.onboarding.verify_mfa(sid, totp_for_window(f.secret, w - back), 100);
      CHECK(ok == (back < 2));
      CHECK(f.net.onboarding.session(sid).stage == (back < 2 ? Stage::MfaPassed : Stage::Rejected));
    }
  }

  TEST_CASE("totp is six digits and matches the window of the tick") {
    SeededRng rng(9);
    const auto s = test::secret_from(rng);
    for (Tick t = 0; t < 300; t += 7) {
      CHECK(totp_code(s, t, 30) < 1000000u);
      CHECK(totp_code(s, t, 30) == totp_for_window(s, t / 30));
    }
  }

  TEST_CASE("mfa before challenge is WrongStage") {
    Fresh f;
    const auto sid = f.submit();
    CHECK(code_of([&] { f.net.onboarding.verify_mfa(sid, 0, 0); }) == ErrorCode::WrongStage);
  }

  TEST_CASE("behavior checklist scores") {
    OnboardingConfig cfg;
    using A = Action;
    const std::vector<TraceEntry> perfect{{A::Register, 0}, {A::ReceiveChallenge, 1}, {A::AnswerChallenge, 2},
                                          {A::SubmitMfa, 3}};
    CHECK(behavior_checklist(cfg, perfect, 0, 50) == doctest::Approx(1.0));
    // Out of order, three retries, slow answer, past credential expiry.
    const std::vector<TraceEntry> bad{{A::Register, 60}, {A::ReceiveChallenge, 5}, {A::Retry, 6},  {A::Retry, 7},
                                      {A::Retry, 8},     {A::AnswerChallenge, 40}};
    CHECK(behavior_checklist(cfg, bad, 0, 50) == doctest::Approx(0.0));
    // Fails ordering and retries only: exactly half the weight.
    const std::vector<TraceEntry> half{{A::ReceiveChallenge, 5}, {A::AnswerChallenge, 6}, {A::Retry, 4},
                                       {A::Retry, 7}};
    CHECK(behavior_checklist(cfg, half, 0, 50) == doctest::Approx(0.5));
  }

  TEST_CASE("score threshold is inclusive") {
    using A = Action;
    Fresh f;
    const auto sid = f.submit();
    const auto c = f.net.onboarding.issue_challenge(sid, 0);
    f.net.onboarding.verify_challenge_response(sid, challenge_response(f.secret, c), 0);
    f.net.onboarding.verify_mfa(sid, totp_code(f.secret, 0, 30), 0);
    const double s = f.net.onboarding.score_behavior(
        sid, {{A::ReceiveChallenge, 5}, {A::AnswerChallenge, 6}, {A::Retry, 4}, {A::Retry, 7}});
    CHECK(s == doctest::Approx(0.5));
    CHECK(f.net.onboarding.session(sid).stage == Stage::BehaviorScored);

    Fresh g;
    const auto s2 = g.submit();
    const auto c2 = g.net.onboarding.issue_challenge(s2, 0);
    g.net.onboarding.verify_challenge_response(s2, challenge_response(g.secret, c2), 0);
    g.net.onboarding.verify_mfa(s2, totp_code(g.secret, 0, 30), 0);
    g.net.onboarding.score_behavior(s2, {{A::Register, 60}, {A::ReceiveChallenge, 5}, {A::Retry, 6}, {A::Retry, 7},
                                         {A::Retry, 8}, {A::AnswerChallenge, 40}});
    CHECK(g.net.onboarding.session(s2).stage == Stage::Rejected);
    CHECK(code_of([&] { g.net.onboarding.finalize_device(s2, Tokens::whole(100), 0, 0.5); }) ==
          ErrorCode::WrongStage);
  }

  TEST_CASE("finalize: stake boundary and profile") {
    Fresh f;
    const auto sid = f.net.pass_checks(f.keys, f.secret, 0);
    CHECK(code_of([&] { f.net.onboarding.finalize_device(sid, Tokens::whole(99), 0, 0.5); }) ==
          ErrorCode::InsufficientStake);
    const auto id = f.net.onboarding.finalize_device(sid, Tokens::whole(100), 4, 0.5);
    const auto& p = f.net.registry.at(id);
    CHECK(p.status == DeviceStatus::Active);
    CHECK(p.onboarded_tick == 4);
    CHECK(f.net.ledger.stake(id).staked == Tokens::whole(100));
    const auto& s = f.net.onboarding.session(sid);
    CHECK_FALSE(s.temp_credential);
    CHECK(s.history == std::vector<Stage>{Stage::Registered, Stage::TempCredentialed, Stage::ChallengePassed,
                                          Stage::MfaPassed, Stage::BehaviorScored, Stage::Finalized});
  }

  TEST_CASE("temp credentials never authenticate") {
    Fresh f;
    const auto sid = f.submit();
    const auto token = f.net.onboarding.session(sid).temp_credential->token;
    CHECK(code_of([&] { f.net.onboarding.authenticate(token); }) == ErrorCode::TempCredentialRejected);
    const auto c = f.net.onboarding.issue_challenge(sid, 0);
    f.net.onboarding.verify_challenge_response(sid, challenge_response(f.secret, c), 0);
    f.net.onboarding.verify_mfa(sid, totp_code(f.secret, 0, 30), 0);
    f.net.onboarding.score_behavior(sid, {{Action::Register, 0}});
    const auto id = f.net.onboarding.finalize_device(sid, Tokens::whole(100), 0, 0.5);
    CHECK(code_of([&] { f.net.onboarding.authenticate(token); }) == ErrorCode::TempCredentialRejected);
    CHECK(f.net.onboarding.authenticate(f.net.registry.at(id).credential) == id);
  }

  TEST_CASE("zero-stake sessions never produce Active profiles") {
    Network net;
    int active = 0;
    for (int i = 0; i < 1000; ++i) {
      const auto keys = KeyPair::generate(net.rng);
      const auto secret = test::secret_from(net.rng);
      const auto sid = net.pass_checks(keys, secret, 0);
      try {
        net.onboarding.finalize_device(sid, Tokens{}, 0, 0.5);
        ++active;
      } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::InsufficientStake);
      }
    }
    CHECK(active == 0);
    CHECK(net.registry.count_status(DeviceStatus::Active) == 0);
  }

  TEST_CASE("revalidation: honest, too early, swapped secret") {
    Network net;
    const auto d = net.onboard();
    CHECK(code_of([&] { net.onboarding.revalidate_device(d.id, SecretProver(d.secret), 499, net.quarantine); }) ==
          ErrorCode::TooEarly);
    CHECK(net.onboarding.revalidate_device(d.id, SecretProver(d.secret), 500, net.quarantine));
    CHECK(net.registry.at(d.id).last_revalidation_tick == 500);

    const auto swapped = test::secret_from(net.rng);
    CHECK_FALSE(net.onboarding.revalidate_device(d.id, SecretProver(swapped), 1000, net.quarantine));
    CHECK(net.registry.at(d.id).status == DeviceStatus::Quarantined);
  }

  TEST_CASE("feedback log keeps every record in order") {
    Network net;
    net.onboarding.record_feedback("d0", "a", 5);
    net.onboarding.record_feedback("d0", "b", 5);
    net.onboarding.record_feedback("s1", "", 6);
    REQUIRE(net.onboarding.feedback().size() == 3);
    CHECK(net.onboarding.feedback()[0].record == "a");
    CHECK(net.onboarding.feedback()[1].record == "b");
  }

  TEST_CASE("property: profiles only come from sessions that passed every stage") {
    for (std::uint64_t seed = 0; seed < 50; ++seed) {
      Network net(seed);
      SeededRng coin(seed * 31 + 7);
      for (int i = 0; i < 20; ++i) {
        const auto keys = KeyPair::generate(net.rng);
        const auto secret = test::secret_from(net.rng);
        const auto sid = net.onboarding.submit_registration(net.request(keys, secret), 0).id;
        try {
          const auto c = net.onboarding.issue_challenge(sid, 0);
          net.onboarding.verify_challenge_response(
              sid, coin.bernoulli(0.8) ? challenge_response(secret, c) : digest("x"), 0);
          net.onboarding.verify_mfa(sid, coin.bernoulli(0.8) ? totp_code(secret, 0, 30) : 1, 0);
          net.onboarding.score_behavior(sid, {{Action::Register, 0}});
          net.onboarding.finalize_device(sid, Tokens::whole(coin.bernoulli(0.8) ? 100 : 10), 0, 0.5);
        } catch (const Error&) {
        }
      }
      for (const auto& s : net.onboarding.sessions()) {
        const auto& h = s.history;
        // Stages only move forward, and Rejected is terminal.
        for (std::size_t i = 1; i < h.size(); ++i) REQUIRE(static_cast<int>(h[i]) > static_cast<int>(h[i - 1]));
        if (!s.profile) continue;
        for (auto st : {Stage::ChallengePassed, Stage::MfaPassed, Stage::BehaviorScored})
          REQUIRE(std::find(h.begin(), h.end(), st) != h.end());
        REQUIRE(std::find(h.begin(), h.end(), Stage::Rejected) == h.end());
      }
    }
  }
}
