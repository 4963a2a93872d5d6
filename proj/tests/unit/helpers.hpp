#pragma once

#include <optional>
#include <string>
#include <vector>

#include "gdp/anomaly.hpp"
#include "gdp/incentives.hpp"
#include "gdp/onboarding.hpp"
#include "gdp/registry.hpp"
#include "gdp/transmission.hpp"

namespace gdp::test {

inline SecretKey secret_from(SeededRng& rng) {
  SecretKey s;
  for (auto& b : s.bytes) b = static_cast<std::uint8_t>(rng.next_u64());
  return s;
}

struct Device {
  DeviceId id;
  KeyPair keys;
  SecretKey secret;
};

/// Registry, ledger and onboarding service wired together, with a helper
/// that walks a device through every onboarding stage.
struct Network {
  explicit Network(std::uint64_t seed = 1, OnboardingConfig ob = {}, IncentivesConfig inc = {})
      : rng(seed),
        ledger(inc),
        quarantine(registry, 100),
        onboarding(ob, registry, ledger, SeededRng(seed ^ 0x5eed), &log) {}

  onboarding::RegistrationRequest request(const KeyPair& keys, const SecretKey& secret, unsigned roles = 0,
                                          std::string group = "") {
    onboarding::RegistrationRequest r;
    r.model = "m1";
    r.version = "1.0.0";
    r.public_key = keys.public_key();
    r.sealed_secret = secret;
    r.secret_commitment = digest(ByteView(secret.bytes));
    r.roles = roles;
    r.operator_group = group.empty() ? keys.public_key().hex().substr(0, 8) : group;
    return r;
  }

  /// Runs the pipeline up to BehaviorScored; returns the session id.
  std::uint64_t pass_checks(const KeyPair& keys, const SecretKey& secret, Tick tick, unsigned roles = 0,
                            std::string group = "") {
    using onboarding::Action;
    const auto sid = onboarding.submit_registration(request(keys, secret, roles, std::move(group)), tick).id;
    const auto c = onboarding.issue_challenge(sid, tick);
    onboarding.verify_challenge_response(sid, onboarding::challenge_response(secret, c), tick);
    onboarding.verify_mfa(sid, onboarding::totp_code(secret, tick, onboarding.config().totp_window), tick);
    onboarding.score_behavior(sid, {{Action::Register, tick},
                                    {Action::ReceiveChallenge, tick},
                                    {Action::AnswerChallenge, tick},
                                    {Action::SubmitMfa, tick}});
    return sid;
  }

  Device onboard(unsigned roles = 0, std::string group = "", double rep = 0.5, Tokens stake = Tokens::whole(100),
                 Tick tick = 0) {
    const auto keys = KeyPair::generate(rng);
    const auto secret = secret_from(rng);
    const auto sid = pass_checks(keys, secret, tick, roles, std::move(group));
    return {onboarding.finalize_device(sid, stake, tick, rep), keys, secret};
  }

  SeededRng rng;
  EventLog log;
  DeviceRegistry registry;
  incentives::Ledger ledger;
  anomaly::QuarantineBook quarantine;
  onboarding::OnboardingService onboarding;
};

inline transmission::Salt salt_of(int i) {
  transmission::Salt s{};
  s[0] = static_cast<std::uint8_t>(i);
  s[15] = 0xab;
  return s;
}

struct Bench {
  Network net;
  std::vector<Device> witnesses;
  Device sender;
  Device receiver;
  transmission::TransmissionPool pool;

  explicit Bench(int n_witnesses = 5, PanelConfig cfg = {}) : pool(cfg, &net.log) {
    sender = net.onboard(role::kSender);
    receiver = net.onboard(role::kSender);
    for (int i = 0; i < n_witnesses; ++i) witnesses.push_back(net.onboard(role::kWitness));
  }

  const Device& device(DeviceId id) const {
    for (const auto& w : witnesses)
      if (w.id == id) return w;
    return sender;
  }

  Digest submit(std::uint64_t nonce, Tick tick = 0) {
    transmission::DataTransaction t;
    t.sender = sender.id;
    t.receiver = receiver.id;
    t.sender_key = sender.keys.public_key();
    t.receiver_key = receiver.keys.public_key();
    t.payload_digest = digest("payload" + std::to_string(nonce));
    t.nonce = nonce;
    t.created_tick = tick;
    t.id = transmission::transaction_id(t.sender_key, t.receiver_key, t.payload_digest, nonce, tick);
    return pool.submit(t, tick).id;
  }

  /// Opens a round with a fresh panel and commits the given verdicts.
  void witness(const Digest& id, const std::vector<Verdict>& verdicts, Tick tick = 0, std::uint64_t seed = 1) {
    SeededRng rng(seed);
    auto panel = transmission::select_witnesses(net.registry, net.ledger, pool.at(id), pool.config(), rng, {}, tick);
    pool.open_round(id, panel, tick);
    const auto& txn = pool.at(id);
    for (std::size_t i = 0; i < txn.panel.size(); ++i) {
      const auto& w = device(txn.panel[i]);
      pool.witness_commit(id, transmission::make_attestation(w.keys, w.id, id, verdicts[i], salt_of(static_cast<int>(i))),
                          w.keys.public_key(), tick);
    }
  }

  void reveal_all(const Digest& id, const std::vector<Verdict>& verdicts, Tick tick) {
    const auto panel = pool.at(id).panel;
    for (std::size_t i = 0; i < panel.size(); ++i)
      pool.witness_reveal(id, panel[i], verdicts[i], salt_of(static_cast<int>(i)), tick);
  }

  /// Submits and runs an all-Valid round through to Witnessed.
  Digest witnessed(std::uint64_t nonce, Tick tick = 0) {
    const auto id = submit(nonce, tick);
    const std::vector<Verdict> all(static_cast<std::size_t>(pool.config().k), Verdict::Valid);
    witness(id, all, tick, nonce);
    reveal_all(id, all, tick + 1);
    pool.aggregate_attestations(id, tick + 1);
    return id;
  }
};

}  // namespace gdp::test
