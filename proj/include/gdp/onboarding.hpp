#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "gdp/anomaly.hpp"
#include "gdp/config.hpp"
#include "gdp/event_log.hpp"
#include "gdp/incentives.hpp"
#include "gdp/registry.hpp"
#include "gdp/rng.hpp"

namespace gdp::onboarding {

enum class Stage { Registered, TempCredentialed, ChallengePassed, MfaPassed, BehaviorScored, Finalized, Rejected };
const char* to_string(Stage s) noexcept;

using ChallengeNonce = std::array<std::uint8_t, 16>;

/// Registration metadata. The device's attestation secret travels sealed to
/// the network; `secret_commitment` must equal digest(secret).
struct RegistrationRequest {
  DeviceType device_type = DeviceType::Sensor;
  std::string model;
  std::string version;
  PublicKey public_key;
  bool encrypted = true;
  SecretKey sealed_secret;
  Digest secret_commitment;
  // Profile attributes carried through to the registry.
  std::string operator_group;
  unsigned roles = 0;
  std::vector<std::string> expertise;
};

struct TempCredential {
  Digest token;
  Tick expires = 0;
};

struct Challenge {
  ChallengeNonce nonce{};
  std::vector<std::uint32_t> statements;
  Tick issued_tick = 0;
  Tick ttl = 0;

  bool expired(Tick tick) const noexcept { return tick > issued_tick + ttl; }
};

enum class Action { Register, ReceiveChallenge, AnswerChallenge, SubmitMfa, Retry };

struct TraceEntry {
  Action action = Action::Register;
  Tick tick = 0;
};

struct OnboardingSession {
  std::uint64_t id = 0;
  PublicKey device;
  Stage stage = Stage::Registered;
  std::optional<TempCredential> temp_credential;
  double behavior_score = 0.0;
  Tick started_tick = 0;
  std::optional<Challenge> challenge;
  std::vector<ChallengeNonce> used_nonces;
  std::vector<Stage> history;  // every stage entered, in order
  std::optional<DeviceId> profile;
  RegistrationRequest request;
};

struct FeedbackRecord {
  Tick tick = 0;
  std::string subject;
  std::string record;
};

/// Keyed digest the device returns for a challenge.
Digest challenge_response(const SecretKey& secret, const Challenge& challenge);
/// Six-digit TOTP for the window containing `tick`.
std::uint32_t totp_code(const SecretKey& secret, Tick tick, Tick window);
std::uint32_t totp_for_window(const SecretKey& secret, std::int64_t window_index);

/// Weighted rule checklist over an onboarding trace.
double behavior_checklist(const OnboardingConfig& cfg, const std::vector<TraceEntry>& trace, Tick started_tick,
                          Tick credential_expiry);

/// The device side of re-validation: answers with whatever secret it holds now.
class DeviceProver {
 public:
  virtual ~DeviceProver() = default;
  virtual Digest respond(const Challenge& challenge) const = 0;
  virtual std::uint32_t totp(Tick tick, Tick window) const = 0;
};

class SecretProver final : public DeviceProver {
 public:
  explicit SecretProver(SecretKey secret) : secret_(secret) {}
  Digest respond(const Challenge& challenge) const override { return challenge_response(secret_, challenge); }
  std::uint32_t totp(Tick tick, Tick window) const override { return totp_code(secret_, tick, window); }

 private:
  SecretKey secret_;
};

class OnboardingService {
 public:
  OnboardingService(OnboardingConfig cfg, DeviceRegistry& registry, incentives::Ledger& ledger, SeededRng rng,
                    EventLog* log = nullptr);

  const OnboardingConfig& config() const noexcept { return cfg_; }

  OnboardingSession& submit_registration(const RegistrationRequest& request, Tick tick);
  const Challenge& issue_challenge(std::uint64_t session, Tick tick);
  bool verify_challenge_response(std::uint64_t session, const Digest& response, Tick tick);
  bool verify_mfa(std::uint64_t session, std::uint32_t totp, Tick tick);
  double score_behavior(std::uint64_t session, const std::vector<TraceEntry>& trace);
  DeviceId finalize_device(std::uint64_t session, Tokens stake_deposit, Tick tick, double initial_reputation);

  /// Periodic re-validation. Failure quarantines the device.
  bool revalidate_device(DeviceId device, const DeviceProver& prover, Tick tick, anomaly::QuarantineBook& quarantine);
  /// Same check without the period gate (random device inspection).
  bool inspect_device(DeviceId device, const DeviceProver& prover, Tick tick, anomaly::QuarantineBook& quarantine);
  bool revalidation_due(DeviceId device, Tick tick) const;

  /// Resolves a credential to its device. Temporary credentials never authenticate.
  DeviceId authenticate(const Digest& credential) const;

  void record_feedback(const std::string& subject, const std::string& record, Tick tick);

  const OnboardingSession& session(std::uint64_t id) const;
  const std::vector<OnboardingSession>& sessions() const noexcept { return sessions_; }
  const std::vector<FeedbackRecord>& feedback() const noexcept { return feedback_; }
  const SecretKey& device_secret(DeviceId device) const { return secrets_.at(device); }

 private:
  OnboardingSession& session_mut(std::uint64_t id);
  void enter(OnboardingSession& s, Stage stage, Tick tick, const std::string& detail = {});
  bool run_check(DeviceId device, const DeviceProver& prover, Tick tick, anomaly::QuarantineBook& quarantine,
                 const char* what);

  OnboardingConfig cfg_;
  DeviceRegistry& registry_;
  incentives::Ledger& ledger_;
  SeededRng rng_;
  EventLog* log_;
  std::vector<OnboardingSession> sessions_;
  std::unordered_map<PublicKey, std::uint64_t, PublicKeyHash> open_by_key_;
  std::unordered_map<Digest, std::uint64_t, DigestHash> temp_tokens_;
  std::unordered_map<Digest, DeviceId, DigestHash> credentials_;
  std::unordered_map<DeviceId, SecretKey> secrets_;
  std::vector<FeedbackRecord> feedback_;
};

}  // namespace gdp::onboarding
