#include "gdp/onboarding.hpp"

#include <algorithm>
#include <cctype>

#include "gdp/error.hpp"

namespace gdp::onboarding {

namespace {

bool is_semver(const std::string& v) {
  int parts = 0;
  std::size_t i = 0;
  while (i <= v.size()) {
    std::size_t j = i;
    while (j < v.size() && std::isdigit(static_cast<unsigned char>(v[j]))) ++j;
    if (j == i) return false;
    ++parts;
    if (j == v.size()) break;
    if (v[j] != '.') return false;
    i = j + 1;
  }
  return parts == 3;
}

Digest random_digest(SeededRng& rng, std::string_view tag) {
  Sha256 h;
  h.update(tag);
  for (int i = 0; i < 4; ++i) h.update_u64(rng.next_u64());
  return h.finish();
}

}  // namespace

const char* to_string(Stage s) noexcept {
  switch (s) {
    case Stage::Registered: return "Registered";
    case Stage::TempCredentialed: return "TempCredentialed";
    case Stage::ChallengePassed: return "ChallengePassed";
    case Stage::MfaPassed: return "MfaPassed";
    case Stage::BehaviorScored: return "BehaviorScored";
    case Stage::Finalized: return "Finalized";
    case Stage::Rejected: return "Rejected";
  }
  return "Unknown";
}

Digest challenge_response(const SecretKey& secret, const Challenge& challenge) {
  Sha256 h;
  h.update(ByteView(secret.bytes));
  h.update(ByteView(challenge.nonce));
  for (std::uint32_t id : challenge.statements) {
    const std::uint8_t be[4] = {static_cast<std::uint8_t>(id >> 24), static_cast<std::uint8_t>(id >> 16),
                                static_cast<std::uint8_t>(id >> 8), static_cast<std::uint8_t>(id)};
    h.update(ByteView(be, 4));
  }
  return h.finish();
}

std::uint32_t totp_for_window(const SecretKey& secret, std::int64_t window_index) {
  std::uint8_t msg[8];
  const auto w = static_cast<std::uint64_t>(window_index);
  for (int i = 0; i < 8; ++i) msg[i] = static_cast<std::uint8_t>(w >> (56 - 8 * i));
  const Digest mac = hmac_sha256(ByteView(secret.bytes), ByteView(msg, 8));
  // RFC 4226 dynamic truncation over the 32-byte MAC.
  const unsigned offset = mac.bytes[31] & 0x0f;
  const std::uint32_t bin = (static_cast<std::uint32_t>(mac.bytes[offset] & 0x7f) << 24) |
                            (static_cast<std::uint32_t>(mac.bytes[offset + 1]) << 16) |
                            (static_cast<std::uint32_t>(mac.bytes[offset + 2]) << 8) |
                            static_cast<std::uint32_t>(mac.bytes[offset + 3]);
  return bin % 1'000'000u;
}

std::uint32_t totp_code(const SecretKey& secret, Tick tick, Tick window) {
  return totp_for_window(secret, tick / window);
}

double behavior_checklist(const OnboardingConfig& cfg, const std::vector<TraceEntry>& trace, Tick started_tick,
                          Tick credential_expiry) {
  bool ordered = true;
  Tick prev = started_tick;
  int retries = 0;
  bool latency_ok = true;
  std::optional<Tick> received;
  bool within_lifetime = true;
  for (const auto& e : trace) {
    if (e.tick < prev) ordered = false;
    prev = std::max(prev, e.tick);
    if (e.tick > credential_expiry) within_lifetime = false;
    switch (e.action) {
      case Action::Retry: ++retries; break;
      case Action::ReceiveChallenge: received = e.tick; break;
      case Action::AnswerChallenge:
        if (!received || e.tick - *received > cfg.challenge_ttl || e.tick < *received) latency_ok = false;
        break;
      default: break;
    }
  }
  double score = 0.0;
  if (ordered) score += cfg.weight_ordering;
  if (retries <= cfg.max_retries) score += cfg.weight_retries;
  if (latency_ok) score += cfg.weight_latency;
  if (within_lifetime) score += cfg.weight_lifetime;
  return std::clamp(score, 0.0, 1.0);
}

OnboardingService::OnboardingService(OnboardingConfig cfg, DeviceRegistry& registry, incentives::Ledger& ledger,
                                     SeededRng rng, EventLog* log)
    : cfg_(std::move(cfg)), registry_(registry), ledger_(ledger), rng_(rng), log_(log) {}

OnboardingSession& OnboardingService::session_mut(std::uint64_t id) {
  if (id >= sessions_.size()) fail(ErrorCode::WrongStage, "unknown session " + std::to_string(id));
  return sessions_[id];
}

const OnboardingSession& OnboardingService::session(std::uint64_t id) const {
  return const_cast<OnboardingService*>(this)->session_mut(id);
}

void OnboardingService::enter(OnboardingSession& s, Stage stage, Tick tick, const std::string& detail) {
  s.stage = stage;
  s.history.push_back(stage);
  if (stage == Stage::Rejected || stage == Stage::Finalized) {
    s.temp_credential.reset();
    s.challenge.reset();
    open_by_key_.erase(s.device);
  }
  if (log_) {
    std::string d = std::string(to_string(stage));
    if (!detail.empty()) d += " " + detail;
    log_->append(tick, Channel::World, "s" + std::to_string(s.id), "onboarding",
                 {std::to_string(tick), "onboarding", "s" + std::to_string(s.id), d});
  }
}

OnboardingSession& OnboardingService::submit_registration(const RegistrationRequest& request, Tick tick) {
  if (registry_.find(request.public_key) || open_by_key_.contains(request.public_key))
    fail(ErrorCode::DuplicateDevice, request.public_key.hex());
  if (request.model.empty() || request.version.empty() || !is_semver(request.version))
    fail(ErrorCode::MalformedRequest, "model and semver version are required");
  if (!request.encrypted || digest(ByteView(request.sealed_secret.bytes)) != request.secret_commitment)
    fail(ErrorCode::MalformedRequest, "sealed secret does not match its commitment");
  const auto hex = request.public_key.hex();
  if (std::find(cfg_.blacklist.begin(), cfg_.blacklist.end(), hex) != cfg_.blacklist.end())
    fail(ErrorCode::Blacklisted, hex);

  OnboardingSession s;
  s.id = sessions_.size();
  s.device = request.public_key;
  s.started_tick = tick;
  s.request = request;
  sessions_.push_back(std::move(s));
  auto& session = sessions_.back();
  open_by_key_.emplace(request.public_key, session.id);
  enter(session, Stage::Registered, tick);

  TempCredential temp{random_digest(rng_, "temp-credential"), tick + cfg_.temp_credential_ttl};
  temp_tokens_.emplace(temp.token, session.id);
  session.temp_credential = temp;
  enter(session, Stage::TempCredentialed, tick);
  return session;
}

const Challenge& OnboardingService::issue_challenge(std::uint64_t id, Tick tick) {
  auto& s = session_mut(id);
  if (s.stage != Stage::TempCredentialed) fail(ErrorCode::WrongStage, to_string(s.stage));
  if (tick > s.temp_credential->expires) fail(ErrorCode::CredentialExpired, "session " + std::to_string(id));
  Challenge c;
  do {
    for (std::size_t i = 0; i < c.nonce.size(); i += 8) {
      const std::uint64_t r = rng_.next_u64();
      for (std::size_t j = 0; j < 8; ++j) c.nonce[i + j] = static_cast<std::uint8_t>(r >> (8 * j));
    }
  } while (std::find(s.used_nonces.begin(), s.used_nonces.end(), c.nonce) != s.used_nonces.end());
  s.used_nonces.push_back(c.nonce);
  for (int i = 0; i < cfg_.statements_per_challenge; ++i)
    c.statements.push_back(static_cast<std::uint32_t>(rng_.uniform_below(1u << 16)));
  c.issued_tick = tick;
  c.ttl = cfg_.challenge_ttl;
  s.challenge = c;
  return *s.challenge;
}

bool OnboardingService::verify_challenge_response(std::uint64_t id, const Digest& response, Tick tick) {
  auto& s = session_mut(id);
  if (!s.challenge) fail(ErrorCode::NoActiveChallenge, "session " + std::to_string(id));
  if (s.challenge->expired(tick)) {
    s.challenge.reset();
    fail(ErrorCode::ChallengeExpired, "session " + std::to_string(id));
  }
  const Challenge c = *s.challenge;
  s.challenge.reset();
  if (response == challenge_response(s.request.sealed_secret, c)) {
    enter(s, Stage::ChallengePassed, tick);
    return true;
  }
  enter(s, Stage::Rejected, tick, "challenge");
  return false;
}

bool OnboardingService::verify_mfa(std::uint64_t id, std::uint32_t totp, Tick tick) {
  auto& s = session_mut(id);
  if (s.stage != Stage::ChallengePassed) fail(ErrorCode::WrongStage, to_string(s.stage));
  const std::int64_t w = tick / cfg_.totp_window;
  for (std::int64_t d = -cfg_.totp_skew_windows; d <= cfg_.totp_skew_windows; ++d) {
    if (totp_for_window(s.request.sealed_secret, w + d) == totp) {
      enter(s, Stage::MfaPassed, tick);
      return true;
    }
  }
  enter(s, Stage::Rejected, tick, "mfa");
  return false;
}

double OnboardingService::score_behavior(std::uint64_t id, const std::vector<TraceEntry>& trace) {
  auto& s = session_mut(id);
  if (s.stage != Stage::MfaPassed) fail(ErrorCode::WrongStage, to_string(s.stage));
  s.behavior_score = behavior_checklist(cfg_, trace, s.started_tick, s.temp_credential->expires);
  const Tick tick = trace.empty() ? s.started_tick : trace.back().tick;
  if (s.behavior_score >= cfg_.behavior_threshold)
    enter(s, Stage::BehaviorScored, tick);
  else
    enter(s, Stage::Rejected, tick, "behavior");
  return s.behavior_score;
}

DeviceId OnboardingService::finalize_device(std::uint64_t id, Tokens stake_deposit, Tick tick,
                                            double initial_reputation) {
  auto& s = session_mut(id);
  if (s.stage != Stage::BehaviorScored) fail(ErrorCode::WrongStage, to_string(s.stage));
  if (stake_deposit < cfg_.min_stake)
    fail(ErrorCode::InsufficientStake, stake_deposit.str() + " < " + cfg_.min_stake.str());

  DeviceProfile p;
  p.public_key = s.request.public_key;
  p.device_type = s.request.device_type;
  p.model = s.request.model;
  p.version = s.request.version;
  p.onboarded_tick = tick;
  p.credential = random_digest(rng_, "credential");
  p.status = DeviceStatus::Active;
  p.last_revalidation_tick = tick;
  p.operator_group = s.request.operator_group;
  p.roles = s.request.roles;
  p.expertise = s.request.expertise;
  const DeviceId device = registry_.add(p);
  credentials_.emplace(p.credential, device);
  secrets_.emplace(device, s.request.sealed_secret);
  ledger_.enroll(device, stake_deposit, initial_reputation, tick, "onboarding s" + std::to_string(id));
  s.profile = device;
  enter(s, Stage::Finalized, tick, label(device));
  return device;
}

bool OnboardingService::revalidation_due(DeviceId device, Tick tick) const {
  return tick - registry_.at(device).last_revalidation_tick >= cfg_.revalidation_period;
}

bool OnboardingService::run_check(DeviceId device, const DeviceProver& prover, Tick tick,
                                  anomaly::QuarantineBook& quarantine, const char* what) {
  auto& p = registry_.at(device);
  if (p.status != DeviceStatus::Active) fail(ErrorCode::WrongStage, label(device) + " is " + to_string(p.status));
  Challenge c;
  for (std::size_t i = 0; i < c.nonce.size(); i += 8) {
    const std::uint64_t r = rng_.next_u64();
    for (std::size_t j = 0; j < 8; ++j) c.nonce[i + j] = static_cast<std::uint8_t>(r >> (8 * j));
  }
  for (int i = 0; i < cfg_.statements_per_challenge; ++i)
    c.statements.push_back(static_cast<std::uint32_t>(rng_.uniform_below(1u << 16)));
  c.issued_tick = tick;
  c.ttl = cfg_.challenge_ttl;

  const SecretKey& secret = secrets_.at(device);
  const bool ok = prover.respond(c) == challenge_response(secret, c) &&
                  prover.totp(tick, cfg_.totp_window) == totp_code(secret, tick, cfg_.totp_window);
  if (log_)
    log_->append(tick, Channel::World, label(device), ok ? "revalidated" : "revalidation_failed",
                 {std::to_string(tick), ok ? "revalidated" : "revalidation_failed", label(device), what});
  if (ok) {
    p.last_revalidation_tick = tick;
    return true;
  }
  quarantine.quarantine(device, std::string("revalidation_failed ") + what, tick);
  return false;
}

bool OnboardingService::revalidate_device(DeviceId device, const DeviceProver& prover, Tick tick,
                                          anomaly::QuarantineBook& quarantine) {
  if (!revalidation_due(device, tick))
    fail(ErrorCode::TooEarly, label(device) + " last revalidated at tick " +
                                  std::to_string(registry_.at(device).last_revalidation_tick));
  return run_check(device, prover, tick, quarantine, "periodic");
}

bool OnboardingService::inspect_device(DeviceId device, const DeviceProver& prover, Tick tick,
                                       anomaly::QuarantineBook& quarantine) {
  return run_check(device, prover, tick, quarantine, "inspection");
}

DeviceId OnboardingService::authenticate(const Digest& credential) const {
  if (temp_tokens_.contains(credential)) fail(ErrorCode::TempCredentialRejected, credential.hex());
  auto it = credentials_.find(credential);
  if (it == credentials_.end()) fail(ErrorCode::UnknownDevice, credential.hex());
  if (registry_.at(it->second).status == DeviceStatus::Banned) fail(ErrorCode::SubjectBanned, label(it->second));
  return it->second;
}

void OnboardingService::record_feedback(const std::string& subject, const std::string& record, Tick tick) {
  feedback_.push_back(FeedbackRecord{tick, subject, record});
}

}  // namespace gdp::onboarding
