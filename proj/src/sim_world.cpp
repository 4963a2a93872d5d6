#include "gdp/sim/world.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <json.hpp>

#include "gdp/error.hpp"

namespace gdp::sim {

namespace {

std::string fmt6(double v) {
  char buf[48];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

std::string fmtg(double v) {
  char buf[48];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

std::string roles_text(unsigned roles) {
  std::string out;
  auto add = [&](unsigned bit, const char* name) {
    if (roles & bit) out += (out.empty() ? "" : "|") + std::string(name);
  };
  add(role::kSender, "sender");
  add(role::kWitness, "witness");
  add(role::kValidator, "validator");
  add(role::kArbitrator, "arbitrator");
  return out.empty() ? "none" : out;
}

/// Role a trajectory row is grouped under.
std::string primary_role(unsigned roles) {
  if (roles & role::kValidator) return "validator";
  if (roles & role::kWitness) return "witness";
  if (roles & role::kSender) return "sender";
  return "none";
}

SecretKey random_secret(SeededRng& rng) {
  SecretKey s;
  for (std::size_t i = 0; i < s.bytes.size(); i += 8) {
    const std::uint64_t r = rng.next_u64();
    for (std::size_t j = 0; j < 8; ++j) s.bytes[i + j] = static_cast<std::uint8_t>(r >> (8 * j));
  }
  return s;
}

std::vector<std::string> all_expertise() {
  using arbitration::Category;
  std::vector<std::string> tags;
  for (auto c : {Category::Equivocation, Category::DisputedTransaction, Category::FailedRevalidation,
                 Category::ProtocolViolation, Category::InspectionFailure})
    tags.push_back(arbitration::expertise_tag(c));
  return tags;
}

std::optional<DeviceId> parse_label(std::string_view s) {
  if (s.size() < 2 || s[0] != 'd') return std::nullopt;
  std::uint32_t v = 0;
  for (char c : s.substr(1)) {
    if (c < '0' || c > '9') return std::nullopt;
    v = v * 10 + static_cast<std::uint32_t>(c - '0');
  }
  return DeviceId{v};
}

}  // namespace

World::World(ScenarioConfig cfg)
    : cfg_((require_valid(cfg), std::move(cfg))),
      root_(cfg_.seed),
      ledger_(cfg_.incentives),
      quarantine_(registry_, cfg_.anomaly.review_period),
      onboarding_(cfg_.onboarding, registry_, ledger_, root_.derive(stream_key("onboarding")), &log_),
      pool_(cfg_.panel, &log_),
      disputes_(cfg_.arbitration, registry_, ledger_, log_, &log_),
      payload_stream_("payload_size", "network", cfg_.anomaly),
      witness_stream_("witness_fault", "network", cfg_.anomaly),
      vote_stream_("vote_against", "network", cfg_.anomaly),
      rate_stream_("txn_rate", "network", cfg_.anomaly) {
  ledger_.on_perm_ban([this](DeviceId id) { on_perm_ban(id); });
  const Tick bound = cfg_.panel.reveal_deadline + 3 * cfg_.consensus.round_ticks + cfg_.inspection.max_commit_delay;
  log_world("scenario", cfg_.name,
            "seed=" + std::to_string(cfg_.seed) + " duration=" + std::to_string(cfg_.duration_ticks) +
                " liveness_bound=" + std::to_string(bound));
  build_population();
  flush_incentives();
}

SeededRng World::stream(std::string_view name, std::uint64_t a, std::uint64_t b) const {
  return root_.derive(stream_key(name)).derive(a).derive(b);
}

std::uint64_t World::log_world(const std::string& event, const std::string& subject, const std::string& detail) {
  return log_.append(tick_, Channel::World, subject, event, {std::to_string(tick_), event, subject, detail}).seq;
}

void World::flush_incentives() {
  const auto& events = ledger_.events();
  for (; incentives_logged_ < events.size(); ++incentives_logged_) {
    const auto& e = events[incentives_logged_];
    log_.append(e.tick, Channel::Incentives, label(e.subject), incentives::to_string(e.kind),
                {std::to_string(e.tick), label(e.subject), incentives::to_string(e.kind), e.delta_text(), e.cause});
  }
}

const GroundTruth* World::truth(const Digest& txn) const {
  auto it = truth_.find(txn);
  return it == truth_.end() ? nullptr : &it->second;
}

bool World::usable(DeviceId id) const {
  return registry_.at(id).status == DeviceStatus::Active && ledger_.enrolled(id) && !ledger_.is_banned(id, tick_);
}

std::optional<std::uint64_t> World::last_event_seq(std::size_t from, std::string_view event) const {
  std::optional<std::uint64_t> out;
  for (std::size_t i = from; i < log_.size(); ++i)
    if (log_.at(i).event == event) out = i;
  return out;
}

// population

std::optional<DeviceId> World::enroll_device(std::shared_ptr<const Policy> policy, unsigned roles, std::string group,
                                             Tokens stake, double reputation, std::vector<std::string> expertise,
                                             int spec, SeededRng& rng) {
  const KeyPair keys = KeyPair::generate(rng);
  const SecretKey secret = random_secret(rng);
  onboarding::RegistrationRequest req;
  req.device_type = static_cast<DeviceType>(rng.uniform_below(5));
  req.model = "gdp-node";
  req.version = "1.0.0";
  req.public_key = keys.public_key();
  req.encrypted = true;
  req.sealed_secret = secret;
  req.secret_commitment = digest(ByteView(secret.bytes));
  req.operator_group = group;
  req.roles = roles;
  req.expertise = std::move(expertise);

  using onboarding::Action;
  std::optional<std::uint64_t> sid;
  DeviceId id;
  try {
    sid = onboarding_.submit_registration(req, tick_).id;
    std::vector<onboarding::TraceEntry> trace{{Action::Register, tick_}};
    const onboarding::Challenge challenge = onboarding_.issue_challenge(*sid, tick_);
    trace.push_back({Action::ReceiveChallenge, tick_});
    if (!onboarding_.verify_challenge_response(*sid, onboarding::challenge_response(secret, challenge), tick_))
      return std::nullopt;
    trace.push_back({Action::AnswerChallenge, tick_});
    if (!onboarding_.verify_mfa(*sid, onboarding::totp_code(secret, tick_, cfg_.onboarding.totp_window), tick_))
      return std::nullopt;
    trace.push_back({Action::SubmitMfa, tick_});
    onboarding_.score_behavior(*sid, trace);
    if (onboarding_.session(*sid).stage != onboarding::Stage::BehaviorScored) return std::nullopt;
    id = onboarding_.finalize_device(*sid, stake, tick_, reputation);
  } catch (const Error& e) {
    log_world("onboarding_failed", sid ? "s" + std::to_string(*sid) : keys.public_key().hex(), e.what());
    return std::nullopt;
  }

  Actor a;
  a.id = id;
  a.keys = keys;
  a.secret = secret;
  a.policy = std::move(policy);
  a.group = group;
  a.roles = roles;
  a.spec = spec;
  actor_index_.emplace(id, actors_.size());
  log_world("actor", label(id),
            "roles=" + roles_text(roles) + " persona=" + to_string(a.policy->persona()) + " group=" + group);
  actors_.push_back(std::move(a));
  if (roles & role::kValidator) nodes_.emplace(id, consensus::NodeLedger(&pool_));

  if (checks::should_inspect(stream("inspect_device"), 0, checks::target_key(id), cfg_.inspection.rate_device)) {
    const std::size_t mark = log_.size();
    const bool ok = onboarding_.inspect_device(id, onboarding::SecretProver(secret), tick_, quarantine_);
    checks::InspectionOutcome out;
    out.tick = tick_;
    out.kind = checks::TargetKind::Device;
    out.target = label(id);
    out.passed = ok;
    if (!ok) out.evidence.push_back("revalidation_failed");
    inspection_row(out);
    if (!ok) {
      log_world("quarantined", label(id), "device inspection");
      if (auto seq = last_event_seq(mark, "revalidation_failed"))
        open_dispute(arbitration::Category::FailedRevalidation, {id}, {*seq}, std::nullopt, "device inspection");
    }
  }
  return id;
}

std::optional<DeviceId> World::spawn_adversary(int spec_index, std::uint64_t index, SeededRng& rng) {
  const auto& spec = cfg_.adversaries.at(static_cast<std::size_t>(spec_index));
  const double rep = cfg_.incentives.initial_reputation;
  const std::string tag = "adv" + std::to_string(spec_index) + "-" + std::to_string(index);
  switch (spec.kind) {
    case AdversaryKind::TamperingSender:
      return enroll_device(std::make_shared<TamperingSenderPolicy>(spec.tamper_rate), role::kSender, tag,
                           cfg_.stake_per_device, rep, {}, spec_index, rng);
    case AdversaryKind::ColludingWitnesses: {
      const auto group = spec.groups > 0 ? "col" + std::to_string(spec_index) + "-" + std::to_string(index % spec.groups)
                                         : tag;
      return enroll_device(std::make_shared<ColluderPolicy>(spec.strategic), role::kWitness, group, cfg_.stake_per_device, rep, {},
                           spec_index, rng);
    }
    case AdversaryKind::SybilFlood: {
      const unsigned roles = role::kSender | (spec.as_validators ? role::kValidator : 0u);
      return enroll_device(std::make_shared<SybilPolicy>(), roles, tag, spec.stake, rep, {}, spec_index, rng);
    }
    case AdversaryKind::LazyWitness:
      return enroll_device(std::make_shared<LazyPolicy>(spec.reveal_prob), role::kWitness, tag, cfg_.stake_per_device,
                           rep, {}, spec_index, rng);
    case AdversaryKind::EquivocatingWitness:
      return enroll_device(std::make_shared<EquivocatorPolicy>(spec.flip_rate), role::kWitness, tag,
                           cfg_.stake_per_device, rep, {}, spec_index, rng);
    case AdversaryKind::ForgedSyncNode:
      return enroll_device(std::make_shared<ForgedSyncPolicy>(), role::kValidator, tag, cfg_.stake_per_device, rep, {},
                           spec_index, rng);
    case AdversaryKind::KeyCompromise: return std::nullopt;
  }
  return std::nullopt;
}

void World::build_population() {
  SeededRng rng = stream("population");
  const auto honest = std::make_shared<Policy>();
  const double base_rep = cfg_.incentives.initial_reputation;
  int arbitrators_left = cfg_.arbitration.arbitrator_count;
  std::uint32_t n = 0;
  auto group = [&] { return "op" + std::to_string(n++); };

  for (int i = 0; i < cfg_.n_honest_devices; ++i)
    enroll_device(honest, role::kSender, group(), cfg_.stake_per_device, base_rep, {}, -1, rng);

  // Validators are vetted as arbitrators first: they are never evaluated as witnesses.
  std::vector<std::pair<unsigned, int>> plan;
  for (int i = 0; i < cfg_.n_witness_pool; ++i) plan.emplace_back(role::kWitness, 0);
  for (int i = 0; i < cfg_.n_validators; ++i) plan.emplace_back(role::kValidator, 0);
  for (auto it = plan.rbegin(); it != plan.rend() && arbitrators_left > 0; ++it, --arbitrators_left) it->second = 1;
  for (const auto& [r, arb] : plan) {
    if (arb)
      enroll_device(honest, r | role::kArbitrator, group(), cfg_.stake_per_device, cfg_.arbitration.vetted_reputation,
                    all_expertise(), -1, rng);
    else
      enroll_device(honest, r, group(), cfg_.stake_per_device, base_rep, {}, -1, rng);
  }

  for (std::size_t j = 0; j < cfg_.adversaries.size(); ++j)
    for (int c = 0; c < cfg_.adversaries[j].count; ++c) spawn_adversary(static_cast<int>(j), c, rng);
}

void World::on_perm_ban(DeviceId id) {
  registry_.at(id).status = DeviceStatus::Banned;
  quarantine_.close(id, tick_);
  log_world("banned", label(id), "permanent");
  const Actor& a = actor(id);
  if (a.spec >= 0 && cfg_.adversaries[static_cast<std::size_t>(a.spec)].respawn &&
      cfg_.adversaries[static_cast<std::size_t>(a.spec)].kind != AdversaryKind::KeyCompromise)
    respawn_queue_.push_back(a.spec);
}

void World::respawn_banned() {
  auto queue = std::move(respawn_queue_);
  respawn_queue_.clear();
  for (int spec : queue) {
    SeededRng rng = stream("respawn", spawned_);
    const auto index = 1000000 + spawned_++;
    if (auto id = spawn_adversary(spec, index, rng)) log_world("respawned", label(*id), "spec=" + std::to_string(spec));
  }
}

void World::compromise_keys() {
  for (std::size_t j = 0; j < cfg_.adversaries.size(); ++j) {
    const auto& spec = cfg_.adversaries[j];
    if (spec.kind != AdversaryKind::KeyCompromise || spec.at_tick != tick_) continue;
    std::vector<DeviceId> targets;
    for (const auto& a : actors_)
      if (a.spec < 0 && (a.roles & role::kSender) && usable(a.id)) targets.push_back(a.id);
    SeededRng rng = stream("compromise", j);
    const std::vector<double> weights(targets.size(), 1.0);
    const auto picked = sample_indices_without_replacement(
        rng, weights, std::min(targets.size(), static_cast<std::size_t>(spec.count)));
    for (std::size_t i : picked) {
      Actor& a = actor_mut(targets[i]);
      a.secret = random_secret(rng);
      a.policy = std::make_shared<TamperingSenderPolicy>(spec.tamper_rate, Persona::Compromised);
      a.spec = static_cast<int>(j);
      log_world("compromise", label(a.id), "secret swapped");
    }
  }
}

// transmission

void World::arrivals() {
  if (tick_ >= cfg_.duration_ticks - cfg_.drain_ticks) return;
  SeededRng rng = stream("arrivals", static_cast<std::uint64_t>(tick_));
  const double whole = std::floor(cfg_.txn_arrival_rate);
  int n = static_cast<int>(whole) + (rng.bernoulli(cfg_.txn_arrival_rate - whole) ? 1 : 0);
  std::vector<DeviceId> senders;
  std::vector<DeviceId> active;
  for (const auto& a : actors_) {
    if (!usable(a.id)) continue;
    active.push_back(a.id);
    if (a.roles & role::kSender) senders.push_back(a.id);
  }
  if (senders.empty() || active.size() < 2) return;
  for (; n > 0; --n) {
    if (cfg_.max_transactions > 0 && txn_count_ >= cfg_.max_transactions) return;
    const DeviceId sender = senders[rng.uniform_below(senders.size())];
    const auto seq = static_cast<std::uint64_t>(txn_count_++);
    SeededRng txn_rng = stream("txn", seq);
    submit_transaction(sender, active, seq, txn_rng);
    ++arrivals_this_epoch_;
  }
}

void World::submit_transaction(DeviceId sender, const std::vector<DeviceId>& active, std::uint64_t seq,
                               SeededRng& rng) {
  Actor& a = actor_mut(sender);
  DeviceId receiver = active[rng.uniform_below(active.size() - 1)];
  if (receiver >= sender) {
    auto it = std::upper_bound(active.begin(), active.end(), sender);
    const auto pos = static_cast<std::size_t>(std::find(active.begin(), active.end(), receiver) - active.begin());
    receiver = pos + 1 < active.size() && it != active.end() ? active[pos + 1] : active[pos];
    if (receiver == sender) receiver = active.front() == sender ? active.back() : active.front();
  }
  double size = std::max(1.0, cfg_.payload_size_mean + cfg_.payload_size_sd * rng.normal());
  const bool tampered = a.policy->tamper(rng);
  if (tampered) size *= 1.5;

  const Digest claimed = Sha256().update("payload").update_u64(seq).update_u64(sender.value).finish();
  const Digest delivered = tampered ? Sha256().update("altered").update_u64(seq).finish() : claimed;

  transmission::DataTransaction t;
  t.sender = sender;
  t.receiver = receiver;
  t.sender_key = a.keys.public_key();
  t.receiver_key = actor(receiver).keys.public_key();
  t.payload_digest = claimed;
  t.nonce = a.next_nonce++;
  t.created_tick = tick_;
  t.payload_size = size;
  t.id = transmission::transaction_id(t.sender_key, t.receiver_key, claimed, t.nonce, tick_);
  const Digest id = t.id;
  pool_.submit(std::move(t), tick_);

  const bool label_value = tampered != corrupt_labels_;
  truth_[id] = GroundTruth{label_value, delivered};
  log_world("ground_truth", id.hex(), label_value ? "tampered=1" : "tampered=0");
  payload_samples_.emplace_back(label(sender), size);
  if (!open_panel(id, {})) unpaneled_.push_back(id);
}

bool World::open_panel(const Digest& txn_id, const std::unordered_set<DeviceId>& excluded) {
  const auto& txn = pool_.at(txn_id);
  SeededRng rng = stream("panel", txn.seq, static_cast<std::uint64_t>(txn.round + 1));
  try {
    auto panel = transmission::select_witnesses(registry_, ledger_, txn, cfg_.panel, rng, excluded, tick_);
    pool_.open_round(txn_id, std::move(panel), tick_);
  } catch (const Error& e) {
    if (e.code() != ErrorCode::InsufficientWitnesses) throw;
    return false;
  }
  commit_panel(txn_id);
  return true;
}

void World::commit_panel(const Digest& txn_id) {
  const auto& txn = pool_.at(txn_id);
  const Digest observed = truth_.at(txn_id).delivered;
  for (DeviceId w : txn.panel) {
    const Actor& a = actor(w);
    PanelView view{0, cfg_.panel.effective_quorum()};
    for (DeviceId m : txn.panel)
      if (a.policy->adversarial() && actor(m).policy->persona() == a.policy->persona() &&
          actor(m).spec == a.spec)
        ++view.allies;
    SeededRng rng = stream("witness", txn.seq, (static_cast<std::uint64_t>(txn.round) << 32) | w.value);
    const Verdict v = a.policy->judge(txn.payload_digest, observed, view);
    transmission::Salt salt{};
    for (std::size_t i = 0; i < salt.size(); i += 8) {
      const std::uint64_t r = rng.next_u64();
      for (std::size_t j = 0; j < 8; ++j) salt[i + j] = static_cast<std::uint8_t>(r >> (8 * j));
    }
    pool_.witness_commit(txn_id, transmission::make_attestation(a.keys, w, txn_id, v, salt), a.keys.public_key(),
                         tick_);
    memory_[{txn_id, w.value}] = WitnessMemory{v, salt, false};
  }
}

void World::retry_unpaneled() {
  std::vector<Digest> still;
  for (const auto& id : unpaneled_) {
    const auto& txn = pool_.at(id);
    if (txn.status != transmission::TxnStatus::Pending || !txn.panel.empty()) continue;
    if (txn.created_tick == tick_) {
      still.push_back(id);
      continue;
    }
    if (open_panel(id, {})) continue;
    if (tick_ - txn.created_tick >= cfg_.panel.reveal_deadline)
      pool_.mark_rejected(id, tick_, "no eligible panel");
    else
      still.push_back(id);
  }
  unpaneled_ = std::move(still);
}

void World::reveals() {
  for (const auto& id : pool_.open_rounds()) {
    const auto& txn = pool_.at(id);
    if (txn.round_started >= tick_ || !pool_.reveal_open(txn, tick_)) continue;
    std::vector<DeviceId> waiting;
    for (const auto& a : txn.attestations)
      if (!a.revealed_verdict && !a.equivocated) waiting.push_back(a.witness_id);
    for (DeviceId w : waiting) {
      auto& mem = memory_.at({id, w.value});
      if (mem.decided) continue;
      mem.decided = true;
      SeededRng rng = stream("reveal", txn.seq, (static_cast<std::uint64_t>(txn.round) << 32) | w.value);
      const auto shown = actor(w).policy->reveal(mem.verdict, rng);
      witness_samples_.emplace_back(label(w), shown == mem.verdict ? 0.0 : 1.0);
      if (!shown) continue;
      try {
        pool_.witness_reveal(id, w, *shown, mem.salt, tick_);
      } catch (const Error& e) {
        if (e.code() != ErrorCode::CommitMismatch) throw;
        continue;
      }
      inspect_witness_reveal(txn, w);
    }
  }
}

void World::inspect_witness_reveal(const transmission::DataTransaction& txn, DeviceId w) {
  const std::uint64_t round = (txn.seq << 8) | static_cast<std::uint64_t>(txn.round);
  if (!checks::should_inspect(stream("inspect_witness"), round, checks::target_key(w),
                              cfg_.inspection.rate_witness_deep))
    return;
  const auto* att = txn.attestation_of(w);
  const auto out = checks::inspect_witness(*att, txn, truth_.at(txn.id).delivered, tick_);
  inspection_row(out);
  if (out.passed) return;
  std::string evidence;
  for (const auto& e : out.evidence) evidence += (evidence.empty() ? "" : ";") + e;
  const auto seq = log_world("inspection_failed", label(w), evidence);
  objections_.insert(txn.id);
  open_dispute(arbitration::Category::InspectionFailure, {w}, {seq}, txn.id, "witness deep check");
  ledger_.apply_penalty(w, incentives::Severity::Major, tick_, "inspection " + txn.id.hex().substr(0, 16));
  quarantine_device(w, "inspection_failed");
}

void World::aggregations() {
  for (const auto& id : pool_.open_rounds()) {
    const auto& txn = pool_.at(id);
    if (txn.panel.empty() || txn.round_started >= tick_ || !pool_.ready_to_aggregate(txn, tick_)) continue;
    const auto outcome = pool_.aggregate_attestations(id, tick_);
    if (outcome == transmission::TxnStatus::Rejected) evaluate(id);
    if (outcome == transmission::TxnStatus::Disputed) handle_disputed(id);
  }
}

void World::handle_disputed(const Digest& txn_id) {
  const auto& txn = pool_.at(txn_id);
  SeededRng rng = stream("panel", txn.seq, static_cast<std::uint64_t>(txn.round + 1));
  const std::size_t mark = log_.size();
  if (pool_.reescalate_disputed(txn_id, registry_, ledger_, rng, tick_) == transmission::EscalationResult::Reescalated) {
    commit_panel(txn_id);
    return;
  }
  if (auto seq = last_event_seq(mark, "escalation_exhausted"))
    open_dispute(arbitration::Category::DisputedTransaction, {txn.sender}, {*seq}, txn_id, "escalation cap");
}

void World::evaluate(const Digest& txn_id) {
  const auto tag = txn_id.hex().substr(0, 16);
  for (const auto& e : pool_.evaluate_witnesses(txn_id)) {
    if (!ledger_.enrolled(e.witness)) continue;
    if (e.correct) {
      if (!ledger_.is_banned(e.witness, tick_)) ledger_.apply_performance_reward(e.witness, tick_, "witness " + tag);
    } else if (e.penalty && !e.penalized_earlier) {
      ledger_.apply_penalty(e.witness, *e.penalty, tick_, e.reason + " " + tag);
    }
  }
}

void World::apply_pool_penalties() {
  for (const auto& p : pool_.take_penalties())
    if (ledger_.enrolled(p.subject)) ledger_.apply_penalty(p.subject, p.severity, p.tick, p.cause);
}

// consensus

std::vector<DeviceId> World::eligible_validators() const {
  std::vector<DeviceId> out;
  for (const auto& [id, _] : nodes_)
    if (usable(id)) out.push_back(id);
  return out;
}

void World::consensus_round() {
  if (inflight_) finish_inflight();
  if (inflight_) return;
  if (tick_ % cfg_.consensus.round_ticks != 0) return;
  const auto eligible = eligible_validators();
  if (eligible.size() < 2) return;
  const std::uint64_t r = consensus_round_++;
  const DeviceId proposer = consensus::round_robin_proposer(eligible, r);
  sync_node(proposer);
  // a sync can expose and ban the proposer
  if (!usable(proposer)) {
    log_world("round_skipped", label(proposer), "round " + std::to_string(r));
    return;
  }

  const auto records = disputes_.pending_records();
  const std::unordered_set<Digest, DigestHash> pending(records.begin(), records.end());
  const consensus::ValidationContext ctx{pool_, cfg_.panel, pending};
  consensus::Proposal p;
  try {
    p = consensus::propose_block(proposer, proposer, actor(proposer).keys, nodes_.at(proposer), ctx, records,
                                 cfg_.consensus, ledger_, tick_);
  } catch (const Error& e) {
    if (e.code() != ErrorCode::EmptyMempool) throw;
    return;
  }

  if (checks::should_inspect(stream("inspect_proposer"), r, checks::target_key(proposer),
                             cfg_.inspection.rate_proposer_challenge)) {
    const Digest pd = p.digest();
    const auto solution = checks::solve_puzzle(pd, cfg_.inspection.puzzle_difficulty, cfg_.inspection.puzzle_budget);
    const auto out = checks::challenge_proposer(proposer, pd, solution.nonce, cfg_.inspection.puzzle_difficulty, tick_);
    inspection_row(out);
    if (!out.passed) {
      const auto seq = log_world("inspection_failed", label(proposer), "puzzle");
      open_dispute(arbitration::Category::InspectionFailure, {proposer}, {seq}, std::nullopt, "proposer puzzle");
      ledger_.apply_penalty(proposer, incentives::Severity::Minor, tick_, "puzzle round " + std::to_string(r));
      log_world("round_skipped", label(proposer), "round " + std::to_string(r));
      return;
    }
  }

  std::vector<DeviceId> voters;
  for (auto v : eligible)
    if (v != proposer && usable(v)) voters.push_back(v);
  if (cfg_.consensus.random_validators > 0) {
    SeededRng rng = stream("validators", r);
    voters = checks::pick_random_validators(
        voters, rng, std::min(voters.size(), static_cast<std::size_t>(cfg_.consensus.random_validators)));
  }
  if (weigh_observer_) weigh_observer_(p.height, voters);
  const auto weights = consensus::vote_weights(ledger_, voters, cfg_.consensus);
  std::vector<Digest> objections;
  for (const auto& id : p.txn_ids)
    if (objections_.contains(id)) objections.push_back(id);

  std::vector<consensus::Vote> votes;
  for (auto v : voters) {
    const Actor& a = actor(v);
    std::optional<consensus::Vote> vote;
    for (int attempt = 0; attempt < 2 && !vote; ++attempt) {
      try {
        vote = consensus::validate_proposal(v, a.keys, nodes_.at(v), p, ctx, weights.at(v), objections, &sig_cache_);
      } catch (const Error& e) {
        if (e.code() != ErrorCode::UnknownParent) throw;
        if (!sync_node(v)) break;
      }
    }
    if (!vote || !usable(v)) continue;
    vote_samples_.emplace_back(label(v), vote->accept ? 0.0 : 1.0);
    ++votes_cast_[v];
    votes.push_back(std::move(*vote));
  }

  if (!usable(proposer)) {
    log_world("round_skipped", label(proposer), "round " + std::to_string(r));
    return;
  }
  const auto t = consensus::tally(votes, cfg_.consensus);
  log_world("round", label(proposer),
            "r=" + std::to_string(r) + " h=" + std::to_string(p.height) + " entries=" + std::to_string(p.txn_ids.size()) +
                " accept=" + fmt6(t.accept_weight) + " total=" + fmt6(t.total_weight) +
                (t.committed ? " committed" : " rejected"));
  if (t.committed) {
    SeededRng rng = stream("delay", r);
    inflight_ = InflightBlock{std::move(p), std::move(votes),
                              tick_ + checks::random_commit_delay(rng, cfg_.inspection.max_commit_delay)};
    finish_inflight();
    return;
  }
  const auto conflict = consensus::resolve_vote_conflict(p, votes, pool_, objections);
  if (conflict.applies()) escalate(conflict.escalate, "vote conflict");
}

void World::finish_inflight() {
  auto& f = *inflight_;
  std::vector<Digest> objections;
  for (const auto& id : f.proposal.txn_ids)
    if (objections_.contains(id)) objections.push_back(id);
  if (!objections.empty()) {
    const auto conflict = consensus::resolve_vote_conflict(f.proposal, f.votes, pool_, objections);
    log_world("objection", label(f.proposal.proposer),
              "h=" + std::to_string(f.proposal.height) + " objections=" + std::to_string(objections.size()));
    inflight_.reset();
    if (conflict.applies()) escalate(conflict.escalate, "objection during commit delay");
    return;
  }
  if (tick_ < f.commit_at) return;
  auto block = consensus::commit_block(f.proposal, f.votes, cfg_.consensus);
  inflight_.reset();
  if (block) apply_commit(*block);
}

void World::apply_commit(const consensus::LedgerBlock& block) {
  auto append_to = [&](DeviceId node) {
    auto& ledger = nodes_.at(node);
    if (ledger.head().block_digest == block.parent) ledger.append(block);
  };
  append_to(block.proposer);
  for (const auto& v : block.votes)
    if (v.accept) append_to(v.validator);
  log_.append(tick_, Channel::Ledger, label(block.proposer), "block", consensus::ledger_row(block));

  for (const auto& id : block.txn_ids) {
    if (pool_.contains(id)) {
      pool_.mark_committed(id, tick_);
      evaluate(id);
    } else {
      disputes_.record_on_ledger(id, block.height);
      log_world("verdict_recorded", id.hex(), "h=" + std::to_string(block.height));
    }
  }
  if (!ledger_.is_banned(block.proposer, tick_))
    ledger_.apply_performance_reward(block.proposer, tick_, "block " + std::to_string(block.height));
  for (const auto& id : block.txn_ids)
    if (const auto* txn = pool_.find(id)) deep_inspect(*txn, block.height);
}

void World::deep_inspect(const transmission::DataTransaction& txn, std::uint64_t height) {
  if (!checks::should_inspect(stream("inspect_txn"), height, checks::target_key(txn.id), cfg_.inspection.rate_txn))
    return;
  const auto out = checks::deep_inspect_transaction(txn, truth_.at(txn.id).delivered, tick_);
  inspection_row(out);
  if (out.passed) return;
  std::vector<DeviceId> accused{txn.sender};
  for (const auto& a : txn.attestations)
    if (a.revealed_verdict == Verdict::Valid) accused.push_back(a.witness_id);
  std::string evidence;
  for (const auto& e : out.evidence) evidence += (evidence.empty() ? "" : ";") + e;
  std::vector<std::uint64_t> refs;
  for (auto d : accused) refs.push_back(log_world("inspection_failed", label(d), txn.id.hex() + " " + evidence));
  open_dispute(arbitration::Category::InspectionFailure, accused, refs, txn.id, "deep inspection");
  for (auto d : accused)
    ledger_.apply_penalty(d, incentives::Severity::Critical, tick_, "inspection " + txn.id.hex().substr(0, 16));
}

void World::escalate(const std::vector<Digest>& ids, const std::string& reason) {
  for (const auto& id : ids) {
    if (pool_.at(id).status != transmission::TxnStatus::Witnessed) continue;
    pool_.mark_disputed(id, tick_, reason);
    handle_disputed(id);
  }
}

bool World::sync_node(DeviceId node) {
  auto& dst = nodes_.at(node);
  std::vector<DeviceId> peers;
  for (const auto& [id, ledger] : nodes_)
    if (id != node && ledger.height() > dst.height() && usable(id)) peers.push_back(id);
  if (peers.empty()) return false;
  SeededRng rng = stream("sync", static_cast<std::uint64_t>(tick_), node.value);
  const std::vector<double> weights(peers.size(), 1.0);
  for (std::size_t i : weighted_draw_order(rng, weights)) {
    const DeviceId peer = peers[i];
    const Actor& src = actor(peer);
    const auto batch = src.policy->serve(consensus::serve_blocks(nodes_.at(peer), dst.height()), src.keys);
    if (checks::should_inspect(stream("inspect_sync"), static_cast<std::uint64_t>(tick_),
                               checks::target_key(node) ^ mix64(peer.value), cfg_.inspection.rate_sync_verify)) {
      const auto out = checks::verify_sync_integrity(batch, dst.head().block_digest, dst.height() + 1, cfg_.consensus,
                                                     label(peer), tick_, &sig_cache_);
      inspection_row(out);
      if (!out.passed) {
        std::set<DeviceId> blamed;
        for (const auto& e : out.evidence) {
          if (e.rfind("vote_signature:", 0) == 0) {
            PublicKey key;
            const auto raw = from_hex(e.substr(e.rfind(':') + 1));
            std::copy_n(raw.begin(), std::min(raw.size(), key.bytes.size()), key.bytes.begin());
            if (auto who = registry_.find(key)) blamed.insert(*who);
          } else {
            blamed.insert(peer);
          }
        }
        for (auto b : blamed) {
          const auto seq = log_world("inspection_failed", label(b), "sync batch to " + label(node));
          open_dispute(arbitration::Category::InspectionFailure, {b}, {seq}, std::nullopt, "sync integrity");
          ledger_.apply_penalty(b, incentives::Severity::Critical, tick_, "sync integrity");
        }
        continue;
      }
    }
    try {
      const auto report = consensus::adopt_blocks(dst, batch, cfg_.consensus);
      log_world("sync", label(node),
                "from=" + label(peer) + " h=" + std::to_string(report.from_height) + ".." +
                    std::to_string(report.to_height));
      return true;
    } catch (const Error& e) {
      if (e.code() != ErrorCode::ChainIntegrityViolation) throw;
      log_world("sync_rejected", label(node), "from=" + label(peer) + " " + e.what());
    }
  }
  return false;
}

void World::sync_lagging() {
  std::uint64_t top = 0;
  const auto eligible = eligible_validators();
  for (auto id : eligible) top = std::max(top, nodes_.at(id).height());
  for (auto id : eligible)
    if (nodes_.at(id).height() < top) sync_node(id);
}

// oversight

void World::revalidations() {
  for (std::size_t i = 0; i < actors_.size(); ++i) {
    const DeviceId id = actors_[i].id;
    if (registry_.at(id).status != DeviceStatus::Active || !onboarding_.revalidation_due(id, tick_)) continue;
    const std::size_t mark = log_.size();
    if (onboarding_.revalidate_device(id, onboarding::SecretProver(actors_[i].secret), tick_, quarantine_)) continue;
    log_world("quarantined", label(id), "revalidation_failed");
    if (auto seq = last_event_seq(mark, "revalidation_failed"))
      open_dispute(arbitration::Category::FailedRevalidation, {id}, {*seq}, std::nullopt, "periodic revalidation");
  }
}

void World::quarantine_device(DeviceId id, const std::string& reason) {
  if (registry_.at(id).status != DeviceStatus::Active) return;
  quarantine_.quarantine(id, reason, tick_);
  log_world("quarantined", label(id), reason);
}

void World::observe(anomaly::StreamMonitor& monitor, const std::string& subject, double sample) {
  for (auto alert : monitor.process(sample, tick_, subject)) {
    alert.id = alert_count_++;
    log_.append(tick_, Channel::Alerts, subject, "alert",
                {std::to_string(tick_), alert.stream, subject, anomaly::to_string(alert.kind), fmtg(alert.z_score),
                 fmtg(alert.value)});
    investigate_alert(alert);
  }
}

void World::observe_streams() {
  auto drain = [&](anomaly::StreamMonitor& m, std::vector<std::pair<std::string, double>>& samples) {
    auto taken = std::move(samples);
    samples.clear();
    for (const auto& [subject, v] : taken) observe(m, subject, v);
  };
  drain(payload_stream_, payload_samples_);
  drain(witness_stream_, witness_samples_);
  drain(vote_stream_, vote_samples_);
  if (tick_ > 0 && tick_ % cfg_.anomaly.rate_epoch == 0) {
    observe(rate_stream_, "network", static_cast<double>(arrivals_this_epoch_));
    arrivals_this_epoch_ = 0;
  }
}

void World::investigate_alert(const anomaly::AnomalyAlert& alert) {
  const auto subject = parse_label(alert.subject);
  if (!subject || !registry_.contains(*subject)) return;
  const auto report = anomaly::investigate(alert, log_, cfg_.anomaly.investigation_window);
  std::vector<std::uint64_t> fresh;
  std::string first;
  for (const auto& v : report.violations) {
    if (cited_.contains(v.seq)) continue;
    if (first.empty()) first = v.event;
    if (v.event == first) fresh.push_back(v.seq);
  }
  if (fresh.empty()) return;
  using arbitration::Category;
  const Category category = first == "commit_mismatch"       ? Category::Equivocation
                            : first == "revalidation_failed" ? Category::FailedRevalidation
                            : first == "inspection_failed"   ? Category::InspectionFailure
                                                             : Category::ProtocolViolation;
  quarantine_device(*subject, "alert " + alert.stream);
  open_dispute(category, {*subject}, fresh, std::nullopt, "alert " + alert.stream);
}

std::optional<DeviceId> World::system_complainant(const std::vector<DeviceId>& accused) const {
  const auto eligible = eligible_validators();
  for (std::size_t k = 0; k < eligible.size(); ++k) {
    const DeviceId c = eligible[(consensus_round_ + k) % eligible.size()];
    bool ok = true;
    for (auto a : accused)
      ok = ok && a != c && registry_.at(a).operator_group != registry_.at(c).operator_group;
    if (ok) return c;
  }
  return std::nullopt;
}

void World::open_dispute(arbitration::Category category, std::vector<DeviceId> accused,
                         std::vector<std::uint64_t> refs, std::optional<Digest> txn, const std::string& summary) {
  std::erase_if(accused, [&](DeviceId d) { return registry_.at(d).status == DeviceStatus::Banned; });
  const auto complainant = system_complainant(accused);
  if (accused.empty() || !complainant) {
    log_world("dispute_skipped", accused.empty() ? "none" : label(accused.front()), summary);
    return;
  }
  std::vector<DeviceId> parties{*complainant};
  parties.insert(parties.end(), accused.begin(), accused.end());
  SeededRng rng = stream("dispute", disputes_.disputes().size());
  try {
    const auto& d = disputes_.open_dispute(std::move(parties), arbitration::Claim{category, refs, txn, summary}, rng,
                                           tick_);
    dispute_touched_[d.id] = tick_;
    cited_.insert(refs.begin(), refs.end());
  } catch (const Error& e) {
    log_world("dispute_rejected", label(accused.front()), e.what());
  }
}

bool World::evidence_fault(const arbitration::Dispute& d) const {
  using arbitration::Category;
  const auto accused = d.accused();
  auto cited = [&](std::string_view event) {
    for (auto seq : d.claim.event_refs) {
      const auto& e = log_.at(seq);
      if (e.event != event) continue;
      for (auto a : accused)
        if (e.subject == label(a)) return true;
    }
    return false;
  };
  switch (d.claim.category) {
    case Category::Equivocation: return cited("commit_mismatch");
    case Category::FailedRevalidation: return cited("revalidation_failed");
    case Category::InspectionFailure: return cited("inspection_failed");
    case Category::ProtocolViolation: return cited("nonce_replay");
    case Category::DisputedTransaction: {
      if (!d.claim.txn) return false;
      const auto* txn = pool_.find(*d.claim.txn);
      if (!txn) return false;
      int valid = 0;
      int invalid = 0;
      auto count = [&](const std::vector<transmission::Attestation>& atts) {
        for (const auto& a : atts) {
          if (a.revealed_verdict == Verdict::Valid) ++valid;
          if (a.revealed_verdict == Verdict::Invalid) ++invalid;
        }
      };
      count(txn->history);
      count(txn->attestations);
      return invalid > valid;
    }
  }
  return false;
}

DisputeView World::view_for(const arbitration::Dispute& d, DeviceId who) const {
  DisputeView v;
  v.category = d.claim.category;
  v.evidence_fault = evidence_fault(d);
  for (auto a : d.accused()) {
    if (actor(a).policy->adversarial()) v.accused_adversarial = true;
    if (a == who) v.self_accused = true;
  }
  return v;
}

void World::advance_disputes() {
  using arbitration::Stage;
  for (auto id : disputes_.open_ids()) {
    auto& touched = dispute_touched_[id];
    if (touched == tick_) continue;
    touched = tick_;
    const auto& d = disputes_.at(id);
    switch (d.stage) {
      case Stage::Mediation: {
        std::optional<arbitration::Verdict> ruling;
        if (d.mediator) ruling = disputes_.propose_ruling(id, actor(*d.mediator).policy->votes_fault(view_for(d, *d.mediator)));
        disputes_.mediate(
            id, ruling,
            [&](DeviceId party, const arbitration::Verdict& v) {
              return actor(party).policy->accepts_ruling(view_for(d, party), !v.at_fault.empty());
            },
            tick_);
        break;
      }
      case Stage::CommunityReview: {
        std::vector<arbitration::BallotVote> votes;
        const auto voters = disputes_.community_voters(d);
        const bool fault = evidence_fault(d);
        for (auto v : voters) {
          const auto& p = actor(v).policy;
          DisputeView view{d.claim.category, fault, false, false};
          if (p->adversarial()) view = view_for(d, v);
          votes.push_back({v, ledger_.score(v), p->votes_fault(view)});
        }
        disputes_.community_review(id, votes, tick_);
        break;
      }
      case Stage::PanelSelection: {
        SeededRng rng = stream("dispute_panel", id, static_cast<std::uint64_t>(tick_));
        try {
          disputes_.select_panel(id, rng, tick_);
        } catch (const Error& e) {
          if (e.code() != ErrorCode::InsufficientArbitrators) throw;
          log_world("panel_pending", "D" + std::to_string(id), e.what());
        }
        break;
      }
      case Stage::FinalArbitration: {
        std::vector<arbitration::BallotVote> votes;
        for (auto a : d.panel) votes.push_back({a, 1.0, actor(a).policy->votes_fault(view_for(d, a))});
        disputes_.arbitrate(id, votes, tick_);
        break;
      }
      case Stage::Appealed:
      case Stage::Closed: break;
    }
    if (disputes_.at(id).stage == Stage::Closed) on_closed(id);
  }
}

void World::on_closed(std::uint64_t id) {
  disputes_.dispatch_remedies(id, tick_);
  const auto& d = disputes_.at(id);
  const bool fault = !d.decision->at_fault.empty();
  for (auto a : d.accused()) {
    if (registry_.at(a).status == DeviceStatus::Banned) continue;
    if (fault) {
      quarantine_.extend(a, tick_ + cfg_.anomaly.review_period);
    } else if (registry_.at(a).status == DeviceStatus::Quarantined) {
      quarantine_.close(a, tick_);
      registry_.at(a).status = DeviceStatus::Active;
      log_world("released", label(a), "exonerated D" + std::to_string(id));
    }
  }
  if (!fault || d.appeal_used) return;
  for (auto a : d.accused()) {
    if (!actor(a).policy->adversarial() || registry_.at(a).status == DeviceStatus::Banned) continue;
    if (ledger_.stake(a).liquid < cfg_.arbitration.appeal_bond) continue;
    SeededRng rng = stream("appeal", id);
    try {
      const auto& dd = disputes_.at(id);
      disputes_.appeal(id, a, rng, [&](DeviceId arb) { return actor(arb).policy->votes_fault(view_for(dd, arb)); },
                       tick_);
      disputes_.dispatch_remedies(id, tick_);
    } catch (const Error& e) {
      if (e.code() != ErrorCode::InsufficientArbitrators && e.code() != ErrorCode::InsufficientBond) throw;
      log_world("appeal_failed", label(a), e.what());
    }
    return;
  }
}

void World::incentive_epoch() {
  if (tick_ == 0 || tick_ % cfg_.incentives.epoch_ticks != 0) return;
  std::uint64_t total = 0;
  for (const auto& [_, n] : votes_cast_) total += n;
  for (const auto& [v, n] : votes_cast_)
    if (total > 0 && ledger_.enrolled(v) && !ledger_.is_banned(v, tick_))
      ledger_.apply_contribution_reward(v, static_cast<double>(n), static_cast<double>(total), tick_,
                                        "epoch " + std::to_string(tick_ / cfg_.incentives.epoch_ticks));
  votes_cast_.clear();
  for (const auto& a : actors_)
    if (ledger_.enrolled(a.id)) ledger_.apply_longevity_bonus(a.id, tick_);
}

void World::trajectory_rows() {
  if (tick_ % cfg_.report_interval != 0) return;
  for (const auto& a : actors_) {
    if (!ledger_.enrolled(a.id)) continue;
    log_world("reputation", label(a.id),
              "score=" + fmt6(ledger_.score(a.id)) + " role=" + primary_role(a.roles) +
                  " persona=" + to_string(a.policy->persona()));
  }
}

void World::census_rows() {
  for (const auto& a : actors_)
    log_world("census", label(a.id),
              std::string("status=") + to_string(registry_.at(a.id).status) + " persona=" +
                  to_string(a.policy->persona()) + " roles=" + roles_text(a.roles));
}

void World::inspection_row(const checks::InspectionOutcome& outcome) {
  log_.append(outcome.tick, Channel::Inspections, outcome.target, outcome.passed ? "inspection" : "inspection_fail",
              outcome.row());
}

std::vector<LogEvent> World::step() {
  if (finished()) fail(ErrorCode::WrongStage, "tick " + std::to_string(tick_) + " is past the scenario duration");
  const std::size_t mark = log_.size();
  log_world("heartbeat", "world", "");
  compromise_keys();
  for (auto id : quarantine_.release_due(tick_)) log_world("released", label(id), "review period elapsed");
  retry_unpaneled();
  arrivals();
  reveals();
  aggregations();
  apply_pool_penalties();
  flush_incentives();
  consensus_round();
  apply_pool_penalties();
  sync_lagging();
  flush_incentives();
  revalidations();
  observe_streams();
  advance_disputes();
  incentive_epoch();
  trajectory_rows();
  flush_incentives();
  respawn_banned();
  if (tick_ + 1 == cfg_.duration_ticks) census_rows();
  flush_incentives();
  ++tick_;
  return {log_.events().begin() + static_cast<std::ptrdiff_t>(mark), log_.events().end()};
}

void World::run() {
  while (!finished()) step();
}

std::string World::snapshot_json() const {
  using nlohmann::ordered_json;
  ordered_json j;
  j["scenario"] = cfg_.name;
  j["seed"] = cfg_.seed;
  j["tick"] = tick_;
  ordered_json devices = ordered_json::array();
  for (const auto& p : registry_.all()) {
    ordered_json d;
    d["id"] = label(p.id);
    d["public_key"] = p.public_key.hex();
    d["status"] = to_string(p.status);
    d["group"] = p.operator_group;
    d["roles"] = roles_text(p.roles);
    if (ledger_.enrolled(p.id)) {
      const auto& s = ledger_.stake(p.id);
      d["staked"] = s.staked.micros;
      d["liquid"] = s.liquid.micros;
      d["bonded"] = s.bonded.micros;
      d["reputation"] = fmt6(ledger_.score(p.id));
      d["perm_banned"] = ledger_.is_perm_banned(p.id);
    }
    devices.push_back(std::move(d));
  }
  j["devices"] = std::move(devices);
  j["treasury"] = ledger_.treasury().micros;
  j["minted"] = ledger_.minted().micros;
  j["deposited"] = ledger_.deposited().micros;
  ordered_json nodes = ordered_json::array();
  for (const auto& [id, ledger] : nodes_)
    nodes.push_back({{"id", label(id)}, {"height", ledger.height()}, {"head", ledger.head().block_digest.hex()}});
  j["nodes"] = std::move(nodes);
  Sha256 txns;
  std::map<std::string, int> by_status;
  for (const auto& id : pool_.order()) {
    const auto& t = pool_.at(id);
    txns.update(id).update(transmission::to_string(t.status));
    ++by_status[transmission::to_string(t.status)];
  }
  j["transactions"] = {{"count", pool_.order().size()}, {"by_status", by_status}, {"digest", txns.finish().hex()}};
  ordered_json disputes = ordered_json::array();
  for (const auto& d : disputes_.disputes()) {
    ordered_json x{{"id", d.id}, {"stage", arbitration::to_string(d.stage)}};
    if (d.decision) {
      x["body"] = arbitration::to_string(d.decision->deciding_body);
      x["at_fault"] = d.decision->at_fault.size();
    }
    disputes.push_back(std::move(x));
  }
  j["disputes"] = std::move(disputes);
  std::size_t open = 0;
  for (const auto& r : quarantine_.records())
    if (!r.released_tick) ++open;
  j["quarantine"] = {{"records", quarantine_.records().size()}, {"open", open}};
  std::size_t finalized = 0;
  for (const auto& s : onboarding_.sessions())
    if (s.stage == onboarding::Stage::Finalized) ++finalized;
  j["sessions"] = {{"count", onboarding_.sessions().size()}, {"finalized", finalized}};
  Sha256 events;
  for (const auto& e : log_.events()) events.update(e.csv_line()).update("\n");
  j["log"] = {{"events", log_.size()}, {"digest", events.finish().hex()}};
  return j.dump(2);
}

Digest World::state_digest() const { return digest(snapshot_json()); }

}  // namespace gdp::sim
