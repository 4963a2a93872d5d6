#include "gdp/transmission.hpp"

#include <algorithm>

#include "gdp/error.hpp"

namespace gdp::transmission {

const char* to_string(TxnStatus s) noexcept {
  switch (s) {
    case TxnStatus::Pending: return "Pending";
    case TxnStatus::Witnessed: return "Witnessed";
    case TxnStatus::Committed: return "Committed";
    case TxnStatus::Rejected: return "Rejected";
    case TxnStatus::Disputed: return "Disputed";
  }
  return "Unknown";
}

bool DataTransaction::on_panel(DeviceId w) const { return std::find(panel.begin(), panel.end(), w) != panel.end(); }

const Attestation* DataTransaction::attestation_of(DeviceId w) const {
  for (const auto& a : attestations)
    if (a.witness_id == w) return &a;
  return nullptr;
}

Digest transaction_id(const PublicKey& sender, const PublicKey& receiver, const Digest& payload_digest,
                      std::uint64_t nonce, Tick created_tick) {
  return Sha256()
      .update(ByteView(sender.bytes))
      .update(ByteView(receiver.bytes))
      .update(payload_digest)
      .update_u64(nonce)
      .update_u64(static_cast<std::uint64_t>(created_tick))
      .finish();
}

Digest verdict_commit(Verdict verdict, const Salt& salt) {
  const std::uint8_t v = static_cast<std::uint8_t>(verdict);
  return Sha256().update(ByteView(&v, 1)).update(ByteView(salt)).finish();
}

Bytes attestation_message(const Digest& txn_id, const Digest& commit) {
  Bytes msg(txn_id.bytes.begin(), txn_id.bytes.end());
  msg.insert(msg.end(), commit.bytes.begin(), commit.bytes.end());
  return msg;
}

Attestation make_attestation(const KeyPair& keys, DeviceId witness, const Digest& txn_id, Verdict verdict,
                             const Salt& salt) {
  Attestation a;
  a.witness_id = witness;
  a.witness = keys.public_key();
  a.txn_id = txn_id;
  a.commit = verdict_commit(verdict, salt);
  a.signature = keys.sign(attestation_message(txn_id, a.commit));
  return a;
}

TxnStatus aggregate_rule(int valid, int invalid, int k, int quorum) noexcept {
  if (valid >= quorum) return TxnStatus::Witnessed;
  if (invalid >= quorum) return TxnStatus::Rejected;
  return TxnStatus::Disputed;
}

std::vector<DeviceId> select_witnesses(const DeviceRegistry& registry, const incentives::Ledger& ledger,
                                       const DataTransaction& txn, const PanelConfig& cfg, SeededRng& rng,
                                       const std::unordered_set<DeviceId>& excluded, Tick tick) {
  std::vector<DeviceId> candidates;
  std::vector<double> weights;
  for (const auto& p : registry.all()) {
    if (!p.has_role(role::kWitness) || p.status != DeviceStatus::Active) continue;
    if (p.id == txn.sender || p.id == txn.receiver || excluded.contains(p.id)) continue;
    if (!ledger.enrolled(p.id) || ledger.is_banned(p.id, tick)) continue;
    candidates.push_back(p.id);
    weights.push_back(ledger.score(p.id));
  }
  std::vector<DeviceId> panel;
  std::unordered_map<std::string, int> per_group;
  for (std::size_t i : weighted_draw_order(rng, weights)) {
    const auto& group = registry.at(candidates[i]).operator_group;
    int& used = per_group[group];
    if (used >= cfg.diversity) continue;
    ++used;
    panel.push_back(candidates[i]);
    if (static_cast<int>(panel.size()) == cfg.k) return panel;
  }
  fail(ErrorCode::InsufficientWitnesses, "found " + std::to_string(panel.size()) + " of k=" + std::to_string(cfg.k) +
                                             " eligible witnesses");
}

void TransmissionPool::log(Tick tick, const DataTransaction& txn, const std::string& event, const std::string& actor,
                           const std::string& detail) {
  if (!log_) return;
  log_->append(tick, Channel::Transactions, actor, event, {std::to_string(tick), txn.id.hex(), event, actor, detail});
}

void TransmissionPool::set_status(DataTransaction& txn, TxnStatus status, Tick tick) {
  if (txn.status == TxnStatus::Witnessed) witnessed_.erase(txn.seq);
  if (txn.status == TxnStatus::Pending) pending_.erase(txn.seq);
  txn.status = status;
  if (status == TxnStatus::Witnessed) {
    witnessed_.emplace(txn.seq, txn.id);
    if (txn.witnessed_tick < 0) txn.witnessed_tick = tick;
  }
  if (status == TxnStatus::Pending) pending_.emplace(txn.seq, txn.id);
  if (status == TxnStatus::Committed || status == TxnStatus::Rejected) txn.terminal_tick = tick;
}

DataTransaction& TransmissionPool::submit(DataTransaction txn, Tick tick) {
  const auto last = last_nonce_.find(txn.sender);
  if (last != last_nonce_.end() && txn.nonce <= last->second) {
    if (log_)
      log_->append(tick, Channel::Transactions, label(txn.sender), "nonce_replay",
                   {std::to_string(tick), txn.id.hex(), "nonce_replay", label(txn.sender),
                    "nonce " + std::to_string(txn.nonce) + " <= " + std::to_string(last->second)});
    fail(ErrorCode::NonceReplay, label(txn.sender) + " nonce " + std::to_string(txn.nonce));
  }
  if (txns_.contains(txn.id)) fail(ErrorCode::AlreadyCommitted, txn.id.hex());
  last_nonce_[txn.sender] = txn.nonce;
  txn.seq = order_.size();
  txn.status = TxnStatus::Pending;
  order_.push_back(txn.id);
  auto [it, _] = txns_.emplace(txn.id, std::move(txn));
  log(tick, it->second, "submit", label(it->second.sender), "nonce=" + std::to_string(it->second.nonce));
  return it->second;
}

void TransmissionPool::open_round(const Digest& txn_id, std::vector<DeviceId> panel, Tick tick) {
  auto& txn = at(txn_id);
  if (!txn.panel.empty()) {
    txn.prior_panels.push_back(txn.panel);
    for (auto& a : txn.attestations) txn.history.push_back(a);
  }
  txn.attestations.clear();
  txn.panel = std::move(panel);
  txn.round_started = tick;
  ++txn.round;
  set_status(txn, TxnStatus::Pending, tick);
  std::string members;
  for (auto w : txn.panel) members += (members.empty() ? "" : " ") + label(w);
  log(tick, txn, "panel", "round" + std::to_string(txn.round), members);
}

void TransmissionPool::witness_commit(const Digest& txn_id, const Attestation& attestation,
                                      const PublicKey& witness_key, Tick tick) {
  auto& txn = at(txn_id);
  if (txn.status != TxnStatus::Pending) fail(ErrorCode::WrongStage, "transaction is " + std::string(to_string(txn.status)));
  if (!txn.on_panel(attestation.witness_id)) fail(ErrorCode::NotOnPanel, label(attestation.witness_id));
  if (txn.attestation_of(attestation.witness_id)) fail(ErrorCode::AlreadyCommitted, label(attestation.witness_id));
  if (attestation.txn_id != txn_id || attestation.witness != witness_key ||
      !sig_cache_.verify(witness_key, attestation_message(txn_id, attestation.commit), attestation.signature))
    fail(ErrorCode::BadSignature, label(attestation.witness_id));
  Attestation a = attestation;
  a.revealed_verdict.reset();
  a.salt.reset();
  a.equivocated = false;
  a.round = txn.round;
  txn.attestations.push_back(a);
  log(tick, txn, "commit", label(a.witness_id), a.commit.hex());
}

bool TransmissionPool::all_committed(const DataTransaction& txn) const {
  return txn.attestations.size() == txn.panel.size();
}

bool TransmissionPool::all_revealed(const DataTransaction& txn) const {
  if (!all_committed(txn)) return false;
  return std::all_of(txn.attestations.begin(), txn.attestations.end(),
                     [](const Attestation& a) { return a.revealed_verdict || a.equivocated; });
}

bool TransmissionPool::reveal_open(const DataTransaction& txn, Tick tick) const {
  return all_committed(txn) || tick >= txn.round_started + cfg_.reveal_deadline;
}

bool TransmissionPool::ready_to_aggregate(const DataTransaction& txn, Tick tick) const {
  return txn.status == TxnStatus::Pending && (all_revealed(txn) || tick >= txn.round_started + cfg_.reveal_deadline);
}

void TransmissionPool::witness_reveal(const Digest& txn_id, DeviceId witness, Verdict verdict, const Salt& salt,
                                      Tick tick) {
  auto& txn = at(txn_id);
  if (txn.status != TxnStatus::Pending) fail(ErrorCode::WrongStage, "transaction is " + std::string(to_string(txn.status)));
  if (!txn.on_panel(witness)) fail(ErrorCode::NotOnPanel, label(witness));
  if (!reveal_open(txn, tick)) fail(ErrorCode::RevealTooEarly, label(witness));
  Attestation* a = nullptr;
  for (auto& x : txn.attestations)
    if (x.witness_id == witness) a = &x;
  if (!a) fail(ErrorCode::NotOnPanel, label(witness) + " has no commit");
  if (a->revealed_verdict || a->equivocated) fail(ErrorCode::AlreadyCommitted, label(witness) + " already revealed");
  if (verdict_commit(verdict, salt) != a->commit) {
    a->equivocated = true;
    penalties_.push_back(PenaltyRequest{witness, incentives::Severity::Major, tick, "commit_mismatch " + txn.id.hex()});
    log(tick, txn, "commit_mismatch", label(witness), to_string(verdict));
    fail(ErrorCode::CommitMismatch, label(witness));
  }
  a->revealed_verdict = verdict;
  a->salt = salt;
  log(tick, txn, "reveal", label(witness), to_string(verdict));
}

TxnStatus TransmissionPool::aggregate_attestations(const Digest& txn_id, Tick tick) {
  auto& txn = at(txn_id);
  if (!ready_to_aggregate(txn, tick)) fail(ErrorCode::RevealTooEarly, "round still open for " + txn.id.hex());
  int valid = 0;
  for (DeviceId w : txn.panel) {
    const Attestation* a = txn.attestation_of(w);
    if (a && a->revealed_verdict == Verdict::Valid) {
      ++valid;
    } else if (!a || (!a->revealed_verdict && !a->equivocated)) {
      penalties_.push_back(PenaltyRequest{w, incentives::Severity::Minor, tick, "lazy " + txn.id.hex()});
      log(tick, txn, "lazy", label(w), a ? "no reveal" : "no commit");
    }
  }
  const int k = static_cast<int>(txn.panel.size());
  const TxnStatus outcome = aggregate_rule(valid, k - valid, k, cfg_.effective_quorum());
  set_status(txn, outcome, tick);
  const char* event = outcome == TxnStatus::Witnessed ? "witnessed" : outcome == TxnStatus::Rejected ? "rejected" : "disputed";
  log(tick, txn, event, "round" + std::to_string(txn.round),
      "valid=" + std::to_string(valid) + " invalid=" + std::to_string(k - valid));
  if (outcome == TxnStatus::Rejected) voided_[txn.sender].insert(txn.nonce);
  return outcome;
}

EscalationResult TransmissionPool::reescalate_disputed(const Digest& txn_id, const DeviceRegistry& registry,
                                                       const incentives::Ledger& ledger, SeededRng& rng, Tick tick) {
  auto& txn = at(txn_id);
  if (txn.status != TxnStatus::Disputed) fail(ErrorCode::WrongStage, "transaction is " + std::string(to_string(txn.status)));
  if (txn.escalations < cfg_.max_escalations) {
    std::unordered_set<DeviceId> excluded(txn.panel.begin(), txn.panel.end());
    for (const auto& p : txn.prior_panels) excluded.insert(p.begin(), p.end());
    try {
      auto panel = select_witnesses(registry, ledger, txn, cfg_, rng, excluded, tick);
      ++txn.escalations;
      log(tick, txn, "escalated", "round" + std::to_string(txn.round + 1),
          "escalation " + std::to_string(txn.escalations));
      open_round(txn_id, std::move(panel), tick);
      return EscalationResult::Reescalated;
    } catch (const Error& e) {
      if (e.code() != ErrorCode::InsufficientWitnesses) throw;
    }
  }
  txn.exhausted = true;
  log(tick, txn, "escalation_exhausted", label(txn.sender), "escalations=" + std::to_string(txn.escalations));
  mark_rejected(txn_id, tick, "escalation cap");
  return EscalationResult::Exhausted;
}

void TransmissionPool::mark_committed(const Digest& txn_id, Tick tick) {
  auto& txn = at(txn_id);
  if (txn.status != TxnStatus::Witnessed) fail(ErrorCode::WrongStage, "transaction is " + std::string(to_string(txn.status)));
  set_status(txn, TxnStatus::Committed, tick);
  log(tick, txn, "committed", label(txn.sender), "nonce=" + std::to_string(txn.nonce));
}

void TransmissionPool::mark_disputed(const Digest& txn_id, Tick tick, const std::string& reason) {
  auto& txn = at(txn_id);
  if (txn.status != TxnStatus::Witnessed) fail(ErrorCode::WrongStage, "transaction is " + std::string(to_string(txn.status)));
  set_status(txn, TxnStatus::Disputed, tick);
  log(tick, txn, "disputed", "consensus", reason);
}

void TransmissionPool::mark_rejected(const Digest& txn_id, Tick tick, const std::string& reason) {
  auto& txn = at(txn_id);
  if (txn.status == TxnStatus::Committed) fail(ErrorCode::AlreadyCommitted, txn.id.hex());
  if (txn.status == TxnStatus::Rejected) return;
  set_status(txn, TxnStatus::Rejected, tick);
  voided_[txn.sender].insert(txn.nonce);
  log(tick, txn, "rejected", label(txn.sender), reason);
}

std::vector<WitnessEvaluation> TransmissionPool::evaluate_witnesses(const Digest& txn_id) const {
  const auto& txn = at(txn_id);
  std::vector<WitnessEvaluation> out;
  if (txn.status != TxnStatus::Committed && txn.status != TxnStatus::Rejected) return out;
  if (txn.exhausted) return out;  // no terminal truth; arbitration owns the outcome
  const Verdict truth = txn.status == TxnStatus::Committed ? Verdict::Valid : Verdict::Invalid;
  auto judge = [&](const std::vector<Attestation>& round, const std::vector<DeviceId>& panel) {
    for (DeviceId w : panel) {
      const Attestation* a = nullptr;
      for (const auto& x : round)
        if (x.witness_id == w) a = &x;
      WitnessEvaluation e;
      e.witness = w;
      if (a && a->equivocated) {
        e.penalty = incentives::Severity::Major;
        e.penalized_earlier = true;
        e.reason = "equivocation";
      } else if (!a || !a->revealed_verdict) {
        e.penalty = incentives::Severity::Minor;
        e.penalized_earlier = true;
        e.reason = "lazy";
      } else if (*a->revealed_verdict == truth) {
        e.correct = true;
        e.reason = "correct";
      } else {
        e.penalty = incentives::Severity::Minor;
        e.reason = "wrong";
      }
      out.push_back(std::move(e));
    }
  };
  for (std::size_t r = 0; r < txn.prior_panels.size(); ++r) {
    std::vector<Attestation> round;
    for (const auto& a : txn.history)
      if (a.round == static_cast<int>(r) + 1) round.push_back(a);
    judge(round, txn.prior_panels[r]);
  }
  judge(txn.attestations, txn.panel);
  return out;
}

DataTransaction& TransmissionPool::at(const Digest& txn_id) {
  auto it = txns_.find(txn_id);
  if (it == txns_.end()) fail(ErrorCode::UnknownTransaction, txn_id.hex());
  return it->second;
}

const DataTransaction& TransmissionPool::at(const Digest& txn_id) const {
  return const_cast<TransmissionPool*>(this)->at(txn_id);
}

const DataTransaction* TransmissionPool::find(const Digest& txn_id) const {
  auto it = txns_.find(txn_id);
  return it == txns_.end() ? nullptr : &it->second;
}

std::vector<const DataTransaction*> TransmissionPool::mempool() const {
  std::vector<const DataTransaction*> out;
  out.reserve(witnessed_.size());
  for (const auto& [_, id] : witnessed_) out.push_back(&txns_.at(id));
  return out;
}

std::vector<Digest> TransmissionPool::open_rounds() const {
  std::vector<Digest> out;
  out.reserve(pending_.size());
  for (const auto& [_, id] : pending_) out.push_back(id);
  return out;
}

std::uint64_t TransmissionPool::last_nonce(DeviceId sender) const {
  auto it = last_nonce_.find(sender);
  return it == last_nonce_.end() ? 0 : it->second;
}

bool TransmissionPool::nonce_voided(DeviceId sender, std::uint64_t nonce) const {
  auto it = voided_.find(sender);
  return it != voided_.end() && it->second.contains(nonce);
}

std::vector<PenaltyRequest> TransmissionPool::take_penalties() {
  std::vector<PenaltyRequest> out;
  out.swap(penalties_);
  return out;
}

}  // namespace gdp::transmission
