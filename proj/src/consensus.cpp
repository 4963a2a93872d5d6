#include "gdp/consensus.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "gdp/error.hpp"

namespace gdp::consensus {

namespace {

std::string fixed6(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

bool has_quorum(const transmission::DataTransaction& txn, int quorum) {
  int valid = 0;
  for (const auto& a : txn.attestations)
    if (a.revealed_verdict == Verdict::Valid && a.salt && transmission::verdict_commit(Verdict::Valid, *a.salt) == a.commit)
      ++valid;
  return valid >= quorum;
}

}  // namespace

Digest Proposal::digest() const {
  Sha256 h;
  h.update("proposal");
  h.update_u64(height);
  h.update(parent);
  h.update_u64(txn_ids.size());
  for (const auto& id : txn_ids) h.update(id);
  h.update(ByteView(proposer_key.bytes));
  h.update_u64(static_cast<std::uint64_t>(tick));
  return h.finish();
}

Bytes vote_message(const Digest& proposal_digest, bool accept) {
  Bytes msg(proposal_digest.bytes.begin(), proposal_digest.bytes.end());
  msg.push_back(accept ? 1 : 0);
  return msg;
}

Vote make_vote(const KeyPair& keys, DeviceId validator, const Digest& proposal_digest, bool accept, double weight,
               std::vector<Digest> objections) {
  Vote v;
  v.validator = validator;
  v.validator_key = keys.public_key();
  v.proposal_digest = proposal_digest;
  v.accept = accept;
  v.weight = weight;
  v.objections = std::move(objections);
  v.signature = keys.sign(vote_message(proposal_digest, accept));
  return v;
}

double LedgerBlock::accept_weight() const {
  double w = 0.0;
  for (const auto& v : votes)
    if (v.accept) w += v.weight;
  return w;
}

double LedgerBlock::total_weight() const {
  double w = 0.0;
  for (const auto& v : votes) w += v.weight;
  return w;
}

Digest compute_block_digest(std::uint64_t height, const Digest& parent, const std::vector<Digest>& txn_ids,
                            const PublicKey& proposer) {
  Sha256 h;
  h.update_u64(height);
  h.update(parent);
  h.update_u64(txn_ids.size());
  for (const auto& id : txn_ids) h.update(id);
  h.update(ByteView(proposer.bytes));
  return h.finish();
}

LedgerBlock genesis_block() {
  LedgerBlock g;
  g.block_digest = compute_block_digest(0, g.parent, g.txn_ids, g.proposer_key);
  return g;
}

std::vector<std::string> ledger_row(const LedgerBlock& block) {
  return {std::to_string(block.height), block.parent.hex(),          block.block_digest.hex(),
          label(block.proposer),        std::to_string(block.txn_ids.size()), fixed6(block.accept_weight())};
}

Tally tally(const std::vector<Vote>& votes, const ConsensusConfig& cfg) {
  Tally t;
  for (const auto& v : votes) {
    t.total_weight += v.weight;
    if (v.accept) t.accept_weight += v.weight;
  }
  if (t.total_weight <= 0.0) return t;
  t.committed = t.accept_weight > cfg.commit_threshold * t.total_weight;
  const double share = t.accept_weight / t.total_weight;
  t.contested = std::abs(share - cfg.commit_threshold) <= cfg.contested_band;
  return t;
}

std::unordered_map<DeviceId, double> vote_weights(const incentives::Ledger& ledger, const std::vector<DeviceId>& voters,
                                                  const ConsensusConfig& cfg) {
  std::int64_t total_stake = 0;
  for (auto v : voters) total_stake += ledger.stake(v).staked.micros;
  std::unordered_map<DeviceId, double> raw;
  double sum = 0.0;
  for (auto v : voters) {
    const double stake_share =
        total_stake > 0 ? static_cast<double>(ledger.stake(v).staked.micros) / static_cast<double>(total_stake) : 0.0;
    const double w = cfg.stake_weight * stake_share + cfg.reputation_weight * ledger.score(v);
    raw[v] = w;
    sum += w;
  }
  for (auto& [_, w] : raw) w = sum > 0.0 ? w / sum : 1.0 / static_cast<double>(voters.size());
  return raw;
}

DeviceId round_robin_proposer(const std::vector<DeviceId>& eligible, std::uint64_t round) {
  if (eligible.empty()) fail(ErrorCode::InsufficientNodes, "no eligible proposer");
  return eligible[round % eligible.size()];
}

NodeLedger::NodeLedger(const transmission::TransmissionPool* pool) : pool_(pool) {
  blocks_.push_back(genesis_block());
  by_digest_.insert(blocks_.back().block_digest);
}

std::uint64_t NodeLedger::committed_nonce(DeviceId sender) const {
  auto it = committed_nonce_.find(sender);
  return it == committed_nonce_.end() ? 0 : it->second;
}

void NodeLedger::append(LedgerBlock block) {
  if (block.parent != head().block_digest || block.height != height() + 1)
    fail(ErrorCode::UnknownParent, "block " + std::to_string(block.height) + " does not extend head");
  for (const auto& id : block.txn_ids) {
    entries_.insert(id);
    if (!pool_) continue;
    if (const auto* txn = pool_->find(id)) {
      auto& n = committed_nonce_[txn->sender];
      n = std::max(n, txn->nonce);
    }
  }
  by_digest_.insert(block.block_digest);
  blocks_.push_back(std::move(block));
}

void NodeLedger::verify_chain() const {
  for (std::size_t i = 0; i < blocks_.size(); ++i) {
    const auto& b = blocks_[i];
    const Digest parent = i == 0 ? Digest{} : blocks_[i - 1].block_digest;
    if (b.height != i || b.parent != parent ||
        compute_block_digest(b.height, b.parent, b.txn_ids, b.proposer_key) != b.block_digest)
      fail(ErrorCode::ChainIntegrityViolation, "block " + std::to_string(i));
  }
}

std::uint64_t next_expected_nonce(const transmission::TransmissionPool& pool, DeviceId sender, std::uint64_t last) {
  std::uint64_t n = last + 1;
  while (pool.nonce_voided(sender, n)) ++n;
  return n;
}

std::vector<Digest> proposal_violations(const NodeLedger& ledger, const Proposal& proposal,
                                        const ValidationContext& ctx) {
  std::vector<Digest> bad;
  std::unordered_map<DeviceId, std::uint64_t> last;
  std::unordered_set<Digest, DigestHash> seen;
  for (const auto& id : proposal.txn_ids) {
    if (ledger.contains_entry(id) || !seen.insert(id).second) {
      bad.push_back(id);
      continue;
    }
    const auto* txn = ctx.pool.find(id);
    if (!txn) {
      if (!ctx.pending_records.contains(id)) bad.push_back(id);
      continue;
    }
    if (txn->status != transmission::TxnStatus::Witnessed || !has_quorum(*txn, ctx.panel.effective_quorum())) {
      bad.push_back(id);
      continue;
    }
    auto it = last.find(txn->sender);
    const std::uint64_t prev = it == last.end() ? ledger.committed_nonce(txn->sender) : it->second;
    if (txn->nonce != next_expected_nonce(ctx.pool, txn->sender, prev)) {
      bad.push_back(id);
      continue;
    }
    last[txn->sender] = txn->nonce;
  }
  return bad;
}

Proposal propose_block(DeviceId node, DeviceId round_proposer, const KeyPair& keys, const NodeLedger& ledger,
                       const ValidationContext& ctx, const std::vector<Digest>& records, const ConsensusConfig& cfg,
                       const incentives::Ledger& reputation, Tick tick) {
  if (node != round_proposer) fail(ErrorCode::NotProposer, label(node) + " (round belongs to " + label(round_proposer) + ")");
  Proposal p;
  p.proposer = node;
  p.proposer_key = keys.public_key();
  p.height = ledger.height() + 1;
  p.parent = ledger.head().block_digest;
  p.tick = tick;
  const auto cap = static_cast<std::size_t>(cfg.batch_cap);
  for (const auto& r : records) {
    if (p.txn_ids.size() == cap) break;
    if (!ledger.contains_entry(r)) p.txn_ids.push_back(r);
  }

  auto candidates = ctx.pool.mempool();
  if (cfg.mempool_order == "reputation") {
    std::stable_sort(candidates.begin(), candidates.end(), [&](const auto* a, const auto* b) {
      const double ra = reputation.enrolled(a->sender) ? reputation.score(a->sender) : 0.0;
      const double rb = reputation.enrolled(b->sender) ? reputation.score(b->sender) : 0.0;
      return ra > rb;
    });
  }
  std::unordered_map<DeviceId, std::uint64_t> expected;
  for (const auto* txn : candidates) {
    if (p.txn_ids.size() == cap) break;
    if (ledger.contains_entry(txn->id)) continue;
    auto it = expected.find(txn->sender);
    if (it == expected.end())
      it = expected.emplace(txn->sender, next_expected_nonce(ctx.pool, txn->sender, ledger.committed_nonce(txn->sender)))
               .first;
    if (txn->nonce != it->second) continue;
    p.txn_ids.push_back(txn->id);
    it->second = next_expected_nonce(ctx.pool, txn->sender, txn->nonce);
  }
  if (p.txn_ids.empty()) fail(ErrorCode::EmptyMempool, label(node));
  p.signature = keys.sign(ByteView(p.digest().bytes));
  return p;
}

Vote validate_proposal(DeviceId node, const KeyPair& keys, const NodeLedger& ledger, const Proposal& proposal,
                       const ValidationContext& ctx, double weight, const std::vector<Digest>& extra_objections,
                       SignatureCache* cache) {
  if (node == proposal.proposer) fail(ErrorCode::WrongStage, "proposer does not vote on its own proposal");
  if (!ledger.contains_block(proposal.parent))
    fail(ErrorCode::UnknownParent, label(node) + " lacks " + proposal.parent.hex());
  const Digest pd = proposal.digest();
  const bool sig_ok = cache ? cache->verify(proposal.proposer_key, ByteView(pd.bytes), proposal.signature)
                            : verify(proposal.proposer_key, ByteView(pd.bytes), proposal.signature);
  std::vector<Digest> objections;
  bool accept = sig_ok && proposal.parent == ledger.head().block_digest && proposal.height == ledger.height() + 1;
  if (accept) objections = proposal_violations(ledger, proposal, ctx);
  for (const auto& id : extra_objections)
    if (std::find(proposal.txn_ids.begin(), proposal.txn_ids.end(), id) != proposal.txn_ids.end() &&
        std::find(objections.begin(), objections.end(), id) == objections.end())
      objections.push_back(id);
  accept = accept && objections.empty();
  return make_vote(keys, node, pd, accept, weight, std::move(objections));
}

std::optional<LedgerBlock> commit_block(const Proposal& proposal, const std::vector<Vote>& votes,
                                        const ConsensusConfig& cfg) {
  const Digest pd = proposal.digest();
  std::vector<Vote> counted;
  std::unordered_set<DeviceId> voters;
  for (const auto& v : votes)
    if (v.proposal_digest == pd && voters.insert(v.validator).second) counted.push_back(v);
  if (!tally(counted, cfg).committed) return std::nullopt;
  LedgerBlock b;
  b.height = proposal.height;
  b.parent = proposal.parent;
  b.txn_ids = proposal.txn_ids;
  b.proposer = proposal.proposer;
  b.proposer_key = proposal.proposer_key;
  b.votes = std::move(counted);
  b.block_digest = compute_block_digest(b.height, b.parent, b.txn_ids, b.proposer_key);
  return b;
}

ConflictOutcome resolve_vote_conflict(const Proposal& proposal, const std::vector<Vote>& votes,
                                      const transmission::TransmissionPool& pool,
                                      const std::vector<Digest>& objections) {
  std::unordered_set<Digest, DigestHash> flagged(objections.begin(), objections.end());
  for (const auto& v : votes)
    if (!v.accept) flagged.insert(v.objections.begin(), v.objections.end());
  ConflictOutcome out;
  for (const auto& id : proposal.txn_ids) {
    const auto* txn = pool.find(id);
    bool dissent = flagged.contains(id);
    if (txn && !dissent)
      for (const auto& a : txn->attestations)
        if (a.equivocated || a.revealed_verdict != Verdict::Valid) dissent = true;
    if (txn && dissent && txn->status == transmission::TxnStatus::Witnessed)
      out.escalate.push_back(id);
    else
      out.trimmed.push_back(id);
  }
  if (out.escalate.empty()) out.trimmed.clear();
  return out;
}

void verify_block(const LedgerBlock& block, const Digest& expected_parent, std::uint64_t expected_height,
                  const ConsensusConfig& cfg) {
  const auto where = "block " + std::to_string(block.height);
  if (block.height != expected_height) fail(ErrorCode::ChainIntegrityViolation, where + ": height");
  if (block.parent != expected_parent) fail(ErrorCode::ChainIntegrityViolation, where + ": parent digest");
  if (compute_block_digest(block.height, block.parent, block.txn_ids, block.proposer_key) != block.block_digest)
    fail(ErrorCode::ChainIntegrityViolation, where + ": block digest");
  std::unordered_set<PublicKey, PublicKeyHash> voters;
  for (const auto& v : block.votes)
    if (!voters.insert(v.validator_key).second) fail(ErrorCode::ChainIntegrityViolation, where + ": duplicate voter");
  if (!tally(block.votes, cfg).committed) fail(ErrorCode::ChainIntegrityViolation, where + ": vote threshold");
}

std::vector<PublicKey> bad_vote_signers(const LedgerBlock& block, SignatureCache* cache) {
  std::vector<PublicKey> bad;
  for (const auto& v : block.votes) {
    const Bytes msg = vote_message(v.proposal_digest, v.accept);
    const bool ok = cache ? cache->verify(v.validator_key, msg, v.signature) : verify(v.validator_key, msg, v.signature);
    if (!ok) bad.push_back(v.signature.signer);
  }
  return bad;
}

SyncReport adopt_blocks(NodeLedger& dst, const std::vector<LedgerBlock>& suffix, const ConsensusConfig& cfg) {
  SyncReport report;
  report.from_height = dst.height();
  Digest parent = dst.head().block_digest;
  std::uint64_t height = dst.height() + 1;
  for (const auto& b : suffix) {
    verify_block(b, parent, height, cfg);
    parent = b.block_digest;
    ++height;
  }
  for (const auto& b : suffix) dst.append(b);
  report.to_height = dst.height();
  report.transferred = suffix;
  return report;
}

std::vector<LedgerBlock> serve_blocks(const NodeLedger& src, std::uint64_t from_height) {
  const auto& blocks = src.blocks();
  if (from_height >= blocks.size()) return {};
  return {blocks.begin() + static_cast<std::ptrdiff_t>(from_height) + 1, blocks.end()};
}

bool prefix_consistent(const NodeLedger& a, const NodeLedger& b) {
  const auto h = std::min(a.height(), b.height());
  return a.blocks()[h].block_digest == b.blocks()[h].block_digest;
}

SyncReport synchronize(NodeLedger& a, NodeLedger& b, const ConsensusConfig& cfg) {
  if (!prefix_consistent(a, b))
    fail(ErrorCode::ChainIntegrityViolation, "ledgers diverge at height " + std::to_string(std::min(a.height(), b.height())));
  NodeLedger& lower = a.height() < b.height() ? a : b;
  NodeLedger& higher = a.height() < b.height() ? b : a;
  if (lower.height() == higher.height()) {
    SyncReport r;
    r.from_height = r.to_height = lower.height();
    return r;
  }
  return adopt_blocks(lower, serve_blocks(higher, lower.height()), cfg);
}

}  // namespace gdp::consensus
