#pragma once

#include <functional>
#include <optional>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "gdp/config.hpp"
#include "gdp/incentives.hpp"
#include "gdp/registry.hpp"
#include "gdp/transmission.hpp"

namespace gdp::consensus {

struct Proposal {
  DeviceId proposer;
  PublicKey proposer_key;
  std::uint64_t height = 0;  // height the block would take
  Digest parent;
  std::vector<Digest> txn_ids;  // transactions and verdict records
  Tick tick = 0;
  Signature signature;

  Digest digest() const;
};

struct Vote {
  DeviceId validator;
  PublicKey validator_key;
  Digest proposal_digest;
  bool accept = false;
  double weight = 0.0;
  std::vector<Digest> objections;  // entries a rejecting validator objects to
  Signature signature;
};

Bytes vote_message(const Digest& proposal_digest, bool accept);
Vote make_vote(const KeyPair& keys, DeviceId validator, const Digest& proposal_digest, bool accept, double weight,
               std::vector<Digest> objections = {});

struct LedgerBlock {
  std::uint64_t height = 0;
  Digest parent;
  std::vector<Digest> txn_ids;
  DeviceId proposer;
  PublicKey proposer_key;
  std::vector<Vote> votes;
  Digest block_digest;

  double accept_weight() const;
  double total_weight() const;
};

Digest compute_block_digest(std::uint64_t height, const Digest& parent, const std::vector<Digest>& txn_ids,
                            const PublicKey& proposer);
LedgerBlock genesis_block();

/// `height,parent_hex,block_digest_hex,proposer,txn_count,accept_weight`
std::vector<std::string> ledger_row(const LedgerBlock& block);

struct Tally {
  double accept_weight = 0.0;
  double total_weight = 0.0;
  bool committed = false;
  bool contested = false;  // accept share within the contested band of the threshold
};

/// Commit iff accepting weight > threshold * total vote weight.
Tally tally(const std::vector<Vote>& votes, const ConsensusConfig& cfg);

/// raw_i = stake_weight * stake_i / sum(stake) + reputation_weight * rep_i,
/// then renormalized to sum to 1 over `voters`.
std::unordered_map<DeviceId, double> vote_weights(const incentives::Ledger& ledger, const std::vector<DeviceId>& voters,
                                                  const ConsensusConfig& cfg);

/// Round-robin over the eligible set, which must be sorted.
DeviceId round_robin_proposer(const std::vector<DeviceId>& eligible, std::uint64_t round);

/// One node's copy of the chain. Commits hold sender nonces so validators can
/// check next-expected nonces against ledger + proposal prefix.
class NodeLedger {
 public:
  explicit NodeLedger(const transmission::TransmissionPool* pool = nullptr);

  const std::vector<LedgerBlock>& blocks() const noexcept { return blocks_; }
  const LedgerBlock& head() const { return blocks_.back(); }
  std::uint64_t height() const noexcept { return blocks_.size() - 1; }
  bool contains_entry(const Digest& id) const { return entries_.contains(id); }
  bool contains_block(const Digest& block_digest) const { return by_digest_.contains(block_digest); }
  std::uint64_t committed_nonce(DeviceId sender) const;

  /// Appends a block whose parent is the current head.
  void append(LedgerBlock block);

  /// Recomputes every digest and parent link; throws ChainIntegrityViolation.
  void verify_chain() const;

 private:
  const transmission::TransmissionPool* pool_;
  std::vector<LedgerBlock> blocks_;
  std::unordered_set<Digest, DigestHash> entries_;
  std::unordered_set<Digest, DigestHash> by_digest_;
  std::unordered_map<DeviceId, std::uint64_t> committed_nonce_;
};

/// Smallest nonce above `last` that the pool has not voided.
std::uint64_t next_expected_nonce(const transmission::TransmissionPool& pool, DeviceId sender, std::uint64_t last);

/// Protocol facts a validator checks a proposal against.
struct ValidationContext {
  const transmission::TransmissionPool& pool;
  const PanelConfig& panel;
  /// Verdict records awaiting inclusion.
  const std::unordered_set<Digest, DigestHash>& pending_records;
};

/// Entries of a proposal that violate quorum, nonce or double-commit rules.
std::vector<Digest> proposal_violations(const NodeLedger& ledger, const Proposal& proposal,
                                        const ValidationContext& ctx);

Proposal propose_block(DeviceId node, DeviceId round_proposer, const KeyPair& keys, const NodeLedger& ledger,
                       const ValidationContext& ctx, const std::vector<Digest>& records, const ConsensusConfig& cfg,
                       const incentives::Ledger& reputation, Tick tick);

/// Votes on a proposal. `extra_objections` are entries the node flagged itself
/// (e.g. after a failed inspection). Throws UnknownParent if the node lacks the
/// parent block.
Vote validate_proposal(DeviceId node, const KeyPair& keys, const NodeLedger& ledger, const Proposal& proposal,
                       const ValidationContext& ctx, double weight,
                       const std::vector<Digest>& extra_objections = {}, SignatureCache* cache = nullptr);

/// Builds the block if the votes carry it; nullopt means rejection.
std::optional<LedgerBlock> commit_block(const Proposal& proposal, const std::vector<Vote>& votes,
                                        const ConsensusConfig& cfg);

struct ConflictOutcome {
  std::vector<Digest> escalate;  // entries sent back to witnessing
  std::vector<Digest> trimmed;   // entries kept for the next round
  bool applies() const noexcept { return !escalate.empty(); }
};

/// Splits a contested proposal: transactions with dissenting attestations or
/// validator objections are escalated, the rest are kept.
ConflictOutcome resolve_vote_conflict(const Proposal& proposal, const std::vector<Vote>& votes,
                                      const transmission::TransmissionPool& pool,
                                      const std::vector<Digest>& objections = {});

struct SyncReport {
  std::uint64_t from_height = 0;
  std::uint64_t to_height = 0;
  std::vector<LedgerBlock> transferred;
  bool adopted() const noexcept { return !transferred.empty(); }
};

/// Structural checks on a block: digest, parent link, distinct voters and
/// the recorded vote threshold. Signatures are not checked here.
void verify_block(const LedgerBlock& block, const Digest& expected_parent, std::uint64_t expected_height,
                  const ConsensusConfig& cfg);

/// Verifies every vote signature against its validator key; returns the
/// signer keys of bad signatures.
std::vector<PublicKey> bad_vote_signers(const LedgerBlock& block, SignatureCache* cache = nullptr);

/// Appends a served suffix to dst after verifying it; dst is unchanged on error.
SyncReport adopt_blocks(NodeLedger& dst, const std::vector<LedgerBlock>& suffix, const ConsensusConfig& cfg);

/// Blocks of src above `from_height`.
std::vector<LedgerBlock> serve_blocks(const NodeLedger& src, std::uint64_t from_height);

/// The lower ledger adopts the other's missing blocks. Diverging chains throw
/// ChainIntegrityViolation and leave both unchanged.
SyncReport synchronize(NodeLedger& a, NodeLedger& b, const ConsensusConfig& cfg);

/// True iff one chain is a prefix of the other.
bool prefix_consistent(const NodeLedger& a, const NodeLedger& b);

}  // namespace gdp::consensus
