#include "gdp/checks.hpp"

#include <bit>

#include "gdp/error.hpp"

namespace gdp::checks {

const char* to_string(TargetKind k) noexcept {
  switch (k) {
    case TargetKind::Transaction: return "Transaction";
    case TargetKind::Witness: return "Witness";
    case TargetKind::Proposer: return "Proposer";
    case TargetKind::SyncBatch: return "SyncBatch";
    case TargetKind::Device: return "Device";
  }
  return "Unknown";
}

std::vector<std::string> InspectionOutcome::row() const {
  std::string refs;
  for (const auto& e : evidence) refs += (refs.empty() ? "" : ";") + e;
  return {std::to_string(tick), to_string(kind), target, passed ? "1" : "0", refs};
}

std::uint64_t target_key(const Digest& id) noexcept {
  std::uint64_t k = 0;
  for (int i = 0; i < 8; ++i) k = (k << 8) | id.bytes[i];
  return k;
}

bool should_inspect(const SeededRng& base, std::uint64_t round, std::uint64_t target, double rate) {
  if (rate <= 0.0) return false;
  if (rate >= 1.0) return true;
  SeededRng draw = base.derive(mix64(round) ^ target);
  return draw.uniform01() < rate;
}

InspectionOutcome deep_inspect_transaction(const transmission::DataTransaction& txn, const Digest& delivered_digest,
                                           Tick tick) {
  InspectionOutcome out;
  out.tick = tick;
  out.kind = TargetKind::Transaction;
  out.target = txn.id.hex();
  if (delivered_digest != txn.payload_digest) {
    out.passed = false;
    out.evidence.push_back("payload_digest:" + txn.payload_digest.hex() + "!=" + delivered_digest.hex());
  }
  auto replay = [&](const std::vector<transmission::Attestation>& atts) {
    for (const auto& a : atts) {
      if (!a.revealed_verdict || !a.salt) continue;
      if (transmission::verdict_commit(*a.revealed_verdict, *a.salt) != a.commit) {
        out.passed = false;
        out.evidence.push_back("commit_binding:" + label(a.witness_id));
      }
    }
  };
  replay(txn.history);
  replay(txn.attestations);
  return out;
}

InspectionOutcome inspect_witness(const transmission::Attestation& attestation,
                                  const transmission::DataTransaction& txn, const Digest& delivered_digest, Tick tick) {
  InspectionOutcome out;
  out.tick = tick;
  out.kind = TargetKind::Witness;
  out.target = label(attestation.witness_id);
  const Verdict expected = delivered_digest == txn.payload_digest ? Verdict::Valid : Verdict::Invalid;
  if (attestation.revealed_verdict && *attestation.revealed_verdict != expected) {
    out.passed = false;
    out.evidence.push_back("verdict:" + txn.id.hex() + ":" + to_string(*attestation.revealed_verdict) +
                           "!=" + to_string(expected));
  }
  return out;
}

int leading_zero_bits(const Digest& d) noexcept {
  int bits = 0;
  for (std::uint8_t b : d.bytes) {
    if (b == 0) {
      bits += 8;
      continue;
    }
    return bits + std::countl_zero(b);
  }
  return bits;
}

Digest puzzle_digest(const Digest& proposal_digest, std::uint64_t nonce) {
  return Sha256().update(proposal_digest).update_u64(nonce).finish();
}

bool puzzle_solved(const Digest& proposal_digest, std::uint64_t nonce, int difficulty) {
  return difficulty <= 0 || leading_zero_bits(puzzle_digest(proposal_digest, nonce)) >= difficulty;
}

PuzzleSolution solve_puzzle(const Digest& proposal_digest, int difficulty, std::uint64_t budget) {
  PuzzleSolution s;
  for (std::uint64_t n = 0; n < budget; ++n) {
    ++s.attempts;
    if (puzzle_solved(proposal_digest, n, difficulty)) {
      s.nonce = n;
      return s;
    }
  }
  return s;
}

InspectionOutcome challenge_proposer(DeviceId proposer, const Digest& proposal_digest,
                                     std::optional<std::uint64_t> answer, int difficulty, Tick tick) {
  InspectionOutcome out;
  out.tick = tick;
  out.kind = TargetKind::Proposer;
  out.target = label(proposer);
  if (!answer) {
    out.passed = false;
    out.evidence.push_back("no_answer:" + proposal_digest.hex());
  } else if (!puzzle_solved(proposal_digest, *answer, difficulty)) {
    out.passed = false;
    out.evidence.push_back("bad_nonce:" + std::to_string(*answer));
  }
  return out;
}

std::vector<DeviceId> pick_random_validators(const std::vector<DeviceId>& eligible, SeededRng& rng, std::size_t m) {
  if (m > eligible.size())
    fail(ErrorCode::InsufficientNodes, "requested " + std::to_string(m) + " of " + std::to_string(eligible.size()));
  std::vector<double> weights(eligible.size(), 1.0);
  auto picked = sample_without_replacement<DeviceId>(rng, eligible, weights, m);
  std::sort(picked.begin(), picked.end());
  return picked;
}

Tick random_commit_delay(SeededRng& rng, Tick max_delay) {
  if (max_delay <= 0) return 0;
  return static_cast<Tick>(rng.uniform_below(static_cast<std::uint64_t>(max_delay) + 1));
}

InspectionOutcome verify_sync_integrity(const std::vector<consensus::LedgerBlock>& batch, const Digest& parent,
                                        std::uint64_t first_height, const ConsensusConfig& cfg,
                                        const std::string& source, Tick tick, SignatureCache* cache) {
  InspectionOutcome out;
  out.tick = tick;
  out.kind = TargetKind::SyncBatch;
  out.target = source;
  Digest expected_parent = parent;
  std::uint64_t height = first_height;
  for (const auto& b : batch) {
    try {
      consensus::verify_block(b, expected_parent, height, cfg);
    } catch (const Error& e) {
      out.passed = false;
      out.evidence.push_back("chain:" + std::to_string(b.height));
    }
    for (const auto& signer : consensus::bad_vote_signers(b, cache)) {
      out.passed = false;
      out.evidence.push_back("vote_signature:" + std::to_string(b.height) + ":" + signer.hex());
    }
    expected_parent = b.block_digest;
    ++height;
  }
  return out;
}

}  // namespace gdp::checks
