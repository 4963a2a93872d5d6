#pragma once

#include <optional>
#include <string>
#include <vector>

#include "gdp/config.hpp"
#include "gdp/consensus.hpp"
#include "gdp/rng.hpp"
#include "gdp/transmission.hpp"

namespace gdp::checks {

enum class TargetKind { Transaction, Witness, Proposer, SyncBatch, Device };
const char* to_string(TargetKind k) noexcept;

struct InspectionOutcome {
  Tick tick = 0;
  TargetKind kind = TargetKind::Transaction;
  std::string target;
  bool passed = true;
  std::vector<std::string> evidence;

  /// `tick,target_kind,target,passed,evidence_refs` (evidence joined by ';').
  std::vector<std::string> row() const;
};

/// 64-bit inspection key of a digest-identified target.
std::uint64_t target_key(const Digest& id) noexcept;
inline std::uint64_t target_key(DeviceId id) noexcept { return 0x6465760000000000ULL | id.value; }

/// Bernoulli(rate) drawn from the stream keyed by (round, target). Does not
/// advance `base`, so the draw depends on nothing but seed, round and target.
bool should_inspect(const SeededRng& base, std::uint64_t round, std::uint64_t target, double rate);

/// Recomputes the payload digest from the delivered bytes and replays every
/// revealed attestation's commit binding.
InspectionOutcome deep_inspect_transaction(const transmission::DataTransaction& txn, const Digest& delivered_digest,
                                           Tick tick);

/// Deep witness task: the witness's revealed verdict against the verdict the
/// recomputed payload digest implies.
InspectionOutcome inspect_witness(const transmission::Attestation& attestation,
                                  const transmission::DataTransaction& txn, const Digest& delivered_digest, Tick tick);

int leading_zero_bits(const Digest& d) noexcept;
Digest puzzle_digest(const Digest& proposal_digest, std::uint64_t nonce);
bool puzzle_solved(const Digest& proposal_digest, std::uint64_t nonce, int difficulty);

struct PuzzleSolution {
  std::optional<std::uint64_t> nonce;
  std::uint64_t attempts = 0;
};

/// Honest solver: tries nonces 0, 1, 2, ... up to the budget.
PuzzleSolution solve_puzzle(const Digest& proposal_digest, int difficulty, std::uint64_t budget);

/// Checks the proposer's answer; no answer fails.
InspectionOutcome challenge_proposer(DeviceId proposer, const Digest& proposal_digest,
                                     std::optional<std::uint64_t> answer, int difficulty, Tick tick);

/// Uniform draw of m validators from `eligible` (proposer already removed).
std::vector<DeviceId> pick_random_validators(const std::vector<DeviceId>& eligible, SeededRng& rng, std::size_t m);

/// Uniform in [0, max_delay].
Tick random_commit_delay(SeededRng& rng, Tick max_delay);

/// Full re-verification of a served batch: digest chain from the receiver's
/// head plus every vote signature. Evidence names the signers of bad signatures.
InspectionOutcome verify_sync_integrity(const std::vector<consensus::LedgerBlock>& batch, const Digest& parent,
                                        std::uint64_t first_height, const ConsensusConfig& cfg,
                                        const std::string& source, Tick tick, SignatureCache* cache = nullptr);

}  // namespace gdp::checks
