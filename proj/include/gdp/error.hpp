#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace gdp {

enum class ErrorCode {
  InsufficientPopulation,
  // onboarding
  DuplicateDevice,
  MalformedRequest,
  Blacklisted,
  CredentialExpired,
  WrongStage,
  NoActiveChallenge,
  ChallengeExpired,
  InsufficientStake,
  TooEarly,
  TempCredentialRejected,
  UnknownDevice,
  // transmission
  InsufficientWitnesses,
  NotOnPanel,
  AlreadyCommitted,
  CommitMismatch,
  RevealTooEarly,
  BadSignature,
  NonceReplay,
  UnknownTransaction,
  // consensus
  NotProposer,
  EmptyMempool,
  UnknownParent,
  ChainIntegrityViolation,
  // anomaly
  AlreadyQuarantined,
  // incentives
  SubjectBanned,
  InvalidProportion,
  // arbitration
  EmptyClaim,
  UnknownParty,
  InsufficientArbitrators,
  AppealExhausted,
  InsufficientBond,
  // stochastic checks
  InsufficientNodes,
  // simulator / cli
  InvalidConfig,
};

std::string_view to_string(ErrorCode code) noexcept;

/// Every protocol-level failure is reported as an Error carrying a stable code.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what);

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] void fail(ErrorCode code, const std::string& detail = {});

}  // namespace gdp
