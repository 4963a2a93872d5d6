#include "gdp/error.hpp"

namespace gdp {

std::string_view to_string(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::InsufficientPopulation: return "InsufficientPopulation";
    case ErrorCode::DuplicateDevice: return "DuplicateDevice";
    case ErrorCode::MalformedRequest: return "MalformedRequest";
    case ErrorCode::Blacklisted: return "Blacklisted";
    case ErrorCode::CredentialExpired: return "CredentialExpired";
    case ErrorCode::WrongStage: return "WrongStage";
    case ErrorCode::NoActiveChallenge: return "NoActiveChallenge";
    case ErrorCode::ChallengeExpired: return "ChallengeExpired";
    case ErrorCode::InsufficientStake: return "InsufficientStake";
    case ErrorCode::TooEarly: return "TooEarly";
    case ErrorCode::TempCredentialRejected: return "TempCredentialRejected";
    case ErrorCode::UnknownDevice: return "UnknownDevice";
    case ErrorCode::InsufficientWitnesses: return "InsufficientWitnesses";
    case ErrorCode::NotOnPanel: return "NotOnPanel";
    case ErrorCode::AlreadyCommitted: return "AlreadyCommitted";
    case ErrorCode::CommitMismatch: return "CommitMismatch";
    case ErrorCode::RevealTooEarly: return "RevealTooEarly";
    case ErrorCode::BadSignature: return "BadSignature";
    case ErrorCode::NonceReplay: return "NonceReplay";
    case ErrorCode::UnknownTransaction: return "UnknownTransaction";
    case ErrorCode::NotProposer: return "NotProposer";
    case ErrorCode::EmptyMempool: return "EmptyMempool";
    case ErrorCode::UnknownParent: return "UnknownParent";
    case ErrorCode::ChainIntegrityViolation: return "ChainIntegrityViolation";
    case ErrorCode::AlreadyQuarantined: return "AlreadyQuarantined";
    case ErrorCode::SubjectBanned: return "SubjectBanned";
    case ErrorCode::InvalidProportion: return "InvalidProportion";
    case ErrorCode::EmptyClaim: return "EmptyClaim";
    case ErrorCode::UnknownParty: return "UnknownParty";
    case ErrorCode::InsufficientArbitrators: return "InsufficientArbitrators";
    case ErrorCode::AppealExhausted: return "AppealExhausted";
    case ErrorCode::InsufficientBond: return "InsufficientBond";
    case ErrorCode::InsufficientNodes: return "InsufficientNodes";
    case ErrorCode::InvalidConfig: return "InvalidConfig";
  }
  return "Unknown";
}

Error::Error(ErrorCode code, const std::string& what)
    : std::runtime_error(what.empty() ? std::string(to_string(code))
                                      : std::string(to_string(code)) + ": " + what),
      code_(code) {}

void fail(ErrorCode code, const std::string& detail) { throw Error(code, detail); }

}  // namespace gdp
