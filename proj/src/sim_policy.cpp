#include "gdp/sim/policy.hpp"

namespace gdp::sim {

const char* to_string(Persona p) noexcept {
  switch (p) {
    case Persona::Honest: return "Honest";
    case Persona::TamperingSender: return "TamperingSender";
    case Persona::Colluder: return "Colluder";
    case Persona::Sybil: return "Sybil";
    case Persona::Lazy: return "Lazy";
    case Persona::Equivocator: return "Equivocator";
    case Persona::ForgedSync: return "ForgedSync";
    case Persona::Compromised: return "Compromised";
  }
  return "Unknown";
}

std::vector<consensus::LedgerBlock> ForgedSyncPolicy::serve(std::vector<consensus::LedgerBlock> blocks,
                                                            const KeyPair& own) const {
  for (auto& b : blocks)
    for (auto& v : b.votes) v.signature = own.sign(consensus::vote_message(v.proposal_digest, v.accept));
  return blocks;
}

}  // namespace gdp::sim
