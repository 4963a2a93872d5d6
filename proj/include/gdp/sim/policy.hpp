#pragma once

#include <memory>
#include <optional>
#include <vector>

#include "gdp/arbitration.hpp"
#include "gdp/consensus.hpp"
#include "gdp/rng.hpp"

namespace gdp::sim {

enum class Persona { Honest, TamperingSender, Colluder, Sybil, Lazy, Equivocator, ForgedSync, Compromised };
const char* to_string(Persona p) noexcept;

/// What a party or voter can see of a dispute.
struct DisputeView {
  arbitration::Category category = arbitration::Category::ProtocolViolation;
  bool evidence_fault = false;       // what the cited log events show
  bool accused_adversarial = false;  // known only to co-conspirators
  bool self_accused = false;
};

/// What a witness knows about its panel when it forms a verdict.
struct PanelView {
  int allies = 0;  // co-conspirators on the panel, itself included
  int quorum = 0;
};

/// Behavior hooks of one actor. The default is honest behavior; adversaries
/// override individual hooks and act only through public protocol operations.
class Policy {
 public:
  virtual ~Policy() = default;
  virtual Persona persona() const noexcept { return Persona::Honest; }
  bool adversarial() const noexcept { return persona() != Persona::Honest; }

  /// Sender: whether this transaction's delivered payload differs from its digest.
  virtual bool tamper(SeededRng&) const { return false; }

  /// Witness: verdict from the claimed digest and the digest it observes.
  virtual Verdict judge(const Digest& claimed, const Digest& observed, const PanelView&) const {
    return claimed == observed ? Verdict::Valid : Verdict::Invalid;
  }
  /// Witness: verdict disclosed at reveal. nullopt stays silent; a value
  /// other than the committed one is an equivocation.
  virtual std::optional<Verdict> reveal(Verdict committed, SeededRng&) const { return committed; }

  /// Validator: blocks handed to a syncing peer.
  virtual std::vector<consensus::LedgerBlock> serve(std::vector<consensus::LedgerBlock> blocks, const KeyPair&) const {
    return blocks;
  }

  virtual bool accepts_ruling(const DisputeView& view, bool ruling_fault) const {
    return ruling_fault == view.evidence_fault;
  }
  virtual bool votes_fault(const DisputeView& view) const { return view.evidence_fault; }
};

/// Adversaries protect each other in dispute votes and never accept blame.
class AdversaryPolicy : public Policy {
 public:
  bool accepts_ruling(const DisputeView& view, bool ruling_fault) const override {
    if (view.self_accused) return !ruling_fault;
    return ruling_fault == view.evidence_fault || (view.accused_adversarial && !ruling_fault);
  }
  bool votes_fault(const DisputeView& view) const override {
    return view.accused_adversarial ? false : view.evidence_fault;
  }
};

class TamperingSenderPolicy final : public AdversaryPolicy {
 public:
  explicit TamperingSenderPolicy(double rate, Persona persona = Persona::TamperingSender)
      : rate_(rate), persona_(persona) {}
  Persona persona() const noexcept override { return persona_; }
  bool tamper(SeededRng& rng) const override { return rng.bernoulli(rate_); }

 private:
  double rate_;
  Persona persona_;
};

/// Attests Valid regardless of the payload. A strategic colluder does so only
/// when the cabal holds a quorum on the panel and is honest otherwise.
class ColluderPolicy final : public AdversaryPolicy {
 public:
  explicit ColluderPolicy(bool strategic = false) : strategic_(strategic) {}
  Persona persona() const noexcept override { return Persona::Colluder; }
  Verdict judge(const Digest& claimed, const Digest& observed, const PanelView& panel) const override {
    if (!strategic_ || panel.allies >= panel.quorum) return Verdict::Valid;
    return Policy::judge(claimed, observed, panel);
  }

 private:
  bool strategic_;
};

class SybilPolicy final : public Policy {
 public:
  Persona persona() const noexcept override { return Persona::Sybil; }
};

class LazyPolicy final : public AdversaryPolicy {
 public:
  explicit LazyPolicy(double reveal_prob) : reveal_prob_(reveal_prob) {}
  Persona persona() const noexcept override { return Persona::Lazy; }
  std::optional<Verdict> reveal(Verdict committed, SeededRng& rng) const override {
    if (rng.bernoulli(reveal_prob_)) return committed;
    return std::nullopt;
  }

 private:
  double reveal_prob_;
};

class EquivocatorPolicy final : public AdversaryPolicy {
 public:
  explicit EquivocatorPolicy(double flip_rate) : flip_rate_(flip_rate) {}
  Persona persona() const noexcept override { return Persona::Equivocator; }
  std::optional<Verdict> reveal(Verdict committed, SeededRng& rng) const override {
    if (rng.bernoulli(flip_rate_)) return committed == Verdict::Valid ? Verdict::Invalid : Verdict::Valid;
    return committed;
  }

 private:
  double flip_rate_;
};

/// Re-signs every vote it serves with its own key, keeping block contents.
class ForgedSyncPolicy final : public AdversaryPolicy {
 public:
  Persona persona() const noexcept override { return Persona::ForgedSync; }
  std::vector<consensus::LedgerBlock> serve(std::vector<consensus::LedgerBlock> blocks,
                                            const KeyPair& own) const override;
};

}  // namespace gdp::sim
