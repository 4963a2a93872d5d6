#include "gdp/config.hpp"

#include <cmath>
#include <json.hpp>
#include <set>
#include <sstream>

#include "gdp/error.hpp"

namespace gdp {

using json = nlohmann::ordered_json;

Tokens Tokens::from_double(double t) { return Tokens{static_cast<std::int64_t>(std::llround(t * kScale))}; }

std::string Tokens::str() const {
  std::ostringstream os;
  const std::int64_t whole_part = micros / kScale;
  std::int64_t frac = micros % kScale;
  if (micros < 0 && whole_part == 0) os << '-';
  os << whole_part;
  if (frac != 0) {
    if (frac < 0) frac = -frac;
    std::string f = std::to_string(frac);
    f.insert(0, 6 - f.size(), '0');
    while (!f.empty() && f.back() == '0') f.pop_back();
    os << '.' << f;
  }
  return os.str();
}

const char* to_string(Verdict v) noexcept { return v == Verdict::Valid ? "Valid" : "Invalid"; }

namespace {

constexpr std::pair<AdversaryKind, const char*> kAdversaryNames[] = {
    {AdversaryKind::TamperingSender, "TamperingSender"},
    {AdversaryKind::ColludingWitnesses, "ColludingWitnesses"},
    {AdversaryKind::SybilFlood, "SybilFlood"},
    {AdversaryKind::LazyWitness, "LazyWitness"},
    {AdversaryKind::EquivocatingWitness, "EquivocatingWitness"},
    {AdversaryKind::ForgedSyncNode, "ForgedSyncNode"},
    {AdversaryKind::KeyCompromise, "KeyCompromise"},
};

[[noreturn]] void bad(const std::string& path, const std::string& msg) {
  fail(ErrorCode::InvalidConfig, path + ": " + msg);
}

std::string join_path(const std::string& base, const std::string& key) {
  return base.empty() ? key : base + "." + key;
}

// Writes struct fields into a JSON object.
struct Writer {
  json& out;

  template <typename T>
  void operator()(const char* key, T& value) {
    if constexpr (std::is_same_v<T, Tokens>) {
      out[key] = value.to_double();
    } else if constexpr (std::is_same_v<T, AdversaryKind>) {
      out[key] = to_string(value);
    } else {
      out[key] = value;
    }
  }
};

// Reads struct fields from a JSON object, defaulting absent keys and
// rejecting unknown ones.
struct Reader {
  const json& in;
  std::string path;
  std::set<std::string> seen;

  template <typename T>
  void operator()(const char* key, T& value) {
    seen.insert(key);
    if (!in.contains(key)) return;
    const json& v = in.at(key);
    const std::string where = join_path(path, key);
    if constexpr (std::is_same_v<T, bool>) {
      if (!v.is_boolean()) bad(where, "expected a boolean");
      value = v.get<bool>();
    } else if constexpr (std::is_same_v<T, Tokens>) {
      if (!v.is_number()) bad(where, "expected a number of tokens");
      value = Tokens::from_double(v.get<double>());
    } else if constexpr (std::is_same_v<T, AdversaryKind>) {
      if (!v.is_string()) bad(where, "expected an adversary kind name");
      auto kind = adversary_kind_from_string(v.get<std::string>());
      if (!kind) bad(where, "unknown adversary kind '" + v.get<std::string>() + "'");
      value = *kind;
    } else if constexpr (std::is_same_v<T, std::string>) {
      if (!v.is_string()) bad(where, "expected a string");
      value = v.get<std::string>();
    } else if constexpr (std::is_same_v<T, std::vector<std::string>>) {
      if (!v.is_array()) bad(where, "expected an array of strings");
      value.clear();
      for (const auto& e : v) {
        if (!e.is_string()) bad(where, "expected an array of strings");
        value.push_back(e.get<std::string>());
      }
    } else if constexpr (std::is_floating_point_v<T>) {
      if (!v.is_number()) bad(where, "expected a number");
      value = v.get<T>();
    } else if constexpr (std::is_integral_v<T>) {
      if (!v.is_number_integer() && !v.is_number_unsigned()) bad(where, "expected an integer");
      if constexpr (std::is_unsigned_v<T>) {
        if (v.is_number_integer() && v.get<std::int64_t>() < 0) bad(where, "expected a non-negative integer");
      }
      value = v.get<T>();
    }
  }

  void finish() const {
    for (const auto& [key, _] : in.items())
      if (!seen.contains(key)) bad(join_path(path, key), "unknown field");
  }
};

template <typename V>
void visit(V& v, OnboardingConfig& c) {
  v("temp_credential_ttl", c.temp_credential_ttl);
  v("challenge_ttl", c.challenge_ttl);
  v("totp_window", c.totp_window);
  v("totp_skew_windows", c.totp_skew_windows);
  v("revalidation_period", c.revalidation_period);
  v("min_stake", c.min_stake);
  v("behavior_threshold", c.behavior_threshold);
  v("weight_ordering", c.weight_ordering);
  v("weight_retries", c.weight_retries);
  v("weight_latency", c.weight_latency);
  v("weight_lifetime", c.weight_lifetime);
  v("max_retries", c.max_retries);
  v("statements_per_challenge", c.statements_per_challenge);
  v("blacklist", c.blacklist);
}

template <typename V>
void visit(V& v, PanelConfig& c) {
  v("k", c.k);
  v("quorum", c.quorum);
  v("diversity", c.diversity);
  v("reveal_deadline", c.reveal_deadline);
  v("max_escalations", c.max_escalations);
}

template <typename V>
void visit(V& v, ConsensusConfig& c) {
  v("batch_cap", c.batch_cap);
  v("commit_threshold", c.commit_threshold);
  v("contested_band", c.contested_band);
  v("stake_weight", c.stake_weight);
  v("reputation_weight", c.reputation_weight);
  v("random_validators", c.random_validators);
  v("round_ticks", c.round_ticks);
  v("mempool_order", c.mempool_order);
}

template <typename V>
void visit(V& v, AnomalyConfig& c) {
  v("window", c.window);
  v("z_threshold", c.z_threshold);
  v("cusum_drift", c.cusum_drift);
  v("cusum_limit", c.cusum_limit);
  v("review_period", c.review_period);
  v("investigation_window", c.investigation_window);
  v("rate_epoch", c.rate_epoch);
}

template <typename V>
void visit(V& v, IncentivesConfig& c) {
  v("perf_reward", c.perf_reward);
  v("perf_reputation_gain", c.perf_reputation_gain);
  v("contribution_pool", c.contribution_pool);
  v("epoch_ticks", c.epoch_ticks);
  v("longevity_period", c.longevity_period);
  v("longevity_bonus", c.longevity_bonus);
  v("longevity_min_score", c.longevity_min_score);
  v("penalty_factor", c.penalty_factor);
  v("major_first_forfeit", c.major_first_forfeit);
  v("ban_threshold", c.ban_threshold);
  v("temp_ban_ticks", c.temp_ban_ticks);
  v("initial_reputation", c.initial_reputation);
}

template <typename V>
void visit(V& v, ArbitrationConfig& c) {
  v("panel_size", c.panel_size);
  v("community_threshold", c.community_threshold);
  v("appeal_bond", c.appeal_bond);
  v("arbitrator_min_reputation", c.arbitrator_min_reputation);
  v("arbitrator_count", c.arbitrator_count);
  v("vetted_reputation", c.vetted_reputation);
}

template <typename V>
void visit(V& v, InspectionPolicy& c) {
  v("rate_txn", c.rate_txn);
  v("rate_witness_deep", c.rate_witness_deep);
  v("rate_sync_verify", c.rate_sync_verify);
  v("rate_proposer_challenge", c.rate_proposer_challenge);
  v("rate_device", c.rate_device);
  v("puzzle_difficulty", c.puzzle_difficulty);
  v("puzzle_budget", c.puzzle_budget);
  v("max_commit_delay", c.max_commit_delay);
}

template <typename V>
void visit(V& v, AdversarySpec& c) {
  v("kind", c.kind);
  v("count", c.count);
  v("tamper_rate", c.tamper_rate);
  v("groups", c.groups);
  v("strategic", c.strategic);
  v("respawn", c.respawn);
  v("stake", c.stake);
  v("as_validators", c.as_validators);
  v("reveal_prob", c.reveal_prob);
  v("flip_rate", c.flip_rate);
  v("at_tick", c.at_tick);
}

template <typename V>
void visit_top(V& v, ScenarioConfig& c) {
  v("schema_version", c.schema_version);
  v("name", c.name);
  v("seed", c.seed);
  v("duration_ticks", c.duration_ticks);
  v("txn_arrival_rate", c.txn_arrival_rate);
  v("max_transactions", c.max_transactions);
  v("drain_ticks", c.drain_ticks);
  v("n_honest_devices", c.n_honest_devices);
  v("n_witness_pool", c.n_witness_pool);
  v("n_validators", c.n_validators);
  v("stake_per_device", c.stake_per_device);
  v("payload_size_mean", c.payload_size_mean);
  v("payload_size_sd", c.payload_size_sd);
  v("report_interval", c.report_interval);
}

template <typename T>
json write_block(T& block) {
  json out = json::object();
  Writer w{out};
  visit(w, block);
  return out;
}

template <typename T>
void read_block(const json& root, const char* key, T& block) {
  if (!root.contains(key)) return;
  const json& in = root.at(key);
  if (!in.is_object()) bad(key, "expected an object");
  Reader r{in, key, {}};
  visit(r, block);
  r.finish();
}

json to_json_value(const ScenarioConfig& cfg_in) {
  ScenarioConfig cfg = cfg_in;
  json out = json::object();
  Writer w{out};
  visit_top(w, cfg);
  json advs = json::array();
  for (auto& a : cfg.adversaries) advs.push_back(write_block(a));
  out["adversaries"] = advs;
  out["onboarding"] = write_block(cfg.onboarding);
  out["panel"] = write_block(cfg.panel);
  out["consensus"] = write_block(cfg.consensus);
  out["anomaly"] = write_block(cfg.anomaly);
  out["incentives"] = write_block(cfg.incentives);
  out["arbitration"] = write_block(cfg.arbitration);
  out["inspection"] = write_block(cfg.inspection);
  return out;
}

ScenarioConfig from_json_value(const json& root) {
  if (!root.is_object()) bad("<root>", "expected a JSON object");
  ScenarioConfig cfg;
  Reader top{root, "", {}};
  visit_top(top, cfg);
  for (const char* block : {"adversaries", "onboarding", "panel", "consensus", "anomaly", "incentives",
                            "arbitration", "inspection"})
    top.seen.insert(block);
  top.finish();
  if (root.contains("adversaries")) {
    const json& advs = root.at("adversaries");
    if (!advs.is_array()) bad("adversaries", "expected an array");
    for (std::size_t i = 0; i < advs.size(); ++i) {
      const std::string path = "adversaries[" + std::to_string(i) + "]";
      if (!advs[i].is_object()) bad(path, "expected an object");
      if (!advs[i].contains("kind")) bad(path + ".kind", "required");
      AdversarySpec spec;
      Reader r{advs[i], path, {}};
      visit(r, spec);
      r.finish();
      cfg.adversaries.push_back(spec);
    }
  }
  read_block(root, "onboarding", cfg.onboarding);
  read_block(root, "panel", cfg.panel);
  read_block(root, "consensus", cfg.consensus);
  read_block(root, "anomaly", cfg.anomaly);
  read_block(root, "incentives", cfg.incentives);
  read_block(root, "arbitration", cfg.arbitration);
  read_block(root, "inspection", cfg.inspection);
  return cfg;
}

void check_rate(std::vector<std::string>& errs, const std::string& path, double v) {
  if (!(v >= 0.0 && v <= 1.0)) errs.push_back(path + ": must be in [0, 1], got " + std::to_string(v));
}

void check_positive(std::vector<std::string>& errs, const std::string& path, double v) {
  if (!(v > 0)) errs.push_back(path + ": must be > 0");
}

void check_non_negative(std::vector<std::string>& errs, const std::string& path, double v) {
  if (!(v >= 0)) errs.push_back(path + ": must be >= 0");
}

}  // namespace

const char* to_string(AdversaryKind k) noexcept {
  for (const auto& [kind, name] : kAdversaryNames)
    if (kind == k) return name;
  return "Unknown";
}

std::optional<AdversaryKind> adversary_kind_from_string(const std::string& s) noexcept {
  for (const auto& [kind, name] : kAdversaryNames)
    if (s == name) return kind;
  return std::nullopt;
}

std::vector<std::string> validate(const ScenarioConfig& c) {
  std::vector<std::string> errs;
  if (c.schema_version != 1) errs.push_back("schema_version: unsupported version " + std::to_string(c.schema_version));
  check_positive(errs, "duration_ticks", static_cast<double>(c.duration_ticks));
  check_non_negative(errs, "txn_arrival_rate", c.txn_arrival_rate);
  check_non_negative(errs, "max_transactions", static_cast<double>(c.max_transactions));
  check_non_negative(errs, "drain_ticks", static_cast<double>(c.drain_ticks));
  if (c.drain_ticks >= c.duration_ticks && c.duration_ticks > 0)
    errs.push_back("drain_ticks: must be less than duration_ticks");
  if (c.n_honest_devices < 2) errs.push_back("n_honest_devices: need at least 2 (sender and receiver)");
  check_non_negative(errs, "n_witness_pool", c.n_witness_pool);
  if (c.n_validators < 1) errs.push_back("n_validators: need at least 1");
  check_non_negative(errs, "payload_size_sd", c.payload_size_sd);
  check_positive(errs, "report_interval", static_cast<double>(c.report_interval));

  const auto& ob = c.onboarding;
  check_positive(errs, "onboarding.temp_credential_ttl", static_cast<double>(ob.temp_credential_ttl));
  check_positive(errs, "onboarding.challenge_ttl", static_cast<double>(ob.challenge_ttl));
  check_positive(errs, "onboarding.totp_window", static_cast<double>(ob.totp_window));
  check_non_negative(errs, "onboarding.totp_skew_windows", ob.totp_skew_windows);
  check_positive(errs, "onboarding.revalidation_period", static_cast<double>(ob.revalidation_period));
  check_non_negative(errs, "onboarding.min_stake", ob.min_stake.to_double());
  check_rate(errs, "onboarding.behavior_threshold", ob.behavior_threshold);
  for (auto [name, w] : {std::pair{"weight_ordering", ob.weight_ordering}, {"weight_retries", ob.weight_retries},
                         {"weight_latency", ob.weight_latency}, {"weight_lifetime", ob.weight_lifetime}})
    check_non_negative(errs, std::string("onboarding.") + name, w);
  if (ob.weight_ordering + ob.weight_retries + ob.weight_latency + ob.weight_lifetime <= 0)
    errs.push_back("onboarding.weight_*: weights must sum to > 0");
  check_non_negative(errs, "onboarding.max_retries", ob.max_retries);
  check_positive(errs, "onboarding.statements_per_challenge", ob.statements_per_challenge);
  for (std::size_t i = 0; i < ob.blacklist.size(); ++i)
    if (ob.blacklist[i].size() != 64) errs.push_back("onboarding.blacklist[" + std::to_string(i) + "]: expected 64 hex digits");

  const auto& p = c.panel;
  if (p.k < 1) errs.push_back("panel.k: must be >= 1");
  if (p.quorum < 0 || p.quorum > p.k) errs.push_back("panel.quorum: must satisfy 1 <= quorum <= k (0 = default)");
  if (p.diversity < 1) errs.push_back("panel.diversity: must be >= 1");
  check_positive(errs, "panel.reveal_deadline", static_cast<double>(p.reveal_deadline));
  check_non_negative(errs, "panel.max_escalations", p.max_escalations);
  if (c.n_witness_pool < p.k)
    errs.push_back("n_witness_pool: " + std::to_string(c.n_witness_pool) + " witnesses cannot fill a panel of k=" +
                   std::to_string(p.k));

  const auto& cs = c.consensus;
  if (cs.batch_cap < 1) errs.push_back("consensus.batch_cap: must be >= 1");
  check_rate(errs, "consensus.commit_threshold", cs.commit_threshold);
  check_rate(errs, "consensus.contested_band", cs.contested_band);
  check_non_negative(errs, "consensus.stake_weight", cs.stake_weight);
  check_non_negative(errs, "consensus.reputation_weight", cs.reputation_weight);
  if (cs.stake_weight + cs.reputation_weight <= 0)
    errs.push_back("consensus.stake_weight: stake_weight + reputation_weight must be > 0");
  if (cs.random_validators < 0) errs.push_back("consensus.random_validators: must be >= 0");
  if (cs.random_validators > 0 && cs.random_validators > c.n_validators - 1)
    errs.push_back("consensus.random_validators: exceeds non-proposer validator count");
  check_positive(errs, "consensus.round_ticks", static_cast<double>(cs.round_ticks));
  if (cs.mempool_order != "age" && cs.mempool_order != "reputation")
    errs.push_back("consensus.mempool_order: expected 'age' or 'reputation'");

  const auto& an = c.anomaly;
  if (an.window < 2) errs.push_back("anomaly.window: must be >= 2");
  check_positive(errs, "anomaly.z_threshold", an.z_threshold);
  check_non_negative(errs, "anomaly.cusum_drift", an.cusum_drift);
  check_positive(errs, "anomaly.cusum_limit", an.cusum_limit);
  check_positive(errs, "anomaly.review_period", static_cast<double>(an.review_period));
  check_non_negative(errs, "anomaly.investigation_window", static_cast<double>(an.investigation_window));
  check_positive(errs, "anomaly.rate_epoch", static_cast<double>(an.rate_epoch));

  const auto& in = c.incentives;
  check_non_negative(errs, "incentives.perf_reward", in.perf_reward.to_double());
  check_rate(errs, "incentives.perf_reputation_gain", in.perf_reputation_gain);
  check_non_negative(errs, "incentives.contribution_pool", in.contribution_pool.to_double());
  check_positive(errs, "incentives.epoch_ticks", static_cast<double>(in.epoch_ticks));
  check_positive(errs, "incentives.longevity_period", static_cast<double>(in.longevity_period));
  check_non_negative(errs, "incentives.longevity_bonus", in.longevity_bonus.to_double());
  check_rate(errs, "incentives.longevity_min_score", in.longevity_min_score);
  check_rate(errs, "incentives.penalty_factor", in.penalty_factor);
  check_rate(errs, "incentives.major_first_forfeit", in.major_first_forfeit);
  check_rate(errs, "incentives.ban_threshold", in.ban_threshold);
  check_non_negative(errs, "incentives.temp_ban_ticks", static_cast<double>(in.temp_ban_ticks));
  check_rate(errs, "incentives.initial_reputation", in.initial_reputation);

  const auto& ar = c.arbitration;
  if (ar.panel_size < 1) errs.push_back("arbitration.panel_size: must be >= 1");
  check_rate(errs, "arbitration.community_threshold", ar.community_threshold);
  check_non_negative(errs, "arbitration.appeal_bond", ar.appeal_bond.to_double());
  check_rate(errs, "arbitration.arbitrator_min_reputation", ar.arbitrator_min_reputation);
  check_non_negative(errs, "arbitration.arbitrator_count", ar.arbitrator_count);
  check_rate(errs, "arbitration.vetted_reputation", ar.vetted_reputation);

  const auto& ip = c.inspection;
  check_rate(errs, "inspection.rate_txn", ip.rate_txn);
  check_rate(errs, "inspection.rate_witness_deep", ip.rate_witness_deep);
  check_rate(errs, "inspection.rate_sync_verify", ip.rate_sync_verify);
  check_rate(errs, "inspection.rate_proposer_challenge", ip.rate_proposer_challenge);
  check_rate(errs, "inspection.rate_device", ip.rate_device);
  if (ip.puzzle_difficulty < 0 || ip.puzzle_difficulty > 256)
    errs.push_back("inspection.puzzle_difficulty: must be in [0, 256]");
  check_non_negative(errs, "inspection.max_commit_delay", static_cast<double>(ip.max_commit_delay));

  for (std::size_t i = 0; i < c.adversaries.size(); ++i) {
    const auto& a = c.adversaries[i];
    const std::string path = "adversaries[" + std::to_string(i) + "]";
    check_non_negative(errs, path + ".count", a.count);
    check_rate(errs, path + ".tamper_rate", a.tamper_rate);
    check_rate(errs, path + ".reveal_prob", a.reveal_prob);
    check_rate(errs, path + ".flip_rate", a.flip_rate);
    check_non_negative(errs, path + ".groups", a.groups);
    check_non_negative(errs, path + ".stake", a.stake.to_double());
    check_non_negative(errs, path + ".at_tick", static_cast<double>(a.at_tick));
    if (a.kind == AdversaryKind::KeyCompromise && a.count > c.n_honest_devices)
      errs.push_back(path + ".count: cannot compromise more than n_honest_devices");
  }
  return errs;
}

void require_valid(const ScenarioConfig& cfg) {
  const auto errs = validate(cfg);
  if (errs.empty()) return;
  std::string msg;
  for (const auto& e : errs) msg += (msg.empty() ? "" : "; ") + e;
  fail(ErrorCode::InvalidConfig, msg);
}

ScenarioConfig config_from_json(const std::string& text) {
  json root;
  try {
    root = json::parse(text);
  } catch (const json::parse_error& e) {
    fail(ErrorCode::InvalidConfig, std::string("<file>: malformed JSON: ") + e.what());
  }
  try {
    return from_json_value(root);
  } catch (const json::exception& e) {
    fail(ErrorCode::InvalidConfig, std::string("<file>: ") + e.what());
  }
}

std::string config_to_json(const ScenarioConfig& cfg, int indent) { return to_json_value(cfg).dump(indent); }

void apply_override(ScenarioConfig& cfg, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0)
    fail(ErrorCode::InvalidConfig, "override '" + assignment + "': expected key=value");
  const std::string key = assignment.substr(0, eq);
  const std::string raw = assignment.substr(eq + 1);
  json value;
  try {
    value = json::parse(raw);
  } catch (const json::parse_error&) {
    value = raw;
  }
  json root = to_json_value(cfg);
  json* node = &root;
  std::string pointer;
  std::size_t start = 0;
  while (true) {
    const auto dot = key.find('.', start);
    std::string part = key.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
    // adversaries.0.count style indices
    if (node->is_array()) {
      std::size_t idx = 0;
      try {
        idx = std::stoul(part);
      } catch (const std::exception&) {
        fail(ErrorCode::InvalidConfig, key + ": expected an array index at '" + part + "'");
      }
      if (idx >= node->size()) fail(ErrorCode::InvalidConfig, key + ": index out of range");
      node = &(*node)[idx];
    } else {
      if (!node->is_object() || !node->contains(part)) fail(ErrorCode::InvalidConfig, key + ": unknown field");
      node = &(*node)[part];
    }
    if (dot == std::string::npos) break;
    start = dot + 1;
  }
  *node = value;
  cfg = from_json_value(root);
}

}  // namespace gdp
