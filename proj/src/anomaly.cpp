#include "gdp/anomaly.hpp"

#include <cmath>
#include <limits>

#include "gdp/error.hpp"

namespace gdp::anomaly {

const char* to_string(AlertKind k) noexcept { return k == AlertKind::PointOutlier ? "PointOutlier" : "Changepoint"; }

StreamBaseline::StreamBaseline(std::string stream_id, std::size_t window)
    : stream_id_(std::move(stream_id)), capacity_(window < 2 ? 2 : window) {}

void StreamBaseline::push(double sample) {
  ++samples_seen_;
  if (window_.size() < capacity_) {
    window_.push_back(sample);
    const double delta = sample - mean_;
    mean_ += delta / static_cast<double>(window_.size());
    m2_ += delta * (sample - mean_);
    return;
  }
  const double old = window_.front();
  window_.pop_front();
  window_.push_back(sample);
  const double n = static_cast<double>(capacity_);
  const double old_mean = mean_;
  mean_ += (sample - old) / n;
  m2_ += (sample - old) * (sample - mean_ + old - old_mean);
  if (++replacements_ % capacity_ == 0) recompute();
}

void StreamBaseline::recompute() {
  double sum = 0.0;
  for (double v : window_) sum += v;
  mean_ = sum / static_cast<double>(window_.size());
  double m2 = 0.0;
  for (double v : window_) m2 += (v - mean_) * (v - mean_);
  m2_ = m2;
}

double StreamBaseline::variance() const noexcept {
  if (window_.empty()) return 0.0;
  const double v = m2_ / static_cast<double>(window_.size());
  return v > 0.0 ? v : 0.0;
}

double StreamBaseline::stddev() const noexcept { return std::sqrt(variance()); }

double StreamBaseline::z_score(double sample) const noexcept {
  const double sd = stddev();
  const double dev = sample - mean_;
  // Residual Welford noise on a constant window is below 1e-12 of the mean.
  const double tiny = 1e-12 * std::max(1.0, std::abs(mean_));
  if (sd <= tiny) {
    if (std::abs(dev) <= tiny) return 0.0;
    return dev > 0 ? std::numeric_limits<double>::infinity() : -std::numeric_limits<double>::infinity();
  }
  return dev / sd;
}

std::optional<AnomalyAlert> PointOutlierDetector::on_sample(const StreamBaseline& baseline, const std::string& subject,
                                                            double sample, Tick tick) {
  if (!baseline.warmed_up()) return std::nullopt;
  const double z = baseline.z_score(sample);
  if (!(std::abs(z) > threshold_)) return std::nullopt;
  return AnomalyAlert{0, baseline.stream_id(), subject, tick, sample, z, AlertKind::PointOutlier};
}

std::optional<AnomalyAlert> CusumDetector::on_sample(const StreamBaseline& baseline, const std::string& subject,
                                                     double sample, Tick tick) {
  if (!baseline.warmed_up()) return std::nullopt;
  const double r = baseline.z_score(sample);
  upper_ = std::max(0.0, upper_ + r - drift_);
  lower_ = std::max(0.0, lower_ - r - drift_);
  if (upper_ > limit_ || lower_ > limit_) {
    const double stat = upper_ > limit_ ? upper_ : -lower_;
    upper_ = 0.0;
    lower_ = 0.0;
    return AnomalyAlert{0, baseline.stream_id(), subject, tick, sample, stat, AlertKind::Changepoint};
  }
  return std::nullopt;
}

std::optional<AnomalyAlert> observe(StreamBaseline& baseline, double sample, Tick tick, double z_threshold,
                                    const std::string& subject) {
  PointOutlierDetector detector(z_threshold);
  auto alert = detector.on_sample(baseline, subject, sample, tick);
  baseline.push(sample);
  return alert;
}

std::optional<AnomalyAlert> detect_changepoint(const StreamBaseline& baseline, CusumDetector& cusum, double sample,
                                               Tick tick, const std::string& subject) {
  return cusum.on_sample(baseline, subject, sample, tick);
}

StreamMonitor::StreamMonitor(std::string stream_id, std::string subject, const AnomalyConfig& cfg)
    : baseline_(std::move(stream_id), static_cast<std::size_t>(cfg.window)), subject_(std::move(subject)) {
  detectors_.push_back(std::make_unique<CusumDetector>(cfg.cusum_drift, cfg.cusum_limit));
  detectors_.push_back(std::make_unique<PointOutlierDetector>(cfg.z_threshold));
}

std::vector<AnomalyAlert> StreamMonitor::process(double sample, Tick tick) { return process(sample, tick, subject_); }

std::vector<AnomalyAlert> StreamMonitor::process(double sample, Tick tick, const std::string& subject) {
  std::vector<AnomalyAlert> alerts;
  for (auto& d : detectors_)
    if (auto a = d->on_sample(baseline_, subject, sample, tick)) alerts.push_back(*a);
  baseline_.push(sample);
  return alerts;
}

QuarantineRecord* QuarantineBook::open_record(DeviceId subject) {
  for (auto it = records_.rbegin(); it != records_.rend(); ++it)
    if (it->subject == subject && !it->released_tick) return &*it;
  return nullptr;
}

const QuarantineRecord& QuarantineBook::quarantine(DeviceId subject, const std::string& reason, Tick tick) {
  auto& profile = registry_.at(subject);
  if (profile.status == DeviceStatus::Quarantined) fail(ErrorCode::AlreadyQuarantined, profile.public_key.hex());
  if (profile.status == DeviceStatus::Banned) fail(ErrorCode::SubjectBanned, profile.public_key.hex());
  profile.status = DeviceStatus::Quarantined;
  records_.push_back(QuarantineRecord{subject, tick, reason, tick + review_period_, std::nullopt});
  return records_.back();
}

bool QuarantineBook::is_quarantined(DeviceId subject) const {
  return registry_.at(subject).status == DeviceStatus::Quarantined;
}

void QuarantineBook::extend(DeviceId subject, Tick until) {
  if (auto* rec = open_record(subject)) rec->review_until = std::max(rec->review_until, until);
}

std::vector<DeviceId> QuarantineBook::release_due(Tick tick) {
  std::vector<DeviceId> released;
  for (auto& rec : records_) {
    if (rec.released_tick || tick < rec.review_until) continue;
    rec.released_tick = tick;
    auto& profile = registry_.at(rec.subject);
    if (profile.status == DeviceStatus::Quarantined) {
      profile.status = DeviceStatus::Active;
      released.push_back(rec.subject);
    }
  }
  return released;
}

void QuarantineBook::close(DeviceId subject, Tick tick) {
  if (auto* rec = open_record(subject)) rec->released_tick = tick;
}

bool is_violation_event(std::string_view event) noexcept {
  return event == "commit_mismatch" || event == "nonce_replay" || event == "revalidation_failed" ||
         event == "inspection_failed";
}

InvestigationReport investigate(const AnomalyAlert& alert, const EventLog& log, Tick window) {
  InvestigationReport report;
  report.alert = alert;
  report.from = std::max<Tick>(0, alert.tick - window);
  report.to = alert.tick + window;
  report.entries = log.slice(alert.subject, report.from, report.to);
  for (const auto& e : report.entries)
    if (is_violation_event(e.event)) report.violations.push_back(e);
  return report;
}

}  // namespace gdp::anomaly
