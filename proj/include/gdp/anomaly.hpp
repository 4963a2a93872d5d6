#pragma once

#include <deque>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "gdp/config.hpp"
#include "gdp/event_log.hpp"
#include "gdp/registry.hpp"

namespace gdp::anomaly {

enum class AlertKind { PointOutlier, Changepoint };
const char* to_string(AlertKind k) noexcept;

struct AnomalyAlert {
  std::uint64_t id = 0;
  std::string stream;
  std::string subject;
  Tick tick = 0;
  double value = 0.0;
  double z_score = 0.0;
  AlertKind kind = AlertKind::PointOutlier;
};

/// Sliding window of the last W samples with running mean and variance.
///
/// The running moments use Welford updates (add, or replace-oldest once the
/// window is full) and are recomputed exactly every W replacements so drift
/// never accumulates past one window.
class StreamBaseline {
 public:
  StreamBaseline(std::string stream_id, std::size_t window);

  void push(double sample);

  const std::string& stream_id() const noexcept { return stream_id_; }
  std::size_t capacity() const noexcept { return capacity_; }
  std::size_t samples_seen() const noexcept { return samples_seen_; }
  bool warmed_up() const noexcept { return samples_seen_ >= capacity_; }
  const std::deque<double>& window() const noexcept { return window_; }

  double mean() const noexcept { return mean_; }
  /// Population variance over the window.
  double variance() const noexcept;
  double stddev() const noexcept;

  /// Standardized residual of `sample` against the current window. A constant
  /// window (stddev 0) maps any different sample to +/-infinity.
  double z_score(double sample) const noexcept;

 private:
  void recompute();

  std::string stream_id_;
  std::size_t capacity_;
  std::deque<double> window_;
  std::size_t samples_seen_ = 0;
  std::size_t replacements_ = 0;
  double mean_ = 0.0;
  double m2_ = 0.0;
};

/// Pluggable per-stream detector. Called before the sample enters the window.
class Detector {
 public:
  virtual ~Detector() = default;
  virtual std::optional<AnomalyAlert> on_sample(const StreamBaseline& baseline, const std::string& subject,
                                                double sample, Tick tick) = 0;
};

/// Emits PointOutlier when |z| exceeds the threshold after warm-up.
class PointOutlierDetector final : public Detector {
 public:
  explicit PointOutlierDetector(double z_threshold) : threshold_(z_threshold) {}
  std::optional<AnomalyAlert> on_sample(const StreamBaseline& baseline, const std::string& subject, double sample,
                                        Tick tick) override;

 private:
  double threshold_;
};

/// Two-sided CUSUM over standardized residuals. Resets both sums on alarm.
class CusumDetector final : public Detector {
 public:
  CusumDetector(double drift, double limit) : drift_(drift), limit_(limit) {}
  std::optional<AnomalyAlert> on_sample(const StreamBaseline& baseline, const std::string& subject, double sample,
                                        Tick tick) override;

  double upper() const noexcept { return upper_; }
  double lower() const noexcept { return lower_; }

 private:
  double drift_;
  double limit_;
  double upper_ = 0.0;
  double lower_ = 0.0;
};

/// Point-outlier check against the baseline, then the sample enters the window.
std::optional<AnomalyAlert> observe(StreamBaseline& baseline, double sample, Tick tick, double z_threshold,
                                    const std::string& subject = {});

/// CUSUM step against the baseline; does not add the sample to the window.
std::optional<AnomalyAlert> detect_changepoint(const StreamBaseline& baseline, CusumDetector& cusum, double sample,
                                               Tick tick, const std::string& subject = {});

/// A baseline plus its detectors. Every detector sees the pre-sample window.
class StreamMonitor {
 public:
  StreamMonitor(std::string stream_id, std::string subject, const AnomalyConfig& cfg);

  void add_detector(std::unique_ptr<Detector> detector) { detectors_.push_back(std::move(detector)); }
  std::vector<AnomalyAlert> process(double sample, Tick tick);
  /// Same, attributing the sample (and any alert) to `subject`.
  std::vector<AnomalyAlert> process(double sample, Tick tick, const std::string& subject);

  const StreamBaseline& baseline() const noexcept { return baseline_; }

 private:
  StreamBaseline baseline_;
  std::string subject_;
  std::vector<std::unique_ptr<Detector>> detectors_;
};

struct QuarantineRecord {
  DeviceId subject;
  Tick start_tick = 0;
  std::string reason;  // alert or event reference
  Tick review_until = 0;
  std::optional<Tick> released_tick;
};

/// Quarantine state machine over registry statuses.
class QuarantineBook {
 public:
  QuarantineBook(DeviceRegistry& registry, Tick review_period) : registry_(registry), review_period_(review_period) {}

  const QuarantineRecord& quarantine(DeviceId subject, const std::string& reason, Tick tick);
  bool is_quarantined(DeviceId subject) const;
  /// Arbitration may hold a subject past the default review period.
  void extend(DeviceId subject, Tick until);
  /// Releases every subject whose review period has elapsed; returns them.
  std::vector<DeviceId> release_due(Tick tick);
  /// Closes the open record without changing status (used when a ban supersedes quarantine).
  void close(DeviceId subject, Tick tick);

  const std::vector<QuarantineRecord>& records() const noexcept { return records_; }

 private:
  QuarantineRecord* open_record(DeviceId subject);

  DeviceRegistry& registry_;
  Tick review_period_;
  std::vector<QuarantineRecord> records_;
};

struct InvestigationReport {
  AnomalyAlert alert;
  Tick from = 0;
  Tick to = 0;
  std::vector<LogEvent> entries;
  std::vector<LogEvent> violations;

  bool has_violations() const noexcept { return !violations.empty(); }
};

/// Event names that count as protocol violations in an investigation.
bool is_violation_event(std::string_view event) noexcept;

/// Pulls the subject's log slice within +/- window ticks of the alert
/// (clamped at tick 0) and lists the protocol violations in it.
InvestigationReport investigate(const AnomalyAlert& alert, const EventLog& log, Tick window);

}  // namespace gdp::anomaly
