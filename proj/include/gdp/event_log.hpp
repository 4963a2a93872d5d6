#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "gdp/primitives.hpp"

namespace gdp {

/// Output files of a run; each channel is one CSV with a fixed header.
enum class Channel : std::uint8_t { World, Transactions, Ledger, Alerts, Incentives, Disputes, Inspections };

inline constexpr std::array<Channel, 7> kAllChannels = {Channel::World,      Channel::Transactions, Channel::Ledger,
                                                        Channel::Alerts,     Channel::Incentives,   Channel::Disputes,
                                                        Channel::Inspections};

std::string_view channel_file(Channel c) noexcept;
std::string_view channel_header(Channel c) noexcept;

/// One CSV row. `subject` and `event` duplicate two of the row's columns so
/// that investigations can slice the log without re-parsing.
struct LogEvent {
  std::uint64_t seq = 0;
  Tick tick = 0;
  Channel channel = Channel::World;
  std::string subject;
  std::string event;
  std::vector<std::string> fields;

  std::string csv_line() const;
  bool operator==(const LogEvent&) const = default;
};

/// Append-only total order of everything that happened in a world.
class EventLog {
 public:
  const LogEvent& append(Tick tick, Channel channel, std::string subject, std::string event,
                         std::vector<std::string> fields);

  const std::vector<LogEvent>& events() const noexcept { return events_; }
  std::size_t size() const noexcept { return events_.size(); }
  bool contains(std::uint64_t seq) const noexcept { return seq < events_.size(); }
  const LogEvent& at(std::uint64_t seq) const { return events_.at(seq); }

  /// Events whose subject matches, with from <= tick <= to.
  std::vector<LogEvent> slice(std::string_view subject, Tick from, Tick to) const;
  std::vector<const LogEvent*> channel(Channel c) const;

  void write_csv(const std::filesystem::path& dir) const;

 private:
  std::vector<LogEvent> events_;
  std::unordered_map<std::string, std::vector<std::uint64_t>> by_subject_;
};

/// Parsed CSV rows of each channel, in file order (header dropped).
struct ChannelRows {
  std::array<std::vector<std::vector<std::string>>, kAllChannels.size()> rows;

  const std::vector<std::vector<std::string>>& of(Channel c) const { return rows[static_cast<std::size_t>(c)]; }
  std::vector<std::vector<std::string>>& of(Channel c) { return rows[static_cast<std::size_t>(c)]; }

  static ChannelRows from_log(const EventLog& log);
  static ChannelRows read_dir(const std::filesystem::path& dir);
};

std::vector<std::string> split_csv_line(std::string_view line);

}  // namespace gdp
