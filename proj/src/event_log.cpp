#include "gdp/event_log.hpp"

#include <fstream>
#include <stdexcept>

namespace gdp {

std::string_view channel_file(Channel c) noexcept {
  switch (c) {
    case Channel::World: return "world.csv";
    case Channel::Transactions: return "transactions.csv";
    case Channel::Ledger: return "ledger.csv";
    case Channel::Alerts: return "alerts.csv";
    case Channel::Incentives: return "incentives.csv";
    case Channel::Disputes: return "disputes.csv";
    case Channel::Inspections: return "inspections.csv";
  }
  return "unknown.csv";
}

std::string_view channel_header(Channel c) noexcept {
  switch (c) {
    case Channel::World: return "tick,event,subject,detail";
    case Channel::Transactions: return "tick,txn_id,event,actor,detail";
    case Channel::Ledger: return "height,parent_hex,block_digest_hex,proposer,txn_count,accept_weight";
    case Channel::Alerts: return "tick,stream,subject,kind,z_score,value";
    case Channel::Incentives: return "tick,subject,kind,delta,cause_ref";
    case Channel::Disputes: return "tick,dispute_id,stage,detail";
    case Channel::Inspections: return "tick,target_kind,target,passed,evidence_refs";
  }
  return "";
}

std::string LogEvent::csv_line() const {
  std::string out;
  for (std::size_t i = 0; i < fields.size(); ++i) {
    if (i) out.push_back(',');
    out += fields[i];
  }
  return out;
}

const LogEvent& EventLog::append(Tick tick, Channel channel, std::string subject, std::string event,
                                 std::vector<std::string> fields) {
  for (auto& f : fields)
    for (auto& ch : f)
      if (ch == ',' || ch == '\n') ch = ';';
  by_subject_[subject].push_back(events_.size());
  events_.push_back(LogEvent{events_.size(), tick, channel, std::move(subject), std::move(event), std::move(fields)});
  return events_.back();
}

std::vector<LogEvent> EventLog::slice(std::string_view subject, Tick from, Tick to) const {
  std::vector<LogEvent> out;
  auto it = by_subject_.find(std::string(subject));
  if (it == by_subject_.end()) return out;
  for (auto seq : it->second) {
    const auto& e = events_[seq];
    if (e.tick >= from && e.tick <= to) out.push_back(e);
  }
  return out;
}

std::vector<const LogEvent*> EventLog::channel(Channel c) const {
  std::vector<const LogEvent*> out;
  for (const auto& e : events_)
    if (e.channel == c) out.push_back(&e);
  return out;
}

void EventLog::write_csv(const std::filesystem::path& dir) const {
  std::filesystem::create_directories(dir);
  for (Channel c : kAllChannels) {
    std::ofstream os(dir / channel_file(c), std::ios::binary | std::ios::trunc);
    if (!os) throw std::runtime_error("cannot write " + (dir / channel_file(c)).string());
    os << channel_header(c) << '\n';
    for (const auto& e : events_)
      if (e.channel == c) os << e.csv_line() << '\n';
  }
}

std::vector<std::string> split_csv_line(std::string_view line) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const auto comma = line.find(',', start);
    out.emplace_back(line.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

ChannelRows ChannelRows::from_log(const EventLog& log) {
  ChannelRows rows;
  for (const auto& e : log.events()) rows.of(e.channel).push_back(e.fields);
  return rows;
}

ChannelRows ChannelRows::read_dir(const std::filesystem::path& dir) {
  ChannelRows rows;
  for (Channel c : kAllChannels) {
    std::ifstream is(dir / channel_file(c), std::ios::binary);
    if (!is) throw std::runtime_error("cannot read " + (dir / channel_file(c)).string());
    std::string line;
    bool header = true;
    while (std::getline(is, line)) {
      if (header) {
        header = false;
        continue;
      }
      if (!line.empty()) rows.of(c).push_back(split_csv_line(line));
    }
  }
  return rows;
}

}  // namespace gdp
