#include "morpes/metrics.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <type_traits>
#include <unordered_map>

#include "morpes/errors.hpp"

namespace morpes {
namespace {

constexpr std::string_view kRecordsHeader = "session_label,segment_count,first_shot_count,shot_count";
constexpr std::string_view kMetricsHeader = "session_id,msc,msfs,mpsc";

double sorted_mean(std::vector<double> values) {
  std::sort(values.begin(), values.end());
  double sum = 0.0;
  for (double v : values) sum += v;
  return sum / static_cast<double>(values.size());
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

std::vector<std::string_view> split(std::string_view line, char sep) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = line.find(sep, start);
    out.push_back(trim(line.substr(start, pos == std::string_view::npos ? line.npos : pos - start)));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

// Non-empty, non-comment lines with their 1-based line numbers.
std::vector<std::pair<std::size_t, std::string_view>> data_lines(std::string_view csv) {
  std::vector<std::pair<std::size_t, std::string_view>> lines;
  std::size_t number = 0;
  while (!csv.empty()) {
    const auto nl = csv.find('\n');
    std::string_view line = trim(csv.substr(0, nl));
    csv.remove_prefix(nl == std::string_view::npos ? csv.size() : nl + 1);
    ++number;
    if (line.empty() || line.front() == '#') continue;
    lines.emplace_back(number, line);
  }
  return lines;
}

std::string header_of(std::string_view csv) {
  auto lines = data_lines(csv);
  if (lines.empty()) return {};
  std::string header;
  for (auto field : split(lines.front().second, ',')) {
    if (!header.empty()) header += ',';
    header += field;
  }
  return header;
}

[[noreturn]] void fail(std::size_t line, const std::string& what) {
  throw ParseError("line " + std::to_string(line) + ": " + what);
}

template <typename T>
T parse_number(std::string_view field, std::size_t line) {
  T value{};
  const auto* end = field.data() + field.size();
  auto [ptr, ec] = std::from_chars(field.data(), end, value);
  if (ec != std::errc{} || ptr != end) fail(line, "invalid number '" + std::string(field) + "'");
  if constexpr (std::is_floating_point_v<T>) {
    if (!std::isfinite(value) || value < 0.0) fail(line, "value must be finite and >= 0");
  }
  return value;
}

std::string shortest(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

}  // namespace

void SessionRecord::validate() const {
  if (session_id.empty()) throw ParseError("session label must not be empty");
  if (first_shot_count > segment_count) {
    throw ParseError("session " + session_id + ": first_shot_count exceeds segment_count");
  }
  if (segment_count > 0 && shot_count == 0) {
    throw ParseError("session " + session_id + ": shot_count must be >= 1 when segments exist");
  }
}

SessionMetrics compute_session_metrics(std::span<const SessionRecord> group) {
  if (group.empty()) throw EmptyGroupError("session group is empty");
  std::vector<double> segments, first, shots;
  for (const auto& r : group) {
    segments.push_back(static_cast<double>(r.segment_count));
    first.push_back(static_cast<double>(r.first_shot_count));
    shots.push_back(static_cast<double>(r.shot_count));
  }
  return {group.front().session_id, sorted_mean(std::move(segments)), sorted_mean(std::move(first)),
          sorted_mean(std::move(shots))};
}

std::vector<SessionMetrics> group_sessions(std::span<const SessionRecord> records) {
  std::vector<std::vector<SessionRecord>> groups;
  std::unordered_map<std::string, std::size_t> index;
  for (const auto& r : records) {
    auto [it, inserted] = index.try_emplace(r.session_id, groups.size());
    if (inserted) groups.emplace_back();
    groups[it->second].push_back(r);
  }
  std::vector<SessionMetrics> out;
  out.reserve(groups.size());
  for (const auto& g : groups) out.push_back(compute_session_metrics(g));
  return out;
}

AggregateReport aggregate_report(std::span<const SessionMetrics> sessions) {
  if (sessions.empty()) throw EmptyGroupError("no sessions to aggregate");
  AggregateReport report;
  report.sessions.assign(sessions.begin(), sessions.end());
  std::vector<double> msc, msfs, mpsc;
  for (const auto& s : sessions) {
    msc.push_back(s.msc);
    msfs.push_back(s.msfs);
    mpsc.push_back(s.mpsc);
  }
  report.mean_msc = sorted_mean(std::move(msc));
  report.mean_msfs = sorted_mean(std::move(msfs));
  report.mean_mpsc = sorted_mean(std::move(mpsc));
  return report;
}

std::string format_table(const AggregateReport& report) {
  std::size_t id_width = std::string_view("Session ID").size();
  for (const auto& s : report.sessions) id_width = std::max(id_width, s.session_id.size());
  const int w = static_cast<int>(id_width);

  std::string out;
  char line[256];
  auto row = [&](const std::string& id, double a, double b, double c) {
    std::snprintf(line, sizeof line, "%-*s  %8.2f  %8.2f  %8.2f\n", w, id.c_str(), a, b, c);
    out += line;
  };
  std::snprintf(line, sizeof line, "%-*s  %8s  %8s  %8s\n", w, "Session ID", "MSC", "MSFS", "MPSC");
  out += line;
  out += std::string(id_width + 30, '-') + "\n";
  for (const auto& s : report.sessions) row(s.session_id, s.msc, s.msfs, s.mpsc);
  out += std::string(id_width + 30, '-') + "\n";
  row("Mean", report.mean_msc, report.mean_msfs, report.mean_mpsc);
  return out;
}

std::string format_csv(const AggregateReport& report) {
  std::string out(kMetricsHeader);
  out += '\n';
  for (const auto& s : report.sessions) {
    out += s.session_id + "," + shortest(s.msc) + "," + shortest(s.msfs) + "," + shortest(s.mpsc) + "\n";
  }
  out += "# mean," + shortest(report.mean_msc) + "," + shortest(report.mean_msfs) + "," +
         shortest(report.mean_mpsc) + "\n";
  return out;
}

std::vector<SessionRecord> parse_records_csv(std::string_view csv) {
  const auto lines = data_lines(csv);
  if (lines.empty() || header_of(csv) != kRecordsHeader) {
    throw ParseError("expected header '" + std::string(kRecordsHeader) + "'");
  }
  std::vector<SessionRecord> records;
  for (std::size_t i = 1; i < lines.size(); ++i) {
    const auto [number, line] = lines[i];
    const auto fields = split(line, ',');
    if (fields.size() != 4) fail(number, "expected 4 fields");
    SessionRecord r;
    r.session_id = std::string(fields[0]);
    r.segment_count = parse_number<std::size_t>(fields[1], number);
    r.first_shot_count = parse_number<std::size_t>(fields[2], number);
    r.shot_count = parse_number<std::size_t>(fields[3], number);
    try {
      r.validate();
    } catch (const ParseError& e) {
      fail(number, e.what());
    }
    records.push_back(std::move(r));
  }
  return records;
}

std::vector<SessionMetrics> parse_metrics_csv(std::string_view csv) {
  const auto lines = data_lines(csv);
  if (lines.empty() || header_of(csv) != kMetricsHeader) {
    throw ParseError("expected header '" + std::string(kMetricsHeader) + "'");
  }
  std::vector<SessionMetrics> rows;
  for (std::size_t i = 1; i < lines.size(); ++i) {
    const auto [number, line] = lines[i];
    const auto fields = split(line, ',');
    if (fields.size() != 4) fail(number, "expected 4 fields");
    if (fields[0].empty()) fail(number, "empty session id");
    rows.push_back({std::string(fields[0]), parse_number<double>(fields[1], number),
                    parse_number<double>(fields[2], number), parse_number<double>(fields[3], number)});
  }
  return rows;
}

std::vector<SessionMetrics> parse_metrics_input(std::string_view csv) {
  const std::string header = header_of(csv);
  if (header == kRecordsHeader) return group_sessions(parse_records_csv(csv));
  if (header == kMetricsHeader) return parse_metrics_csv(csv);
  throw ParseError("unrecognized header '" + header + "'");
}

SessionRecord record_for_plan(std::string_view session_id, std::size_t segment_count,
                              const ShotPlan& plan, std::size_t capacity) {
  SessionRecord r;
  r.session_id = std::string(session_id);
  r.segment_count = segment_count;
  r.first_shot_count = plan.shots.empty() ? 0 : plan.shots.front().segment_ids.size();
  r.shot_count = plan.total_shots(capacity);
  return r;
}

}  // namespace morpes
