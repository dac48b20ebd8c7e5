#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "morpes/composer.hpp"

// Session metrics: mean segment count (MSC), mean first-shot segment count
// (MSFS) and mean shot count per page visit (MPSC).
namespace morpes {

// One page visit.
struct SessionRecord {
  std::string session_id;  // grouping label
  std::size_t segment_count = 0;
  std::size_t first_shot_count = 0;
  std::size_t shot_count = 0;

  void validate() const;  // throws ParseError
  bool operator==(const SessionRecord&) const = default;
};

struct SessionMetrics {
  std::string session_id;
  double msc = 0.0;
  double msfs = 0.0;
  double mpsc = 0.0;

  bool operator==(const SessionMetrics&) const = default;
};

struct AggregateReport {
  std::vector<SessionMetrics> sessions;
  double mean_msc = 0.0;
  double mean_msfs = 0.0;
  double mean_mpsc = 0.0;
};

// All records are taken as one group labelled with the first record's id.
// Throws EmptyGroupError.
SessionMetrics compute_session_metrics(std::span<const SessionRecord> group);

// Groups records by label, in order of first appearance.
std::vector<SessionMetrics> group_sessions(std::span<const SessionRecord> records);

// Column means over sessions. Sums run over sorted values, so the result
// does not depend on input order. Throws EmptyGroupError.
AggregateReport aggregate_report(std::span<const SessionMetrics> sessions);

std::string format_table(const AggregateReport& report);
// Header `session_id,msc,msfs,mpsc`, one row per session with shortest
// round-trip numbers, then a `#` comment line with the means.
std::string format_csv(const AggregateReport& report);

// Header `session_label,segment_count,first_shot_count,shot_count`.
std::vector<SessionRecord> parse_records_csv(std::string_view csv);  // throws ParseError
// Header `session_id,msc,msfs,mpsc`; `#` lines are skipped.
std::vector<SessionMetrics> parse_metrics_csv(std::string_view csv);  // throws ParseError
// Either of the two formats above, picked by header; records are grouped.
std::vector<SessionMetrics> parse_metrics_input(std::string_view csv);

// Visit record for a composed plan. The shot count is the number of shots
// needed to drain the whole plan.
SessionRecord record_for_plan(std::string_view session_id, std::size_t segment_count,
                              const ShotPlan& plan, std::size_t capacity);

}  // namespace morpes
