#pragma once

#include <chrono>
#include <functional>
#include <optional>
#include <string>
#include <string_view>

namespace morpes {

// UTC seconds since the Unix epoch.
using Timestamp = std::chrono::sys_seconds;
using Clock = std::function<Timestamp()>;

inline Timestamp now_utc() {
  return std::chrono::time_point_cast<std::chrono::seconds>(std::chrono::system_clock::now());
}

inline Timestamp from_unix(long long seconds) { return Timestamp{std::chrono::seconds{seconds}}; }
inline long long to_unix(Timestamp t) { return t.time_since_epoch().count(); }

// "YYYY-MM-DDTHH:MM:SSZ"
std::string format_iso8601(Timestamp t);
// Accepts "YYYY-MM-DD", "YYYY-MM-DDTHH:MM:SS" with optional "Z".
std::optional<Timestamp> parse_iso8601(std::string_view s);

// Accepts "250ms", "10s", "30m", "2h" or a bare number of seconds.
std::optional<std::chrono::milliseconds> parse_duration(std::string_view s);

}  // namespace morpes
