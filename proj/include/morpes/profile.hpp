#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "json.hpp"
#include "morpes/segmenter.hpp"
#include "morpes/time.hpp"

// Per-user weighted term profiles: building, event-driven updates and the
// on-disk store.
namespace morpes {

struct ProfileTerm {
  std::string term;  // lowercased, no whitespace
  double weight = 1.0;  // in (0, 1]
  Timestamp updated_at{};

  bool operator==(const ProfileTerm&) const = default;
};

struct Profile {
  std::string user_id;
  std::map<std::string, ProfileTerm, std::less<>> terms;

  double weight_of(std::string_view term) const noexcept;
  // Sum of all term weights.
  double l1_norm() const noexcept;

  bool operator==(const Profile&) const = default;
};

enum class EventKind { Click, Dwell };

std::string_view to_string(EventKind kind) noexcept;
EventKind parse_event_kind(std::string_view s);  // throws InvalidEventError

struct InteractionEvent {
  std::string user_id;
  std::string session_id;
  std::string page_url;
  std::string segment_id;
  EventKind kind = EventKind::Click;
  std::uint64_t dwell_ms = 0;
  Timestamp at{};

  // Throws InvalidEventError unless ids are present and a dwell event
  // carries a positive duration.
  void validate() const;
};

struct UpdateParams {
  double boost = 0.2;
  double decay = 0.98;
  double floor = 0.01;
  std::size_t max_profile_terms = 500;

  void validate() const;  // throws ConfigError
};

// User ids double as file names, so they are restricted to
// [A-Za-z0-9._@-], must not start with '.', and are at most 128 bytes.
void validate_user_id(std::string_view user_id);  // throws InvalidUserError

Profile build_profile(std::string_view user_id, std::span<const std::string> seed_terms,
                      Timestamp at = now_utc());

// Boosts every content word of the segment once, applies decay, clamps to
// (0, 1] and evicts terms below the floor or beyond max_profile_terms.
Profile update_profile(const Profile& profile, const InteractionEvent& event, const Segment& segment,
                       const UpdateParams& params);

// One JSON document per user: <dir>/<user_id>.json. Writes go through a
// temporary file and an atomic rename; writes for the same user are
// serialized.
class ProfileStore {
 public:
  explicit ProfileStore(std::filesystem::path dir);

  void persist(const Profile& profile);
  Profile load(std::string_view user_id) const;  // NotFoundError, StoreError
  bool contains(std::string_view user_id) const;

  const std::filesystem::path& directory() const noexcept { return dir_; }

 private:
  std::filesystem::path path_for(std::string_view user_id) const;
  std::mutex& lock_for(std::string_view user_id) const;

  std::filesystem::path dir_;
  mutable std::mutex locks_mutex_;
  mutable std::unordered_map<std::string, std::unique_ptr<std::mutex>> locks_;
};

void to_json(nlohmann::json& j, const ProfileTerm& term);
void from_json(const nlohmann::json& j, ProfileTerm& term);
void to_json(nlohmann::json& j, const Profile& profile);
void from_json(const nlohmann::json& j, Profile& profile);
void to_json(nlohmann::json& j, const InteractionEvent& event);
// Accepts `at` as Unix seconds or an ISO-8601 string. Calls validate().
void from_json(const nlohmann::json& j, InteractionEvent& event);
void to_json(nlohmann::json& j, const UpdateParams& params);
void from_json(const nlohmann::json& j, UpdateParams& params);

}  // namespace morpes
