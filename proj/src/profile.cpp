#include "morpes/profile.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <set>
#include <sstream>

#include "morpes/errors.hpp"
#include "morpes/text.hpp"

namespace morpes {
namespace {

void check_term(const ProfileTerm& t) {
  const bool has_space = std::any_of(t.term.begin(), t.term.end(),
                                     [](char c) { return std::isspace(static_cast<unsigned char>(c)); });
  if (t.term.empty() || has_space || t.term != text::to_lower_ascii(t.term)) {
    throw StoreError("invalid profile term '" + t.term + "'");
  }
  if (!(t.weight > 0.0 && t.weight <= 1.0)) {
    throw StoreError("profile term '" + t.term + "' has weight outside (0, 1]");
  }
}

}  // namespace

double Profile::weight_of(std::string_view term) const noexcept {
  auto it = terms.find(term);
  return it == terms.end() ? 0.0 : it->second.weight;
}

double Profile::l1_norm() const noexcept {
  double sum = 0.0;
  for (const auto& [_, t] : terms) sum += t.weight;
  return sum;
}

std::string_view to_string(EventKind kind) noexcept {
  return kind == EventKind::Click ? "click" : "dwell";
}

EventKind parse_event_kind(std::string_view s) {
  if (s == "click") return EventKind::Click;
  if (s == "dwell") return EventKind::Dwell;
  throw InvalidEventError("unknown event kind '" + std::string(s) + "'");
}

void InteractionEvent::validate() const {
  if (user_id.empty()) throw InvalidEventError("event has no user_id");
  if (session_id.empty()) throw InvalidEventError("event has no session_id");
  if (segment_id.empty()) throw InvalidEventError("event has no segment_id");
  if (kind == EventKind::Dwell && dwell_ms == 0) {
    throw InvalidEventError("dwell event must carry dwell_ms > 0");
  }
}

void UpdateParams::validate() const {
  if (!(boost >= 0.0)) throw ConfigError("update boost must be >= 0");
  if (!(decay > 0.0 && decay <= 1.0)) throw ConfigError("update decay must be in (0, 1]");
  if (!(floor >= 0.0 && floor < 1.0)) throw ConfigError("update floor must be in [0, 1)");
  if (max_profile_terms == 0) throw ConfigError("max_profile_terms must be positive");
}

void validate_user_id(std::string_view user_id) {
  if (user_id.empty()) throw InvalidUserError("user id must not be empty");
  if (user_id.size() > 128) throw InvalidUserError("user id is longer than 128 bytes");
  if (user_id.front() == '.') throw InvalidUserError("user id must not start with '.'");
  for (char c : user_id) {
    const bool ok = std::isalnum(static_cast<unsigned char>(c)) || c == '.' || c == '_' || c == '-' ||
                    c == '@';
    if (!ok) throw InvalidUserError("user id contains an invalid character: " + std::string(user_id));
  }
}

Profile build_profile(std::string_view user_id, std::span<const std::string> seed_terms, Timestamp at) {
  validate_user_id(user_id);
  Profile profile;
  profile.user_id = std::string(user_id);
  for (const auto& seed : seed_terms) {
    for (auto& word : text::content_words(seed)) {
      profile.terms.try_emplace(word, ProfileTerm{word, 1.0, at});
    }
  }
  return profile;
}

Profile update_profile(const Profile& profile, const InteractionEvent& event, const Segment& segment,
                       const UpdateParams& params) {
  event.validate();
  params.validate();
  if (event.segment_id != segment.id) {
    throw EventMismatchError("event references segment " + event.segment_id + " but got " +
                             segment.id);
  }
  if (event.user_id != profile.user_id) {
    throw EventMismatchError("event user " + event.user_id + " does not own profile " +
                             profile.user_id);
  }

  const double amount =
      event.kind == EventKind::Click
          ? params.boost
          : params.boost * std::min(static_cast<double>(event.dwell_ms) / 10000.0, 1.0);

  Profile next = profile;
  const auto words = text::content_words(segment.text);
  const std::set<std::string> distinct(words.begin(), words.end());
  for (const auto& word : distinct) {
    auto [it, inserted] = next.terms.try_emplace(word, ProfileTerm{word, 0.0, event.at});
    it->second.weight += amount;
    it->second.updated_at = event.at;
  }

  for (auto it = next.terms.begin(); it != next.terms.end();) {
    double& w = it->second.weight;
    w = std::min(w * params.decay, 1.0);
    if (!(w > 0.0) || w < params.floor) {
      it = next.terms.erase(it);
    } else {
      ++it;
    }
  }

  if (next.terms.size() > params.max_profile_terms) {
    std::vector<const ProfileTerm*> order;
    order.reserve(next.terms.size());
    for (const auto& [_, t] : next.terms) order.push_back(&t);
    std::sort(order.begin(), order.end(), [](const ProfileTerm* a, const ProfileTerm* b) {
      if (a->weight != b->weight) return a->weight < b->weight;
      if (a->updated_at != b->updated_at) return a->updated_at < b->updated_at;
      return a->term < b->term;
    });
    const std::size_t excess = next.terms.size() - params.max_profile_terms;
    std::vector<std::string> doomed;
    for (std::size_t i = 0; i < excess; ++i) doomed.push_back(order[i]->term);
    for (const auto& term : doomed) next.terms.erase(term);
  }
  return next;
}

// --- store ------------------------------------------------------------------

ProfileStore::ProfileStore(std::filesystem::path dir) : dir_(std::move(dir)) {
  std::error_code ec;
  std::filesystem::create_directories(dir_, ec);
  if (ec || !std::filesystem::is_directory(dir_)) {
    throw StoreError("cannot create profile directory " + dir_.string() + ": " + ec.message());
  }
}

std::filesystem::path ProfileStore::path_for(std::string_view user_id) const {
  validate_user_id(user_id);
  return dir_ / (std::string(user_id) + ".json");
}

std::mutex& ProfileStore::lock_for(std::string_view user_id) const {
  std::lock_guard guard(locks_mutex_);
  auto& slot = locks_[std::string(user_id)];
  if (!slot) slot = std::make_unique<std::mutex>();
  return *slot;
}

void ProfileStore::persist(const Profile& profile) {
  const auto path = path_for(profile.user_id);
  const std::string body = nlohmann::json(profile).dump(2) + "\n";
  std::lock_guard guard(lock_for(profile.user_id));
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw StoreError("cannot open " + tmp.string() + " for writing");
    out << body;
    out.flush();
    if (!out) throw StoreError("failed writing " + tmp.string());
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw StoreError("cannot replace " + path.string() + ": " + ec.message());
}

Profile ProfileStore::load(std::string_view user_id) const {
  const auto path = path_for(user_id);
  std::lock_guard guard(lock_for(user_id));
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    if (!std::filesystem::exists(path)) throw NotFoundError("no profile for user " + std::string(user_id));
    throw StoreError("cannot read " + path.string());
  }
  std::stringstream buffer;
  buffer << in.rdbuf();
  try {
    Profile profile = nlohmann::json::parse(buffer.str()).get<Profile>();
    if (profile.user_id != user_id) throw StoreError("profile file " + path.string() + " names another user");
    return profile;
  } catch (const nlohmann::json::exception& e) {
    throw StoreError("corrupt profile " + path.string() + ": " + e.what());
  }
}

bool ProfileStore::contains(std::string_view user_id) const {
  return std::filesystem::exists(path_for(user_id));
}

// --- JSON --------------------------------------------------------------------

void to_json(nlohmann::json& j, const ProfileTerm& t) {
  j = {{"term", t.term}, {"weight", t.weight}, {"updated_at", to_unix(t.updated_at)}};
}

void from_json(const nlohmann::json& j, ProfileTerm& t) {
  j.at("term").get_to(t.term);
  j.at("weight").get_to(t.weight);
  t.updated_at = from_unix(j.at("updated_at").get<long long>());
  check_term(t);
}

void to_json(nlohmann::json& j, const Profile& p) {
  auto terms = nlohmann::json::array();
  for (const auto& [_, t] : p.terms) terms.push_back(t);
  j = {{"user_id", p.user_id}, {"terms", std::move(terms)}};
}

void from_json(const nlohmann::json& j, Profile& p) {
  j.at("user_id").get_to(p.user_id);
  p.terms.clear();
  for (const auto& item : j.at("terms")) {
    auto t = item.get<ProfileTerm>();
    std::string key = t.term;
    p.terms.insert_or_assign(std::move(key), std::move(t));
  }
}

void to_json(nlohmann::json& j, const InteractionEvent& e) {
  j = {{"user_id", e.user_id},       {"session_id", e.session_id}, {"page_url", e.page_url},
       {"segment_id", e.segment_id}, {"kind", to_string(e.kind)},  {"dwell_ms", e.dwell_ms},
       {"at", to_unix(e.at)}};
}

void from_json(const nlohmann::json& j, InteractionEvent& e) {
  try {
    j.at("user_id").get_to(e.user_id);
    j.at("session_id").get_to(e.session_id);
    e.page_url = j.value("page_url", std::string{});
    j.at("segment_id").get_to(e.segment_id);
    e.kind = parse_event_kind(j.at("kind").get<std::string>());
    const auto& dwell = j.value("dwell_ms", nlohmann::json(0));
    if (!dwell.is_number_integer() || dwell.get<long long>() < 0) {
      throw InvalidEventError("dwell_ms must be a non-negative integer");
    }
    e.dwell_ms = dwell.get<std::uint64_t>();
    const auto& at = j.at("at");
    if (at.is_number_integer()) {
      e.at = from_unix(at.get<long long>());
    } else if (at.is_string()) {
      auto parsed = parse_iso8601(at.get<std::string>());
      if (!parsed) throw InvalidEventError("unparseable timestamp " + at.get<std::string>());
      e.at = *parsed;
    } else {
      throw InvalidEventError("event 'at' must be Unix seconds or ISO-8601");
    }
  } catch (const nlohmann::json::exception& ex) {
    throw InvalidEventError(std::string("malformed event: ") + ex.what());
  }
  e.validate();
}

void to_json(nlohmann::json& j, const UpdateParams& p) {
  j = {{"boost", p.boost}, {"decay", p.decay}, {"floor", p.floor},
       {"max_profile_terms", p.max_profile_terms}};
}

void from_json(const nlohmann::json& j, UpdateParams& p) {
  p.boost = j.value("boost", p.boost);
  p.decay = j.value("decay", p.decay);
  p.floor = j.value("floor", p.floor);
  p.max_profile_terms = j.value("max_profile_terms", p.max_profile_terms);
}

}  // namespace morpes
