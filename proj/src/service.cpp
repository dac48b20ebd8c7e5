#include "morpes/service.hpp"

#include <openssl/evp.h>
#include <openssl/hmac.h>
#include <openssl/rand.h>
#include <pthread.h>
#include <signal.h>

#include <cerrno>
#include <charconv>
#include <cstring>
#include <fstream>
#include <iostream>
#include <list>
#include <set>
#include <sstream>

#include "httplib.h"
#include "morpes/errors.hpp"
#include "morpes/text.hpp"
#include "morpes/url.hpp"

namespace morpes {
namespace {

constexpr const char* kSessionHeader = "X-Morpes-Session";

std::chrono::milliseconds duration_field(const nlohmann::json& j, const char* key,
                                         std::chrono::milliseconds fallback) {
  if (!j.contains(key)) return fallback;
  const auto& v = j.at(key);
  std::optional<std::chrono::milliseconds> d;
  if (v.is_string()) {
    d = parse_duration(v.get<std::string>());
  } else if (v.is_number() && v.get<double>() >= 0.0) {
    d = std::chrono::milliseconds(static_cast<long long>(v.get<double>() * 1000.0));
  }
  if (!d) throw ConfigError(std::string("invalid duration for '") + key + "'");
  return *d;
}

std::string format_duration(std::chrono::milliseconds d) {
  if (d.count() % 1000 != 0) return std::to_string(d.count()) + "ms";
  return std::to_string(d.count() / 1000) + "s";
}

std::filesystem::path resolve_path(const std::filesystem::path& p, const std::filesystem::path& base) {
  if (p.is_absolute() || base.empty()) return p;
  return base / p;
}

std::optional<std::size_t> parse_positive(std::string_view s) {
  std::size_t v = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || ptr != s.data() + s.size() || v == 0) return std::nullopt;
  return v;
}

std::string to_hex(const unsigned char* data, std::size_t n) {
  static constexpr char kDigits[] = "0123456789abcdef";
  std::string out;
  out.reserve(n * 2);
  for (std::size_t i = 0; i < n; ++i) {
    out.push_back(kDigits[data[i] >> 4]);
    out.push_back(kDigits[data[i] & 0xf]);
  }
  return out;
}

std::string random_secret() {
  unsigned char buf[32];
  if (RAND_bytes(buf, sizeof buf) != 1) throw StartupError("cannot obtain random bytes for session keys");
  return std::string(reinterpret_cast<const char*>(buf), sizeof buf);
}

Reply json_reply(int status, const nlohmann::json& body) {
  Reply r;
  r.status = status;
  r.content_type = "application/json";
  r.body = body.dump();
  return r;
}

Reply error_reply(int status, const std::string& kind, const std::string& message) {
  return json_reply(status, {{"error", kind}, {"message", message}});
}

// Maps library errors onto HTTP statuses.
template <typename Fn>
Reply guarded(Fn&& fn) {
  try {
    return fn();
  } catch (const EmptyPageError&) {
    Reply r;
    r.status = 204;
    r.content_type.clear();
    return r;
  } catch (const InvalidUserError& e) {
    return error_reply(400, e.kind(), e.what());
  } catch (const InvalidUrlError& e) {
    return error_reply(400, e.kind(), e.what());
  } catch (const InvalidEventError& e) {
    return error_reply(400, e.kind(), e.what());
  } catch (const EventMismatchError& e) {
    return error_reply(400, e.kind(), e.what());
  } catch (const TemplateNotFoundError& e) {
    return error_reply(400, e.kind(), e.what());
  } catch (const ParseError& e) {
    return error_reply(400, e.kind(), e.what());
  } catch (const NotFoundError& e) {
    return error_reply(404, e.kind(), e.what());
  } catch (const NoMoreShotsError& e) {
    return error_reply(410, e.kind(), e.what());
  } catch (const TimeoutError& e) {
    return error_reply(504, e.kind(), e.what());
  } catch (const FetchError& e) {
    return error_reply(502, e.kind(), e.what());
  } catch (const ContentTypeError& e) {
    return error_reply(502, e.kind(), e.what());
  } catch (const Error& e) {
    return error_reply(500, e.kind(), e.what());
  } catch (const std::exception& e) {
    return error_reply(500, "InternalError", e.what());
  }
}

ProfileStore open_store(const std::filesystem::path& dir) {
  try {
    return ProfileStore(dir);
  } catch (const StoreError& e) {
    throw StartupError(e.what());
  }
}

}  // namespace

// --- configuration ------------------------------------------------------------

void ServiceConfig::validate() const {
  split_listen_address(listen_address);
  if (profile_dir.empty()) throw ConfigError("profile_dir must not be empty");
  if (templates.empty()) throw ConfigError("at least one template is required");
  std::set<std::string> ids;
  for (const auto& t : templates) {
    t.validate();
    if (!ids.insert(t.id).second) throw ConfigError("duplicate template id '" + t.id + "'");
  }
  if (segmentation.max_chars == 0) throw ConfigError("segmentation.max_chars must be positive");
  if (segmentation.min_chars > segmentation.max_chars) {
    throw ConfigError("segmentation.min_chars must not exceed max_chars");
  }
  dimension_weights.validate();
  update_params.validate();
  if (fetch_timeout.count() <= 0) throw ConfigError("fetch_timeout must be positive");
  if (session_ttl.count() <= 0) throw ConfigError("session_ttl must be positive");
}

std::pair<std::string, int> split_listen_address(std::string_view address) {
  const auto colon = address.rfind(':');
  if (colon == std::string_view::npos || colon == 0) {
    throw ConfigError("listen address must be host:port, got '" + std::string(address) + "'");
  }
  std::string host(address.substr(0, colon));
  if (host.size() > 2 && host.front() == '[' && host.back() == ']') host = host.substr(1, host.size() - 2);
  const auto port_text = address.substr(colon + 1);
  int port = -1;
  auto [ptr, ec] = std::from_chars(port_text.data(), port_text.data() + port_text.size(), port);
  if (ec != std::errc{} || ptr != port_text.data() + port_text.size() || port < 0 || port > 65535) {
    throw ConfigError("invalid port in listen address '" + std::string(address) + "'");
  }
  return {host, port};
}

ServiceConfig config_from_json(const nlohmann::json& j, const std::filesystem::path& base_dir) {
  static const std::set<std::string> kKeys = {
      "listen_address", "profile_dir",  "templates",   "segmentation",   "dimension_weights",
      "update_params",  "fetch_timeout", "session_ttl", "cache_capacity", "app_dir",
      "session_secret"};
  if (!j.is_object()) throw ConfigError("configuration must be a JSON object");
  for (const auto& [key, _] : j.items()) {
    if (!kKeys.contains(key)) throw ConfigError("unknown configuration key '" + key + "'");
  }
  ServiceConfig c;
  try {
    c.listen_address = j.value("listen_address", c.listen_address);
    c.profile_dir = resolve_path(j.value("profile_dir", c.profile_dir.string()), base_dir);
    if (j.contains("templates")) c.templates = j.at("templates").get<std::vector<Template>>();
    if (j.contains("segmentation")) c.segmentation = j.at("segmentation").get<SegmentationParams>();
    if (j.contains("dimension_weights")) c.dimension_weights = j.at("dimension_weights").get<DimensionWeights>();
    if (j.contains("update_params")) c.update_params = j.at("update_params").get<UpdateParams>();
    c.fetch_timeout = duration_field(j, "fetch_timeout", c.fetch_timeout);
    c.session_ttl = duration_field(j, "session_ttl", c.session_ttl);
    if (j.contains("cache_capacity")) {
      const auto& cap = j.at("cache_capacity");
      if (!cap.is_number_integer() || cap.get<long long>() < 0) {
        throw ConfigError("cache_capacity must be a non-negative integer");
      }
      c.cache_capacity = cap.get<std::size_t>();
    }
    if (j.contains("app_dir") && !j.at("app_dir").is_null()) {
      c.app_dir = resolve_path(j.at("app_dir").get<std::string>(), base_dir);
    }
    c.session_secret = j.value("session_secret", std::string{});
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("malformed configuration: ") + e.what());
  }
  c.validate();
  return c;
}

ServiceConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot read configuration file " + path.string());
  std::stringstream buffer;
  buffer << in.rdbuf();
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(buffer.str());
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("configuration file " + path.string() + " is not valid JSON: " + e.what());
  }
  return config_from_json(j, path.parent_path());
}

nlohmann::json config_to_json(const ServiceConfig& c) {
  nlohmann::json j = {{"listen_address", c.listen_address},
                      {"profile_dir", c.profile_dir.string()},
                      {"templates", c.templates},
                      {"segmentation", c.segmentation},
                      {"dimension_weights", c.dimension_weights},
                      {"update_params", c.update_params},
                      {"fetch_timeout", format_duration(c.fetch_timeout)},
                      {"session_ttl", format_duration(c.session_ttl)},
                      {"cache_capacity", c.cache_capacity}};
  if (c.app_dir) j["app_dir"] = c.app_dir->string();
  return j;
}

// --- internal state -------------------------------------------------------------

struct ProxyService::SessionEntry {
  mutable std::mutex mutex;
  Session session;
  std::string requested_url;
  std::shared_ptr<const SegmentSet> segments;
  PageScores scores;
  Template tmpl;
};

struct ProxyService::UserState {
  std::mutex mutex;
  bool loaded = false;
  bool exists = false;  // stored on disk or written by this process
  bool dirty = false;
  Profile profile;
};

class ProxyService::SegmentCache {
 public:
  explicit SegmentCache(std::size_t capacity) : capacity_(capacity) {}

  std::shared_ptr<const SegmentSet> get(const std::string& key) {
    std::lock_guard guard(mutex_);
    auto it = index_.find(key);
    if (it == index_.end()) return nullptr;
    order_.splice(order_.begin(), order_, it->second);
    return it->second->second;
  }

  void put(const std::string& key, std::shared_ptr<const SegmentSet> value) {
    if (capacity_ == 0) return;
    std::lock_guard guard(mutex_);
    if (auto it = index_.find(key); it != index_.end()) {
      it->second->second = std::move(value);
      order_.splice(order_.begin(), order_, it->second);
      return;
    }
    order_.emplace_front(key, std::move(value));
    index_[key] = order_.begin();
    while (order_.size() > capacity_) {
      index_.erase(order_.back().first);
      order_.pop_back();
    }
  }

  std::size_t size() const {
    std::lock_guard guard(mutex_);
    return order_.size();
  }

 private:
  using Item = std::pair<std::string, std::shared_ptr<const SegmentSet>>;
  std::size_t capacity_;
  mutable std::mutex mutex_;
  std::list<Item> order_;
  std::unordered_map<std::string, std::list<Item>::iterator> index_;
};

// --- service ------------------------------------------------------------------------

ProxyService::ProxyService(ServiceConfig config, Clock clock, PageFetcher fetcher)
    : config_((config.validate(), std::move(config))),
      clock_(std::move(clock)),
      fetcher_(std::move(fetcher)),
      store_(open_store(config_.profile_dir)),
      secret_(config_.session_secret.empty() ? random_secret() : config_.session_secret),
      cache_(std::make_unique<SegmentCache>(config_.cache_capacity)) {
  if (!clock_) clock_ = now_utc;
  if (!fetcher_) fetcher_ = fetch_page;
}

ProxyService::~ProxyService() {
  stop();
  if (reaper_.joinable()) reaper_.join();
  try {
    flush_profiles();
  } catch (const std::exception& e) {
    std::cerr << "morpes: flushing profiles failed: " << e.what() << "\n";
  }
}

std::shared_ptr<ProxyService::SessionEntry> ProxyService::find_session(std::string_view session_id) const {
  std::lock_guard guard(sessions_mutex_);
  auto it = sessions_.find(std::string(session_id));
  if (it == sessions_.end()) throw NotFoundError("unknown or expired session");
  return it->second;
}

std::shared_ptr<ProxyService::UserState> ProxyService::user_state(const std::string& user_id) {
  std::lock_guard guard(users_mutex_);
  auto& slot = users_[user_id];
  if (!slot) slot = std::make_shared<UserState>();
  return slot;
}

namespace {

// Caller holds the user's lock.
void ensure_loaded(const ProfileStore& store, const std::string& user_id, bool& loaded, bool& exists,
                   Profile& profile) {
  if (loaded) return;
  try {
    profile = store.load(user_id);
    exists = true;
  } catch (const NotFoundError&) {
    profile = Profile{user_id, {}};
    exists = false;
  }
  loaded = true;
}

}  // namespace

Profile ProxyService::profile_snapshot(const std::string& user_id) {
  auto state = user_state(user_id);
  std::lock_guard guard(state->mutex);
  ensure_loaded(store_, user_id, state->loaded, state->exists, state->profile);
  return state->profile;
}

std::string ProxyService::session_token(const FetchRequest& request, const RawPage& page, Timestamp now,
                                        const Profile& profile, const Template& tmpl) const {
  std::string message;
  for (const std::string& part :
       {request.user_id, request.url, page.url, text::hex64(text::fnv1a64(page.html)),
        std::to_string(to_unix(now)), nlohmann::json(profile).dump(), tmpl.id, request.width.value_or("")}) {
    message += part;
    message.push_back('\0');
  }
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int length = 0;
  HMAC(EVP_sha256(), secret_.data(), static_cast<int>(secret_.size()),
       reinterpret_cast<const unsigned char*>(message.data()), message.size(), digest, &length);
  return to_hex(digest, std::min<unsigned int>(length, 16));
}

Reply ProxyService::render(const SessionEntry& entry, std::size_t shot_index, bool debug) const {
  const ShotPlan& plan = entry.session.shot_plan;
  NavContext nav;
  nav.page_url = entry.session.page_url;
  nav.shot_index = shot_index;
  nav.total_shots = plan.total_shots(entry.tmpl.capacity);
  nav.session_id = entry.session.session_id;
  Reply r;
  r.body = render_shot(plan.shots.at(shot_index - 1), *entry.segments, entry.tmpl, nav,
                       debug ? &entry.scores : nullptr);
  r.headers[kSessionHeader] = entry.session.session_id;
  return r;
}

Reply ProxyService::handle_fetch(const FetchRequest& request) {
  return guarded([&] {
    validate_user_id(request.user_id);
    Url::parse_http(request.url);
    std::optional<int> width;
    if (request.width && !request.width->empty()) {
      auto w = parse_positive(*request.width);
      if (!w || *w > 100000) throw ParseError("width must be a positive integer");
      width = static_cast<int>(*w);
    }
    std::optional<std::string_view> requested;
    if (request.template_id && !request.template_id->empty()) requested = *request.template_id;
    const Template tmpl = select_template(config_.templates, requested, width);

    const Timestamp now = clock_();
    RawPage page = fetcher_(request.url, config_.fetch_timeout);
    page.fetched_at = now;

    const std::string key = page.url + '\n' + text::hex64(text::fnv1a64(page.html));
    std::shared_ptr<const SegmentSet> segments = cache_->get(key);
    if (!segments) {
      segments = std::make_shared<const SegmentSet>(segment_page(page, config_.segmentation));
      cache_->put(key, segments);
    }
    if (segments->segments.empty()) throw EmptyPageError("page has no segments");

    const Profile profile = profile_snapshot(request.user_id);
    auto entry = std::make_shared<SessionEntry>();
    entry->scores = score_page(*segments, profile, config_.dimension_weights, now);
    entry->segments = segments;
    entry->tmpl = tmpl;
    entry->requested_url = request.url;
    entry->session.session_id = session_token(request, page, now, profile, tmpl);
    entry->session.user_id = request.user_id;
    entry->session.page_url = page.url;
    entry->session.template_id = tmpl.id;
    entry->session.shot_plan = compose_shots(sort_segments(entry->scores), tmpl, page.url);
    entry->session.created_at = now;
    entry->session.last_active = now;

    Reply reply = render(*entry, 1, request.debug);
    {
      std::lock_guard guard(sessions_mutex_);
      sessions_[entry->session.session_id] = entry;
    }
    {
      std::lock_guard guard(visits_mutex_);
      visits_.push_back(record_for_plan(request.user_id, segments->segments.size(),
                                        entry->session.shot_plan, tmpl.capacity));
    }
    return reply;
  });
}

Reply ProxyService::handle_shot(std::string_view session_id, std::string_view index, bool debug) {
  return guarded([&] {
    const auto requested = parse_positive(index);
    if (!requested) throw ParseError("shot index must be a positive integer");
    auto entry = find_session(session_id);
    const Timestamp now = clock_();

    std::lock_guard guard(entry->mutex);
    if (now - entry->session.last_active > config_.session_ttl) {
      throw NotFoundError("unknown or expired session");
    }
    ShotPlan& plan = entry->session.shot_plan;
    const std::size_t served = plan.shots.size();
    const std::size_t total = plan.total_shots(entry->tmpl.capacity);
    if (*requested > served) {
      if (*requested > total) throw NoMoreShotsError("no shot " + std::to_string(*requested));
      if (*requested != served + 1) {
        throw ParseError("shot " + std::to_string(*requested) + " requested before shot " +
                         std::to_string(served + 1));
      }
      plan = next_shot(plan, entry->tmpl).first;
    }
    entry->session.last_active = now;
    return render(*entry, *requested, debug);
  });
}

Reply ProxyService::handle_event(std::string_view body) {
  return guarded([&] {
    InteractionEvent event;
    try {
      event = nlohmann::json::parse(body).get<InteractionEvent>();
    } catch (const nlohmann::json::exception& e) {
      throw InvalidEventError(std::string("malformed event body: ") + e.what());
    }
    validate_user_id(event.user_id);

    auto entry = find_session(event.session_id);
    const Timestamp now = clock_();
    Segment segment;
    {
      std::lock_guard guard(entry->mutex);
      if (now - entry->session.last_active > config_.session_ttl) {
        throw NotFoundError("unknown or expired session");
      }
      if (entry->session.user_id != event.user_id) {
        throw EventMismatchError("session belongs to another user");
      }
      if (!event.page_url.empty() && event.page_url != entry->session.page_url &&
          event.page_url != entry->requested_url) {
        throw EventMismatchError("event page_url does not match the session");
      }
      const Segment* found = entry->segments->find(event.segment_id);
      if (!found) throw NotFoundError("segment " + event.segment_id + " is not part of the session");
      segment = *found;
      entry->session.last_active = now;
    }

    auto state = user_state(event.user_id);
    std::lock_guard guard(state->mutex);
    ensure_loaded(store_, event.user_id, state->loaded, state->exists, state->profile);
    state->profile = update_profile(state->profile, event, segment, config_.update_params);
    state->dirty = true;
    store_.persist(state->profile);
    state->dirty = false;
    state->exists = true;
    Reply r;
    r.status = 204;
    r.content_type.clear();
    return r;
  });
}

Reply ProxyService::handle_profile(std::string_view user_id) {
  return guarded([&] {
    validate_user_id(user_id);
    const std::string id(user_id);
    auto state = user_state(id);
    std::lock_guard guard(state->mutex);
    ensure_loaded(store_, id, state->loaded, state->exists, state->profile);
    if (!state->exists) throw NotFoundError("no profile for user " + id);
    return json_reply(200, state->profile);
  });
}

Reply ProxyService::handle_seed_profile(std::string_view user_id, std::string_view body) {
  return guarded([&] {
    validate_user_id(user_id);
    std::vector<std::string> seeds;
    try {
      seeds = nlohmann::json::parse(body).at("terms").get<std::vector<std::string>>();
    } catch (const nlohmann::json::exception& e) {
      throw ParseError(std::string("expected {\"terms\": [...]}: ") + e.what());
    }
    const std::string id(user_id);
    auto state = user_state(id);
    std::lock_guard guard(state->mutex);
    state->profile = build_profile(id, seeds, clock_());
    state->loaded = true;
    state->dirty = true;
    store_.persist(state->profile);
    state->dirty = false;
    state->exists = true;
    return json_reply(200, state->profile);
  });
}

std::size_t ProxyService::reap_expired() {
  const Timestamp now = clock_();
  std::vector<std::shared_ptr<SessionEntry>> doomed;
  {
    std::lock_guard guard(sessions_mutex_);
    for (auto it = sessions_.begin(); it != sessions_.end();) {
      bool expired;
      {
        std::lock_guard entry_guard(it->second->mutex);
        expired = now - it->second->session.last_active > config_.session_ttl;
      }
      if (expired) {
        doomed.push_back(std::move(it->second));
        it = sessions_.erase(it);
      } else {
        ++it;
      }
    }
  }
  return doomed.size();
}

void ProxyService::flush_profiles() {
  std::vector<std::shared_ptr<UserState>> states;
  {
    std::lock_guard guard(users_mutex_);
    for (auto& [_, s] : users_) states.push_back(s);
  }
  for (auto& state : states) {
    std::lock_guard guard(state->mutex);
    if (!state->dirty) continue;
    store_.persist(state->profile);
    state->dirty = false;
    state->exists = true;
  }
}

std::optional<Session> ProxyService::session(std::string_view session_id) const {
  std::shared_ptr<SessionEntry> entry;
  {
    std::lock_guard guard(sessions_mutex_);
    auto it = sessions_.find(std::string(session_id));
    if (it == sessions_.end()) return std::nullopt;
    entry = it->second;
  }
  std::lock_guard guard(entry->mutex);
  return entry->session;
}

std::size_t ProxyService::session_count() const {
  std::lock_guard guard(sessions_mutex_);
  return sessions_.size();
}

std::size_t ProxyService::cache_size() const { return cache_->size(); }

std::vector<SessionRecord> ProxyService::visit_records() const {
  std::lock_guard guard(visits_mutex_);
  return visits_;
}

// --- HTTP ---------------------------------------------------------------------------

namespace {

void send(httplib::Response& res, const Reply& reply) {
  res.status = reply.status;
  for (const auto& [name, value] : reply.headers) res.set_header(name, value);
  if (reply.status != 204) res.set_content(reply.body, reply.content_type);
}

std::optional<std::string> optional_param(const httplib::Request& req, const char* name) {
  if (!req.has_param(name)) return std::nullopt;
  return req.get_param_value(name);
}

bool flag_param(const httplib::Request& req, const char* name) {
  const auto v = optional_param(req, name);
  return v && (*v == "1" || *v == "true");
}

}  // namespace

void ProxyService::install_routes() {
  auto& s = *server_;
  s.Get("/healthz", [](const httplib::Request&, httplib::Response& res) {
    res.set_content("ok", "text/plain");
  });
  s.Get("/fetch", [this](const httplib::Request& req, httplib::Response& res) {
    FetchRequest r;
    r.user_id = req.get_param_value("user");
    r.url = req.get_param_value("url");
    r.template_id = optional_param(req, "template");
    r.width = optional_param(req, "width");
    r.debug = flag_param(req, "debug");
    send(res, handle_fetch(r));
  });
  s.Get("/shot", [this](const httplib::Request& req, httplib::Response& res) {
    send(res, handle_shot(req.get_param_value("session"), req.get_param_value("i"), flag_param(req, "debug")));
  });
  s.Post("/event", [this](const httplib::Request& req, httplib::Response& res) {
    send(res, handle_event(req.body));
  });
  s.Get("/profile", [this](const httplib::Request& req, httplib::Response& res) {
    send(res, handle_profile(req.get_param_value("user")));
  });
  s.Post("/profile", [this](const httplib::Request& req, httplib::Response& res) {
    send(res, handle_seed_profile(req.get_param_value("user"), req.body));
  });
  if (config_.app_dir) {
    if (!std::filesystem::is_directory(*config_.app_dir) ||
        !s.set_mount_point("/app", config_.app_dir->string())) {
      throw StartupError("client directory " + config_.app_dir->string() + " does not exist");
    }
  }
}

int ProxyService::bind() {
  if (server_) throw StartupError("service is already bound");
  const auto [host, port] = split_listen_address(config_.listen_address);
  server_ = std::make_unique<httplib::Server>();
  // The library default adds SO_REUSEPORT, which would let a second instance
  // share the port instead of failing.
  server_->set_socket_options([](socket_t sock) {
    int yes = 1;
    setsockopt(sock, SOL_SOCKET, SO_REUSEADDR, reinterpret_cast<const void*>(&yes), sizeof yes);
  });
  install_routes();
  bool ok;
  if (port == 0) {
    port_ = server_->bind_to_any_port(host);
    ok = port_ > 0;
  } else {
    ok = server_->bind_to_port(host, port);
    port_ = port;
  }
  if (!ok) {
    const std::string reason = errno ? std::strerror(errno) : "bind failed";
    server_.reset();
    port_ = 0;
    throw StartupError("cannot listen on " + config_.listen_address + ": " + reason);
  }
  return port_;
}

void ProxyService::reaper_loop() {
  const auto interval = std::clamp<std::chrono::milliseconds>(config_.session_ttl / 4, std::chrono::milliseconds(50),
                                                              std::chrono::milliseconds(60'000));
  std::unique_lock lock(reaper_mutex_);
  while (!stopping_) {
    reaper_cv_.wait_for(lock, interval, [this] { return stopping_.load(); });
    if (stopping_) break;
    lock.unlock();
    reap_expired();
    lock.lock();
  }
}

void ProxyService::run() {
  if (!server_) throw StartupError("bind() must be called before run()");
  stopping_ = false;
  reaper_ = std::thread([this] { reaper_loop(); });
  server_->listen_after_bind();
  {
    std::lock_guard guard(reaper_mutex_);
    stopping_ = true;
  }
  reaper_cv_.notify_all();
  reaper_.join();
}

void ProxyService::stop() {
  {
    std::lock_guard guard(reaper_mutex_);
    stopping_ = true;
  }
  reaper_cv_.notify_all();
  if (server_) server_->stop();
}

void run_service(const ServiceConfig& config) {
  sigset_t signals;
  sigemptyset(&signals);
  sigaddset(&signals, SIGINT);
  sigaddset(&signals, SIGTERM);
  sigaddset(&signals, SIGUSR1);
  sigset_t previous;
  pthread_sigmask(SIG_BLOCK, &signals, &previous);

  ProxyService service(config);
  service.bind();
  std::cerr << "morpes: listening on " << config.listen_address << " (port " << service.port() << ")\n";

  std::atomic<bool> signalled{false};
  std::thread waiter([&] {
    int sig = 0;
    sigwait(&signals, &sig);
    if (sig != SIGUSR1) {
      signalled = true;
      std::cerr << "morpes: shutting down\n";
      service.stop();
    }
  });
  service.run();
  if (!signalled) pthread_kill(waiter.native_handle(), SIGUSR1);
  waiter.join();
  service.flush_profiles();
  pthread_sigmask(SIG_SETMASK, &previous, nullptr);
}

}  // namespace morpes
