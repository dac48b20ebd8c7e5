#pragma once

#include <atomic>
#include <chrono>
#include <condition_variable>
#include <cstddef>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <thread>
#include <unordered_map>
#include <vector>

#include "json.hpp"
#include "morpes/composer.hpp"
#include "morpes/evaluator.hpp"
#include "morpes/metrics.hpp"
#include "morpes/profile.hpp"
#include "morpes/segmenter.hpp"
#include "morpes/time.hpp"

namespace httplib {
class Server;
}

// HTTP proxy: fetch -> segment -> score -> compose, shot serving, interaction
// events and profile persistence.
namespace morpes {

struct ServiceConfig {
  std::string listen_address = "127.0.0.1:8080";
  std::filesystem::path profile_dir = "profiles";
  std::vector<Template> templates = default_templates();
  SegmentationParams segmentation;
  DimensionWeights dimension_weights;
  UpdateParams update_params;
  std::chrono::milliseconds fetch_timeout{10'000};
  std::chrono::milliseconds session_ttl{30 * 60 * 1000};
  std::size_t cache_capacity = 64;  // 0 disables the segment cache
  // Directory served under /app when set.
  std::optional<std::filesystem::path> app_dir;
  // Key for session tokens; random per process when empty.
  std::string session_secret;

  void validate() const;  // throws ConfigError
};

// Relative paths in the document are resolved against `base_dir`.
ServiceConfig config_from_json(const nlohmann::json& j, const std::filesystem::path& base_dir = {});
// Throws ConfigError when the file is missing or malformed.
ServiceConfig load_config(const std::filesystem::path& path);
nlohmann::json config_to_json(const ServiceConfig& config);

// "host:port"; throws ConfigError.
std::pair<std::string, int> split_listen_address(std::string_view address);

struct Session {
  std::string session_id;
  std::string user_id;
  std::string page_url;
  ShotPlan shot_plan;
  std::string template_id;
  Timestamp created_at{};
  Timestamp last_active{};
};

using PageFetcher = std::function<RawPage(std::string_view url, std::chrono::milliseconds timeout)>;

// Transport-independent response.
struct Reply {
  int status = 200;
  std::string content_type = "text/html; charset=utf-8";
  std::string body;
  std::map<std::string, std::string> headers;
};

struct FetchRequest {
  std::string user_id;
  std::string url;
  std::optional<std::string> template_id;
  std::optional<std::string> width;
  bool debug = false;
};

class ProxyService {
 public:
  explicit ProxyService(ServiceConfig config, Clock clock = now_utc, PageFetcher fetcher = fetch_page);
  ~ProxyService();

  ProxyService(const ProxyService&) = delete;
  ProxyService& operator=(const ProxyService&) = delete;

  Reply handle_fetch(const FetchRequest& request);
  Reply handle_shot(std::string_view session_id, std::string_view index, bool debug = false);
  Reply handle_event(std::string_view body);
  Reply handle_profile(std::string_view user_id);
  // Body: {"terms": [...]}; replaces the user's profile with a seeded one.
  Reply handle_seed_profile(std::string_view user_id, std::string_view body);

  // Drops sessions idle for longer than the configured TTL.
  std::size_t reap_expired();
  // Persists every profile changed since its last successful write.
  void flush_profiles();

  std::optional<Session> session(std::string_view session_id) const;
  std::size_t session_count() const;
  std::size_t cache_size() const;
  // One record per successful fetch, labelled by user id.
  std::vector<SessionRecord> visit_records() const;

  // Binds the listener; throws StartupError. Returns the bound port.
  int bind();
  // Serves until stop(); starts the session reaper. bind() must come first.
  void run();
  void stop();
  int port() const noexcept { return port_; }

  const ServiceConfig& config() const noexcept { return config_; }

 private:
  struct SessionEntry;
  struct UserState;
  class SegmentCache;

  std::shared_ptr<SessionEntry> find_session(std::string_view session_id) const;
  std::shared_ptr<UserState> user_state(const std::string& user_id);
  Profile profile_snapshot(const std::string& user_id);
  std::string session_token(const FetchRequest& request, const RawPage& page, Timestamp now,
                            const Profile& profile, const Template& tmpl) const;
  Reply render(const SessionEntry& entry, std::size_t shot_index, bool debug) const;
  void install_routes();
  void reaper_loop();

  ServiceConfig config_;
  Clock clock_;
  PageFetcher fetcher_;
  ProfileStore store_;
  std::string secret_;

  mutable std::mutex sessions_mutex_;
  std::unordered_map<std::string, std::shared_ptr<SessionEntry>> sessions_;

  std::mutex users_mutex_;
  std::unordered_map<std::string, std::shared_ptr<UserState>> users_;

  std::unique_ptr<SegmentCache> cache_;

  mutable std::mutex visits_mutex_;
  std::vector<SessionRecord> visits_;

  std::unique_ptr<httplib::Server> server_;
  int port_ = 0;
  std::atomic<bool> stopping_{false};
  std::mutex reaper_mutex_;
  std::condition_variable reaper_cv_;
  std::thread reaper_;
};

// Runs the service until SIGINT or SIGTERM, then flushes profiles.
// Throws StartupError when the listener cannot be bound.
void run_service(const ServiceConfig& config);

}  // namespace morpes
