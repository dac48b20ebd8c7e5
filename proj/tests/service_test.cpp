#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <regex>
#include <set>
#include <sstream>
#include <thread>
#include <unistd.h>

#include "httplib.h"
#include "morpes/composer.hpp"
#include "morpes/errors.hpp"
#include "morpes/service.hpp"

using namespace morpes;
namespace fs = std::filesystem;

namespace {

const std::string kPageUrl = "http://news.test/today";

std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream s;
  s << in.rdbuf();
  return s.str();
}

std::string fixture() { return read_file(fs::path(MORPES_DATA_DIR) / "fixtures" / "two_topic.html"); }

std::vector<std::string> shot_ids(const std::string& body) {
  static const std::regex re("data-segment-id=\"([^\"]+)\"");
  std::vector<std::string> out;
  for (auto it = std::sregex_iterator(body.begin(), body.end(), re); it != std::sregex_iterator(); ++it) {
    out.push_back((*it)[1]);
  }
  return out;
}

class ServiceTest : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() /
           ("morpes-service-test-" + std::to_string(::getpid()) + "-" +
            ::testing::UnitTest::GetInstance()->current_test_info()->name());
    fs::remove_all(dir_);
    config_.profile_dir = dir_ / "profiles";
    config_.session_secret = "test-secret";
    config_.listen_address = "127.0.0.1:0";
    config_.session_ttl = std::chrono::minutes(30);
    html_ = fixture();
  }
  void TearDown() override {
    service_.reset();
    fs::remove_all(dir_);
  }

  ProxyService& service() {
    if (!service_) {
      service_ = std::make_unique<ProxyService>(
          config_, [this] { return now_; },
          [this](std::string_view url, std::chrono::milliseconds) {
            ++fetches_;
            if (fail_) fail_();
            return RawPage{url == "http://short.test/" ? kPageUrl : std::string(url), html_, {}};
          });
    }
    return *service_;
  }

  Reply fetch(const std::string& user, const std::string& url = kPageUrl,
              std::optional<std::string> tmpl = std::string("compact")) {
    FetchRequest r;
    r.user_id = user;
    r.url = url;
    r.template_id = std::move(tmpl);
    return service().handle_fetch(r);
  }

  std::string event_json(const std::string& user, const std::string& session, const std::string& segment,
                         const std::string& kind = "click", int dwell = 0) {
    nlohmann::json j = {{"user_id", user}, {"session_id", session}, {"page_url", kPageUrl},
                        {"segment_id", segment}, {"kind", kind}, {"at", to_unix(now_)}};
    if (dwell) j["dwell_ms"] = dwell;
    return j.dump();
  }

  SegmentSet offline_segments() const { return segment_page(RawPage{kPageUrl, html_, now_}, config_.segmentation); }

  fs::path dir_;
  ServiceConfig config_;
  Timestamp now_ = *parse_iso8601("2026-10-01T12:00:00Z");
  std::string html_;
  int fetches_ = 0;
  std::function<void()> fail_;
  std::unique_ptr<ProxyService> service_;
};

}  // namespace

TEST_F(ServiceTest, FirstShotMatchesOfflinePipeline) {
  const std::vector<std::string> seeds{"cricket"};
  ProfileStore(config_.profile_dir).persist(build_profile("alice", seeds, now_));
  const auto reply = fetch("alice");
  ASSERT_EQ(reply.status, 200);
  EXPECT_EQ(reply.content_type, "text/html; charset=utf-8");
  ASSERT_EQ(reply.headers.count("X-Morpes-Session"), 1u);

  const auto set = offline_segments();
  const auto profile = ProfileStore(config_.profile_dir).load("alice");
  const auto tmpl = default_templates()[0];
  const auto plan = compose_shots(sort_segments(score_page(set, profile, {}, now_)), tmpl, kPageUrl);
  EXPECT_EQ(shot_ids(reply.body), plan.shots[0].segment_ids);

  const auto session = service().session(reply.headers.at("X-Morpes-Session"));
  ASSERT_TRUE(session);
  EXPECT_EQ(session->user_id, "alice");
  EXPECT_EQ(session->page_url, kPageUrl);
  EXPECT_EQ(session->template_id, "compact");
  EXPECT_EQ(session->shot_plan, plan);
}

TEST_F(ServiceTest, FetchErrorsMapToStatuses) {
  EXPECT_EQ(fetch("alice", kPageUrl, std::string("giant")).status, 400);
  EXPECT_EQ(fetch("../alice").status, 400);
  EXPECT_EQ(fetch("alice", "ftp://x.test/").status, 400);
  EXPECT_EQ(fetch("alice", "not a url").status, 400);
  FetchRequest bad_width{"alice", kPageUrl, std::nullopt, std::string("wide"), false};
  EXPECT_EQ(service().handle_fetch(bad_width).status, 400);

  fail_ = [] { throw FetchError(0, "connection refused"); };
  auto r = fetch("alice");
  EXPECT_EQ(r.status, 502);
  EXPECT_EQ(nlohmann::json::parse(r.body).at("error"), "FetchError");
  fail_ = [] { throw TimeoutError("slow"); };
  EXPECT_EQ(fetch("alice").status, 504);
  fail_ = [] { throw ContentTypeError("image/png"); };
  EXPECT_EQ(fetch("alice").status, 502);
  fail_ = nullptr;
  html_ = "<html><body><script>only()</script></body></html>";
  r = fetch("alice");
  EXPECT_EQ(r.status, 204);
  EXPECT_TRUE(r.body.empty());
  EXPECT_EQ(service().session_count(), 0u);
}

TEST_F(ServiceTest, WidthSelectsTemplate) {
  FetchRequest r{"alice", kPageUrl, std::nullopt, std::string("500"), false};
  const auto reply = service().handle_fetch(r);
  ASSERT_EQ(reply.status, 200);
  EXPECT_EQ(service().session(reply.headers.at("X-Morpes-Session"))->template_id, "regular");
  EXPECT_EQ(shot_ids(reply.body).size(), 5u);
}

TEST_F(ServiceTest, ShotFlow) {
  const auto first = fetch("alice");
  const auto sid = first.headers.at("X-Morpes-Session");
  const auto set = offline_segments();
  const std::size_t n = set.segments.size();
  ASSERT_GT(n, 3u);
  const std::size_t total = (n + 2) / 3;

  EXPECT_EQ(service().handle_shot(sid, "3").status, 400);  // skips shot 2
  EXPECT_EQ(service().handle_shot(sid, "0").status, 400);
  EXPECT_EQ(service().handle_shot(sid, "x").status, 400);
  EXPECT_EQ(service().handle_shot("nope", "1").status, 404);

  std::vector<std::string> seen = shot_ids(first.body);
  for (std::size_t i = 2; i <= total; ++i) {
    const auto r = service().handle_shot(sid, std::to_string(i));
    ASSERT_EQ(r.status, 200) << r.body;
    const auto ids = shot_ids(r.body);
    EXPECT_EQ(ids.size(), std::min<std::size_t>(3, n - 3 * (i - 1)));
    seen.insert(seen.end(), ids.begin(), ids.end());
  }
  EXPECT_EQ(service().handle_shot(sid, std::to_string(total + 1)).status, 410);
  EXPECT_EQ(service().handle_shot(sid, "1").body, first.body);

  // Every segment served exactly once.
  std::set<std::string> unique(seen.begin(), seen.end());
  EXPECT_EQ(seen.size(), n);
  EXPECT_EQ(unique.size(), n);
  for (const auto& s : set.segments) EXPECT_TRUE(unique.contains(s.id));

  const auto debug = service().handle_shot(sid, "2", true);
  EXPECT_NE(debug.body.find("morpes-scores"), std::string::npos);
}

TEST_F(ServiceTest, SessionsExpire) {
  const auto sid = fetch("alice").headers.at("X-Morpes-Session");
  now_ += std::chrono::minutes(20);
  EXPECT_EQ(service().handle_shot(sid, "1").status, 200);
  now_ += std::chrono::minutes(31);
  EXPECT_EQ(service().handle_shot(sid, "1").status, 404);
  EXPECT_EQ(service().session_count(), 1u);
  EXPECT_EQ(service().reap_expired(), 1u);
  EXPECT_EQ(service().session_count(), 0u);
  EXPECT_FALSE(service().session(sid));
}

TEST_F(ServiceTest, EventsUpdateAndPersistProfile) {
  const auto first = fetch("alice");
  const auto sid = first.headers.at("X-Morpes-Session");
  const auto target = shot_ids(first.body).at(0);
  EXPECT_EQ(service().handle_profile("alice").status, 404);

  const auto r = service().handle_event(event_json("alice", sid, target, "dwell", 4000));
  ASSERT_EQ(r.status, 204) << r.body;

  const auto set = offline_segments();
  InteractionEvent ev;
  ev.user_id = "alice";
  ev.session_id = sid;
  ev.page_url = kPageUrl;
  ev.segment_id = target;
  ev.kind = EventKind::Dwell;
  ev.dwell_ms = 4000;
  ev.at = now_;
  const auto expected = update_profile(Profile{"alice", {}}, ev, *set.find(target), {});
  EXPECT_FALSE(expected.terms.empty());
  EXPECT_EQ(ProfileStore(config_.profile_dir).load("alice"), expected);
  const auto p = service().handle_profile("alice");
  ASSERT_EQ(p.status, 200);
  EXPECT_EQ(p.content_type, "application/json");
  EXPECT_EQ(nlohmann::json::parse(p.body).get<Profile>(), expected);
}

TEST_F(ServiceTest, EventRejections) {
  const auto first = fetch("alice");
  const auto sid = first.headers.at("X-Morpes-Session");
  const auto target = shot_ids(first.body).at(0);
  EXPECT_EQ(service().handle_event(event_json("alice", sid, target, "dwell", 0)).status, 400);
  EXPECT_EQ(service().handle_event(event_json("alice", sid, "ffffffff-99")).status, 404);
  EXPECT_EQ(service().handle_event(event_json("bob", sid, target)).status, 400);
  EXPECT_EQ(service().handle_event(event_json("alice", "no-such-session", target)).status, 404);
  EXPECT_EQ(service().handle_event("{").status, 400);
  EXPECT_EQ(service().handle_event(R"({"user_id":"alice"})").status, 400);
  auto wrong_page = nlohmann::json::parse(event_json("alice", sid, target));
  wrong_page["page_url"] = "http://elsewhere.test/";
  EXPECT_EQ(service().handle_event(wrong_page.dump()).status, 400);
  EXPECT_FALSE(ProfileStore(config_.profile_dir).contains("alice"));
}

TEST_F(ServiceTest, EventAcceptsRequestedUrlAfterRedirect) {
  const auto first = fetch("alice", "http://short.test/");
  const auto sid = first.headers.at("X-Morpes-Session");
  EXPECT_EQ(service().session(sid)->page_url, kPageUrl);
  auto ev = nlohmann::json::parse(event_json("alice", sid, shot_ids(first.body).at(0)));
  ev["page_url"] = "http://short.test/";
  EXPECT_EQ(service().handle_event(ev.dump()).status, 204);
}

TEST_F(ServiceTest, SessionsAreIsolated) {
  const auto a = fetch("alice").headers.at("X-Morpes-Session");
  const auto b = fetch("bob").headers.at("X-Morpes-Session");
  EXPECT_NE(a, b);
  ASSERT_EQ(service().handle_shot(a, "2").status, 200);
  EXPECT_EQ(service().session(a)->shot_plan.shots.size(), 2u);
  EXPECT_EQ(service().session(b)->shot_plan.shots.size(), 1u);
  EXPECT_EQ(service().handle_shot(b, "3").status, 400);
}

TEST_F(ServiceTest, PersonalizationChangesRanking) {
  const std::vector<std::string> cricket{"cricket", "bowler", "wicket"};
  const std::vector<std::string> stars{"astronomy", "telescope", "comet"};
  ASSERT_EQ(service().handle_seed_profile("c", nlohmann::json{{"terms", cricket}}.dump()).status, 200);
  ASSERT_EQ(service().handle_seed_profile("s", nlohmann::json{{"terms", stars}}.dump()).status, 200);
  EXPECT_EQ(service().handle_seed_profile("s", "{\"terms\": 4}").status, 400);
  const auto c = shot_ids(fetch("c").body);
  const auto s = shot_ids(fetch("s").body);
  EXPECT_NE(c, s);
  const auto set = offline_segments();
  for (const auto& id : c) EXPECT_NE(set.find(id)->text.find("ricket"), std::string::npos) << id;
}

TEST_F(ServiceTest, VisitRecordsMatchPlans) {
  fetch("alice");
  fetch("bob", kPageUrl, std::string("wide"));
  const auto records = service().visit_records();
  ASSERT_EQ(records.size(), 2u);
  const std::size_t n = offline_segments().segments.size();
  EXPECT_EQ(records[0].session_id, "alice");
  EXPECT_EQ(records[0].segment_count, n);
  EXPECT_EQ(records[0].first_shot_count, std::min<std::size_t>(3, n));
  EXPECT_EQ(records[0].shot_count, (n + 2) / 3);
  EXPECT_EQ(records[1].first_shot_count, std::min<std::size_t>(8, n));
}

TEST_F(ServiceTest, DeterministicWithoutCache) {
  config_.cache_capacity = 0;
  const auto a = fetch("alice");
  const auto b = fetch("alice");
  EXPECT_EQ(a.body, b.body);
  EXPECT_EQ(a.headers, b.headers);
  EXPECT_EQ(service().cache_size(), 0u);
  EXPECT_EQ(fetches_, 2);
}

TEST_F(ServiceTest, CacheReusesSegmentation) {
  const auto a = fetch("alice");
  EXPECT_EQ(service().cache_size(), 1u);
  const auto b = fetch("bob");
  EXPECT_EQ(service().cache_size(), 1u);
  html_ += "<p>a brand new paragraph with enough words to stand on its own as a segment</p>";
  fetch("alice");
  EXPECT_EQ(service().cache_size(), 2u);
}

TEST_F(ServiceTest, ProfilesSurviveRestart) {
  const auto first = fetch("alice");
  const auto sid = first.headers.at("X-Morpes-Session");
  ASSERT_EQ(service().handle_event(event_json("alice", sid, shot_ids(first.body).at(1))).status, 204);
  const auto before = service().handle_profile("alice").body;
  service_.reset();
  EXPECT_EQ(service().handle_profile("alice").body, before);
}

TEST_F(ServiceTest, HttpRoutes) {
  auto& svc = service();
  const int port = svc.bind();
  ASSERT_GT(port, 0);
  std::thread t([&] { svc.run(); });
  httplib::Client cli("127.0.0.1", port);
  auto health = cli.Get("/healthz");
  ASSERT_TRUE(health);
  EXPECT_EQ(health->status, 200);
  EXPECT_EQ(health->body, "ok");

  auto page = cli.Get("/fetch?user=alice&url=" + httplib::detail::encode_query_param(kPageUrl) + "&template=compact");
  ASSERT_TRUE(page);
  EXPECT_EQ(page->status, 200);
  const auto sid = page->get_header_value("X-Morpes-Session");
  EXPECT_FALSE(sid.empty());
  auto shot = cli.Get("/shot?session=" + sid + "&i=2");
  ASSERT_TRUE(shot);
  EXPECT_EQ(shot->status, 200);
  auto ev = cli.Post("/event", event_json("alice", sid, shot_ids(page->body).at(0)), "application/json");
  ASSERT_TRUE(ev);
  EXPECT_EQ(ev->status, 204);
  auto prof = cli.Get("/profile?user=alice");
  ASSERT_TRUE(prof);
  EXPECT_EQ(prof->status, 200);
  auto missing = cli.Get("/fetch?user=alice");
  ASSERT_TRUE(missing);
  EXPECT_EQ(missing->status, 400);

  // A second listener on the same port fails to start.
  ServiceConfig clash = config_;
  clash.listen_address = "127.0.0.1:" + std::to_string(port);
  ProxyService other(clash);
  EXPECT_THROW(other.bind(), StartupError);

  svc.stop();
  t.join();
}

TEST_F(ServiceTest, AppMount) {
  const auto app = dir_ / "app";
  fs::create_directories(app);
  std::ofstream(app / "index.html") << "<p>client</p>";
  config_.app_dir = app;
  auto& svc = service();
  const int port = svc.bind();
  std::thread t([&] { svc.run(); });
  httplib::Client cli("127.0.0.1", port);
  auto r = cli.Get("/app/index.html");
  ASSERT_TRUE(r);
  EXPECT_EQ(r->status, 200);
  EXPECT_EQ(r->body, "<p>client</p>");
  svc.stop();
  t.join();

  config_.app_dir = dir_ / "missing";
  service_.reset();
  EXPECT_THROW(service().bind(), StartupError);
}

TEST(ServiceConfigTest, ParsesDocument) {
  const auto c = config_from_json(nlohmann::json::parse(R"({
    "listen_address": "0.0.0.0:9000", "profile_dir": "p", "fetch_timeout": "250ms",
    "session_ttl": 120, "cache_capacity": 0, "app_dir": "client",
    "dimension_weights": {"link": 2, "image": 1, "theme": 1, "visual": 1, "fresh": 0}})"),
                                  "/etc/morpes");
  EXPECT_EQ(c.listen_address, "0.0.0.0:9000");
  EXPECT_EQ(c.profile_dir, fs::path("/etc/morpes/p"));
  EXPECT_EQ(c.fetch_timeout, std::chrono::milliseconds(250));
  EXPECT_EQ(c.session_ttl, std::chrono::seconds(120));
  EXPECT_EQ(c.cache_capacity, 0u);
  EXPECT_EQ(*c.app_dir, fs::path("/etc/morpes/client"));
  EXPECT_DOUBLE_EQ(c.dimension_weights.link, 2);
  EXPECT_EQ(config_from_json(config_to_json(c), "/").profile_dir, c.profile_dir);
}

TEST(ServiceConfigTest, RejectsBadDocuments) {
  using J = nlohmann::json;
  EXPECT_THROW(config_from_json(J::parse(R"({"listen": "x"})")), ConfigError);
  EXPECT_THROW(config_from_json(J::parse(R"({"listen_address": "nohost"})")), ConfigError);
  EXPECT_THROW(config_from_json(J::parse(R"({"listen_address": "h:99999"})")), ConfigError);
  EXPECT_THROW(config_from_json(J::parse(R"({"session_ttl": "soon"})")), ConfigError);
  EXPECT_THROW(config_from_json(J::parse(R"({"cache_capacity": -1})")), ConfigError);
  EXPECT_THROW(config_from_json(J::parse(R"({"templates": []})")), ConfigError);
  EXPECT_THROW(config_from_json(J::parse(R"({"templates": [{"id":"a","capacity":1},{"id":"a","capacity":2}]})")),
               ConfigError);
  EXPECT_THROW(config_from_json(J::parse(R"({"segmentation": {"max_chars": 10, "min_chars": 20}})")), ConfigError);
  EXPECT_THROW(config_from_json(J::parse(R"({"update_params": {"decay": 0}})")), ConfigError);
  EXPECT_THROW(config_from_json(J::parse("[1]")), ConfigError);
  EXPECT_THROW(load_config("/nonexistent/morpes.json"), ConfigError);
}

TEST(ServiceConfigTest, ExampleConfigLoads) {
  const auto path = fs::path(MORPES_DATA_DIR).parent_path() / "config" / "morpes.example.json";
  const auto c = load_config(path);
  EXPECT_EQ(c.templates, default_templates());
  EXPECT_EQ(c.fetch_timeout, std::chrono::seconds(10));
  EXPECT_EQ(c.session_ttl, std::chrono::minutes(30));
  EXPECT_EQ(c.profile_dir.lexically_normal(), (path.parent_path() / "../var/profiles").lexically_normal());
}
