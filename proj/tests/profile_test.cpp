#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <random>
#include <unistd.h>

#include "morpes/errors.hpp"
#include "morpes/profile.hpp"

using namespace morpes;
namespace fs = std::filesystem;

namespace {

const Timestamp kT0 = from_unix(1'790'000'000);
const Timestamp kT1 = from_unix(1'790'000'600);

Segment segment_with(const std::string& id, const std::string& text) {
  Segment s;
  s.id = id;
  s.text = text;
  return s;
}

InteractionEvent click(const std::string& user, const std::string& seg, Timestamp at = kT1) {
  InteractionEvent e;
  e.user_id = user;
  e.session_id = "sess";
  e.page_url = "http://x.test/";
  e.segment_id = seg;
  e.kind = EventKind::Click;
  e.at = at;
  return e;
}

fs::path temp_dir(const std::string& name) {
  auto dir = fs::temp_directory_path() / ("morpes-profile-test-" + std::to_string(::getpid()) + "-" + name);
  fs::remove_all(dir);
  return dir;
}

}  // namespace

TEST(BuildProfile, SeedsContentWordsAtFullWeight) {
  const std::vector<std::string> seeds{"Cricket", "the Astronomy club", "cricket"};
  const auto p = build_profile("alice", seeds, kT0);
  EXPECT_EQ(p.user_id, "alice");
  ASSERT_EQ(p.terms.size(), 3u);
  EXPECT_DOUBLE_EQ(p.weight_of("cricket"), 1.0);
  EXPECT_DOUBLE_EQ(p.weight_of("astronomy"), 1.0);
  EXPECT_DOUBLE_EQ(p.weight_of("club"), 1.0);
  EXPECT_DOUBLE_EQ(p.weight_of("the"), 0.0);
  EXPECT_DOUBLE_EQ(p.l1_norm(), 3.0);
  EXPECT_EQ(p.terms.at("club").updated_at, kT0);
}

TEST(BuildProfile, RejectsBadUserIds) {
  EXPECT_THROW(build_profile("", {}, kT0), InvalidUserError);
  EXPECT_THROW(build_profile("../etc", {}, kT0), InvalidUserError);
  EXPECT_THROW(build_profile(".hidden", {}, kT0), InvalidUserError);
  EXPECT_THROW(build_profile("a b", {}, kT0), InvalidUserError);
  EXPECT_THROW(build_profile(std::string(129, 'a'), {}, kT0), InvalidUserError);
  EXPECT_NO_THROW(build_profile("first.last_1-x@example.org", {}, kT0));
}

TEST(UpdateProfile, ClickBoostsThenDecays) {
  const std::vector<std::string> seeds{"cricket", "jazz"};
  const auto p = build_profile("alice", seeds, kT0);
  const auto seg = segment_with("s-1", "Cricket scores and cricket news");
  const UpdateParams params;  // boost 0.2, decay 0.98
  const auto next = update_profile(p, click("alice", "s-1"), seg, params);
  // cricket: min((1 + 0.2) * 0.98, 1) = 1; jazz: 0.98; new words: 0.2 * 0.98
  EXPECT_DOUBLE_EQ(next.weight_of("cricket"), 1.0);
  EXPECT_DOUBLE_EQ(next.weight_of("jazz"), 0.98);
  EXPECT_DOUBLE_EQ(next.weight_of("scores"), 0.2 * 0.98);
  EXPECT_DOUBLE_EQ(next.weight_of("news"), 0.2 * 0.98);
  EXPECT_EQ(next.weight_of("and"), 0.0);
  EXPECT_EQ(next.terms.at("scores").updated_at, kT1);
  EXPECT_EQ(next.terms.at("jazz").updated_at, kT0);
}

TEST(UpdateProfile, DwellScalesWithDuration) {
  const auto p = build_profile("bob", {}, kT0);
  const auto seg = segment_with("s", "telescope");
  auto e = click("bob", "s");
  e.kind = EventKind::Dwell;
  e.dwell_ms = 5000;
  EXPECT_DOUBLE_EQ(update_profile(p, e, seg, {}).weight_of("telescope"), 0.2 * 0.5 * 0.98);
  e.dwell_ms = 60000;
  EXPECT_DOUBLE_EQ(update_profile(p, e, seg, {}).weight_of("telescope"), 0.2 * 0.98);
}

TEST(UpdateProfile, EvictsBelowFloor) {
  Profile p{"carol", {}};
  p.terms["fading"] = {"fading", 0.0101, kT0};
  p.terms["strong"] = {"strong", 0.5, kT0};
  const auto next = update_profile(p, click("carol", "s"), segment_with("s", "unrelated"), {});
  EXPECT_EQ(next.terms.count("fading"), 0u);
  EXPECT_EQ(next.terms.count("strong"), 1u);
}

TEST(UpdateProfile, CapsTermCountDroppingWeakestOldestFirst) {
  Profile p{"dave", {}};
  p.terms["aa"] = {"aa", 0.5, kT0};
  p.terms["bb"] = {"bb", 0.5, kT1};
  p.terms["cc"] = {"cc", 0.9, kT0};
  UpdateParams params;
  params.boost = 0.0;
  params.decay = 1.0;
  params.max_profile_terms = 2;
  const auto next = update_profile(p, click("dave", "s"), segment_with("s", ""), params);
  ASSERT_EQ(next.terms.size(), 2u);
  EXPECT_EQ(next.terms.count("aa"), 0u);  // same weight as bb but older
}

TEST(UpdateProfile, WeightsStayInUnitInterval) {
  std::mt19937_64 rng(8);
  auto p = build_profile("eve", std::vector<std::string>{"alpha", "beta"}, kT0);
  const std::vector<std::string> texts{"alpha beta gamma", "gamma delta", "alpha alpha alpha", "epsilon"};
  for (int i = 0; i < 500; ++i) {
    auto e = click("eve", "s", from_unix(1'790'000'000 + i));
    if (rng() % 2) {
      e.kind = EventKind::Dwell;
      e.dwell_ms = 1 + rng() % 20000;
    }
    p = update_profile(p, e, segment_with("s", texts[rng() % texts.size()]), {});
    for (const auto& [_, t] : p.terms) {
      ASSERT_GT(t.weight, 0.0);
      ASSERT_LE(t.weight, 1.0);
      ASSERT_GE(t.weight, 0.01);
    }
  }
}

TEST(UpdateProfile, RejectsMismatchesAndInvalidEvents) {
  const auto p = build_profile("alice", {}, kT0);
  const auto seg = segment_with("s-1", "x");
  EXPECT_THROW(update_profile(p, click("alice", "s-2"), seg, {}), EventMismatchError);
  EXPECT_THROW(update_profile(p, click("mallory", "s-1"), seg, {}), EventMismatchError);
  auto dwell = click("alice", "s-1");
  dwell.kind = EventKind::Dwell;
  dwell.dwell_ms = 0;
  EXPECT_THROW(update_profile(p, dwell, seg, {}), InvalidEventError);
  UpdateParams bad;
  bad.decay = 1.5;
  EXPECT_THROW(update_profile(p, click("alice", "s-1"), seg, bad), ConfigError);
}

TEST(EventJson, ParsesUnixAndIsoTimes) {
  auto e = nlohmann::json::parse(R"({"user_id":"a","session_id":"s","page_url":"http://x/","segment_id":"g",
                                     "kind":"dwell","dwell_ms":1500,"at":"2026-10-01T12:00:00Z"})")
               .get<InteractionEvent>();
  EXPECT_EQ(e.kind, EventKind::Dwell);
  EXPECT_EQ(e.dwell_ms, 1500u);
  EXPECT_EQ(e.at, *parse_iso8601("2026-10-01T12:00:00Z"));
  e = nlohmann::json::parse(R"({"user_id":"a","session_id":"s","segment_id":"g","kind":"click","at":5})")
          .get<InteractionEvent>();
  EXPECT_EQ(e.at, from_unix(5));
}

TEST(EventJson, RejectsMalformed) {
  using J = nlohmann::json;
  EXPECT_THROW(J::parse(R"({"user_id":"a","session_id":"s","segment_id":"g","kind":"tap","at":1})").get<InteractionEvent>(),
               InvalidEventError);
  EXPECT_THROW(J::parse(R"({"user_id":"a","session_id":"s","segment_id":"g","kind":"dwell","dwell_ms":0,"at":1})")
                   .get<InteractionEvent>(),
               InvalidEventError);
  EXPECT_THROW(J::parse(R"({"user_id":"a","session_id":"s","segment_id":"g","kind":"dwell","dwell_ms":-4,"at":1})")
                   .get<InteractionEvent>(),
               InvalidEventError);
  EXPECT_THROW(J::parse(R"({"session_id":"s","segment_id":"g","kind":"click","at":1})").get<InteractionEvent>(),
               InvalidEventError);
  EXPECT_THROW(J::parse(R"({"user_id":"a","session_id":"s","segment_id":"g","kind":"click","at":"yesterday"})")
                   .get<InteractionEvent>(),
               InvalidEventError);
}

TEST(ProfileStore, PersistAndLoad) {
  const auto dir = temp_dir("basic");
  ProfileStore store(dir);
  EXPECT_TRUE(fs::is_directory(dir));
  const std::vector<std::string> seeds{"cricket", "jazz"};
  const auto p = build_profile("alice", seeds, kT0);
  EXPECT_FALSE(store.contains("alice"));
  store.persist(p);
  EXPECT_TRUE(store.contains("alice"));
  EXPECT_EQ(store.load("alice"), p);
  EXPECT_FALSE(fs::exists(dir / "alice.json.tmp"));
  fs::remove_all(dir);
}

TEST(ProfileStore, MissingAndCorrupt) {
  const auto dir = temp_dir("errors");
  ProfileStore store(dir);
  EXPECT_THROW(store.load("nobody"), NotFoundError);
  std::ofstream(dir / "broken.json") << "{not json";
  EXPECT_THROW(store.load("broken"), StoreError);
  std::ofstream(dir / "weights.json") << R"({"user_id":"weights","terms":[{"term":"x","weight":7,"updated_at":0}]})";
  EXPECT_THROW(store.load("weights"), StoreError);
  EXPECT_THROW(store.load("../escape"), InvalidUserError);
  fs::remove_all(dir);
}

TEST(ProfileStore, UncreatableDirectory) {
  const auto file = temp_dir("file");
  std::ofstream(file) << "x";
  EXPECT_THROW(ProfileStore(file / "sub"), StoreError);
  fs::remove_all(file);
}

TEST(ProfileStore, RandomRoundTrips) {
  const auto dir = temp_dir("random");
  ProfileStore store(dir);
  std::mt19937_64 rng(123);
  for (int i = 0; i < 200; ++i) {
    Profile p{"u" + std::to_string(rng() % 5), {}};
    const auto n = rng() % 25;
    for (std::size_t k = 0; k < n; ++k) {
      std::string term = "t" + std::to_string(rng() % 1000);
      const double w = std::uniform_real_distribution<double>(1e-9, 1.0)(rng);
      p.terms[term] = {term, w, from_unix(static_cast<long long>(rng() % 4'000'000'000ULL))};
    }
    store.persist(p);
    ASSERT_EQ(store.load(p.user_id), p);
  }
  fs::remove_all(dir);
}
