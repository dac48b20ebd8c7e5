#include <gtest/gtest.h>

#include "morpes/composer.hpp"
#include "morpes/errors.hpp"
#include "morpes/html.hpp"

using namespace morpes;

namespace {

PageScores scores_of(std::vector<double> totals) {
  PageScores p{"http://x.test/", {}};
  for (std::size_t i = 0; i < totals.size(); ++i) {
    SegmentScore s;
    s.segment_id = "s-" + std::to_string(i);
    s.total = totals[i];
    p.scores.push_back(s);
  }
  return p;
}

SegmentSet set_of(std::size_t n) {
  SegmentSet set{"http://x.test/", {}};
  for (std::size_t i = 0; i < n; ++i) {
    Segment s;
    s.id = "s-" + std::to_string(i);
    s.order_index = i;
    s.html_fragment = "<p>segment " + std::to_string(i) + "</p>";
    s.text = "segment " + std::to_string(i);
    set.segments.push_back(s);
  }
  return set;
}

std::vector<std::string> ids(const RankedSegments& r) {
  std::vector<std::string> out;
  for (const auto& e : r.entries) out.push_back(e.segment_id);
  return out;
}

std::string href(std::string_view session, std::size_t i) { return html::escape_attribute(shot_href(session, i)); }

std::size_t count(const std::string& hay, const std::string& needle) {
  std::size_t n = 0;
  for (auto pos = hay.find(needle); pos != std::string::npos; pos = hay.find(needle, pos + 1)) ++n;
  return n;
}

}  // namespace

TEST(SortSegments, DescendingWithStableTies) {
  const auto r = sort_segments(scores_of({0.2, 0.9, 0.2, 0.5, 0.9}));
  EXPECT_EQ(ids(r), (std::vector<std::string>{"s-1", "s-4", "s-3", "s-0", "s-2"}));
  EXPECT_EQ(r.entries[0].order_index, 1u);
  EXPECT_DOUBLE_EQ(r.entries[2].total_score, 0.5);
  EXPECT_TRUE(sort_segments(scores_of({})).entries.empty());
}

TEST(Templates, DefaultsAndValidation) {
  const auto t = default_templates();
  ASSERT_EQ(t.size(), 3u);
  EXPECT_EQ(t[0].id, "compact");
  EXPECT_EQ(t[0].capacity, 3u);
  EXPECT_EQ(t[1].capacity, 5u);
  EXPECT_EQ(t[2].capacity, 8u);
  EXPECT_EQ(t[2].max_width_px, 768);
  for (const auto& x : t) EXPECT_NO_THROW(x.validate());
  EXPECT_THROW((Template{"x", 0, "compact"}.validate()), ConfigError);
  EXPECT_THROW((Template{"", 3, "compact"}.validate()), ConfigError);
  EXPECT_THROW((Template{"x", 3, "no-such-skin"}.validate()), ConfigError);
  EXPECT_TRUE(has_skin("wide"));
  EXPECT_THROW(skin_stylesheet("nope"), ConfigError);
}

TEST(Templates, JsonDefaults) {
  const auto t = nlohmann::json::parse(R"({"id":"regular","capacity":4,"max_width_px":500})").get<Template>();
  EXPECT_EQ(t.skin, "regular");
  EXPECT_TRUE(t.show_nav);
  EXPECT_EQ(nlohmann::json(t).get<Template>(), t);
}

TEST(SelectTemplate, RequestedThenWidthThenFirst) {
  const auto t = default_templates();
  EXPECT_EQ(select_template(t, "wide").id, "wide");
  EXPECT_EQ(select_template(t, "wide", 200).id, "wide");
  EXPECT_THROW(select_template(t, "huge"), TemplateNotFoundError);
  EXPECT_EQ(select_template(t, std::nullopt, 500).id, "regular");
  EXPECT_EQ(select_template(t, std::nullopt, 480).id, "regular");
  EXPECT_EQ(select_template(t, std::nullopt, 1920).id, "wide");
  EXPECT_EQ(select_template(t, std::nullopt, 100).id, "compact");
  EXPECT_EQ(select_template(t).id, "compact");
}

TEST(ComposeShots, FirstShotAndBuffer) {
  const auto t = default_templates()[0];
  const auto ranking = sort_segments(scores_of({0.1, 0.7, 0.3, 0.9, 0.5, 0.2, 0.6}));
  auto plan = compose_shots(ranking, t, "http://x.test/");
  EXPECT_EQ(plan.page_url, "http://x.test/");
  EXPECT_EQ(plan.template_id, "compact");
  ASSERT_EQ(plan.shots.size(), 1u);
  EXPECT_EQ(plan.shots[0].index, 1u);
  EXPECT_EQ(plan.shots[0].segment_ids, (std::vector<std::string>{"s-3", "s-1", "s-6"}));
  EXPECT_EQ(plan.buffer, (std::vector<std::string>{"s-4", "s-2", "s-5", "s-0"}));
  EXPECT_EQ(plan.total_shots(3), 3u);

  auto [p2, shot2] = next_shot(plan, t);
  EXPECT_EQ(shot2.index, 2u);
  EXPECT_EQ(shot2.segment_ids, (std::vector<std::string>{"s-4", "s-2", "s-5"}));
  auto [p3, shot3] = next_shot(p2, t);
  EXPECT_EQ(shot3.index, 3u);
  EXPECT_EQ(shot3.segment_ids, (std::vector<std::string>{"s-0"}));
  EXPECT_TRUE(p3.buffer.empty());
  EXPECT_EQ(p3.shots.size(), 3u);
  EXPECT_EQ(p3.total_shots(3), 3u);
  EXPECT_THROW(next_shot(p3, t), NoMoreShotsError);
  EXPECT_EQ(p3.shots.size(), 3u);  // unchanged by the failed call
}

TEST(ComposeShots, SmallAndEmptyPages) {
  const auto t = default_templates()[2];
  auto plan = compose_shots(sort_segments(scores_of({0.4, 0.5})), t);
  ASSERT_EQ(plan.shots.size(), 1u);
  EXPECT_EQ(plan.shots[0].segment_ids.size(), 2u);
  EXPECT_TRUE(plan.buffer.empty());
  EXPECT_THROW(next_shot(plan, t), NoMoreShotsError);

  plan = compose_shots(sort_segments(scores_of({})), t);
  EXPECT_TRUE(plan.shots.empty());
  EXPECT_EQ(plan.total_shots(8), 0u);
}

TEST(RenderShot, DocumentAndNavigation) {
  const auto set = set_of(7);
  const auto t = default_templates()[0];
  auto plan = compose_shots(sort_segments(scores_of({7, 6, 5, 4, 3, 2, 1})), t, set.page_url);
  NavContext nav{set.page_url, 1, 3, "abc"};
  const auto first = render_shot(plan.shots[0], set, t, nav);
  EXPECT_EQ(first.rfind("<!DOCTYPE html>", 0), 0u);
  EXPECT_NE(first.find("name=\"viewport\""), std::string::npos);
  EXPECT_NE(first.find("skin-compact"), std::string::npos);
  EXPECT_EQ(count(first, "class=\"morpes-segment\""), 3u);
  EXPECT_NE(first.find("data-segment-id=\"s-0\""), std::string::npos);
  EXPECT_NE(first.find("segment 2"), std::string::npos);
  EXPECT_EQ(first.find("segment 3"), std::string::npos);
  EXPECT_NE(first.find(href("abc", 2)), std::string::npos);
  EXPECT_EQ(first.find(href("abc", 0)), std::string::npos);
  EXPECT_EQ(first.find("morpes-scores"), std::string::npos);

  auto [p2, s2] = next_shot(plan, t);
  auto [p3, s3] = next_shot(p2, t);
  nav.shot_index = 3;
  const auto last = render_shot(s3, set, t, nav);
  EXPECT_EQ(count(last, "class=\"morpes-segment\""), 1u);
  EXPECT_NE(last.find(href("abc", 2)), std::string::npos);
  EXPECT_EQ(last.find(href("abc", 4)), std::string::npos);

  Template bare = t;
  bare.show_nav = false;
  nav.shot_index = 1;
  EXPECT_EQ(render_shot(plan.shots[0], set, bare, nav).find(href("abc", 2)), std::string::npos);
}

TEST(RenderShot, HrefEscapesSession) { EXPECT_EQ(shot_href("a b&c", 2), "/shot?session=a%20b%26c&i=2"); }

TEST(RenderShot, UnknownSegmentFails) {
  const auto set = set_of(2);
  Shot shot{1, {"s-0", "ghost"}};
  EXPECT_THROW(render_shot(shot, set, default_templates()[0], NavContext{}), RenderError);
}

TEST(RenderShot, DebugIslandIsEscaped) {
  auto set = set_of(1);
  auto scores = scores_of({0.5});
  set.segments[0].id = scores.scores[0].segment_id = "s-0</script><b>";
  Shot shot{1, {set.segments[0].id}};
  const auto html = render_shot(shot, set, default_templates()[0], NavContext{}, &scores);
  const auto at = html.find("id=\"morpes-scores\"");
  ASSERT_NE(at, std::string::npos);
  const auto end = html.find("</script>", at);
  ASSERT_NE(end, std::string::npos);
  const auto island = html.substr(at, end - at);
  EXPECT_NE(island.find("\"s-0"), std::string::npos);
  EXPECT_EQ(island.find("</"), std::string::npos);
}
