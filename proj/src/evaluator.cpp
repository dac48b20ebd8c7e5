#include "morpes/evaluator.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <optional>
#include <regex>
#include <set>

#include "morpes/errors.hpp"
#include "morpes/text.hpp"

namespace morpes {
namespace {

using namespace std::chrono;

double clamp01(double v) { return std::clamp(v, 0.0, 1.0); }

// Mean over items of match(text)/|profile|_1.
template <typename Items, typename TextOf>
double mean_match(const Items& items, const Profile& profile, TextOf text_of) {
  if (items.empty()) return 0.0;
  const double norm = profile.l1_norm();
  if (!(norm > 0.0)) return 0.0;
  double sum = 0.0;
  for (const auto& item : items) sum += profile_match(text_of(item), profile) / norm;
  return clamp01(sum / static_cast<double>(items.size()));
}

constexpr const char* kMonth =
    "(jan(?:uary)?|feb(?:ruary)?|mar(?:ch)?|apr(?:il)?|may|june?|july?|aug(?:ust)?|"
    "sep(?:t(?:ember)?)?|oct(?:ober)?|nov(?:ember)?|dec(?:ember)?)";

unsigned month_number(std::string name) {
  static const std::map<std::string, unsigned> kMonths = {
      {"jan", 1}, {"feb", 2}, {"mar", 3}, {"apr", 4},  {"may", 5},  {"jun", 6},
      {"jul", 7}, {"aug", 8}, {"sep", 9}, {"oct", 10}, {"nov", 11}, {"dec", 12}};
  name = text::to_lower_ascii(name).substr(0, 3);
  auto it = kMonths.find(name);
  return it == kMonths.end() ? 0 : it->second;
}

void add_if_valid(std::vector<sys_days>& out, int y, unsigned m, unsigned d) {
  const year_month_day ymd{year{y}, month{m}, day{d}};
  if (ymd.ok()) out.push_back(sys_days{ymd});
}

}  // namespace

void DimensionWeights::validate() const {
  for (double w : {link, image, theme, visual, fresh}) {
    if (!(w >= 0.0) || !std::isfinite(w)) throw ConfigError("dimension weights must be finite and >= 0");
  }
  if (!(link + image + theme + visual + fresh > 0.0)) {
    throw ConfigError("dimension weights must not all be zero");
  }
}

DimensionWeights DimensionWeights::scaled(double factor) const noexcept {
  return {link * factor, image * factor, theme * factor, visual * factor, fresh * factor};
}

double profile_match(std::string_view text, const Profile& profile) {
  if (profile.terms.empty()) return 0.0;
  const auto tokens = text::tokenize(text);
  const std::set<std::string> words(tokens.begin(), tokens.end());
  double sum = 0.0;
  for (const auto& word : words) sum += profile.weight_of(word);
  return sum;
}

double link_weight(const Segment& segment, const Profile& profile) {
  return mean_match(segment.links, profile, [](const Link& l) -> const std::string& { return l.anchor_text; });
}

double image_weight(const Segment& segment, const Profile& profile) {
  return mean_match(segment.images, profile, [](const Image& i) -> const std::string& { return i.alt_text; });
}

double theme_weight(const Segment& segment, const Profile& profile) {
  if (profile.terms.empty()) return 0.0;
  std::map<std::string, double> tf;
  for (auto& word : text::content_words(segment.text)) tf[word] += 1.0;
  if (tf.empty()) return 0.0;

  double dot = 0.0;
  double tf_sq = 0.0;
  for (const auto& [word, count] : tf) {
    tf_sq += count * count;
    dot += count * profile.weight_of(word);
  }
  double profile_sq = 0.0;
  for (const auto& [_, t] : profile.terms) profile_sq += t.weight * t.weight;
  if (!(dot > 0.0) || !(profile_sq > 0.0)) return 0.0;
  return clamp01(dot / (std::sqrt(tf_sq) * std::sqrt(profile_sq)));
}

double visual_weight(const Segment& segment, const Profile& /*profile*/, std::size_t segment_count) {
  const double heading =
      segment.heading_level > 0 ? (7.0 - std::min(segment.heading_level, 6)) / 6.0 : 0.0;
  const double emphasis = std::min(static_cast<double>(segment.emphasis_count) / 5.0, 1.0);
  double position = 1.0;
  if (segment_count > 1) {
    position = 1.0 - static_cast<double>(segment.order_index) / static_cast<double>(segment_count - 1);
  }
  return clamp01((heading + emphasis + clamp01(position)) / 3.0);
}

std::vector<sys_days> find_dates(std::string_view input) {
  static const std::regex iso(R"((?:^|[^0-9])(\d{4})-(\d{2})-(\d{2})(?![0-9]))");
  static const std::regex day_month_year(
      std::string(R"((?:^|[^0-9a-z])(\d{1,2})(?:st|nd|rd|th)?\s+)") + kMonth +
          R"(\.?,?\s+(\d{4})(?![0-9]))",
      std::regex::icase);
  static const std::regex month_day_year(
      std::string(R"((?:^|[^a-z]))") + kMonth + R"(\.?\s+(\d{1,2})(?:st|nd|rd|th)?,?\s+(\d{4})(?![0-9]))",
      std::regex::icase);

  const std::string s(input);
  std::vector<sys_days> dates;
  for (std::sregex_iterator it(s.begin(), s.end(), iso), end; it != end; ++it) {
    add_if_valid(dates, std::stoi((*it)[1]), static_cast<unsigned>(std::stoi((*it)[2])),
                 static_cast<unsigned>(std::stoi((*it)[3])));
  }
  for (std::sregex_iterator it(s.begin(), s.end(), day_month_year), end; it != end; ++it) {
    add_if_valid(dates, std::stoi((*it)[3]), month_number((*it)[2]),
                 static_cast<unsigned>(std::stoi((*it)[1])));
  }
  for (std::sregex_iterator it(s.begin(), s.end(), month_day_year), end; it != end; ++it) {
    add_if_valid(dates, std::stoi((*it)[3]), month_number((*it)[1]),
                 static_cast<unsigned>(std::stoi((*it)[2])));
  }
  return dates;
}

double freshness_weight(const Segment& segment, const Profile& /*profile*/, Timestamp now) {
  const sys_days today = floor<days>(now);
  std::optional<long long> best_age;
  for (const auto& date : find_dates(segment.text)) {
    const long long age = (today - date).count();
    if (age < 0) continue;
    if (!best_age || age < *best_age) best_age = age;
  }
  if (!best_age) return 0.0;
  return clamp01(std::exp(-static_cast<double>(*best_age) / 30.0));
}

SegmentScore evaluate_segment(const Segment& segment, const Profile& profile,
                              const DimensionWeights& weights, Timestamp now,
                              std::size_t segment_count) {
  SegmentScore s;
  s.segment_id = segment.id;
  s.link_w = link_weight(segment, profile);
  s.image_w = image_weight(segment, profile);
  s.theme_w = theme_weight(segment, profile);
  s.visual_w = visual_weight(segment, profile, segment_count);
  s.fresh_w = freshness_weight(segment, profile, now);
  s.total = weights.link * s.link_w + weights.image * s.image_w + weights.theme * s.theme_w +
            weights.visual * s.visual_w + weights.fresh * s.fresh_w;
  return s;
}

PageScores score_page(const SegmentSet& segments, const Profile& profile,
                      const DimensionWeights& weights, Timestamp now) {
  weights.validate();
  PageScores page;
  page.page_url = segments.page_url;
  page.scores.reserve(segments.segments.size());
  for (const auto& segment : segments.segments) {
    page.scores.push_back(evaluate_segment(segment, profile, weights, now, segments.segments.size()));
  }
  return page;
}

void to_json(nlohmann::json& j, const DimensionWeights& w) {
  j = {{"link", w.link}, {"image", w.image}, {"theme", w.theme}, {"visual", w.visual}, {"fresh", w.fresh}};
}

void from_json(const nlohmann::json& j, DimensionWeights& w) {
  w.link = j.value("link", w.link);
  w.image = j.value("image", w.image);
  w.theme = j.value("theme", w.theme);
  w.visual = j.value("visual", w.visual);
  w.fresh = j.value("fresh", w.fresh);
}

void to_json(nlohmann::json& j, const SegmentScore& s) {
  j = {{"segment_id", s.segment_id}, {"link_w", s.link_w},     {"image_w", s.image_w},
       {"theme_w", s.theme_w},       {"visual_w", s.visual_w}, {"fresh_w", s.fresh_w},
       {"total", s.total}};
}

void from_json(const nlohmann::json& j, SegmentScore& s) {
  j.at("segment_id").get_to(s.segment_id);
  j.at("link_w").get_to(s.link_w);
  j.at("image_w").get_to(s.image_w);
  j.at("theme_w").get_to(s.theme_w);
  j.at("visual_w").get_to(s.visual_w);
  j.at("fresh_w").get_to(s.fresh_w);
  j.at("total").get_to(s.total);
}

void to_json(nlohmann::json& j, const PageScores& p) {
  j = {{"page_url", p.page_url}, {"scores", p.scores}};
}

void from_json(const nlohmann::json& j, PageScores& p) {
  j.at("page_url").get_to(p.page_url);
  j.at("scores").get_to(p.scores);
}

}  // namespace morpes
