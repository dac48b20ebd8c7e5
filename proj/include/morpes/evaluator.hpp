#pragma once

#include <chrono>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "morpes/profile.hpp"
#include "morpes/segmenter.hpp"
#include "morpes/time.hpp"

// Five-dimension personalized segment scoring: links, images, theme, visual
// prominence and freshness, each normalized to [0, 1] and combined as a
// weighted sum.
namespace morpes {

struct DimensionWeights {
  double link = 1.0;
  double image = 1.0;
  double theme = 1.0;
  double visual = 1.0;
  double fresh = 1.0;

  void validate() const;  // all >= 0 and sum > 0, else ConfigError
  DimensionWeights scaled(double factor) const noexcept;
};

struct SegmentScore {
  std::string segment_id;
  double link_w = 0.0;
  double image_w = 0.0;
  double theme_w = 0.0;
  double visual_w = 0.0;
  double fresh_w = 0.0;
  double total = 0.0;

  bool operator==(const SegmentScore&) const = default;
};

struct PageScores {
  std::string page_url;
  std::vector<SegmentScore> scores;  // same order as the segment set

  bool operator==(const PageScores&) const = default;
};

// Sum of the weights of profile terms that occur as whole words in `text`.
double profile_match(std::string_view text, const Profile& profile);

double link_weight(const Segment& segment, const Profile& profile);
double image_weight(const Segment& segment, const Profile& profile);
// Cosine between the segment's content-word frequencies and the profile
// weights.
double theme_weight(const Segment& segment, const Profile& profile);
// Heading, emphasis and position prominence; `segment_count` is the size of
// the page the segment belongs to. The profile does not influence it.
double visual_weight(const Segment& segment, const Profile& profile, std::size_t segment_count);
// exp(-age_days / 30) of the most recent date in the text that is not in the
// future; 0 when no date is found. The profile does not influence it.
double freshness_weight(const Segment& segment, const Profile& profile, Timestamp now);

// Calendar dates found in free text: YYYY-MM-DD, "D Month YYYY" and
// "Month D, YYYY" (full or abbreviated English month names).
std::vector<std::chrono::sys_days> find_dates(std::string_view text);

SegmentScore evaluate_segment(const Segment& segment, const Profile& profile,
                              const DimensionWeights& weights, Timestamp now,
                              std::size_t segment_count);

PageScores score_page(const SegmentSet& segments, const Profile& profile,
                      const DimensionWeights& weights, Timestamp now);

void to_json(nlohmann::json& j, const DimensionWeights& w);
void from_json(const nlohmann::json& j, DimensionWeights& w);
void to_json(nlohmann::json& j, const SegmentScore& s);
void from_json(const nlohmann::json& j, SegmentScore& s);
void to_json(nlohmann::json& j, const PageScores& p);
void from_json(const nlohmann::json& j, PageScores& p);

}  // namespace morpes
