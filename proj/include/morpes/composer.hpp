#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "json.hpp"
#include "morpes/evaluator.hpp"
#include "morpes/segmenter.hpp"

// Ranking, template selection, shot composition and shot rendering.
namespace morpes {

struct Template {
  std::string id;
  std::size_t capacity = 1;  // segments per shot
  std::string skin;          // name of a bundled stylesheet
  bool show_nav = true;
  int max_width_px = 320;

  void validate() const;  // throws ConfigError
  bool operator==(const Template&) const = default;
};

// compact (3 / 320px), regular (5 / 480px), wide (8 / 768px).
std::vector<Template> default_templates();

bool has_skin(std::string_view name) noexcept;
std::string_view skin_stylesheet(std::string_view name);  // throws ConfigError
std::vector<std::string> skin_names();

struct RankedEntry {
  std::string segment_id;
  double total_score = 0.0;
  std::size_t order_index = 0;

  bool operator==(const RankedEntry&) const = default;
};

// Non-increasing by score; ties keep document order.
struct RankedSegments {
  std::vector<RankedEntry> entries;
};

struct Shot {
  std::size_t index = 1;  // 1-based
  std::vector<std::string> segment_ids;

  bool operator==(const Shot&) const = default;
};

struct ShotPlan {
  std::string page_url;
  std::string template_id;
  std::vector<Shot> shots;            // served so far
  std::vector<std::string> buffer;    // ranked, not yet served

  // Shots served so far plus the shots still needed to drain the buffer.
  std::size_t total_shots(std::size_t capacity) const noexcept;
  bool operator==(const ShotPlan&) const = default;
};

RankedSegments sort_segments(const PageScores& scores);

// Explicit request wins, then the widest template that fits the device,
// then the first template.
const Template& select_template(std::span<const Template> templates,
                                std::optional<std::string_view> requested = std::nullopt,
                                std::optional<int> device_width_px = std::nullopt);

// Materializes shot 1 from the top of the ranking; the rest goes to the
// buffer in ranked order.
ShotPlan compose_shots(const RankedSegments& ranking, const Template& tmpl,
                       std::string_view page_url = {});

// Drains the next `capacity` ids from the buffer. Throws NoMoreShotsError
// when the buffer is empty, leaving `plan` untouched.
std::pair<ShotPlan, Shot> next_shot(const ShotPlan& plan, const Template& tmpl);

struct NavContext {
  std::string page_url;
  std::size_t shot_index = 1;
  std::size_t total_shots = 1;
  std::string session_id;
};

// Standalone mobile HTML document for one shot. When `debug_scores` is set,
// the score breakdown of the shot's segments is embedded as a JSON island.
std::string render_shot(const Shot& shot, const SegmentSet& segments, const Template& tmpl,
                        const NavContext& nav, const PageScores* debug_scores = nullptr);

// Link target of the shot navigation.
std::string shot_href(std::string_view session_id, std::size_t shot_index);

void to_json(nlohmann::json& j, const Template& t);
void from_json(const nlohmann::json& j, Template& t);
void to_json(nlohmann::json& j, const Shot& s);
void to_json(nlohmann::json& j, const ShotPlan& p);

}  // namespace morpes
