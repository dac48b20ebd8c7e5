#include "morpes/composer.hpp"

#include <algorithm>
#include <array>
#include <unordered_set>

#include "morpes/errors.hpp"
#include "morpes/html.hpp"
#include "morpes/url.hpp"

namespace morpes {
namespace {

constexpr std::string_view kBaseCss =
    "*{box-sizing:border-box}"
    "body{margin:0 auto;padding:0 8px;font-family:sans-serif;line-height:1.4;word-wrap:break-word}"
    "img{max-width:100%;height:auto}"
    "table{display:block;overflow-x:auto}"
    ".morpes-segment{border-bottom:1px solid #ddd;padding:8px 0;overflow:hidden}"
    ".morpes-nav{display:flex;justify-content:space-between;padding:8px 0}";

struct Skin {
  std::string_view name;
  std::string_view css;
};

constexpr std::array<Skin, 3> kSkins = {{
    {"compact", "body{font-size:14px}h1,h2,h3{font-size:1.1em;margin:.3em 0}"},
    {"regular", "body{font-size:16px}"},
    {"wide", "body{font-size:17px}.morpes-segment{padding:12px 0}"},
}};

const Skin* find_skin(std::string_view name) {
  for (const auto& s : kSkins) {
    if (s.name == name) return &s;
  }
  return nullptr;
}

std::string json_island(const nlohmann::json& j) {
  // "</" would terminate the surrounding <script> element.
  std::string text = j.dump();
  std::string out;
  out.reserve(text.size());
  for (std::size_t i = 0; i < text.size(); ++i) {
    if (text[i] == '<' && i + 1 < text.size() && text[i + 1] == '/') {
      out += "<\\/";
      ++i;
    } else {
      out.push_back(text[i]);
    }
  }
  return out;
}

}  // namespace

void Template::validate() const {
  if (id.empty()) throw ConfigError("template id must not be empty");
  if (capacity < 1) throw ConfigError("template " + id + ": capacity must be >= 1");
  if (max_width_px <= 0) throw ConfigError("template " + id + ": max_width_px must be > 0");
  if (!has_skin(skin)) throw ConfigError("template " + id + ": unknown skin '" + skin + "'");
}

std::vector<Template> default_templates() {
  return {{"compact", 3, "compact", true, 320},
          {"regular", 5, "regular", true, 480},
          {"wide", 8, "wide", true, 768}};
}

bool has_skin(std::string_view name) noexcept { return find_skin(name) != nullptr; }

std::string_view skin_stylesheet(std::string_view name) {
  const Skin* skin = find_skin(name);
  if (!skin) throw ConfigError("unknown skin '" + std::string(name) + "'");
  return skin->css;
}

std::vector<std::string> skin_names() {
  std::vector<std::string> names;
  for (const auto& s : kSkins) names.emplace_back(s.name);
  return names;
}

std::size_t ShotPlan::total_shots(std::size_t capacity) const noexcept {
  const std::size_t cap = std::max<std::size_t>(capacity, 1);
  return shots.size() + (buffer.size() + cap - 1) / cap;
}

RankedSegments sort_segments(const PageScores& scores) {
  RankedSegments ranking;
  ranking.entries.reserve(scores.scores.size());
  for (std::size_t i = 0; i < scores.scores.size(); ++i) {
    ranking.entries.push_back({scores.scores[i].segment_id, scores.scores[i].total, i});
  }
  std::stable_sort(ranking.entries.begin(), ranking.entries.end(),
                   [](const RankedEntry& a, const RankedEntry& b) { return a.total_score > b.total_score; });
  return ranking;
}

const Template& select_template(std::span<const Template> templates,
                                std::optional<std::string_view> requested,
                                std::optional<int> device_width_px) {
  if (templates.empty()) throw TemplateNotFoundError("no templates configured");
  if (requested) {
    for (const auto& t : templates) {
      if (t.id == *requested) return t;
    }
    throw TemplateNotFoundError("unknown template '" + std::string(*requested) + "'");
  }
  if (device_width_px) {
    const Template* best = nullptr;
    for (const auto& t : templates) {
      if (t.max_width_px <= *device_width_px && (!best || t.max_width_px > best->max_width_px)) {
        best = &t;
      }
    }
    if (best) return *best;
  }
  return templates.front();
}

ShotPlan compose_shots(const RankedSegments& ranking, const Template& tmpl, std::string_view page_url) {
  ShotPlan plan;
  plan.page_url = std::string(page_url);
  plan.template_id = tmpl.id;
  if (ranking.entries.empty()) return plan;
  const std::size_t first = std::min(std::max<std::size_t>(tmpl.capacity, 1), ranking.entries.size());
  Shot shot;
  shot.index = 1;
  for (std::size_t i = 0; i < ranking.entries.size(); ++i) {
    if (i < first) {
      shot.segment_ids.push_back(ranking.entries[i].segment_id);
    } else {
      plan.buffer.push_back(ranking.entries[i].segment_id);
    }
  }
  plan.shots.push_back(std::move(shot));
  return plan;
}

std::pair<ShotPlan, Shot> next_shot(const ShotPlan& current, const Template& tmpl) {
  if (current.buffer.empty()) throw NoMoreShotsError("segment buffer is empty");
  ShotPlan plan = current;
  const std::size_t take = std::min(std::max<std::size_t>(tmpl.capacity, 1), plan.buffer.size());
  Shot shot;
  shot.index = plan.shots.empty() ? 1 : plan.shots.back().index + 1;
  shot.segment_ids.assign(plan.buffer.begin(), plan.buffer.begin() + static_cast<std::ptrdiff_t>(take));
  plan.buffer.erase(plan.buffer.begin(), plan.buffer.begin() + static_cast<std::ptrdiff_t>(take));
  plan.shots.push_back(shot);
  return {std::move(plan), std::move(shot)};
}

std::string shot_href(std::string_view session_id, std::size_t shot_index) {
  return "/shot?session=" + percent_encode(session_id) + "&i=" + std::to_string(shot_index);
}

std::string render_shot(const Shot& shot, const SegmentSet& segments, const Template& tmpl,
                        const NavContext& nav, const PageScores* debug_scores) {
  std::vector<const Segment*> members;
  members.reserve(shot.segment_ids.size());
  for (const auto& id : shot.segment_ids) {
    const Segment* seg = segments.find(id);
    if (!seg) throw RenderError("shot references unknown segment " + id);
    members.push_back(seg);
  }
  const std::string_view skin_css = has_skin(tmpl.skin) ? skin_stylesheet(tmpl.skin) : "";

  std::string out;
  out += "<!DOCTYPE html>\n<html><head><meta charset=\"utf-8\">\n";
  out += "<meta name=\"viewport\" content=\"width=device-width, initial-scale=1\">\n";
  out += "<title>" + html::escape_text(nav.page_url) + " (" + std::to_string(nav.shot_index) + "/" +
         std::to_string(nav.total_shots) + ")</title>\n";
  out += "<style>";
  out += kBaseCss;
  out += skin_css;
  out += "</style>\n</head>\n";
  out += "<body class=\"morpes skin-" + html::escape_attribute(tmpl.skin) + "\" style=\"max-width:" +
         std::to_string(tmpl.max_width_px) + "px\" data-session=\"" +
         html::escape_attribute(nav.session_id) + "\" data-page-url=\"" +
         html::escape_attribute(nav.page_url) + "\">\n";
  out += "<main class=\"morpes-shot\" data-shot-index=\"" + std::to_string(nav.shot_index) +
         "\" data-total-shots=\"" + std::to_string(nav.total_shots) + "\">\n";
  for (const Segment* seg : members) {
    out += "<div class=\"morpes-segment\" data-segment-id=\"" + html::escape_attribute(seg->id) + "\">";
    out += seg->html_fragment;
    out += "</div>\n";
  }
  out += "</main>\n";
  if (tmpl.show_nav) {
    out += "<nav class=\"morpes-nav\">";
    if (nav.shot_index > 1) {
      out += "<a class=\"morpes-prev\" rel=\"prev\" href=\"" +
             html::escape_attribute(shot_href(nav.session_id, nav.shot_index - 1)) + "\">Previous</a>";
    } else {
      out += "<span></span>";
    }
    out += "<span class=\"morpes-pos\">" + std::to_string(nav.shot_index) + " / " +
           std::to_string(nav.total_shots) + "</span>";
    if (nav.shot_index < nav.total_shots) {
      out += "<a class=\"morpes-next\" rel=\"next\" href=\"" +
             html::escape_attribute(shot_href(nav.session_id, nav.shot_index + 1)) + "\">Next</a>";
    } else {
      out += "<span></span>";
    }
    out += "</nav>\n";
  }
  if (debug_scores) {
    auto island = nlohmann::json::array();
    const std::unordered_set<std::string> wanted(shot.segment_ids.begin(), shot.segment_ids.end());
    for (const auto& s : debug_scores->scores) {
      if (wanted.contains(s.segment_id)) island.push_back(s);
    }
    out += "<script type=\"application/json\" id=\"morpes-scores\">" + json_island(island) + "</script>\n";
  }
  out += "</body></html>\n";
  return out;
}

void to_json(nlohmann::json& j, const Template& t) {
  j = {{"id", t.id},
       {"capacity", t.capacity},
       {"skin", t.skin},
       {"show_nav", t.show_nav},
       {"max_width_px", t.max_width_px}};
}

void from_json(const nlohmann::json& j, Template& t) {
  j.at("id").get_to(t.id);
  j.at("capacity").get_to(t.capacity);
  t.skin = j.value("skin", t.id);
  t.show_nav = j.value("show_nav", true);
  j.at("max_width_px").get_to(t.max_width_px);
}

void to_json(nlohmann::json& j, const Shot& s) {
  j = {{"index", s.index}, {"segment_ids", s.segment_ids}};
}

void to_json(nlohmann::json& j, const ShotPlan& p) {
  j = {{"page_url", p.page_url}, {"template_id", p.template_id}, {"shots", p.shots}, {"buffer", p.buffer}};
}

}  // namespace morpes
