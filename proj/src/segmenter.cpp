#include "morpes/segmenter.hpp"

#include <algorithm>
#include <optional>
#include <unordered_set>

#include "morpes/errors.hpp"
#include "morpes/text.hpp"

namespace morpes {
namespace {

constexpr std::string_view kInvisibleTags[] = {"script",   "style",  "noscript", "template",
                                               "iframe",   "noembed", "noframes", "title",
                                               "meta",     "link",   "base",     "head"};

constexpr std::string_view kEmphasisTags[] = {"em", "strong", "b"};

template <std::size_t N>
bool in(const std::string_view (&set)[N], std::string_view tag) noexcept {
  return std::find(std::begin(set), std::end(set), tag) != std::end(set);
}

bool hidden_by_attribute(const html::Node& el) {
  if (el.has_attribute("hidden")) return true;
  if (const auto* type = el.attribute("type"); el.tag == "input" && type &&
                                                text::to_lower_ascii(*type) == "hidden") {
    return true;
  }
  if (const auto* style = el.attribute("style")) {
    std::string compact = text::to_lower_ascii(*style);
    std::erase_if(compact, [](char c) { return c == ' ' || c == '\t' || c == '\n' || c == '\r'; });
    if (compact.find("display:none") != std::string::npos ||
        compact.find("visibility:hidden") != std::string::npos) {
      return true;
    }
  }
  return false;
}

bool is_text_blank(std::string_view s) {
  return text::normalize_whitespace(s).empty();
}

// Marks elements that are block-level or contain a block-level descendant.
// Such elements start and end a line of text and are candidate segment roots.
class StructureIndex {
 public:
  explicit StructureIndex(const html::Node& root) { visit(root); }

  bool structural(const html::Node& node) const { return structural_.contains(&node); }

  bool has_structural_child(const html::Node& node) const {
    return std::any_of(node.children.begin(), node.children.end(),
                       [&](const auto& c) { return structural(*c); });
  }

 private:
  bool visit(const html::Node& node) {
    bool any = false;
    for (const auto& child : node.children) any = visit(*child) || any;
    const bool result = node.is_element() && (any || html::is_block_element(node.tag));
    if (result) structural_.insert(&node);
    return result;
  }

  std::unordered_set<const html::Node*> structural_;
};

// Appends the raw text of `node`. Elements that are block-level or contain a
// block-level descendant are padded with spaces. Returns whether `node` was
// padded.
bool collect_text(const html::Node& node, std::string& out) {
  if (node.is_text()) {
    out += node.data;
    return false;
  }
  if (!node.is_element() && node.type != html::NodeType::Document) return false;
  if (node.tag == "br") {
    out += ' ';
    return false;
  }
  const std::size_t start = out.size();
  bool boundary = html::is_block_element(node.tag);
  for (const auto& child : node.children) boundary = collect_text(*child, out) || boundary;
  if (boundary) {
    out.insert(start, 1, ' ');
    out += ' ';
  }
  return boundary;
}

bool contains_image(const html::Node& node) {
  if (node.is_element("img") && node.has_attribute("src")) return true;
  return std::any_of(node.children.begin(), node.children.end(),
                     [](const auto& c) { return contains_image(*c); });
}

struct Unit {
  std::vector<const html::Node*> nodes;
  std::size_t dom_depth = 0;
  std::size_t length = 0;  // code points of visible text
};

std::size_t depth_below_body(const html::Node& node) {
  std::size_t depth = 0;
  for (const html::Node* p = node.parent; p && !p->is_element("body") && p->is_element(); p = p->parent) {
    ++depth;
  }
  return depth + 1;
}

class PageSegmenter {
 public:
  PageSegmenter(const html::Node& body, const SegmentationParams& params)
      : index_(body), params_(params) {}

  std::vector<Unit> run(const html::Node& body) {
    std::vector<Unit> units;
    descend(body, units);
    return merge(std::move(units));
  }

 private:
  std::size_t length_of(std::span<const html::Node* const> nodes) const {
    return text::utf8_length(visible_text(nodes));
  }

  void flush_run(std::vector<const html::Node*>& run, std::vector<Unit>& units) {
    if (run.empty()) return;
    const std::size_t length = length_of(run);
    const bool has_image = std::any_of(run.begin(), run.end(),
                                       [](const html::Node* n) { return contains_image(*n); });
    if (length > 0 || has_image) {
      units.push_back({run, depth_below_body(*run.front()), length});
    }
    run.clear();
  }

  void descend(const html::Node& parent, std::vector<Unit>& units) {
    std::vector<const html::Node*> run;
    for (const auto& child_ptr : parent.children) {
      const html::Node& child = *child_ptr;
      if (!index_.structural(child)) {
        if (child.is_text() || child.is_element()) run.push_back(&child);
        continue;
      }
      flush_run(run, units);
      const html::Node* single[] = {&child};
      const std::size_t length = length_of(single);
      if (length > params_.max_chars && index_.has_structural_child(child)) {
        descend(child, units);
      } else if (length > 0 || contains_image(child)) {
        units.push_back({{&child}, depth_below_body(child), length});
      }
    }
    flush_run(run, units);
  }

  Unit combine(const Unit& a, const Unit& b) const {
    Unit out = a;
    out.nodes.insert(out.nodes.end(), b.nodes.begin(), b.nodes.end());
    out.length = length_of(out.nodes);
    return out;
  }

  // Undersized units are folded into the following unit, a trailing one into
  // the previous unit, as long as the combination stays within max_chars.
  std::vector<Unit> merge(std::vector<Unit> units) const {
    std::vector<Unit> out;
    std::optional<Unit> pending;
    for (auto& unit : units) {
      if (pending) {
        Unit candidate = combine(*pending, unit);
        if (candidate.length <= params_.max_chars) {
          pending = std::move(candidate);
        } else {
          out.push_back(std::move(*pending));
          pending = std::move(unit);
        }
      } else {
        pending = std::move(unit);
      }
      if (pending->length >= params_.min_chars) {
        out.push_back(std::move(*pending));
        pending.reset();
      }
    }
    if (pending) {
      if (!out.empty()) {
        Unit candidate = combine(out.back(), *pending);
        if (candidate.length <= params_.max_chars) {
          out.back() = std::move(candidate);
          return out;
        }
      }
      out.push_back(std::move(*pending));
    }
    return out;
  }

  StructureIndex index_;
  const SegmentationParams& params_;
};

Url base_url_for(const RawPage& page, const html::Document& doc) {
  Url base = Url::parse_reference(page.url);
  if (!base.is_absolute()) throw InvalidUrlError("page URL is not absolute: " + page.url);
  if (const html::Node* el = doc.head().find_first("base")) {
    if (const auto* href = el->attribute("href"); href && !href->empty()) {
      base = resolve(base, Url::parse_reference(*href));
    }
  }
  return base;
}

void collect_features(const html::Node& node, const Url& base, Segment& seg) {
  if (!node.is_element()) return;
  if (node.tag == "a") {
    if (const auto* href = node.attribute("href")) {
      seg.links.push_back({resolve(base, *href), visible_text(node)});
    }
  } else if (node.tag == "img") {
    if (const auto* src = node.attribute("src")) {
      const auto* alt = node.attribute("alt");
      seg.images.push_back({resolve(base, *src), alt ? text::normalize_whitespace(*alt) : ""});
    }
  } else if (html::is_heading(node.tag)) {
    const int level = node.tag[1] - '0';
    if (seg.heading_level == 0 || level < seg.heading_level) seg.heading_level = level;
  } else if (in(kEmphasisTags, node.tag)) {
    ++seg.emphasis_count;
  }
  for (const auto& child : node.children) collect_features(*child, base, seg);
}

html::AttributeRewriter url_rewriter(const Url& base) {
  return [&base](const html::Node& el, const html::Attribute& attr) -> std::string {
    const bool href = attr.name == "href" && (el.tag == "a" || el.tag == "area");
    const bool src = attr.name == "src" && (el.tag == "img" || el.tag == "source" ||
                                            el.tag == "video" || el.tag == "audio");
    return href || src ? resolve(base, attr.value) : attr.value;
  };
}

}  // namespace

const Segment* SegmentSet::find(std::string_view id) const noexcept {
  for (const auto& s : segments) {
    if (s.id == id) return &s;
  }
  return nullptr;
}

void strip_invisible(html::Node& node) {
  std::erase_if(node.children, [](const std::unique_ptr<html::Node>& child) {
    if (child->type == html::NodeType::Comment) return true;
    if (!child->is_element()) return false;
    return in(kInvisibleTags, child->tag) || hidden_by_attribute(*child);
  });
  for (auto& child : node.children) strip_invisible(*child);
}

std::string visible_text(std::span<const html::Node* const> nodes) {
  std::string raw;
  for (const html::Node* n : nodes) collect_text(*n, raw);
  return text::normalize_whitespace(raw);
}

std::string visible_text(const html::Node& node) {
  const html::Node* one[] = {&node};
  return visible_text(one);
}

Segment extract_features(std::span<const html::Node* const> nodes, const Url& base,
                         const SegmentContext& context) {
  Segment seg;
  seg.id = context.id;
  seg.order_index = context.order_index;
  seg.dom_depth = context.dom_depth;
  seg.text = visible_text(nodes);
  seg.char_count = text::utf8_length(seg.text);
  const auto rewrite = url_rewriter(base);
  for (const html::Node* n : nodes) {
    seg.html_fragment += html::serialize(*n, rewrite);
    collect_features(*n, base, seg);
  }
  return seg;
}

Segment extract_features(const html::Node& subtree, const Url& base, const SegmentContext& context) {
  const html::Node* one[] = {&subtree};
  return extract_features(one, base, context);
}

SegmentSet segment_page(const RawPage& page, const SegmentationParams& params) {
  if (params.max_chars == 0) throw ConfigError("segmentation max_chars must be positive");
  if (params.min_chars > params.max_chars) {
    throw ConfigError("segmentation min_chars must not exceed max_chars");
  }
  html::Document doc = html::parse(page.html);
  const Url base = base_url_for(page, doc);
  html::Node& body = doc.body();
  strip_invisible(body);
  if (is_text_blank(visible_text(body))) throw EmptyPageError("page has no visible text: " + page.url);

  const std::string prefix = text::hex64(text::fnv1a64(page.html)).substr(0, 8);
  PageSegmenter segmenter(body, params);
  const auto units = segmenter.run(body);

  SegmentSet set;
  set.page_url = page.url;
  set.segments.reserve(units.size());
  for (std::size_t i = 0; i < units.size(); ++i) {
    SegmentContext ctx{prefix + "-" + std::to_string(i), i, units[i].dom_depth};
    set.segments.push_back(extract_features(units[i].nodes, base, ctx));
  }
  return set;
}

// --- JSON -----------------------------------------------------------------------

void to_json(nlohmann::json& j, const Link& link) {
  j = {{"href", link.href}, {"anchor_text", link.anchor_text}};
}
void from_json(const nlohmann::json& j, Link& link) {
  j.at("href").get_to(link.href);
  j.at("anchor_text").get_to(link.anchor_text);
}
void to_json(nlohmann::json& j, const Image& image) {
  j = {{"src", image.src}, {"alt_text", image.alt_text}};
}
void from_json(const nlohmann::json& j, Image& image) {
  j.at("src").get_to(image.src);
  j.at("alt_text").get_to(image.alt_text);
}

void to_json(nlohmann::json& j, const Segment& s) {
  j = {{"id", s.id},
       {"order_index", s.order_index},
       {"html_fragment", s.html_fragment},
       {"text", s.text},
       {"links", s.links},
       {"images", s.images},
       {"char_count", s.char_count},
       {"heading_level", s.heading_level},
       {"emphasis_count", s.emphasis_count},
       {"dom_depth", s.dom_depth}};
}

void from_json(const nlohmann::json& j, Segment& s) {
  j.at("id").get_to(s.id);
  j.at("order_index").get_to(s.order_index);
  j.at("html_fragment").get_to(s.html_fragment);
  j.at("text").get_to(s.text);
  j.at("links").get_to(s.links);
  j.at("images").get_to(s.images);
  j.at("char_count").get_to(s.char_count);
  j.at("heading_level").get_to(s.heading_level);
  j.at("emphasis_count").get_to(s.emphasis_count);
  j.at("dom_depth").get_to(s.dom_depth);
}

void to_json(nlohmann::json& j, const SegmentSet& set) {
  j = {{"page_url", set.page_url}, {"segments", set.segments}};
}
void from_json(const nlohmann::json& j, SegmentSet& set) {
  j.at("page_url").get_to(set.page_url);
  j.at("segments").get_to(set.segments);
}

void to_json(nlohmann::json& j, const SegmentationParams& p) {
  j = {{"max_chars", p.max_chars}, {"min_chars", p.min_chars}};
}
void from_json(const nlohmann::json& j, SegmentationParams& p) {
  p.max_chars = j.value("max_chars", p.max_chars);
  p.min_chars = j.value("min_chars", p.min_chars);
}

}  // namespace morpes
