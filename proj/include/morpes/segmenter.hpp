#pragma once

#include <chrono>
#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "morpes/html.hpp"
#include "morpes/time.hpp"
#include "morpes/url.hpp"

// Page fetching and DOM-based segmentation.
namespace morpes {

struct RawPage {
  std::string url;   // absolute URL the markup was served from
  std::string html;  // decoded to UTF-8
  Timestamp fetched_at{};
};

struct Link {
  std::string href;  // absolute
  std::string anchor_text;

  bool operator==(const Link&) const = default;
};

struct Image {
  std::string src;  // absolute
  std::string alt_text;

  bool operator==(const Image&) const = default;
};

// One block of the source page: the atomic unit that is scored, ranked and
// placed into a shot.
struct Segment {
  std::string id;  // "<content-hash-prefix>-<order_index>"
  std::size_t order_index = 0;
  std::string html_fragment;
  std::string text;  // visible text, whitespace-normalized
  std::vector<Link> links;
  std::vector<Image> images;
  std::size_t char_count = 0;  // code points in `text`
  int heading_level = 0;       // 1..6 for the most important heading, 0 if none
  std::size_t emphasis_count = 0;
  std::size_t dom_depth = 0;   // element nesting below <body>; body children are 1

  bool operator==(const Segment&) const = default;
};

struct SegmentSet {
  std::string page_url;
  std::vector<Segment> segments;

  const Segment* find(std::string_view id) const noexcept;
  bool operator==(const SegmentSet&) const = default;
};

struct SegmentationParams {
  std::size_t max_chars = 1200;
  std::size_t min_chars = 40;
};

// Fetches an http(s) page. Redirects are followed and the final URL is
// recorded in the result.
RawPage fetch_page(std::string_view url, std::chrono::milliseconds timeout);

// Splits a page into segments. Deterministic for identical inputs.
SegmentSet segment_page(const RawPage& page, const SegmentationParams& params = {});

// Removes content that is never rendered: scripts, styles, templates,
// comments and elements hidden via the `hidden` attribute or inline
// display:none / visibility:hidden.
void strip_invisible(html::Node& node);

// Visible text of a node list with block boundaries turned into spaces,
// whitespace-normalized.
std::string visible_text(std::span<const html::Node* const> nodes);
std::string visible_text(const html::Node& node);

struct SegmentContext {
  std::string id;
  std::size_t order_index = 0;
  std::size_t dom_depth = 0;
};

// Builds a Segment from consecutive sibling subtrees. Link and image URLs
// are resolved against `base`, and the serialized fragment carries the same
// resolved URLs.
Segment extract_features(std::span<const html::Node* const> nodes, const Url& base,
                         const SegmentContext& context);
Segment extract_features(const html::Node& subtree, const Url& base,
                         const SegmentContext& context = {});

void to_json(nlohmann::json& j, const Link& link);
void from_json(const nlohmann::json& j, Link& link);
void to_json(nlohmann::json& j, const Image& image);
void from_json(const nlohmann::json& j, Image& image);
void to_json(nlohmann::json& j, const Segment& segment);
void from_json(const nlohmann::json& j, Segment& segment);
void to_json(nlohmann::json& j, const SegmentSet& set);
void from_json(const nlohmann::json& j, SegmentSet& set);
void to_json(nlohmann::json& j, const SegmentationParams& params);
void from_json(const nlohmann::json& j, SegmentationParams& params);

}  // namespace morpes
