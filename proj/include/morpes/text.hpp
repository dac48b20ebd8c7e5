#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

// Text helpers shared by segmentation, profiles and scoring. All functions
// operate on UTF-8; case folding is ASCII-only.
namespace morpes::text {

// Collapses runs of ASCII whitespace and U+00A0 into one space and trims.
std::string normalize_whitespace(std::string_view s);

// Number of Unicode code points in a UTF-8 string.
std::size_t utf8_length(std::string_view s) noexcept;

std::string to_lower_ascii(std::string_view s);

// Splits into lowercased word tokens. ASCII punctuation separates words,
// apostrophes (ASCII and U+2019) are dropped so "don't" becomes "dont".
std::vector<std::string> tokenize(std::string_view s);

// tokenize() minus stopwords.
std::vector<std::string> content_words(std::string_view s);

bool is_stopword(std::string_view token);
std::span<const std::string_view> stopwords() noexcept;

std::uint64_t fnv1a64(std::string_view bytes) noexcept;
std::string hex64(std::uint64_t v);

}  // namespace morpes::text
