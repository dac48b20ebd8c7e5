#include "morpes/text.hpp"

#include <algorithm>
#include <iterator>
#include <cstdio>
#include <vector>

namespace morpes::text {
namespace {

bool is_ascii_space(unsigned char c) {
  return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v';
}

bool is_ascii_punct(unsigned char c) {
  return c < 0x80 && !is_ascii_space(c) && !((c >= '0' && c <= '9') || (c >= 'a' && c <= 'z') ||
                                             (c >= 'A' && c <= 'Z'));
}

// Common English function words; sorted once on first use.
constexpr std::string_view kStopwords[] = {
    "a",       "about",   "above",   "after",   "again",   "against", "all",     "am",
    "an",      "and",     "any",     "are",     "as",      "at",      "be",      "because",
    "been",    "before",  "being",   "below",   "between", "both",    "but",     "by",
    "can",     "cannot",  "could",   "did",     "do",      "does",    "doing",   "down",
    "during",  "each",    "else",    "few",     "for",     "from",    "further", "had",
    "has",     "have",    "having",  "he",      "her",     "here",    "hers",    "herself",
    "him",     "himself", "his",     "how",     "i",       "if",      "in",      "into",
    "is",      "it",      "its",     "itself",  "just",    "may",     "me",      "might",
    "more",    "most",    "must",    "my",      "myself",  "no",      "nor",     "not",
    "now",     "of",      "off",     "on",      "once",    "only",    "or",      "other",
    "our",     "ours",    "out",     "over",    "own",     "same",    "shall",   "she",
    "should",  "so",      "some",    "such",    "than",    "that",    "the",     "their",
    "theirs",  "them",    "then",    "there",   "these",   "they",    "this",    "those",
    "through", "to",      "too",     "under",   "until",   "up",      "upon",    "us",
    "very",    "was",     "we",      "were",    "what",    "when",    "where",   "which",
    "while",   "who",     "whom",    "why",     "will",    "with",    "would",   "yet",
    "you",     "your",    "yours",   "yourself", "yourselves", "also", "within", "without", "among", "onto", "via"};

const std::vector<std::string_view>& sorted_stopwords() {
  static const std::vector<std::string_view> words = [] {
    std::vector<std::string_view> v(std::begin(kStopwords), std::end(kStopwords));
    std::sort(v.begin(), v.end());
    v.erase(std::unique(v.begin(), v.end()), v.end());
    return v;
  }();
  return words;
}

}  // namespace

std::string normalize_whitespace(std::string_view s) {
  std::string out;
  out.reserve(s.size());
  bool pending_space = false;
  for (std::size_t i = 0; i < s.size(); ++i) {
    const auto c = static_cast<unsigned char>(s[i]);
    bool space = is_ascii_space(c);
    if (!space && c == 0xC2 && i + 1 < s.size() && static_cast<unsigned char>(s[i + 1]) == 0xA0) {
      space = true;
      ++i;
    }
    if (space) {
      pending_space = !out.empty();
      continue;
    }
    if (pending_space) {
      out.push_back(' ');
      pending_space = false;
    }
    out.push_back(static_cast<char>(c));
  }
  return out;
}

std::size_t utf8_length(std::string_view s) noexcept {
  std::size_t n = 0;
  for (char ch : s) {
    if ((static_cast<unsigned char>(ch) & 0xC0) != 0x80) ++n;
  }
  return n;
}

std::string to_lower_ascii(std::string_view s) {
  std::string out(s);
  for (char& c : out) {
    if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
  }
  return out;
}

std::vector<std::string> tokenize(std::string_view s) {
  std::vector<std::string> tokens;
  std::string current;
  auto flush = [&] {
    if (!current.empty()) tokens.push_back(std::move(current));
    current.clear();
  };
  for (std::size_t i = 0; i < s.size(); ++i) {
    const auto c = static_cast<unsigned char>(s[i]);
    if (c == '\'') continue;
    // U+2019 right single quotation mark
    if (c == 0xE2 && i + 2 < s.size() && static_cast<unsigned char>(s[i + 1]) == 0x80 &&
        static_cast<unsigned char>(s[i + 2]) == 0x99) {
      i += 2;
      continue;
    }
    // U+00A0 no-break space
    if (c == 0xC2 && i + 1 < s.size() && static_cast<unsigned char>(s[i + 1]) == 0xA0) {
      ++i;
      flush();
      continue;
    }
    if (is_ascii_space(c) || is_ascii_punct(c)) {
      flush();
      continue;
    }
    current.push_back(c >= 'A' && c <= 'Z' ? static_cast<char>(c - 'A' + 'a') : static_cast<char>(c));
  }
  flush();
  return tokens;
}

std::vector<std::string> content_words(std::string_view s) {
  auto tokens = tokenize(s);
  std::erase_if(tokens, [](const std::string& t) { return is_stopword(t); });
  return tokens;
}

bool is_stopword(std::string_view token) {
  const auto& words = sorted_stopwords();
  return std::binary_search(words.begin(), words.end(), token);
}

std::span<const std::string_view> stopwords() noexcept { return sorted_stopwords(); }

std::uint64_t fnv1a64(std::string_view bytes) noexcept {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (char c : bytes) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

}  // namespace morpes::text
