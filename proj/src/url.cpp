#include "morpes/url.hpp"

#include <cctype>
#include <charconv>

#include "morpes/errors.hpp"
#include "morpes/text.hpp"

namespace morpes {
namespace {

bool valid_scheme(std::string_view s) {
  if (s.empty() || !std::isalpha(static_cast<unsigned char>(s[0]))) return false;
  for (char c : s) {
    if (!std::isalnum(static_cast<unsigned char>(c)) && c != '+' && c != '-' && c != '.') {
      return false;
    }
  }
  return true;
}

std::string trim_url(std::string_view s) {
  // Browsers strip leading/trailing C0 controls and spaces, and drop tabs
  // and newlines inside the URL.
  std::size_t b = 0, e = s.size();
  while (b < e && static_cast<unsigned char>(s[b]) <= 0x20) ++b;
  while (e > b && static_cast<unsigned char>(s[e - 1]) <= 0x20) --e;
  std::string out;
  out.reserve(e - b);
  for (std::size_t i = b; i < e; ++i) {
    if (s[i] != '\t' && s[i] != '\n' && s[i] != '\r') out.push_back(s[i]);
  }
  return out;
}

std::string remove_dot_segments(std::string_view path) {
  std::string input(path);
  std::string output;
  while (!input.empty()) {
    if (input.starts_with("../")) {
      input.erase(0, 3);
    } else if (input.starts_with("./")) {
      input.erase(0, 2);
    } else if (input.starts_with("/./")) {
      input.erase(0, 2);
    } else if (input == "/.") {
      input = "/";
    } else if (input.starts_with("/../") || input == "/..") {
      input = input.size() == 3 ? "/" : input.substr(3);
      auto slash = output.rfind('/');
      output.erase(slash == std::string::npos ? 0 : slash);
    } else if (input == "." || input == "..") {
      input.clear();
    } else {
      std::size_t start = input[0] == '/' ? 1 : 0;
      auto next = input.find('/', start);
      if (next == std::string::npos) next = input.size();
      output.append(input, 0, next);
      input.erase(0, next);
    }
  }
  return output;
}

std::string merge_paths(const Url& base, std::string_view ref_path) {
  if (base.authority && base.path.empty()) return "/" + std::string(ref_path);
  auto slash = base.path.rfind('/');
  if (slash == std::string::npos) return std::string(ref_path);
  return base.path.substr(0, slash + 1) + std::string(ref_path);
}

}  // namespace

std::string Url::host() const {
  if (!authority) return {};
  std::string_view a = *authority;
  if (auto at = a.rfind('@'); at != std::string_view::npos) a.remove_prefix(at + 1);
  std::string_view hostpart = a;
  if (!a.empty() && a.front() == '[') {
    auto close = a.find(']');
    hostpart = a.substr(0, close == std::string_view::npos ? a.size() : close + 1);
  } else if (auto colon = a.rfind(':'); colon != std::string_view::npos) {
    hostpart = a.substr(0, colon);
  }
  return text::to_lower_ascii(hostpart);
}

std::optional<int> Url::port() const {
  if (!authority) return std::nullopt;
  std::string_view a = *authority;
  auto close = a.rfind(']');
  auto colon = a.rfind(':');
  if (colon == std::string_view::npos || (close != std::string_view::npos && colon < close) ||
      (a.find('@') != std::string_view::npos && colon < a.rfind('@'))) {
    return std::nullopt;
  }
  auto digits = a.substr(colon + 1);
  int value = 0;
  auto [ptr, ec] = std::from_chars(digits.data(), digits.data() + digits.size(), value);
  if (ec != std::errc{} || ptr != digits.data() + digits.size() || digits.empty()) return std::nullopt;
  return value;
}

std::string Url::str() const {
  std::string out;
  if (!scheme.empty()) out += scheme + ":";
  if (authority) out += "//" + *authority;
  out += path;
  if (query) out += "?" + *query;
  if (fragment) out += "#" + *fragment;
  return out;
}

Url Url::parse_reference(std::string_view raw) {
  const std::string s = trim_url(raw);
  std::string_view rest = s;
  Url url;
  if (auto hash = rest.find('#'); hash != std::string_view::npos) {
    url.fragment = std::string(rest.substr(hash + 1));
    rest = rest.substr(0, hash);
  }
  if (auto q = rest.find('?'); q != std::string_view::npos) {
    url.query = std::string(rest.substr(q + 1));
    rest = rest.substr(0, q);
  }
  if (auto colon = rest.find(':'); colon != std::string_view::npos) {
    auto slash = rest.find('/');
    if ((slash == std::string_view::npos || colon < slash) && valid_scheme(rest.substr(0, colon))) {
      url.scheme = text::to_lower_ascii(rest.substr(0, colon));
      rest = rest.substr(colon + 1);
    }
  }
  if (rest.starts_with("//")) {
    rest.remove_prefix(2);
    auto end = rest.find('/');
    if (end == std::string_view::npos) end = rest.size();
    url.authority = std::string(rest.substr(0, end));
    rest = rest.substr(end);
  }
  url.path = std::string(rest);
  for (char& c : url.path) {
    if (c == '\\' && url.is_http()) c = '/';
  }
  return url;
}

Url Url::parse_http(std::string_view s) {
  Url url = parse_reference(s);
  if (!url.is_http()) throw InvalidUrlError("not an absolute http(s) URL: " + std::string(s));
  if (!url.authority || url.host().empty()) throw InvalidUrlError("URL has no host: " + std::string(s));
  if (url.authority->find_first_of(" <>\"") != std::string::npos) {
    throw InvalidUrlError("malformed host in URL: " + std::string(s));
  }
  if (url.path.empty()) url.path = "/";
  return url;
}

Url resolve(const Url& base, const Url& ref) {
  Url target;
  if (!ref.scheme.empty()) {
    target = ref;
    target.path = remove_dot_segments(ref.path);
  } else {
    if (ref.authority) {
      target.authority = ref.authority;
      target.path = remove_dot_segments(ref.path);
      target.query = ref.query;
    } else {
      if (ref.path.empty()) {
        target.path = base.path;
        target.query = ref.query ? ref.query : base.query;
      } else {
        if (ref.path.front() == '/') {
          target.path = remove_dot_segments(ref.path);
        } else {
          target.path = remove_dot_segments(merge_paths(base, ref.path));
        }
        target.query = ref.query;
      }
      target.authority = base.authority;
    }
    target.scheme = base.scheme;
  }
  target.fragment = ref.fragment;
  if (target.is_http() && target.authority && target.path.empty()) target.path = "/";
  return target;
}

std::string resolve(const Url& base, std::string_view reference) {
  return resolve(base, Url::parse_reference(reference)).str();
}

std::string percent_encode(std::string_view s) {
  static constexpr char kHex[] = "0123456789ABCDEF";
  std::string out;
  for (char ch : s) {
    const auto c = static_cast<unsigned char>(ch);
    if (std::isalnum(c) || c == '-' || c == '_' || c == '.' || c == '~') {
      out.push_back(ch);
    } else {
      out.push_back('%');
      out.push_back(kHex[c >> 4]);
      out.push_back(kHex[c & 0xF]);
    }
  }
  return out;
}

std::string percent_decode(std::string_view s) {
  auto hex = [](char c) -> int {
    if (c >= '0' && c <= '9') return c - '0';
    if (c >= 'a' && c <= 'f') return c - 'a' + 10;
    if (c >= 'A' && c <= 'F') return c - 'A' + 10;
    return -1;
  };
  std::string out;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (s[i] == '%' && i + 2 < s.size() && hex(s[i + 1]) >= 0 && hex(s[i + 2]) >= 0) {
      out.push_back(static_cast<char>(hex(s[i + 1]) * 16 + hex(s[i + 2])));
      i += 2;
    } else if (s[i] == '+') {
      out.push_back(' ');
    } else {
      out.push_back(s[i]);
    }
  }
  return out;
}

}  // namespace morpes
