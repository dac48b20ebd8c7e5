#pragma once

#include <optional>
#include <string>
#include <string_view>

namespace morpes {

// Generic URI reference split into RFC 3986 components. Absent components
// are distinguished from empty ones (`http://h/?` has an empty query).
struct Url {
  std::string scheme;  // lowercased
  std::optional<std::string> authority;
  std::string path;
  std::optional<std::string> query;
  std::optional<std::string> fragment;

  bool is_absolute() const noexcept { return !scheme.empty(); }
  bool is_http() const noexcept { return scheme == "http" || scheme == "https"; }

  // host[:port] without userinfo; empty when there is no authority.
  std::string host() const;
  std::optional<int> port() const;

  std::string str() const;

  // Throws InvalidUrlError when the input is not an absolute http(s) URL
  // with a host.
  static Url parse_http(std::string_view s);
  // Never throws; anything unparseable becomes a path-only reference.
  static Url parse_reference(std::string_view s);
};

// RFC 3986 section 5.2 reference resolution.
Url resolve(const Url& base, const Url& reference);
std::string resolve(const Url& base, std::string_view reference);

std::string percent_encode(std::string_view s);
std::string percent_decode(std::string_view s);

}  // namespace morpes
