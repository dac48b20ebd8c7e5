#include <algorithm>
#include <chrono>

#include "httplib.h"
#include "morpes/errors.hpp"
#include "morpes/segmenter.hpp"
#include "morpes/text.hpp"

namespace morpes {
namespace {

bool is_html_media_type(std::string_view content_type) {
  auto media = text::to_lower_ascii(content_type.substr(0, content_type.find(';')));
  media = text::normalize_whitespace(media);
  return media.empty() || media == "text/html" || media == "application/xhtml+xml";
}

std::string charset_param(std::string_view content_type) {
  const auto lower = text::to_lower_ascii(content_type);
  auto at = lower.find("charset=");
  if (at == std::string::npos) return {};
  at += 8;
  auto end = lower.find(';', at);
  std::string cs = lower.substr(at, end == std::string::npos ? std::string::npos : end - at);
  std::erase_if(cs, [](char c) { return c == '"' || c == '\'' || c == ' '; });
  return cs;
}

}  // namespace

RawPage fetch_page(std::string_view url, std::chrono::milliseconds timeout) {
  const Url target = Url::parse_http(url);
  const std::string origin = target.scheme + "://" + *target.authority;
  std::string path = target.path;
  if (target.query) path += "?" + *target.query;

  httplib::Client client(origin);
  if (!client.is_valid()) throw FetchError(0, "unsupported URL: " + std::string(url));
  const auto secs = std::chrono::duration_cast<std::chrono::seconds>(timeout);
  const auto usecs = std::chrono::duration_cast<std::chrono::microseconds>(timeout - secs);
  client.set_connection_timeout(secs.count(), usecs.count());
  client.set_read_timeout(secs.count(), usecs.count());
  client.set_write_timeout(secs.count(), usecs.count());
  client.set_follow_location(true);

  const httplib::Headers headers = {
      {"User-Agent", "morpes/1.0"},
      {"Accept", "text/html,application/xhtml+xml;q=0.9,*/*;q=0.1"},
  };
  const auto started = std::chrono::steady_clock::now();
  auto result = client.Get(path, headers);
  if (!result) {
    const auto err = result.error();
    const auto elapsed = std::chrono::steady_clock::now() - started;
    if (err == httplib::Error::ConnectionTimeout ||
        (err == httplib::Error::Read && elapsed >= timeout)) {
      throw TimeoutError("timed out fetching " + std::string(url));
    }
    throw FetchError(0, httplib::to_string(err) + " fetching " + std::string(url));
  }
  if (result->status < 200 || result->status > 299) {
    throw FetchError(result->status,
                     "upstream returned HTTP " + std::to_string(result->status) + " for " +
                         std::string(url));
  }
  const std::string content_type = result->get_header_value("Content-Type");
  if (!is_html_media_type(content_type)) {
    throw ContentTypeError("upstream content type is not HTML: " + content_type);
  }

  RawPage page;
  page.url = result->location.empty() ? target.str() : resolve(target, result->location);
  page.html = html::decode_to_utf8(result->body, charset_param(content_type));
  page.fetched_at = now_utc();
  return page;
}

}  // namespace morpes
