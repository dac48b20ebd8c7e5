#include <gtest/gtest.h>

#include "morpes/errors.hpp"
#include "morpes/url.hpp"

using morpes::Url;

TEST(UrlParse, HttpComponents) {
  const Url u = Url::parse_http("HTTP://Example.com:8080/a/b?x=1#frag");
  EXPECT_EQ(u.scheme, "http");
  EXPECT_EQ(u.host(), "example.com");  // hosts compare case-insensitively
  EXPECT_EQ(u.port(), 8080);
  EXPECT_EQ(u.path, "/a/b");
  EXPECT_EQ(u.query, "x=1");
  EXPECT_EQ(u.fragment, "frag");
  EXPECT_EQ(u.str(), "http://Example.com:8080/a/b?x=1#frag");
}

TEST(UrlParse, RejectsNonHttp) {
  EXPECT_THROW(Url::parse_http("ftp://example.com/"), morpes::InvalidUrlError);
  EXPECT_THROW(Url::parse_http("/relative/path"), morpes::InvalidUrlError);
  EXPECT_THROW(Url::parse_http("http:///nohost"), morpes::InvalidUrlError);
  EXPECT_THROW(Url::parse_http(""), morpes::InvalidUrlError);
}

TEST(UrlParse, EmptyQueryIsDistinctFromAbsent) {
  EXPECT_EQ(Url::parse_reference("http://h/?").query, "");
  EXPECT_FALSE(Url::parse_reference("http://h/").query.has_value());
}

// Reference resolution examples from RFC 3986 section 5.4.
struct ResolveCase {
  const char* ref;
  const char* expect;
};

void PrintTo(const ResolveCase& c, std::ostream* os) { *os << '"' << c.ref << '"'; }

class ResolveRfc : public ::testing::TestWithParam<ResolveCase> {};

TEST_P(ResolveRfc, MatchesRfcTable) {
  const Url base = Url::parse_reference("http://a/b/c/d;p?q");
  EXPECT_EQ(morpes::resolve(base, GetParam().ref), GetParam().expect) << GetParam().ref;
}

INSTANTIATE_TEST_SUITE_P(
    Normal, ResolveRfc,
    ::testing::Values(ResolveCase{"g:h", "g:h"}, ResolveCase{"g", "http://a/b/c/g"},
                      ResolveCase{"./g", "http://a/b/c/g"}, ResolveCase{"g/", "http://a/b/c/g/"},
                      ResolveCase{"/g", "http://a/g"}, ResolveCase{"//g", "http://g/"} /* empty http path normalizes to "/" */,
                      ResolveCase{"?y", "http://a/b/c/d;p?y"}, ResolveCase{"g?y", "http://a/b/c/g?y"},
                      ResolveCase{"#s", "http://a/b/c/d;p?q#s"}, ResolveCase{"g#s", "http://a/b/c/g#s"},
                      ResolveCase{";x", "http://a/b/c/;x"}, ResolveCase{"", "http://a/b/c/d;p?q"},
                      ResolveCase{".", "http://a/b/c/"}, ResolveCase{"./", "http://a/b/c/"},
                      ResolveCase{"..", "http://a/b/"}, ResolveCase{"../g", "http://a/b/g"},
                      ResolveCase{"../..", "http://a/"}, ResolveCase{"../../g", "http://a/g"}));

INSTANTIATE_TEST_SUITE_P(
    Abnormal, ResolveRfc,
    ::testing::Values(ResolveCase{"../../../g", "http://a/g"}, ResolveCase{"/./g", "http://a/g"},
                      ResolveCase{"/../g", "http://a/g"}, ResolveCase{"g.", "http://a/b/c/g."},
                      ResolveCase{"..g", "http://a/b/c/..g"}, ResolveCase{"./../g", "http://a/b/g"},
                      ResolveCase{"g/./h", "http://a/b/c/g/h"}, ResolveCase{"g/../h", "http://a/b/c/h"},
                      ResolveCase{"g;x=1/../y", "http://a/b/c/y"}));

TEST(PercentCoding, RoundTrip) {
  const std::string raw = "http://x.test/a b?c=d&e=f/\xC3\xA9";
  const std::string enc = morpes::percent_encode(raw);
  EXPECT_EQ(enc.find(' '), std::string::npos);
  EXPECT_EQ(enc.find('&'), std::string::npos);
  EXPECT_EQ(morpes::percent_decode(enc), raw);
  EXPECT_EQ(morpes::percent_decode("a+b%20c"), "a b c");
  EXPECT_EQ(morpes::percent_decode("bad%zz"), "bad%zz");
}
