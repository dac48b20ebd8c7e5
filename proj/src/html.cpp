#include "morpes/html.hpp"

#include <iconv.h>

#include <algorithm>
#include <array>
#include <cerrno>
#include <cstdint>
#include <unordered_map>

#include "morpes/text.hpp"

namespace morpes::html {
namespace {

constexpr std::string_view kVoid[] = {"area", "base", "br",    "col",   "embed", "hr",
                                      "img",  "input", "link", "meta",  "param", "source",
                                      "track", "wbr", "basefont", "bgsound", "keygen"};

constexpr std::string_view kRawText[] = {"script", "style",   "textarea", "title",
                                         "xmp",    "iframe",  "noembed",  "noframes",
                                         "noscript"};

constexpr std::string_view kBlock[] = {
    "address", "article", "aside",    "blockquote", "caption", "center",  "dd",     "details",
    "dialog",  "dir",     "div",      "dl",         "dt",      "fieldset", "figcaption",
    "figure",  "footer",  "form",     "h1",         "h2",      "h3",      "h4",     "h5",
    "h6",      "header",  "hgroup",   "hr",         "li",      "main",    "menu",   "nav",
    "ol",      "p",       "pre",      "section",    "summary", "table",   "tbody",  "td",
    "tfoot",   "th",      "thead",    "tr",         "ul",      "listing", "search"};

constexpr std::string_view kHeadContent[] = {"meta", "link",     "title",    "style",
                                             "script", "base",   "noscript", "template",
                                             "basefont", "bgsound"};

// Elements whose start tag closes an open <p>.
constexpr std::string_view kClosesP[] = {
    "address", "article", "aside", "blockquote", "center",  "details", "dialog", "dir",
    "div",     "dl",      "fieldset", "figcaption", "figure", "footer", "form",  "h1",
    "h2",      "h3",      "h4",    "h5",         "h6",      "header",  "hgroup", "hr",
    "main",    "menu",    "nav",   "ol",         "p",       "pre",     "section", "summary",
    "table",   "ul",      "li",    "dd",         "dt",      "listing", "search", "xmp"};

constexpr std::string_view kScopeBarrier[] = {"html",  "body",   "table",   "td",       "th",
                                              "caption", "button", "object", "template",
                                              "marquee", "applet"};

constexpr std::string_view kListScopeStop[] = {
    "ul",     "ol",    "menu",  "dl",     "table", "td",   "th",     "body",
    "html",   "section", "article", "nav", "aside", "header", "footer", "main",
    "blockquote", "form", "fieldset", "figure", "details", "button"};

template <std::size_t N>
bool in(const std::string_view (&set)[N], std::string_view tag) noexcept {
  return std::find(std::begin(set), std::end(set), tag) != std::end(set);
}

bool is_space(char c) noexcept {
  return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f';
}

bool is_alpha(char c) noexcept { return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z'); }
bool is_alnum(char c) noexcept { return is_alpha(c) || (c >= '0' && c <= '9'); }

bool is_whitespace_only(std::string_view s) noexcept {
  return std::all_of(s.begin(), s.end(), is_space);
}

void append_utf8(std::string& out, std::uint32_t cp) {
  if (cp == 0 || cp > 0x10FFFF || (cp >= 0xD800 && cp <= 0xDFFF)) cp = 0xFFFD;
  if (cp < 0x80) {
    out.push_back(static_cast<char>(cp));
  } else if (cp < 0x800) {
    out.push_back(static_cast<char>(0xC0 | (cp >> 6)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  } else if (cp < 0x10000) {
    out.push_back(static_cast<char>(0xE0 | (cp >> 12)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  } else {
    out.push_back(static_cast<char>(0xF0 | (cp >> 18)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 12) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  }
}

const std::unordered_map<std::string_view, std::uint32_t>& named_entities() {
  static const auto table = [] {
    std::unordered_map<std::string_view, std::uint32_t> m = {
        {"amp", 38},      {"lt", 60},       {"gt", 62},       {"quot", 34},     {"apos", 39},
        {"nbsp", 160},    {"iexcl", 161},   {"cent", 162},    {"pound", 163},   {"curren", 164},
        {"yen", 165},     {"brvbar", 166},  {"sect", 167},    {"uml", 168},     {"copy", 169},
        {"ordf", 170},    {"laquo", 171},   {"not", 172},     {"shy", 173},     {"reg", 174},
        {"macr", 175},    {"deg", 176},     {"plusmn", 177},  {"sup2", 178},    {"sup3", 179},
        {"acute", 180},   {"micro", 181},   {"para", 182},    {"middot", 183},  {"cedil", 184},
        {"sup1", 185},    {"ordm", 186},    {"raquo", 187},   {"frac14", 188},  {"frac12", 189},
        {"frac34", 190},  {"iquest", 191},  {"OElig", 338},   {"oelig", 339},   {"Scaron", 352},
        {"scaron", 353},  {"Yuml", 376},    {"fnof", 402},    {"circ", 710},    {"tilde", 732},
        {"ensp", 8194},   {"emsp", 8195},   {"thinsp", 8201}, {"zwnj", 8204},   {"zwj", 8205},
        {"ndash", 8211},  {"mdash", 8212},  {"lsquo", 8216},  {"rsquo", 8217},  {"sbquo", 8218},
        {"ldquo", 8220},  {"rdquo", 8221},  {"bdquo", 8222},  {"dagger", 8224}, {"Dagger", 8225},
        {"bull", 8226},   {"hellip", 8230}, {"permil", 8240}, {"prime", 8242},  {"Prime", 8243},
        {"lsaquo", 8249}, {"rsaquo", 8250}, {"euro", 8364},   {"trade", 8482},  {"larr", 8592},
        {"uarr", 8593},   {"rarr", 8594},   {"darr", 8595},   {"harr", 8596},   {"minus", 8722},
        {"infin", 8734},  {"ne", 8800},     {"le", 8804},     {"ge", 8805},     {"loz", 9674},
        {"spades", 9824}, {"clubs", 9827},  {"hearts", 9829}, {"diams", 9830}};
    // Latin-1 letters U+00C0..U+00FF in code point order.
    static constexpr std::string_view kLatin1[] = {
        "Agrave", "Aacute", "Acirc",  "Atilde", "Auml",   "Aring",  "AElig",  "Ccedil",
        "Egrave", "Eacute", "Ecirc",  "Euml",   "Igrave", "Iacute", "Icirc",  "Iuml",
        "ETH",    "Ntilde", "Ograve", "Oacute", "Ocirc",  "Otilde", "Ouml",   "times",
        "Oslash", "Ugrave", "Uacute", "Ucirc",  "Uuml",   "Yacute", "THORN",  "szlig",
        "agrave", "aacute", "acirc",  "atilde", "auml",   "aring",  "aelig",  "ccedil",
        "egrave", "eacute", "ecirc",  "euml",   "igrave", "iacute", "icirc",  "iuml",
        "eth",    "ntilde", "ograve", "oacute", "ocirc",  "otilde", "ouml",   "divide",
        "oslash", "ugrave", "uacute", "ucirc",  "uuml",   "yacute", "thorn",  "yuml"};
    for (std::uint32_t i = 0; i < std::size(kLatin1); ++i) m.emplace(kLatin1[i], 0xC0 + i);
    return m;
  }();
  return table;
}

// Entities browsers accept without the trailing semicolon.
constexpr std::string_view kLegacyEntities[] = {"amp", "lt", "gt", "quot", "nbsp", "copy", "reg"};

// --- tree construction -----------------------------------------------------

class TreeBuilder {
 public:
  TreeBuilder() : root_(std::make_unique<Node>()) { root_->type = NodeType::Document; }

  void start_tag(std::string name, std::vector<Attribute> attrs, bool self_closing);
  void end_tag(std::string_view name);
  void text(std::string data);
  void comment(std::string data);
  // Raw text elements are delivered complete (start tag + content).
  void raw_element(std::string name, std::vector<Attribute> attrs, std::string content);

  Document finish();

 private:
  Node* current() { return stack_.empty() ? root_.get() : stack_.back(); }
  void ensure_html();
  void ensure_head();
  void ensure_body();
  Node* insert(std::string name, std::vector<Attribute> attrs);
  void pop_until(const Node* node);
  void close_p_in_scope();
  void close_list_item(std::initializer_list<std::string_view> items);
  void pop_while_in(std::initializer_list<std::string_view> tags,
                    std::initializer_list<std::string_view> stop);
  bool in_body_content_before_body(std::string_view name) const;

  std::unique_ptr<Node> root_;
  Node* html_ = nullptr;
  Node* head_ = nullptr;
  Node* body_ = nullptr;
  std::vector<Node*> stack_;
};

void merge_attributes(Node& el, std::vector<Attribute>& attrs) {
  for (auto& a : attrs) {
    if (!el.has_attribute(a.name)) el.attributes.push_back(std::move(a));
  }
}

void TreeBuilder::ensure_html() {
  if (html_) return;
  html_ = root_->append(Node::make_element("html"));
}

void TreeBuilder::ensure_head() {
  ensure_html();
  if (head_) return;
  head_ = html_->append(Node::make_element("head"));
}

void TreeBuilder::ensure_body() {
  ensure_head();
  if (body_) return;
  body_ = html_->append(Node::make_element("body"));
  stack_.assign({body_});
}

Node* TreeBuilder::insert(std::string name, std::vector<Attribute> attrs) {
  auto el = Node::make_element(std::move(name));
  el->attributes = std::move(attrs);
  return current()->append(std::move(el));
}

void TreeBuilder::pop_until(const Node* node) {
  while (!stack_.empty()) {
    Node* top = stack_.back();
    if (top == body_) return;
    stack_.pop_back();
    if (top == node) return;
  }
}

void TreeBuilder::close_p_in_scope() {
  for (auto it = stack_.rbegin(); it != stack_.rend(); ++it) {
    if ((*it)->tag == "p") {
      pop_until(*it);
      return;
    }
    if (in(kScopeBarrier, (*it)->tag)) return;
  }
}

void TreeBuilder::close_list_item(std::initializer_list<std::string_view> items) {
  for (auto it = stack_.rbegin(); it != stack_.rend(); ++it) {
    if (std::find(items.begin(), items.end(), (*it)->tag) != items.end()) {
      pop_until(*it);
      return;
    }
    if (in(kListScopeStop, (*it)->tag)) return;
  }
}

void TreeBuilder::pop_while_in(std::initializer_list<std::string_view> tags,
                               std::initializer_list<std::string_view> stop) {
  for (auto it = stack_.rbegin(); it != stack_.rend(); ++it) {
    const auto& t = (*it)->tag;
    if (std::find(stop.begin(), stop.end(), t) != stop.end() || *it == body_) return;
    if (std::find(tags.begin(), tags.end(), t) != tags.end()) {
      pop_until(*it);
      return;
    }
  }
}

void TreeBuilder::start_tag(std::string name, std::vector<Attribute> attrs, bool self_closing) {
  if (name == "html") {
    ensure_html();
    merge_attributes(*html_, attrs);
    return;
  }
  if (name == "head") {
    if (!body_) {
      ensure_head();
      stack_.assign({head_});
    }
    return;
  }
  if (name == "body") {
    if (body_) {
      merge_attributes(*body_, attrs);
    } else {
      ensure_body();
      body_->attributes = std::move(attrs);
    }
    return;
  }
  if (!body_) {
    if (in(kHeadContent, name)) {
      ensure_head();
      if (stack_.empty()) stack_.assign({head_});
      Node* el = insert(std::move(name), std::move(attrs));
      if (!self_closing && !is_void_element(el->tag)) stack_.push_back(el);
      return;
    }
    ensure_body();
  }

  if (in(kClosesP, name)) close_p_in_scope();
  if (name == "li") close_list_item({"li"});
  if (name == "dd" || name == "dt") close_list_item({"dd", "dt"});
  if (is_heading(name) && is_heading(current()->tag)) stack_.pop_back();
  if (name == "option" && current()->tag == "option") stack_.pop_back();
  if (name == "tr") pop_while_in({"tr"}, {"table", "tbody", "thead", "tfoot"});
  if (name == "td" || name == "th") pop_while_in({"td", "th"}, {"tr", "table"});
  if (name == "tbody" || name == "thead" || name == "tfoot") {
    pop_while_in({"tbody", "thead", "tfoot"}, {"table"});
  }
  if (name == "a") pop_while_in({"a"}, {"table", "td", "th", "button"});

  Node* el = insert(std::move(name), std::move(attrs));
  if (!self_closing && !is_void_element(el->tag)) stack_.push_back(el);
}

void TreeBuilder::end_tag(std::string_view name) {
  if (name == "html" || name == "body") return;
  if (name == "head") {
    if (!body_) stack_.clear();
    return;
  }
  if (name == "br") {
    start_tag("br", {}, true);
    return;
  }
  const bool table_part = name == "table" || name == "td" || name == "th" || name == "tr" ||
                          name == "tbody" || name == "thead" || name == "tfoot" ||
                          name == "caption";
  for (auto it = stack_.rbegin(); it != stack_.rend(); ++it) {
    Node* node = *it;
    if (node->tag == name) {
      if (node == body_ || node == head_) return;
      pop_until(node);
      return;
    }
    if (node == body_ || node == head_) return;
    // Stray inline end tags never close table cells.
    if (!table_part && (node->tag == "td" || node->tag == "th" || node->tag == "table" ||
                        node->tag == "caption")) {
      return;
    }
  }
}

void TreeBuilder::text(std::string data) {
  if (data.empty()) return;
  if (!body_) {
    if (is_whitespace_only(data)) return;
    if (stack_.empty() || stack_.back() == head_) ensure_body();
  }
  Node* parent = current();
  if (!parent->children.empty() && parent->children.back()->is_text()) {
    parent->children.back()->data += data;
    return;
  }
  parent->append(Node::make_text(std::move(data)));
}

void TreeBuilder::comment(std::string data) {
  auto node = std::make_unique<Node>();
  node->type = NodeType::Comment;
  node->data = std::move(data);
  current()->append(std::move(node));
}

void TreeBuilder::raw_element(std::string name, std::vector<Attribute> attrs, std::string content) {
  start_tag(std::move(name), std::move(attrs), false);
  Node* el = current();
  if (!content.empty()) el->append(Node::make_text(std::move(content)));
  if (el != body_ && el != root_.get()) pop_until(el);
}

Document TreeBuilder::finish() {
  ensure_body();
  return Document(std::move(root_));
}

// --- tokenizer ---------------------------------------------------------------

class Tokenizer {
 public:
  Tokenizer(std::string_view input, TreeBuilder& builder) : in_(input), out_(builder) {}

  void run();

 private:
  bool starts_with_ci(std::size_t at, std::string_view what) const;
  void read_start_tag();
  void read_end_tag();
  void read_raw_content(std::string name, std::vector<Attribute> attrs);

  std::string_view in_;
  std::size_t pos_ = 0;
  TreeBuilder& out_;
};

bool Tokenizer::starts_with_ci(std::size_t at, std::string_view what) const {
  if (at + what.size() > in_.size()) return false;
  for (std::size_t i = 0; i < what.size(); ++i) {
    char c = in_[at + i];
    if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
    if (c != what[i]) return false;
  }
  return true;
}

void Tokenizer::run() {
  std::string pending_text;
  auto flush_text = [&] {
    if (!pending_text.empty()) out_.text(decode_entities(pending_text));
    pending_text.clear();
  };
  while (pos_ < in_.size()) {
    const char c = in_[pos_];
    if (c != '<') {
      auto next = in_.find('<', pos_);
      if (next == std::string_view::npos) next = in_.size();
      pending_text.append(in_.substr(pos_, next - pos_));
      pos_ = next;
      continue;
    }
    if (in_.substr(pos_).starts_with("<!--")) {
      flush_text();
      const std::size_t body_start = pos_ + 4;
      if (in_.substr(body_start).starts_with(">")) {
        // "<!-->" is an empty comment
        out_.comment({});
        pos_ = body_start + 1;
        continue;
      }
      const std::size_t end = in_.find("-->", body_start);
      if (end == std::string_view::npos) {
        out_.comment(std::string(in_.substr(body_start)));
        pos_ = in_.size();
      } else {
        out_.comment(std::string(in_.substr(body_start, end - body_start)));
        pos_ = end + 3;
      }
      continue;
    }
    if (pos_ + 1 < in_.size() && (in_[pos_ + 1] == '!' || in_[pos_ + 1] == '?')) {
      flush_text();
      auto end = in_.find('>', pos_);
      pos_ = end == std::string_view::npos ? in_.size() : end + 1;
      continue;
    }
    if (pos_ + 2 < in_.size() && in_[pos_ + 1] == '/' && is_alpha(in_[pos_ + 2])) {
      flush_text();
      read_end_tag();
      continue;
    }
    if (pos_ + 1 < in_.size() && is_alpha(in_[pos_ + 1])) {
      flush_text();
      read_start_tag();
      continue;
    }
    if (pos_ + 1 < in_.size() && in_[pos_ + 1] == '/') {
      // "</>" is dropped, "</ x>" becomes a bogus comment.
      auto end = in_.find('>', pos_);
      pos_ = end == std::string_view::npos ? in_.size() : end + 1;
      continue;
    }
    pending_text.push_back('<');
    ++pos_;
  }
  flush_text();
}

void Tokenizer::read_end_tag() {
  std::size_t p = pos_ + 2;
  std::string name;
  while (p < in_.size() && !is_space(in_[p]) && in_[p] != '/' && in_[p] != '>') {
    name.push_back(in_[p]);
    ++p;
  }
  auto end = in_.find('>', p);
  pos_ = end == std::string_view::npos ? in_.size() : end + 1;
  out_.end_tag(text::to_lower_ascii(name));
}

void Tokenizer::read_start_tag() {
  std::size_t p = pos_ + 1;
  std::string name;
  while (p < in_.size() && !is_space(in_[p]) && in_[p] != '/' && in_[p] != '>') {
    name.push_back(in_[p]);
    ++p;
  }
  name = text::to_lower_ascii(name);
  std::vector<Attribute> attrs;
  bool self_closing = false;
  while (true) {
    while (p < in_.size() && (is_space(in_[p]) || in_[p] == '/')) {
      self_closing = in_[p] == '/';
      ++p;
    }
    if (p >= in_.size()) {
      // EOF inside a tag: the tag is dropped.
      pos_ = in_.size();
      return;
    }
    if (in_[p] == '>') {
      ++p;
      break;
    }
    self_closing = false;
    std::string attr_name;
    do {
      attr_name.push_back(in_[p]);
      ++p;
    } while (p < in_.size() && !is_space(in_[p]) && in_[p] != '=' && in_[p] != '>' &&
             in_[p] != '/');
    while (p < in_.size() && is_space(in_[p])) ++p;
    std::string value;
    if (p < in_.size() && in_[p] == '=') {
      ++p;
      while (p < in_.size() && is_space(in_[p])) ++p;
      if (p < in_.size() && (in_[p] == '"' || in_[p] == '\'')) {
        const char quote = in_[p++];
        auto close = in_.find(quote, p);
        if (close == std::string_view::npos) {
          pos_ = in_.size();
          return;
        }
        value = std::string(in_.substr(p, close - p));
        p = close + 1;
      } else {
        while (p < in_.size() && !is_space(in_[p]) && in_[p] != '>') value.push_back(in_[p++]);
      }
    }
    attr_name = text::to_lower_ascii(attr_name);
    const bool duplicate = std::any_of(attrs.begin(), attrs.end(),
                                       [&](const Attribute& a) { return a.name == attr_name; });
    if (!duplicate) attrs.push_back({std::move(attr_name), decode_entities(value)});
  }
  pos_ = p;
  if (is_raw_text_element(name) && !self_closing) {
    read_raw_content(std::move(name), std::move(attrs));
    return;
  }
  out_.start_tag(std::move(name), std::move(attrs), self_closing);
}

void Tokenizer::read_raw_content(std::string name, std::vector<Attribute> attrs) {
  std::size_t p = pos_;
  std::size_t content_end = in_.size();
  std::size_t resume = in_.size();
  while (p < in_.size()) {
    auto lt = in_.find("</", p);
    if (lt == std::string_view::npos) break;
    const std::size_t after = lt + 2 + name.size();
    if (starts_with_ci(lt + 2, name) &&
        (after >= in_.size() || is_space(in_[after]) || in_[after] == '/' || in_[after] == '>')) {
      content_end = lt;
      auto gt = in_.find('>', after);
      resume = gt == std::string_view::npos ? in_.size() : gt + 1;
      break;
    }
    p = lt + 2;
  }
  std::string content(in_.substr(pos_, content_end - pos_));
  // textarea and title are RCDATA: character references are decoded.
  if (name == "textarea" || name == "title") content = decode_entities(content);
  pos_ = resume;
  out_.raw_element(std::move(name), std::move(attrs), std::move(content));
}

// --- serialization -----------------------------------------------------------

void serialize_into(const Node& node, const AttributeRewriter& rewrite, std::string& out) {
  switch (node.type) {
    case NodeType::Document:
      for (const auto& child : node.children) serialize_into(*child, rewrite, out);
      return;
    case NodeType::Text:
      if (node.parent && is_raw_text_element(node.parent->tag) && node.parent->tag != "textarea" &&
          node.parent->tag != "title") {
        out += node.data;
      } else {
        out += escape_text(node.data);
      }
      return;
    case NodeType::Comment:
      out += "<!--";
      out += node.data;
      out += "-->";
      return;
    case NodeType::Element:
      out += '<';
      out += node.tag;
      for (const auto& attr : node.attributes) {
        out += ' ';
        out += attr.name;
        out += "=\"";
        out += escape_attribute(rewrite ? rewrite(node, attr) : attr.value);
        out += '"';
      }
      out += '>';
      if (is_void_element(node.tag)) return;
      for (const auto& child : node.children) serialize_into(*child, rewrite, out);
      out += "</";
      out += node.tag;
      out += '>';
      return;
  }
}

// --- charset -----------------------------------------------------------------

std::string normalize_charset(std::string_view cs) {
  std::string c = text::to_lower_ascii(text::normalize_whitespace(cs));
  std::erase_if(c, [](char ch) { return ch == '"' || ch == '\''; });
  if (c == "utf8" || c == "unicode-1-1-utf-8") return "utf-8";
  // Browsers treat latin1 labels as windows-1252.
  if (c == "latin1" || c == "iso-8859-1" || c == "iso8859-1" || c == "l1" || c == "us-ascii" ||
      c == "ascii" || c == "cp1252") {
    return "windows-1252";
  }
  return c;
}

std::string charset_from_content(std::string_view content) {
  auto lower = text::to_lower_ascii(content);
  auto at = lower.find("charset");
  if (at == std::string::npos) return {};
  at += 7;
  while (at < lower.size() && is_space(lower[at])) ++at;
  if (at >= lower.size() || lower[at] != '=') return {};
  ++at;
  while (at < lower.size() && (is_space(lower[at]) || lower[at] == '"' || lower[at] == '\'')) ++at;
  std::size_t end = at;
  while (end < lower.size() && !is_space(lower[end]) && lower[end] != ';' && lower[end] != '"' &&
         lower[end] != '\'') {
    ++end;
  }
  return lower.substr(at, end - at);
}

std::string repair_utf8(std::string_view s) {
  std::string out;
  out.reserve(s.size());
  std::size_t i = 0;
  while (i < s.size()) {
    const auto c = static_cast<unsigned char>(s[i]);
    std::size_t len = 0;
    std::uint32_t cp = 0;
    if (c < 0x80) {
      out.push_back(static_cast<char>(c));
      ++i;
      continue;
    }
    if (c >= 0xC2 && c <= 0xDF) {
      len = 2;
      cp = c & 0x1F;
    } else if (c >= 0xE0 && c <= 0xEF) {
      len = 3;
      cp = c & 0x0F;
    } else if (c >= 0xF0 && c <= 0xF4) {
      len = 4;
      cp = c & 0x07;
    }
    bool ok = len > 0 && i + len <= s.size();
    for (std::size_t k = 1; ok && k < len; ++k) {
      const auto cc = static_cast<unsigned char>(s[i + k]);
      if ((cc & 0xC0) != 0x80) ok = false;
      cp = (cp << 6) | (cc & 0x3F);
    }
    if (ok) {
      const bool overlong = (len == 3 && cp < 0x800) || (len == 4 && cp < 0x10000);
      if (overlong || cp > 0x10FFFF || (cp >= 0xD800 && cp <= 0xDFFF)) ok = false;
    }
    if (ok) {
      out.append(s.substr(i, len));
      i += len;
    } else {
      append_utf8(out, 0xFFFD);
      ++i;
    }
  }
  return out;
}

std::string iconv_to_utf8(std::string_view bytes, const std::string& charset, bool& ok) {
  iconv_t cd = iconv_open("UTF-8", charset.c_str());
  if (cd == reinterpret_cast<iconv_t>(-1)) {
    ok = false;
    return {};
  }
  std::string out;
  std::string buffer(4096, '\0');
  char* in = const_cast<char*>(bytes.data());
  std::size_t in_left = bytes.size();
  while (in_left > 0) {
    char* dst = buffer.data();
    std::size_t dst_left = buffer.size();
    const std::size_t r = iconv(cd, &in, &in_left, &dst, &dst_left);
    out.append(buffer.data(), buffer.size() - dst_left);
    if (r == static_cast<std::size_t>(-1)) {
      if (errno == E2BIG) continue;
      // EILSEQ or EINVAL: replace one byte and carry on.
      append_utf8(out, 0xFFFD);
      ++in;
      --in_left;
      iconv(cd, nullptr, nullptr, nullptr, nullptr);
    }
  }
  iconv_close(cd);
  ok = true;
  return out;
}

}  // namespace

// --- Node / Document -----------------------------------------------------------

const std::string* Node::attribute(std::string_view name) const noexcept {
  for (const auto& a : attributes) {
    if (a.name == name) return &a.value;
  }
  return nullptr;
}

Node* Node::append(std::unique_ptr<Node> child) {
  child->parent = this;
  children.push_back(std::move(child));
  return children.back().get();
}

std::unique_ptr<Node> Node::remove_child(const Node* child) {
  for (auto it = children.begin(); it != children.end(); ++it) {
    if (it->get() == child) {
      auto owned = std::move(*it);
      children.erase(it);
      owned->parent = nullptr;
      return owned;
    }
  }
  return nullptr;
}

const Node* Node::find_first(std::string_view tag_name) const noexcept {
  if (is_element(tag_name)) return this;
  for (const auto& child : children) {
    if (const Node* found = child->find_first(tag_name)) return found;
  }
  return nullptr;
}

std::unique_ptr<Node> Node::make_element(std::string tag) {
  auto n = std::make_unique<Node>();
  n->type = NodeType::Element;
  n->tag = std::move(tag);
  return n;
}

std::unique_ptr<Node> Node::make_text(std::string data) {
  auto n = std::make_unique<Node>();
  n->type = NodeType::Text;
  n->data = std::move(data);
  return n;
}

Document::Document(std::unique_ptr<Node> root) : root_(std::move(root)) {
  html_ = const_cast<Node*>(root_->find_first("html"));
  head_ = const_cast<Node*>(html_->find_first("head"));
  body_ = const_cast<Node*>(html_->find_first("body"));
}

Document parse(std::string_view markup) {
  TreeBuilder builder;
  Tokenizer(markup, builder).run();
  return builder.finish();
}

bool is_void_element(std::string_view tag) noexcept { return in(kVoid, tag); }
bool is_raw_text_element(std::string_view tag) noexcept { return in(kRawText, tag); }
bool is_block_element(std::string_view tag) noexcept { return in(kBlock, tag); }

bool is_heading(std::string_view tag) noexcept {
  return tag.size() == 2 && tag[0] == 'h' && tag[1] >= '1' && tag[1] <= '6';
}

std::string decode_entities(std::string_view s) {
  if (s.find('&') == std::string_view::npos) return std::string(s);
  std::string out;
  out.reserve(s.size());
  const auto& named = named_entities();
  std::size_t i = 0;
  while (i < s.size()) {
    if (s[i] != '&') {
      out.push_back(s[i++]);
      continue;
    }
    if (i + 1 < s.size() && s[i + 1] == '#') {
      std::size_t p = i + 2;
      const bool hex = p < s.size() && (s[p] == 'x' || s[p] == 'X');
      if (hex) ++p;
      std::uint64_t cp = 0;
      std::size_t digits = 0;
      while (p < s.size()) {
        const char c = s[p];
        int d = -1;
        if (c >= '0' && c <= '9') d = c - '0';
        else if (hex && c >= 'a' && c <= 'f') d = c - 'a' + 10;
        else if (hex && c >= 'A' && c <= 'F') d = c - 'A' + 10;
        if (d < 0) break;
        cp = std::min<std::uint64_t>(cp * (hex ? 16 : 10) + static_cast<unsigned>(d), 0x110000);
        ++digits;
        ++p;
      }
      if (digits == 0) {
        out.push_back(s[i++]);
        continue;
      }
      if (p < s.size() && s[p] == ';') ++p;
      append_utf8(out, static_cast<std::uint32_t>(cp));
      i = p;
      continue;
    }
    std::size_t p = i + 1;
    while (p < s.size() && is_alnum(s[p]) && p - i <= 32) ++p;
    const std::string_view name = s.substr(i + 1, p - i - 1);
    if (p < s.size() && s[p] == ';') {
      if (auto it = named.find(name); it != named.end()) {
        append_utf8(out, it->second);
        i = p + 1;
        continue;
      }
    }
    bool matched = false;
    for (auto legacy : kLegacyEntities) {
      if (name == legacy) {
        append_utf8(out, named.at(legacy));
        i = p;
        matched = true;
        break;
      }
    }
    if (!matched) out.push_back(s[i++]);
  }
  return out;
}

std::string escape_text(std::string_view s) {
  std::string out;
  out.reserve(s.size());
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      default: out.push_back(c);
    }
  }
  return out;
}

std::string escape_attribute(std::string_view s) {
  std::string out;
  out.reserve(s.size());
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '"': out += "&quot;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      default: out.push_back(c);
    }
  }
  return out;
}

std::string serialize(const Node& node, const AttributeRewriter& rewrite) {
  std::string out;
  serialize_into(node, rewrite, out);
  return out;
}

std::string sniff_meta_charset(std::string_view bytes) {
  const auto head = text::to_lower_ascii(bytes.substr(0, std::min<std::size_t>(bytes.size(), 1024)));
  std::size_t at = 0;
  while ((at = head.find("<meta", at)) != std::string::npos) {
    auto end = head.find('>', at);
    if (end == std::string::npos) end = head.size();
    const auto tag = std::string_view(head).substr(at, end - at);
    at = end;
    if (auto cs = charset_from_content(tag); !cs.empty()) return cs;
  }
  return {};
}

std::string decode_to_utf8(std::string_view bytes, std::string_view declared) {
  std::string charset;
  if (bytes.starts_with("\xEF\xBB\xBF")) {
    bytes.remove_prefix(3);
    charset = "utf-8";
  } else if (bytes.starts_with("\xFF\xFE")) {
    charset = "utf-16le";
    bytes.remove_prefix(2);
  } else if (bytes.starts_with("\xFE\xFF")) {
    charset = "utf-16be";
    bytes.remove_prefix(2);
  }
  if (charset.empty()) charset = normalize_charset(declared);
  if (charset.empty()) charset = normalize_charset(sniff_meta_charset(bytes));
  if (charset.empty() || charset == "utf-8") return repair_utf8(bytes);
  bool ok = false;
  auto converted = iconv_to_utf8(bytes, text::to_lower_ascii(charset) == "windows-1252"
                                            ? std::string("WINDOWS-1252")
                                            : charset,
                                 ok);
  if (!ok) return repair_utf8(bytes);
  return repair_utf8(converted);
}

}  // namespace morpes::html
