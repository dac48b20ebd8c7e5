#pragma once

#include <functional>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

// A small error-tolerant HTML parser. It never rejects input: unknown tags
// are kept, stray end tags are dropped, unclosed elements are closed at EOF,
// and the usual implied end tags (p, li, dt/dd, tr, td/th, option) are
// inserted. The resulting tree always has the shape
// document > html > (head, body).
namespace morpes::html {

enum class NodeType { Document, Element, Text, Comment };

struct Attribute {
  std::string name;  // lowercased
  std::string value;  // entity-decoded
};

class Node {
 public:
  NodeType type = NodeType::Element;
  std::string tag;    // lowercased element name; empty for non-elements
  std::string data;   // text or comment content (entity-decoded for text)
  std::vector<Attribute> attributes;
  Node* parent = nullptr;
  std::vector<std::unique_ptr<Node>> children;

  bool is_element() const noexcept { return type == NodeType::Element; }
  bool is_element(std::string_view name) const noexcept {
    return type == NodeType::Element && tag == name;
  }
  bool is_text() const noexcept { return type == NodeType::Text; }

  const std::string* attribute(std::string_view name) const noexcept;
  bool has_attribute(std::string_view name) const noexcept { return attribute(name) != nullptr; }

  Node* append(std::unique_ptr<Node> child);
  std::unique_ptr<Node> remove_child(const Node* child);

  // Depth-first pre-order search.
  const Node* find_first(std::string_view tag_name) const noexcept;

  static std::unique_ptr<Node> make_element(std::string tag);
  static std::unique_ptr<Node> make_text(std::string data);
};

class Document {
 public:
  explicit Document(std::unique_ptr<Node> root);

  const Node& root() const noexcept { return *root_; }
  Node& root() noexcept { return *root_; }
  const Node& html() const noexcept { return *html_; }
  const Node& head() const noexcept { return *head_; }
  const Node& body() const noexcept { return *body_; }
  Node& body() noexcept { return *body_; }

 private:
  std::unique_ptr<Node> root_;
  Node* html_;
  Node* head_;
  Node* body_;
};

Document parse(std::string_view markup);

// Element classification.
bool is_void_element(std::string_view tag) noexcept;
bool is_raw_text_element(std::string_view tag) noexcept;
bool is_block_element(std::string_view tag) noexcept;
bool is_heading(std::string_view tag) noexcept;

// Decodes character references (&amp; &#39; &#x27; and the common named set).
std::string decode_entities(std::string_view s);
std::string escape_text(std::string_view s);
std::string escape_attribute(std::string_view s);

// Optional hook rewriting attribute values during serialization; receives
// (element, attribute) and returns the value to emit.
using AttributeRewriter = std::function<std::string(const Node&, const Attribute&)>;

std::string serialize(const Node& node, const AttributeRewriter& rewrite = {});

// Transcodes fetched bytes to UTF-8. The charset comes from `declared`
// (usually the Content-Type parameter), else a BOM, else a <meta> charset
// in the first 1024 bytes, else UTF-8. Undecodable bytes become U+FFFD.
std::string decode_to_utf8(std::string_view bytes, std::string_view declared = {});

// Charset sniffed from <meta charset> or <meta http-equiv content=...>.
std::string sniff_meta_charset(std::string_view bytes);

}  // namespace morpes::html
