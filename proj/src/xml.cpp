#include "traffic/xml.hpp"

#include <cctype>
#include <stdexcept>

namespace traffic {

const XmlNode* XmlNode::child(std::string_view child_name) const {
  for (const auto& c : children)
    if (c.name == child_name) return &c;
  return nullptr;
}

std::vector<const XmlNode*> XmlNode::children_named(std::string_view child_name) const {
  std::vector<const XmlNode*> out;
  for (const auto& c : children)
    if (c.name == child_name) out.push_back(&c);
  return out;
}

const std::string* XmlNode::attr(std::string_view attr_name) const {
  auto it = attrs.find(std::string(attr_name));
  return it == attrs.end() ? nullptr : &it->second;
}

std::string xml_escape(std::string_view raw) {
  std::string out;
  out.reserve(raw.size());
  for (char c : raw) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      case '\'': out += "&apos;"; break;
      default: out += c;
    }
  }
  return out;
}

namespace {

class Parser {
 public:
  explicit Parser(std::string_view src) : src_(src) {}

  XmlNode parse_document() {
    skip_misc();
    XmlNode root = parse_element();
    skip_misc();
    if (pos_ != src_.size()) fail("content after document root");
    return root;
  }

 private:
  std::string_view src_;
  std::size_t pos_ = 0;
  int line_ = 1;

  [[noreturn]] void fail(const std::string& what) const {
    throw std::runtime_error("xml line " + std::to_string(line_) + ": " + what);
  }

  bool eof() const { return pos_ >= src_.size(); }
  char peek() const { return src_[pos_]; }

  char advance() {
    char c = src_[pos_++];
    if (c == '\n') ++line_;
    return c;
  }

  bool consume(std::string_view lit) {
    if (src_.substr(pos_, lit.size()) != lit) return false;
    for (std::size_t i = 0; i < lit.size(); ++i) advance();
    return true;
  }

  void skip_ws() {
    while (!eof() && std::isspace(static_cast<unsigned char>(peek()))) advance();
  }

  // whitespace, <?...?>, <!--...-->
  void skip_misc() {
    for (;;) {
      skip_ws();
      if (consume("<?")) {
        while (!eof() && !consume("?>")) advance();
      } else if (consume("<!--")) {
        while (!eof() && !consume("-->")) advance();
      } else {
        return;
      }
    }
  }

  std::string parse_name() {
    std::size_t start = pos_;
    while (!eof() && (std::isalnum(static_cast<unsigned char>(peek())) ||
                      peek() == '_' || peek() == '-' || peek() == ':' || peek() == '.'))
      advance();
    if (pos_ == start) fail("expected a name");
    return std::string(src_.substr(start, pos_ - start));
  }

  std::string decode_entities(std::string_view raw) {
    std::string out;
    out.reserve(raw.size());
    for (std::size_t i = 0; i < raw.size(); ++i) {
      if (raw[i] != '&') {
        out += raw[i];
        continue;
      }
      auto rest = raw.substr(i);
      if (rest.rfind("&amp;", 0) == 0) { out += '&'; i += 4; }
      else if (rest.rfind("&lt;", 0) == 0) { out += '<'; i += 3; }
      else if (rest.rfind("&gt;", 0) == 0) { out += '>'; i += 3; }
      else if (rest.rfind("&quot;", 0) == 0) { out += '"'; i += 5; }
      else if (rest.rfind("&apos;", 0) == 0) { out += '\''; i += 5; }
      else fail("unknown entity");
    }
    return out;
  }

  XmlNode parse_element() {
    if (eof() || peek() != '<') fail("expected '<'");
    XmlNode node;
    node.line = line_;
    advance();
    node.name = parse_name();

    for (;;) {
      skip_ws();
      if (eof()) fail("unterminated tag <" + node.name + ">");
      if (consume("/>")) return node;
      if (consume(">")) break;
      std::string key = parse_name();
      skip_ws();
      if (!consume("=")) fail("expected '=' after attribute '" + key + "'");
      skip_ws();
      if (eof() || (peek() != '"' && peek() != '\'')) fail("expected quoted attribute value");
      char quote = advance();
      std::size_t start = pos_;
      while (!eof() && peek() != quote) advance();
      if (eof()) fail("unterminated attribute value");
      std::string value = decode_entities(src_.substr(start, pos_ - start));
      advance();
      if (!node.attrs.emplace(std::move(key), std::move(value)).second)
        fail("duplicate attribute in <" + node.name + ">");
    }

    // content until the matching close tag
    for (;;) {
      if (eof()) fail("missing </" + node.name + ">");
      if (peek() == '<') {
        if (consume("<!--")) {
          while (!eof() && !consume("-->")) advance();
          continue;
        }
        if (src_.substr(pos_, 2) == "</") {
          consume("</");
          std::string closing = parse_name();
          if (closing != node.name)
            fail("mismatched close tag </" + closing + "> for <" + node.name + ">");
          skip_ws();
          if (!consume(">")) fail("malformed close tag");
          return node;
        }
        node.children.push_back(parse_element());
      } else {
        std::size_t start = pos_;
        while (!eof() && peek() != '<') advance();
        node.text += decode_entities(src_.substr(start, pos_ - start));
      }
    }
  }
};

}  // namespace

XmlNode xml_parse(std::string_view src) { return Parser(src).parse_document(); }

}  // namespace traffic
