#pragma once

#include <map>
#include <string>
#include <string_view>
#include <vector>

namespace traffic {

// Minimal XML DOM: elements, attributes, text, the five standard entities.
// Enough for annotation-export files; no namespaces, DTDs, or CDATA.
struct XmlNode {
  std::string name;
  std::map<std::string, std::string> attrs;
  std::vector<XmlNode> children;
  std::string text;  // concatenated character data directly under this node
  int line = 1;      // 1-based source line of the opening tag

  const XmlNode* child(std::string_view child_name) const;
  std::vector<const XmlNode*> children_named(std::string_view child_name) const;
  const std::string* attr(std::string_view attr_name) const;
};

// Parses a whole document, returning the root element. Throws
// std::runtime_error with a 1-based line number on malformed input.
XmlNode xml_parse(std::string_view src);

std::string xml_escape(std::string_view raw);

}  // namespace traffic
