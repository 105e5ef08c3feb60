#pragma once

#include <cctype>
#include <cstddef>
#include <memory>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "convboost/error.hpp"

// A small XML reader for the annotation subset: elements, attributes (parsed
// and kept), character data, comments, CDATA, processing instructions and the
// five predefined entities plus numeric character references. DTDs and
// namespaces are not interpreted.
namespace convboost::io::xml {

struct Element {
  std::string name;
  std::vector<std::pair<std::string, std::string>> attributes;
  std::vector<Element> children;
  std::string text;  // concatenated character data directly inside this element
  int line = 0;

  // First child named `n`, or nullptr.
  const Element* child(std::string_view n) const {
    for (const auto& c : children)
      if (c.name == n) return &c;
    return nullptr;
  }

  std::vector<const Element*> children_named(std::string_view n) const {
    std::vector<const Element*> out;
    for (const auto& c : children)
      if (c.name == n) out.push_back(&c);
    return out;
  }
};

namespace detail {

inline void append_utf8(std::string& out, unsigned long cp) {
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

class Parser {
 public:
  explicit Parser(std::string_view src) : s_(src) {}

  Element parse_document() {
    skip_misc();
    if (at_end() || peek() != '<') fail("expected a root element");
    Element root = parse_element();
    skip_misc();
    if (!at_end()) fail("content after the root element");
    return root;
  }

 private:
  bool at_end() const { return pos_ >= s_.size(); }
  char peek() const { return s_[pos_]; }
  bool starts_with(std::string_view p) const { return s_.substr(pos_, p.size()) == p; }

  void advance(std::size_t n = 1) {
    for (std::size_t i = 0; i < n && pos_ < s_.size(); ++i, ++pos_)
      if (s_[pos_] == '\n') ++line_;
  }

  [[noreturn]] void fail(const std::string& what) const {
    std::ostringstream os;
    os << "XML error at line " << line_ << ": " << what;
    throw ParseError(os.str());
  }

  static bool is_space(char c) { return c == ' ' || c == '\t' || c == '\n' || c == '\r'; }
  static bool is_name_char(char c) {
    return std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '-' || c == '.' ||
           c == ':' || static_cast<unsigned char>(c) >= 0x80;
  }

  void skip_space() {
    while (!at_end() && is_space(peek())) advance();
  }

  void skip_until(std::string_view terminator, const char* what) {
    const auto end = s_.find(terminator, pos_);
    if (end == std::string_view::npos) fail(std::string("unterminated ") + what);
    advance(end + terminator.size() - pos_);
  }

  // Whitespace, comments, processing instructions and DOCTYPE declarations.
  void skip_misc() {
    for (;;) {
      skip_space();
      if (starts_with("<?")) {
        skip_until("?>", "processing instruction");
      } else if (starts_with("<!--")) {
        skip_until("-->", "comment");
      } else if (starts_with("<!DOCTYPE")) {
        skip_until(">", "DOCTYPE");
      } else {
        return;
      }
    }
  }

  std::string parse_name() {
    const std::size_t start = pos_;
    while (!at_end() && is_name_char(peek())) advance();
    if (pos_ == start) fail("expected a name");
    return std::string(s_.substr(start, pos_ - start));
  }

  void decode_entity(std::string& out) {
    const auto end = s_.find(';', pos_);
    if (end == std::string_view::npos || end - pos_ > 12) fail("unterminated entity reference");
    const std::string_view ent = s_.substr(pos_ + 1, end - pos_ - 1);
    if (ent == "lt") out.push_back('<');
    else if (ent == "gt") out.push_back('>');
    else if (ent == "amp") out.push_back('&');
    else if (ent == "apos") out.push_back('\'');
    else if (ent == "quot") out.push_back('"');
    else if (!ent.empty() && ent[0] == '#') {
      unsigned long cp = 0;
      try {
        cp = ent.size() > 1 && (ent[1] == 'x' || ent[1] == 'X')
                 ? std::stoul(std::string(ent.substr(2)), nullptr, 16)
                 : std::stoul(std::string(ent.substr(1)), nullptr, 10);
      } catch (const std::exception&) {
        fail("bad character reference &" + std::string(ent) + ";");
      }
      if (cp > 0x10FFFF) fail("character reference out of range");
      append_utf8(out, cp);
    } else {
      fail("unknown entity &" + std::string(ent) + ";");
    }
    advance(end + 1 - pos_);
  }

  std::string parse_attr_value() {
    if (at_end() || (peek() != '"' && peek() != '\'')) fail("expected a quoted attribute value");
    const char q = peek();
    advance();
    std::string v;
    while (!at_end() && peek() != q) {
      if (peek() == '&') decode_entity(v);
      else if (peek() == '<') fail("'<' in attribute value");
      else {
        v.push_back(peek());
        advance();
      }
    }
    if (at_end()) fail("unterminated attribute value");
    advance();
    return v;
  }

  Element parse_element() {
    Element e;
    e.line = line_;
    advance();  // '<'
    e.name = parse_name();
    for (;;) {
      skip_space();
      if (at_end()) fail("unterminated start tag <" + e.name + ">");
      if (starts_with("/>")) {
        advance(2);
        return e;
      }
      if (peek() == '>') {
        advance();
        break;
      }
      std::string an = parse_name();
      skip_space();
      if (at_end() || peek() != '=') fail("expected '=' after attribute " + an);
      advance();
      skip_space();
      e.attributes.emplace_back(std::move(an), parse_attr_value());
    }
    for (;;) {
      if (at_end()) fail("missing end tag for <" + e.name + "> opened at line " + std::to_string(e.line));
      if (starts_with("</")) {
        advance(2);
        const std::string closing = parse_name();
        if (closing != e.name)
          fail("end tag </" + closing + "> does not match <" + e.name + "> opened at line " +
               std::to_string(e.line));
        skip_space();
        if (at_end() || peek() != '>') fail("expected '>' in end tag");
        advance();
        return e;
      }
      if (starts_with("<!--")) {
        skip_until("-->", "comment");
      } else if (starts_with("<![CDATA[")) {
        advance(9);
        const auto end = s_.find("]]>", pos_);
        if (end == std::string_view::npos) fail("unterminated CDATA section");
        e.text.append(s_.substr(pos_, end - pos_));
        advance(end + 3 - pos_);
      } else if (starts_with("<?")) {
        skip_until("?>", "processing instruction");
      } else if (peek() == '<') {
        e.children.push_back(parse_element());
      } else if (peek() == '&') {
        decode_entity(e.text);
      } else {
        e.text.push_back(peek());
        advance();
      }
    }
  }

  std::string_view s_;
  std::size_t pos_ = 0;
  int line_ = 1;
};

}  // namespace detail

inline Element parse(std::string_view document) {
  return detail::Parser(document).parse_document();
}

inline std::string escape(std::string_view text) {
  std::string out;
  for (char c : text) {
    switch (c) {
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '&': out += "&amp;"; break;
      case '"': out += "&quot;"; break;
      case '\'': out += "&apos;"; break;
      default: out.push_back(c);
    }
  }
  return out;
}

}  // namespace convboost::io::xml
