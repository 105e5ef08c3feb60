#pragma once

#include <charconv>
#include <cmath>
#include <filesystem>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "convboost/error.hpp"
#include "convboost/geometry.hpp"
#include "convboost/io/files.hpp"
#include "convboost/io/xml.hpp"

namespace convboost::io {

struct Annotation {
  std::string image_id;
  std::string filename;
  int width = 0;
  int height = 0;
  std::vector<Box> boxes;
  std::vector<std::string> class_names;
  std::vector<bool> difficult;

  // Boxes, optionally without those flagged difficult.
  std::vector<Box> training_boxes(bool include_difficult) const {
    std::vector<Box> out;
    for (std::size_t i = 0; i < boxes.size(); ++i)
      if (include_difficult || !difficult[i]) out.push_back(boxes[i]);
    return out;
  }
};

namespace detail {

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

[[noreturn]] inline void voc_fail(const std::string& path, int line, const std::string& what) {
  std::ostringstream os;
  os << "VOC annotation error at " << path << " (line " << line << "): " << what;
  throw ParseError(os.str());
}

inline double voc_number(const xml::Element* e, const std::string& path, int parent_line) {
  if (!e) voc_fail(path, parent_line, "missing element");
  const auto t = trim(e->text);
  double v = 0;
  const auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
  if (t.empty() || ec != std::errc() || ptr != t.data() + t.size() || !std::isfinite(v))
    voc_fail(path, e->line, "non-numeric value '" + std::string(t) + "'");
  return v;
}

}  // namespace detail

// Reads filename, size/{width,height} and every object's name, difficult
// flag and bndbox. VOC's 1-based inclusive corners become half-open boxes.
inline Annotation parse_voc_xml(std::string_view document) {
  const xml::Element root = xml::parse(document);
  if (root.name != "annotation")
    detail::voc_fail(root.name, root.line, "root element must be <annotation>");
  Annotation a;
  if (const auto* fn = root.child("filename")) {
    a.filename = std::string(detail::trim(fn->text));
    a.image_id = std::filesystem::path(a.filename).stem().string();
  }
  if (const auto* size = root.child("size")) {
    a.width = static_cast<int>(detail::voc_number(size->child("width"), "annotation/size/width", size->line));
    a.height = static_cast<int>(detail::voc_number(size->child("height"), "annotation/size/height", size->line));
  }
  const auto objects = root.children_named("object");
  for (std::size_t k = 0; k < objects.size(); ++k) {
    const auto& obj = *objects[k];
    const std::string base = "annotation/object[" + std::to_string(k + 1) + "]";
    const auto* bb = obj.child("bndbox");
    if (!bb) detail::voc_fail(base + "/bndbox", obj.line, "missing bndbox");
    const std::string bbp = base + "/bndbox/";
    const double xmin = detail::voc_number(bb->child("xmin"), bbp + "xmin", bb->line);
    const double ymin = detail::voc_number(bb->child("ymin"), bbp + "ymin", bb->line);
    const double xmax = detail::voc_number(bb->child("xmax"), bbp + "xmax", bb->line);
    const double ymax = detail::voc_number(bb->child("ymax"), bbp + "ymax", bb->line);
    if (xmax < xmin) detail::voc_fail(bbp + "xmax", bb->child("xmax")->line, "xmax is less than xmin");
    if (ymax < ymin) detail::voc_fail(bbp + "ymax", bb->child("ymax")->line, "ymax is less than ymin");
    const Box b = box_from_voc(xmin, ymin, xmax, ymax);
    if (!b.valid()) detail::voc_fail(bbp, bb->line, "degenerate box");
    if (a.width > 0 && a.height > 0 &&
        (b.x1 < 0 || b.y1 < 0 || b.x2 > a.width || b.y2 > a.height))
      detail::voc_fail(bbp, bb->line, "box exceeds the declared image size");
    a.boxes.push_back(b);
    const auto* name = obj.child("name");
    a.class_names.emplace_back(name ? std::string(detail::trim(name->text)) : std::string());
    bool diff = false;
    if (const auto* d = obj.child("difficult"))
      diff = detail::voc_number(d, base + "/difficult", obj.line) != 0.0;
    a.difficult.push_back(diff);
  }
  return a;
}

inline Annotation load_voc_xml(const std::filesystem::path& path) {
  try {
    return parse_voc_xml(read_file(path));
  } catch (const ParseError& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
}

// Writes integer-cornered boxes back in VOC's 1-based inclusive convention.
inline std::string write_voc_xml(const Annotation& a, std::string_view comment = {}) {
  std::ostringstream os;
  if (!comment.empty()) {
    if (comment.find("--") != std::string_view::npos) throw ArgumentError("XML comment must not contain '--'");
    os << "<!-- " << comment << " -->\n";
  }
  os << "<annotation>\n"
     << "  <filename>" << xml::escape(a.filename) << "</filename>\n"
     << "  <size>\n    <width>" << a.width << "</width>\n    <height>" << a.height
     << "</height>\n    <depth>3</depth>\n  </size>\n";
  for (std::size_t i = 0; i < a.boxes.size(); ++i) {
    const auto& b = a.boxes[i];
    os << "  <object>\n"
       << "    <name>" << xml::escape(i < a.class_names.size() ? a.class_names[i] : "object")
       << "</name>\n"
       << "    <difficult>" << (i < a.difficult.size() && a.difficult[i] ? 1 : 0) << "</difficult>\n"
       << "    <bndbox>\n"
       << "      <xmin>" << std::lround(b.x1 + 1) << "</xmin>\n"
       << "      <ymin>" << std::lround(b.y1 + 1) << "</ymin>\n"
       << "      <xmax>" << std::lround(b.x2) << "</xmax>\n"
       << "      <ymax>" << std::lround(b.y2) << "</ymax>\n"
       << "    </bndbox>\n  </object>\n";
  }
  os << "</annotation>\n";
  return os.str();
}

}  // namespace convboost::io
