#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "convboost/error.hpp"
#include "convboost/geometry.hpp"
#include "convboost/io/files.hpp"
#include "convboost/io/metadata.hpp"
#include "convboost/io/text.hpp"

// Proposals files: "# key=value" metadata lines, then one line per box,
// image_id<TAB>x1<TAB>y1<TAB>x2<TAB>y2<TAB>score, coordinates at 4 decimals
// and scores at round-trip precision, grouped by image in descending score.
namespace convboost::io {

struct ImageProposals {
  std::string image_id;
  std::vector<ScoredBox> boxes;
};

struct ProposalFile {
  Metadata meta;
  std::vector<ImageProposals> images;

  // Boxes for `id`, or nullptr when the file has none.
  const std::vector<ScoredBox>* find(std::string_view id) const {
    for (const auto& im : images)
      if (im.image_id == id) return &im.boxes;
    return nullptr;
  }
};

inline std::string format_proposals(const ProposalFile& pf) {
  std::string out = text::metadata_lines(pf.meta);
  for (const auto& im : pf.images) {
    if (im.image_id.find_first_of("\t\n") != std::string::npos)
      throw ArgumentError("image id contains a tab or newline: " + im.image_id);
    for (const auto& sb : im.boxes) {
      out += im.image_id;
      for (double v : {sb.box.x1, sb.box.y1, sb.box.x2, sb.box.y2}) {
        out += '\t';
        out += text::format_fixed4(v);
      }
      out += '\t';
      out += text::format_double(sb.score);
      out += '\n';
    }
  }
  return out;
}

inline ProposalFile parse_proposals(std::string_view doc) {
  ProposalFile pf;
  std::map<std::string, std::size_t, std::less<>> index;
  for (const auto& [no, line] : text::lines(doc)) {
    if (text::read_metadata_line(line, pf.meta)) continue;
    if (text::trim(line).empty()) continue;
    const auto f = text::split(line, '\t');
    if (f.size() != 6)
      text::fail("proposals", no, "expected 6 tab-separated fields, got " + std::to_string(f.size()));
    double v[5];
    for (int i = 0; i < 5; ++i)
      if (!text::parse_double(f[static_cast<std::size_t>(i) + 1], v[i]) || !std::isfinite(v[i]))
        text::fail("proposals", no, "field " + std::to_string(i + 2) + " is not a finite number");
    if (!(v[2] > v[0]) || !(v[3] > v[1])) text::fail("proposals", no, "box has x2 <= x1 or y2 <= y1");
    const std::string id(f[0]);
    if (id.empty()) text::fail("proposals", no, "empty image id");
    auto [it, inserted] = index.try_emplace(id, pf.images.size());
    if (inserted) pf.images.push_back({id, {}});
    pf.images[it->second].boxes.push_back({Box{v[0], v[1], v[2], v[3]}, v[4]});
  }
  return pf;
}

inline ProposalFile read_proposals(const std::filesystem::path& path) {
  try {
    return parse_proposals(read_file(path));
  } catch (const ParseError& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
}

inline void write_proposals(const ProposalFile& pf, const std::filesystem::path& path) {
  write_file(path, format_proposals(pf));
}

}  // namespace convboost::io
