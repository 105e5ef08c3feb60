#pragma once

#include <filesystem>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "convboost/error.hpp"
#include "convboost/io/files.hpp"
#include "convboost/io/text.hpp"

namespace convboost::io {

struct ManifestEntry {
  std::string image_id;  // stem of the image file name
  std::filesystem::path image;
  std::filesystem::path annotation;
};

// Lines "image_path<TAB>annotation_path"; relative paths resolve against
// the manifest's directory. Blank lines and '#' lines are skipped.
struct DatasetManifest {
  std::string split;
  std::vector<ManifestEntry> entries;
};

inline DatasetManifest parse_manifest(std::string_view doc, const std::filesystem::path& base_dir,
                                      std::string split = {}) {
  DatasetManifest m;
  m.split = std::move(split);
  std::set<std::string> ids;
  for (const auto& [no, raw] : text::lines(doc)) {
    const auto line = text::trim(raw);
    if (line.empty() || line.front() == '#') continue;
    const auto f = text::split(raw, '\t');
    if (f.size() != 2 || text::trim(f[0]).empty() || text::trim(f[1]).empty())
      text::fail("manifest", no, "expected image_path<TAB>annotation_path");
    ManifestEntry e;
    e.image = std::filesystem::path(std::string(text::trim(f[0])));
    e.annotation = std::filesystem::path(std::string(text::trim(f[1])));
    if (e.image.is_relative()) e.image = base_dir / e.image;
    if (e.annotation.is_relative()) e.annotation = base_dir / e.annotation;
    e.image_id = e.image.stem().string();
    if (!ids.insert(e.image_id).second)
      text::fail("manifest", no, "duplicate image id '" + e.image_id + "'");
    m.entries.push_back(std::move(e));
  }
  return m;
}

inline DatasetManifest read_manifest(const std::filesystem::path& path) {
  const std::string doc = read_file(path);
  try {
    return parse_manifest(doc, path.parent_path(), path.stem().string());
  } catch (const ParseError& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
}

// Paths are written relative to `base_dir` when they live under it.
inline std::string format_manifest(const DatasetManifest& m, const std::filesystem::path& base_dir) {
  std::string out;
  auto rel = [&](const std::filesystem::path& p) {
    const auto r = p.lexically_relative(base_dir);
    return (r.empty() ? p : r).generic_string();
  };
  for (const auto& e : m.entries) out += rel(e.image) + '\t' + rel(e.annotation) + '\n';
  return out;
}

// One image id per line; blank lines and '#' lines are skipped.
inline std::set<std::string> parse_blacklist(std::string_view doc) {
  std::set<std::string> ids;
  for (const auto& [no, raw] : text::lines(doc)) {
    const auto line = text::trim(raw);
    if (line.empty() || line.front() == '#') continue;
    if (line.find_first_of(" \t") != std::string_view::npos)
      text::fail("blacklist", no, "expected a single image id");
    ids.insert(std::string(line));
  }
  return ids;
}

inline std::set<std::string> read_blacklist(const std::filesystem::path& path) {
  try {
    return parse_blacklist(read_file(path));
  } catch (const ParseError& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
}

}  // namespace convboost::io
