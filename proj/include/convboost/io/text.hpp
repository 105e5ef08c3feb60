#pragma once

#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "convboost/error.hpp"
#include "convboost/io/metadata.hpp"

// Shared helpers for the line-oriented text formats.
namespace convboost::io::text {

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

inline std::vector<std::string_view> split(std::string_view s, char sep) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  for (;;) {
    const auto p = s.find(sep, start);
    out.push_back(s.substr(start, p == std::string_view::npos ? std::string_view::npos : p - start));
    if (p == std::string_view::npos) return out;
    start = p + 1;
  }
}

// Lines with their 1-based numbers; a trailing newline does not add a line
// and '\r' before '\n' is dropped.
inline std::vector<std::pair<std::size_t, std::string_view>> lines(std::string_view doc) {
  std::vector<std::pair<std::size_t, std::string_view>> out;
  std::size_t start = 0, no = 1;
  while (start < doc.size()) {
    auto p = doc.find('\n', start);
    if (p == std::string_view::npos) p = doc.size();
    auto line = doc.substr(start, p - start);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    out.emplace_back(no++, line);
    start = p + 1;
  }
  return out;
}

[[noreturn]] inline void fail(std::string_view file_kind, std::size_t line, const std::string& what) {
  std::ostringstream os;
  os << file_kind << " line " << line << ": " << what;
  throw ParseError(os.str());
}

inline bool parse_double(std::string_view s, double& v) {
  s = trim(s);
  if (s.empty()) return false;
  if (s.front() == '+') s.remove_prefix(1);
  const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  return ec == std::errc() && p == s.data() + s.size();
}

inline bool parse_size(std::string_view s, std::size_t& v) {
  s = trim(s);
  const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  return !s.empty() && ec == std::errc() && p == s.data() + s.size();
}

// Shortest text that reads back as the same double.
inline std::string format_double(double v) {
  char buf[64];
  const auto [p, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, p);
}

inline std::string format_fixed4(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.4f", v);
  std::string s(buf);
  if (s == "-0.0000") s = "0.0000";
  return s;
}

// "# key=value" header lines.
inline std::string metadata_lines(const Metadata& meta, std::string_view prefix = "# ") {
  std::string out;
  for (const auto& [k, v] : meta.entries) {
    out += prefix;
    out += k;
    out += '=';
    out += v;
    out += '\n';
  }
  return out;
}

// Returns true and records the pair when `line` is a "# key=value" line.
inline bool read_metadata_line(std::string_view line, Metadata& meta) {
  if (line.empty() || line.front() != '#') return false;
  auto body = trim(line.substr(1));
  const auto eq = body.find('=');
  if (eq != std::string_view::npos && eq > 0)
    meta.set(std::string(trim(body.substr(0, eq))), std::string(trim(body.substr(eq + 1))));
  return true;
}

}  // namespace convboost::io::text
