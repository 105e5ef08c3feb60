#pragma once

#include <algorithm>
#include <cctype>
#include <cmath>
#include <filesystem>
#include <sstream>
#include <string>
#include <string_view>

#include "convboost/error.hpp"
#include "convboost/image.hpp"
#include "convboost/io/files.hpp"

// Binary PGM (P5) and PPM (P6) with maxval 255.
namespace convboost::io {

namespace detail {

class PnmHeader {
 public:
  explicit PnmHeader(std::string_view b) : b_(b) {}

  // Next whitespace-delimited header token, skipping '#' comments.
  long next_int(const char* what) {
    for (;;) {
      while (pos_ < b_.size() && std::isspace(static_cast<unsigned char>(b_[pos_]))) ++pos_;
      if (pos_ < b_.size() && b_[pos_] == '#') {
        while (pos_ < b_.size() && b_[pos_] != '\n') ++pos_;
        continue;
      }
      break;
    }
    const std::size_t start = pos_;
    long v = 0;
    while (pos_ < b_.size() && std::isdigit(static_cast<unsigned char>(b_[pos_]))) {
      v = v * 10 + (b_[pos_] - '0');
      if (v > 1000000) fail(start, std::string(what) + " is too large");
      ++pos_;
    }
    if (pos_ == start) fail(start, std::string("expected ") + what);
    return v;
  }

  // Consumes the single whitespace byte that ends the header.
  std::size_t payload_offset() {
    if (pos_ >= b_.size() || !std::isspace(static_cast<unsigned char>(b_[pos_])))
      fail(pos_, "expected whitespace after maxval");
    return pos_ + 1;
  }

  [[noreturn]] static void fail(std::size_t off, const std::string& what) {
    std::ostringstream os;
    os << "PNM format error at byte " << off << ": " << what;
    throw FormatError(os.str());
  }

  std::size_t pos_ = 2;

 private:
  std::string_view b_;
};

}  // namespace detail

inline ImagePlanes decode_pnm(std::string_view bytes) {
  if (bytes.size() < 2 || bytes[0] != 'P' || (bytes[1] != '5' && bytes[1] != '6'))
    throw FormatError(
        "unsupported image format: expected binary PGM (P5) or PPM (P6); convert other formats "
        "first, e.g. `convert in.jpg out.ppm`");
  const int channels = bytes[1] == '6' ? 3 : 1;
  detail::PnmHeader h(bytes);
  const long w = h.next_int("width");
  const long ht = h.next_int("height");
  const std::size_t maxval_off = h.pos_;
  const long maxval = h.next_int("maxval");
  if (w <= 0 || ht <= 0) detail::PnmHeader::fail(maxval_off, "image dimensions must be positive");
  if (maxval != 255) detail::PnmHeader::fail(maxval_off, "maxval must be 255, got " + std::to_string(maxval));
  const std::size_t off = h.payload_offset();
  const std::size_t expected = static_cast<std::size_t>(w) * ht * channels;
  const std::size_t actual = bytes.size() - off;
  if (actual < expected) {
    std::ostringstream os;
    os << "truncated payload: expected " << expected << " bytes, got " << actual;
    detail::PnmHeader::fail(off, os.str());
  }
  ImagePlanes img(static_cast<int>(w), static_cast<int>(ht), channels);
  const auto* p = reinterpret_cast<const unsigned char*>(bytes.data() + off);
  const std::size_t plane = img.plane_size();
  auto data = img.data();
  for (std::size_t i = 0; i < plane; ++i)
    for (int c = 0; c < channels; ++c)
      data[c * plane + i] = static_cast<float>(p[i * channels + c]) / 255.0f;
  return img;
}

inline ImagePlanes load_image(const std::filesystem::path& path) {
  try {
    return decode_pnm(read_file(path));
  } catch (const FormatError& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

// Samples are clamped to [0, 1] and rounded to 8 bits. A non-empty comment
// is written as a '#' header line.
inline std::string encode_pnm(const ImagePlanes& img, std::string_view comment = {}) {
  const int channels = img.channels();
  std::string out = channels == 3 ? "P6\n" : "P5\n";
  if (!comment.empty()) {
    if (comment.find_first_of("\r\n") != std::string_view::npos)
      throw ArgumentError("PNM comment must be a single line");
    out += "# " + std::string(comment) + "\n";
  }
  out += std::to_string(img.width()) + " " + std::to_string(img.height()) + "\n255\n";
  const std::size_t plane = img.plane_size();
  const std::size_t head = out.size();
  out.resize(head + plane * channels);
  const auto data = img.data();
  for (std::size_t i = 0; i < plane; ++i)
    for (int c = 0; c < channels; ++c) {
      const float v = std::clamp(data[c * plane + i], 0.0f, 1.0f);
      out[head + i * channels + c] = static_cast<char>(static_cast<unsigned char>(std::lround(v * 255.0f)));
    }
  return out;
}

inline void save_image(const ImagePlanes& img, const std::filesystem::path& path) {
  write_file(path, encode_pnm(img));
}

}  // namespace convboost::io
