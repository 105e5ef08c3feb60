#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "convboost/error.hpp"

namespace convboost {

// Planar image with samples in [0, 1]. Storage is plane-major, row-major.
class ImagePlanes {
 public:
  ImagePlanes() = default;
  ImagePlanes(int width, int height, int channels)
      : width_(width), height_(height), channels_(channels) {
    if (width <= 0 || height <= 0) throw ArgumentError("image dimensions must be positive");
    if (channels != 1 && channels != 3) throw ArgumentError("image must have 1 or 3 planes");
    data_.assign(static_cast<std::size_t>(width) * height * channels, 0.0f);
  }

  int width() const { return width_; }
  int height() const { return height_; }
  int channels() const { return channels_; }
  std::size_t plane_size() const { return static_cast<std::size_t>(width_) * height_; }

  std::span<float> plane(int c) { return {data_.data() + c * plane_size(), plane_size()}; }
  std::span<const float> plane(int c) const {
    return {data_.data() + c * plane_size(), plane_size()};
  }

  float& at(int c, int y, int x) { return data_[c * plane_size() + static_cast<std::size_t>(y) * width_ + x]; }
  float at(int c, int y, int x) const {
    return data_[c * plane_size() + static_cast<std::size_t>(y) * width_ + x];
  }

  std::span<const float> data() const { return data_; }
  std::span<float> data() { return data_; }

  friend bool operator==(const ImagePlanes&, const ImagePlanes&) = default;

 private:
  int width_ = 0, height_ = 0, channels_ = 0;
  std::vector<float> data_;
};

namespace detail {

struct LinearTap {
  int i0, i1;
  float w0, w1;
};

// Pixel-center aligned taps for resampling `in` samples onto `out` samples.
inline std::vector<LinearTap> linear_taps(int in, int out) {
  std::vector<LinearTap> taps(static_cast<std::size_t>(out));
  const double step = static_cast<double>(in) / out;
  for (int o = 0; o < out; ++o) {
    double s = (o + 0.5) * step - 0.5;
    s = std::clamp(s, 0.0, static_cast<double>(in - 1));
    const int i0 = static_cast<int>(std::floor(s));
    const int i1 = std::min(i0 + 1, in - 1);
    const auto f = static_cast<float>(s - i0);
    taps[static_cast<std::size_t>(o)] = {i0, i1, 1.0f - f, f};
  }
  return taps;
}

}  // namespace detail

// Bilinear resize of a single plane.
inline void resize_plane(std::span<const float> src, int sw, int sh, std::span<float> dst,
                         int dw, int dh) {
  const auto tx = detail::linear_taps(sw, dw);
  const auto ty = detail::linear_taps(sh, dh);
  for (int y = 0; y < dh; ++y) {
    const auto& t = ty[static_cast<std::size_t>(y)];
    const float* r0 = src.data() + static_cast<std::size_t>(t.i0) * sw;
    const float* r1 = src.data() + static_cast<std::size_t>(t.i1) * sw;
    float* out = dst.data() + static_cast<std::size_t>(y) * dw;
    for (int x = 0; x < dw; ++x) {
      const auto& c = tx[static_cast<std::size_t>(x)];
      const float top = c.w0 * r0[c.i0] + c.w1 * r0[c.i1];
      const float bot = c.w0 * r1[c.i0] + c.w1 * r1[c.i1];
      out[x] = t.w0 * top + t.w1 * bot;
    }
  }
}

inline ImagePlanes resize_bilinear(const ImagePlanes& img, int width, int height) {
  if (width <= 0 || height <= 0) throw ArgumentError("resize target must be positive");
  if (width == img.width() && height == img.height()) return img;
  ImagePlanes out(width, height, img.channels());
  for (int c = 0; c < img.channels(); ++c)
    resize_plane(img.plane(c), img.width(), img.height(), out.plane(c), width, height);
  return out;
}

}  // namespace convboost
