#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "convboost/error.hpp"
#include "convboost/geometry.hpp"
#include "convboost/image.hpp"
#include "convboost/random.hpp"

// Desk-scale scenes: textured rectangles and ellipses over smoothed noise,
// each annotated with the tight bounding box of its pixel mask.
namespace convboost::synth {

struct SceneOptions {
  int min_width = 288, max_width = 352;
  int min_height = 256, max_height = 320;
  int min_objects = 1, max_objects = 4;
  // Bounding-box area as a fraction of the image area (log-uniform).
  double min_area_frac = 0.02, max_area_frac = 0.30;
  // Bounding-box width / height (log-uniform).
  double min_aspect = 0.5, max_aspect = 2.0;
  // Distance of the object color from the background mean color.
  double min_contrast = 0.25, max_contrast = 0.5;
  double background_noise = 0.08;
  int placement_attempts = 200;

  void validate() const {
    if (min_width < 16 || max_width < min_width || min_height < 16 || max_height < min_height)
      throw ArgumentError("invalid synthetic image size range");
    if (min_objects < 1 || max_objects < min_objects)
      throw ArgumentError("invalid synthetic object count range");
    if (!(min_area_frac > 0 && max_area_frac >= min_area_frac && max_area_frac < 1))
      throw ArgumentError("invalid synthetic area range");
    if (!(min_aspect > 0 && max_aspect >= min_aspect))
      throw ArgumentError("invalid synthetic aspect range");
  }
};

enum class Shape { kRectangle, kEllipse };

struct SceneObject {
  Shape shape = Shape::kRectangle;
  Box box;  // tight bounds of the mask, integer corners
  double contrast = 0;
};

struct Scene {
  ImagePlanes image;
  std::vector<SceneObject> objects;
};

namespace detail {

// Zero-mean, unit-variance noise smoothed by two passes of a box filter.
inline std::vector<float> smooth_noise(Rng& rng, int w, int h, int radius) {
  std::vector<float> a(static_cast<std::size_t>(w) * h), b(a.size());
  for (auto& v : a) v = static_cast<float>(rng.normal());
  auto pass = [&](const std::vector<float>& in, std::vector<float>& out, bool horizontal) {
    const int n = horizontal ? w : h, m = horizontal ? h : w;
    for (int j = 0; j < m; ++j) {
      for (int i = 0; i < n; ++i) {
        double s = 0;
        for (int k = -radius; k <= radius; ++k) {
          const int q = std::clamp(i + k, 0, n - 1);
          s += horizontal ? in[static_cast<std::size_t>(j) * w + q] : in[static_cast<std::size_t>(q) * w + j];
        }
        const std::size_t o = horizontal ? static_cast<std::size_t>(j) * w + i : static_cast<std::size_t>(i) * w + j;
        out[o] = static_cast<float>(s / (2 * radius + 1));
      }
    }
  };
  for (int rep = 0; rep < 2; ++rep) {
    pass(a, b, true);
    pass(b, a, false);
  }
  double mean = 0, var = 0;
  for (float v : a) mean += v;
  mean /= static_cast<double>(a.size());
  for (float v : a) var += (v - mean) * (v - mean);
  const double sd = std::sqrt(var / static_cast<double>(a.size()));
  for (auto& v : a) v = static_cast<float>((v - mean) / (sd > 0 ? sd : 1.0));
  return a;
}

inline double log_uniform(Rng& rng, double lo, double hi) {
  return std::exp(rng.uniform(std::log(lo), std::log(hi)));
}

}  // namespace detail

// Deterministic in (seed, index).
inline Scene generate_scene(std::uint64_t seed, std::uint64_t index, const SceneOptions& opt = {}) {
  opt.validate();
  Rng rng(mix_seed(seed, index));
  const int w = static_cast<int>(rng.uniform_int(opt.min_width, opt.max_width));
  const int h = static_cast<int>(rng.uniform_int(opt.min_height, opt.max_height));
  Scene scene{ImagePlanes(w, h, 3), {}};
  const std::size_t plane = scene.image.plane_size();

  // Background: base color, a linear gradient and smoothed noise per plane.
  double base[3];
  for (auto& c : base) c = rng.uniform(0.3, 0.7);
  const int radius = static_cast<int>(rng.uniform_int(2, 6));
  for (int c = 0; c < 3; ++c) {
    const auto noise = detail::smooth_noise(rng, w, h, radius);
    const double gx = rng.uniform(-0.1, 0.1), gy = rng.uniform(-0.1, 0.1);
    auto p = scene.image.plane(c);
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) {
        const std::size_t i = static_cast<std::size_t>(y) * w + x;
        p[i] = static_cast<float>(base[c] + gx * (x / double(w) - 0.5) + gy * (y / double(h) - 0.5) +
                                  opt.background_noise * noise[i]);
      }
  }

  const int target = static_cast<int>(rng.uniform_int(opt.min_objects, opt.max_objects));
  const double image_area = static_cast<double>(w) * h;
  std::vector<unsigned char> mask(plane);
  for (int attempt = 0; attempt < opt.placement_attempts && static_cast<int>(scene.objects.size()) < target;
       ++attempt) {
    const double area = detail::log_uniform(rng, opt.min_area_frac, opt.max_area_frac) * image_area;
    const double aspect = detail::log_uniform(rng, opt.min_aspect, opt.max_aspect);
    const int bw = static_cast<int>(std::lround(std::sqrt(area * aspect)));
    const int bh = static_cast<int>(std::lround(std::sqrt(area / aspect)));
    if (bw < 4 || bh < 4 || bw > w || bh > h) continue;
    const int x0 = static_cast<int>(rng.uniform_int(0, w - bw));
    const int y0 = static_cast<int>(rng.uniform_int(0, h - bh));
    const Shape shape = rng.uniform() < 0.5 ? Shape::kRectangle : Shape::kEllipse;

    // Rasterize the mask inside the candidate rectangle and take its bounds.
    std::fill(mask.begin(), mask.end(), 0);
    int mx0 = w, my0 = h, mx1 = -1, my1 = -1;
    const double cx = x0 + bw / 2.0, cy = y0 + bh / 2.0, ax = bw / 2.0, ay = bh / 2.0;
    for (int y = y0; y < y0 + bh; ++y)
      for (int x = x0; x < x0 + bw; ++x) {
        bool in = true;
        if (shape == Shape::kEllipse) {
          const double u = (x + 0.5 - cx) / ax, v = (y + 0.5 - cy) / ay;
          in = u * u + v * v <= 1.0;
        }
        if (!in) continue;
        mask[static_cast<std::size_t>(y) * w + x] = 1;
        mx0 = std::min(mx0, x), my0 = std::min(my0, y), mx1 = std::max(mx1, x), my1 = std::max(my1, y);
      }
    if (mx1 < 0) continue;
    const Box box{double(mx0), double(my0), double(mx1 + 1), double(my1 + 1)};
    const double frac = box.area() / image_area;
    const double box_aspect = box.width() / box.height();
    if (frac < opt.min_area_frac || frac > opt.max_area_frac || box_aspect < opt.min_aspect ||
        box_aspect > opt.max_aspect)
      continue;
    // Keep a two-pixel gap between objects.
    const Box grown{box.x1 - 2, box.y1 - 2, box.x2 + 2, box.y2 + 2};
    bool overlaps = false;
    for (const auto& o : scene.objects) overlaps = overlaps || intersection_area(grown, o.box) > 0;
    if (overlaps) continue;

    // Paint: a color offset from the background mean plus a texture.
    const double contrast = rng.uniform(opt.min_contrast, opt.max_contrast);
    double dir[3], norm = 0;
    for (auto& v : dir) {
      v = rng.normal();
      norm += v * v;
    }
    norm = std::sqrt(norm);
    double color[3];
    for (int c = 0; c < 3; ++c) {
      color[c] = base[c] + contrast * dir[c] / norm;
      // Reflect out-of-range colors back so the contrast stays visible.
      if (color[c] > 0.95) color[c] = base[c] - contrast * dir[c] / norm;
      if (color[c] < 0.05) color[c] = base[c] - contrast * dir[c] / norm;
      color[c] = std::clamp(color[c], 0.05, 0.95);
    }
    const int texture = static_cast<int>(rng.uniform_int(0, 2));
    const double period = rng.uniform(5.0, 14.0), theta = rng.uniform(0.0, M_PI);
    const double amp = rng.uniform(0.05, 0.12);
    const auto tex_noise = detail::smooth_noise(rng, bw, bh, 1);
    for (int y = my0; y <= my1; ++y)
      for (int x = mx0; x <= mx1; ++x) {
        const std::size_t i = static_cast<std::size_t>(y) * w + x;
        if (!mask[i]) continue;
        double t = 0;
        if (texture == 1) {
          t = amp * std::sin(2 * M_PI * ((x - x0) * std::cos(theta) + (y - y0) * std::sin(theta)) / period);
        } else if (texture == 2) {
          t = amp * tex_noise[static_cast<std::size_t>(y - y0) * bw + (x - x0)];
        }
        for (int c = 0; c < 3; ++c)
          scene.image.plane(c)[i] = static_cast<float>(color[c] + t);
      }
    scene.objects.push_back({shape, box, contrast});
  }

  for (auto& v : scene.image.data()) v = std::clamp(v, 0.0f, 1.0f);
  return scene;
}

}  // namespace convboost::synth
