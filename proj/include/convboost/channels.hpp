#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "convboost/error.hpp"
#include "convboost/geometry.hpp"
#include "convboost/image.hpp"
#include "convboost/parallel.hpp"
#include "convboost/random.hpp"

namespace convboost {

enum class BankSource { kLoaded, kSynthesized };

// F convolution kernels of size kh x kw over `cin` input planes.
// Weights are stored filter-major, plane-major, row-major.
struct FilterBank {
  int filters = 0;
  int cin = 0;
  int kh = 0;
  int kw = 0;
  std::vector<double> weights;
  std::vector<double> biases;
  BankSource source = BankSource::kSynthesized;
  std::uint64_t seed = 0;

  std::size_t kernel_size() const { return static_cast<std::size_t>(cin) * kh * kw; }
  std::span<const double> kernel(int f) const {
    return {weights.data() + f * kernel_size(), kernel_size()};
  }
  double weight(int f, int c, int y, int x) const {
    return weights[f * kernel_size() + (static_cast<std::size_t>(c) * kh + y) * kw + x];
  }

  // Weights and biases compare by value; provenance is informational.
  friend bool operator==(const FilterBank& a, const FilterBank& b) {
    return a.filters == b.filters && a.cin == b.cin && a.kh == b.kh && a.kw == b.kw &&
           a.weights == b.weights && a.biases == b.biases;
  }

  void validate() const {
    if (filters < 1 || cin < 1 || kh < 1 || kw < 1)
      throw ArgumentError("filter bank dimensions must be positive");
    if (kh % 2 == 0 || kw % 2 == 0) throw ArgumentError("filter kernels must have odd sizes");
    if (weights.size() != static_cast<std::size_t>(filters) * kernel_size() ||
        biases.size() != static_cast<std::size_t>(filters))
      throw ArgumentError("filter bank payload size does not match its header");
    for (double w : weights)
      if (!std::isfinite(w)) throw ArgumentError("filter bank has a non-finite weight");
    for (double b : biases)
      if (!std::isfinite(b)) throw ArgumentError("filter bank has a non-finite bias");
  }
};

// F response planes of gw x gh cells. One cell spans `shrink` pixels of the
// image the channels were computed from; `origin_offset` is the coordinate
// of cell (0,0)'s center in that image.
struct ChannelStack {
  int channels = 0;
  int width = 0;
  int height = 0;
  int shrink = 1;
  double origin_offset = 0.5;
  double source_scale = 1.0;
  std::vector<float> data;

  std::size_t plane_size() const { return static_cast<std::size_t>(width) * height; }
  std::span<const float> plane(int c) const { return {data.data() + c * plane_size(), plane_size()}; }
  std::span<float> plane(int c) { return {data.data() + c * plane_size(), plane_size()}; }
  float at(int c, int y, int x) const {
    return data[c * plane_size() + static_cast<std::size_t>(y) * width + x];
  }

  friend bool operator==(const ChannelStack&, const ChannelStack&) = default;
};

// Half-open rectangle of channel cells.
struct CellRect {
  int x0 = 0, y0 = 0, x1 = 0, y1 = 0;
  int width() const { return x1 - x0; }
  int height() const { return y1 - y0; }
  friend bool operator==(const CellRect&, const CellRect&) = default;
};

namespace detail {

inline void normalize_kernel(std::vector<double>& k) {
  double mean = 0;
  for (double v : k) mean += v;
  mean /= static_cast<double>(k.size());
  double norm = 0;
  for (double& v : k) {
    v -= mean;
    norm += v * v;
  }
  norm = std::sqrt(norm);
  if (norm < 1e-12) throw ArgumentError("kernel too small to hold a zero-mean filter");
  for (double& v : k) v /= norm;
}

inline double gauss2(double u, double v, double su, double sv) {
  return std::exp(-0.5 * (u * u / (su * su) + v * v / (sv * sv)));
}

// Oriented first derivative of an anisotropic Gaussian, elongated across the
// derivative direction. Identical weights on every input plane.
inline std::vector<double> oriented_edge(int kh, int kw, int cin, double theta, double sigma,
                                         double elongation) {
  std::vector<double> k(static_cast<std::size_t>(cin) * kh * kw);
  const double c = std::cos(theta), s = std::sin(theta);
  for (int y = 0; y < kh; ++y) {
    for (int x = 0; x < kw; ++x) {
      const double dx = x - kw / 2, dy = y - kh / 2;
      const double u = dx * c + dy * s;
      const double v = -dx * s + dy * c;
      const double g = -u / (sigma * sigma) * gauss2(u, v, sigma, elongation * sigma);
      for (int ch = 0; ch < cin; ++ch) k[(static_cast<std::size_t>(ch) * kh + y) * kw + x] = g;
    }
  }
  return k;
}

// Isotropic blob with a per-plane gain (opponent color) or, when `surround`
// is set, a center-surround difference of Gaussians on every plane.
inline std::vector<double> blob(int kh, int kw, int cin, double sigma,
                                std::span<const double> gains, bool surround) {
  std::vector<double> k(static_cast<std::size_t>(cin) * kh * kw);
  for (int y = 0; y < kh; ++y) {
    for (int x = 0; x < kw; ++x) {
      const double dx = x - kw / 2, dy = y - kh / 2;
      double g = gauss2(dx, dy, sigma, sigma);
      if (surround) g -= 0.25 * gauss2(dx, dy, 2 * sigma, 2 * sigma);
      for (int ch = 0; ch < cin; ++ch)
        k[(static_cast<std::size_t>(ch) * kh + y) * kw + x] = gains[static_cast<std::size_t>(ch)] * g;
    }
  }
  return k;
}

// o[x] += wt * in[x]. Cloned for AVX2 with runtime dispatch; no FMA, so
// every clone rounds identically.
#if defined(__x86_64__) && defined(__GNUC__) && !defined(__clang__)
__attribute__((target_clones("avx2", "default")))
#endif
inline void axpy_row(float* __restrict o, const float* __restrict in, float wt, int n) {
  for (int x = 0; x < n; ++x) o[x] += wt * in[x];
}

inline int reflect101(int i, int n) {
  if (n == 1) return 0;
  while (i < 0 || i >= n) {
    if (i < 0) i = -i;
    if (i >= n) i = 2 * n - 2 - i;
  }
  return i;
}

}  // namespace detail

// Deterministic stand-in for pretrained first-layer kernels: oriented
// derivative-of-Gaussian edges (8 orientations per bandwidth) followed by
// color-opponent and center-surround blobs, cycling through doubling
// bandwidths until F filters exist. Every kernel is zero-mean with unit L2
// norm; biases are zero.
inline FilterBank synth_filter_bank(std::uint64_t seed, int filters, int kh, int kw, int cin) {
  if (filters < 2) throw ArgumentError("synthesized banks need at least 2 filters");
  if (kh < 3 || kw < 3 || kh % 2 == 0 || kw % 2 == 0)
    throw ArgumentError("synthesized kernels must be odd and at least 3x3");
  if (cin != 1 && cin != 3) throw ArgumentError("input plane count must be 1 or 3");

  Rng rng(mix_seed(seed, 0xF17E));
  const double theta0 = rng.uniform(0.0, M_PI / 8);
  const double elongation = rng.uniform(1.5, 2.0);
  const double sigma0 = std::max(kh, kw) / 6.0;

  FilterBank bank;
  bank.filters = filters;
  bank.cin = cin;
  bank.kh = kh;
  bank.kw = kw;
  bank.source = BankSource::kSynthesized;
  bank.seed = seed;
  bank.weights.reserve(static_cast<std::size_t>(filters) * bank.kernel_size());

  auto push = [&](std::vector<double> k) {
    if (static_cast<int>(bank.biases.size()) == filters) return;
    detail::normalize_kernel(k);
    bank.weights.insert(bank.weights.end(), k.begin(), k.end());
    bank.biases.push_back(0.0);
  };

  for (int band = 0; static_cast<int>(bank.biases.size()) < filters; ++band) {
    const double sigma = sigma0 * std::pow(2.0, band);
    for (int o = 0; o < 8; ++o)
      push(detail::oriented_edge(kh, kw, cin, theta0 + o * M_PI / 4, sigma, elongation));
    if (cin == 3) {
      const double red_green[] = {1.0, -1.0, 0.0};
      const double blue_yellow[] = {-0.5, -0.5, 1.0};
      const double lum[] = {1.0, 1.0, 1.0};
      push(detail::blob(kh, kw, cin, sigma, red_green, false));
      push(detail::blob(kh, kw, cin, sigma, blue_yellow, false));
      push(detail::blob(kh, kw, cin, sigma, lum, true));
    } else {
      const double lum[] = {1.0};
      push(detail::blob(kh, kw, cin, sigma, lum, true));
    }
  }
  return bank;
}

// Same-size cross-correlation with reflect-101 borders, without bias or
// rectifier. Weights are applied at float precision, matching banks that
// were round-tripped through a CFBK file.
inline ChannelStack convolve_linear(const ImagePlanes& image, const FilterBank& bank) {
  if (bank.cin != image.channels()) {
    std::ostringstream os;
    os << "filter bank expects " << bank.cin << " input planes, image has " << image.channels();
    throw ArgumentError(os.str());
  }
  const int w = image.width(), h = image.height();
  const int rx = bank.kw / 2, ry = bank.kh / 2;
  const int pw = w + 2 * rx, ph = h + 2 * ry;

  std::vector<float> padded(static_cast<std::size_t>(image.channels()) * pw * ph);
  std::vector<int> xmap(static_cast<std::size_t>(pw));
  for (int x = 0; x < pw; ++x) xmap[static_cast<std::size_t>(x)] = detail::reflect101(x - rx, w);
  for (int c = 0; c < image.channels(); ++c) {
    auto src = image.plane(c);
    float* dst = padded.data() + static_cast<std::size_t>(c) * pw * ph;
    for (int y = 0; y < ph; ++y) {
      const float* row = src.data() + static_cast<std::size_t>(detail::reflect101(y - ry, h)) * w;
      float* out = dst + static_cast<std::size_t>(y) * pw;
      for (int x = 0; x < pw; ++x) out[x] = row[xmap[static_cast<std::size_t>(x)]];
    }
  }

  ChannelStack stack;
  stack.channels = bank.filters;
  stack.width = w;
  stack.height = h;
  stack.shrink = 1;
  stack.origin_offset = 0.5;
  stack.data.assign(static_cast<std::size_t>(bank.filters) * w * h, 0.0f);
  std::vector<float> wts(bank.weights.size());
  for (std::size_t i = 0; i < wts.size(); ++i) wts[i] = static_cast<float>(bank.weights[i]);
  // Row by row so the working set stays in cache; each output accumulates
  // its terms in (plane, ky, kx) order.
  std::vector<float> acc(static_cast<std::size_t>(w));
  for (int y = 0; y < h; ++y) {
    for (int f = 0; f < bank.filters; ++f) {
      std::fill(acc.begin(), acc.end(), 0.0f);
      float* __restrict o = acc.data();
      const float* kf = wts.data() + static_cast<std::size_t>(f) * bank.kernel_size();
      for (int c = 0; c < bank.cin; ++c) {
        const float* src = padded.data() + static_cast<std::size_t>(c) * pw * ph;
        for (int ky = 0; ky < bank.kh; ++ky) {
          const float* row = src + static_cast<std::size_t>(y + ky) * pw;
          const float* kr = kf + (static_cast<std::size_t>(c) * bank.kh + ky) * bank.kw;
          for (int kx = 0; kx < bank.kw; ++kx) {
            const float wt = kr[kx];
            if (wt == 0.0f) continue;
            detail::axpy_row(o, row + kx, wt, w);
          }
        }
      }
      std::copy(acc.begin(), acc.end(), stack.plane(f).begin() + static_cast<std::ptrdiff_t>(y) * w);
    }
  }
  return stack;
}

// Rectified responses max(0, r + bias), one plane per filter.
inline ChannelStack convolve(const ImagePlanes& image, const FilterBank& bank) {
  ChannelStack stack = convolve_linear(image, bank);
  for (int f = 0; f < bank.filters; ++f) {
    const auto bias = static_cast<float>(bank.biases[static_cast<std::size_t>(f)]);
    for (float& v : stack.plane(f)) v = std::max(0.0f, v + bias);
  }
  return stack;
}

namespace detail {

// Block means over s x s input blocks for the first out_w x out_h blocks;
// blocks that run past the input edge average their actual members.
inline ChannelStack aggregate_blocks(const ChannelStack& in, int s, int out_w, int out_h) {
  ChannelStack out;
  out.channels = in.channels;
  out.width = out_w;
  out.height = out_h;
  out.shrink = in.shrink * s;
  out.origin_offset = in.origin_offset + 0.5 * (s - 1) * in.shrink;
  out.source_scale = in.source_scale;
  out.data.assign(static_cast<std::size_t>(in.channels) * out_w * out_h, 0.0f);
  std::vector<double> acc(static_cast<std::size_t>(out_w));
  for (int c = 0; c < in.channels; ++c) {
    auto src = in.plane(c);
    auto dst = out.plane(c);
    for (int oy = 0; oy < out_h; ++oy) {
      std::fill(acc.begin(), acc.end(), 0.0);
      const int y0 = oy * s, y1 = std::min(y0 + s, in.height);
      for (int y = y0; y < y1; ++y) {
        const float* row = src.data() + static_cast<std::size_t>(y) * in.width;
        for (int ox = 0; ox < out_w; ++ox) {
          const int x0 = ox * s, x1 = std::min(x0 + s, in.width);
          double sum = 0;
          for (int x = x0; x < x1; ++x) sum += row[x];
          acc[static_cast<std::size_t>(ox)] += sum;
        }
      }
      for (int ox = 0; ox < out_w; ++ox) {
        const int x0 = ox * s, x1 = std::min(x0 + s, in.width);
        const double members = static_cast<double>(x1 - x0) * (y1 - y0);
        dst[static_cast<std::size_t>(oy) * out_w + ox] =
            static_cast<float>(acc[static_cast<std::size_t>(ox)] / members);
      }
    }
  }
  return out;
}

}  // namespace detail

// Mean pooling over s x s blocks. Output covers the input completely
// (ceil division); partial border blocks average their actual members.
inline ChannelStack aggregate(const ChannelStack& stack, int s) {
  if (s < 1) throw ArgumentError("aggregation shrink must be >= 1");
  if (s == 1) return stack;
  return detail::aggregate_blocks(stack, s, (stack.width + s - 1) / s,
                                  (stack.height + s - 1) / s);
}

// Geometry of one pyramid level. The original image is resized to
// resized_width x resized_height; x_factor and y_factor are the realized
// resize factors (resized / original).
struct LevelGeometry {
  int scale_index = 0;
  int aspect_index = 0;
  double scale = 1.0;
  double aspect = 1.0;
  int image_width = 0;
  int image_height = 0;
  int resized_width = 0;
  int resized_height = 0;
  double x_factor = 1.0;
  double y_factor = 1.0;
  int shrink = 1;

  int grid_width() const { return resized_width / shrink; }
  int grid_height() const { return resized_height / shrink; }
  bool fits(int d) const { return grid_width() >= d && grid_height() >= d; }
};

struct PyramidLevel {
  LevelGeometry geometry;
  ChannelStack channels;
};

inline constexpr double kAspectStretch = 1.5;

// Nominal scale of level k: 2^(-k/4).
inline double pyramid_scale(int k) { return std::pow(2.0, -k / 4.0); }

// Nominal x-stretch for aspect index j of an R-level symmetric set.
inline double pyramid_aspect(int j, int R) { return std::pow(kAspectStretch, j - R / 2); }

// Enumerates the (scale, aspect) levels in which at least one d x d window
// fits, ordered by (scale_index, aspect_index).
inline std::vector<LevelGeometry> plan_pyramid(int width, int height, int S, int R, int d,
                                               int shrink) {
  if (width <= 0 || height <= 0) throw ArgumentError("image dimensions must be positive");
  if (S < 1) throw ArgumentError("pyramid needs S >= 1 scales");
  if (R < 1 || R % 2 == 0) throw ArgumentError("pyramid needs an odd number R >= 1 of aspect ratios");
  if (d < 1) throw ArgumentError("window size d must be >= 1");
  if (shrink < 1) throw ArgumentError("shrink must be >= 1");
  std::vector<LevelGeometry> levels;
  for (int k = 0; k < S; ++k) {
    for (int j = 0; j < R; ++j) {
      LevelGeometry g;
      g.scale_index = k;
      g.aspect_index = j;
      g.scale = pyramid_scale(k);
      g.aspect = pyramid_aspect(j, R);
      g.image_width = width;
      g.image_height = height;
      g.resized_width = std::max(1, static_cast<int>(std::lround(width * g.scale * g.aspect)));
      g.resized_height = std::max(1, static_cast<int>(std::lround(height * g.scale)));
      g.x_factor = static_cast<double>(g.resized_width) / width;
      g.y_factor = static_cast<double>(g.resized_height) / height;
      g.shrink = shrink;
      if (g.fits(d)) levels.push_back(g);
    }
  }
  return levels;
}

// Resizes, convolves and aggregates one level. Only whole s x s blocks are
// kept, so grid dimensions are floor(resized / s).
inline ChannelStack compute_level(const ImagePlanes& image, const FilterBank& bank,
                                  const LevelGeometry& g) {
  const ImagePlanes resized = resize_bilinear(image, g.resized_width, g.resized_height);
  ChannelStack raw = convolve(resized, bank);
  raw.source_scale = g.scale;
  if (g.shrink == 1) return raw;
  return detail::aggregate_blocks(raw, g.shrink, g.grid_width(), g.grid_height());
}

inline std::vector<PyramidLevel> build_pyramid(const ImagePlanes& image, const FilterBank& bank,
                                               int S, int R, int d, int shrink,
                                               int threads = 1) {
  const auto plan = plan_pyramid(image.width(), image.height(), S, R, d, shrink);
  std::vector<PyramidLevel> levels(plan.size());
  parallel_for(plan.size(), threads, [&](std::size_t i) {
    levels[i].geometry = plan[i];
    levels[i].channels = compute_level(image, bank, plan[i]);
  });
  return levels;
}

// Maps an original-image box to the channel cells whose centers fall inside
// it, after insetting each side by band_margin times the side length. With
// odd same-padded kernels a cell's receptive field is centered on the cell
// center, so the center test also keeps receptive-field centers inside the
// band. The result is clamped to the grid and to at least one cell.
inline CellRect project_box(const Box& box, const LevelGeometry& g, double band_margin = 0.0) {
  if (!(band_margin >= 0.0 && band_margin < 0.5))
    throw ArgumentError("band_margin must be in [0, 0.5)");
  if (box.x2 <= 0 || box.y2 <= 0 || box.x1 >= g.image_width || box.y1 >= g.image_height)
    throw ArgumentError("box lies outside the image");
  const double s = g.shrink;
  // Cell coordinates (one unit per cell, cell i spans [i, i+1)).
  double x1 = box.x1 * g.x_factor / s, x2 = box.x2 * g.x_factor / s;
  double y1 = box.y1 * g.y_factor / s, y2 = box.y2 * g.y_factor / s;
  const double mx = band_margin * (x2 - x1), my = band_margin * (y2 - y1);
  x1 += mx;
  x2 -= mx;
  y1 += my;
  y2 -= my;

  const int gw = g.grid_width(), gh = g.grid_height();
  auto span = [](double lo, double hi, int n) {
    // First and one-past-last cell whose center i + 0.5 lies in [lo, hi).
    int a = static_cast<int>(std::ceil(lo - 0.5));
    int b = static_cast<int>(std::ceil(hi - 0.5));
    a = std::clamp(a, 0, n);
    b = std::clamp(b, 0, n);
    if (b <= a) {
      const int mid = std::clamp(static_cast<int>(std::floor(0.5 * (lo + hi))), 0, n - 1);
      a = mid;
      b = mid + 1;
    }
    return std::pair{a, b};
  };
  const auto [cx0, cx1] = span(x1, x2, gw);
  const auto [cy0, cy1] = span(y1, y2, gh);
  return CellRect{cx0, cy0, cx1, cy1};
}

// Copies (exact fit) or bilinearly resamples a cell rectangle to a d x d x F
// descriptor in channel-major, row-major order.
inline void resample_cells(const ChannelStack& stack, const CellRect& r, int d,
                           std::span<float> out) {
  const std::size_t dd = static_cast<std::size_t>(d) * d;
  if (r.width() == d && r.height() == d) {
    for (int c = 0; c < stack.channels; ++c)
      for (int i = 0; i < d; ++i)
        for (int j = 0; j < d; ++j)
          out[c * dd + static_cast<std::size_t>(i) * d + j] = stack.at(c, r.y0 + i, r.x0 + j);
    return;
  }
  const auto tx = detail::linear_taps(r.width(), d);
  const auto ty = detail::linear_taps(r.height(), d);
  for (int c = 0; c < stack.channels; ++c) {
    for (int i = 0; i < d; ++i) {
      const auto& t = ty[static_cast<std::size_t>(i)];
      for (int j = 0; j < d; ++j) {
        const auto& u = tx[static_cast<std::size_t>(j)];
        const float top = u.w0 * stack.at(c, r.y0 + t.i0, r.x0 + u.i0) +
                          u.w1 * stack.at(c, r.y0 + t.i0, r.x0 + u.i1);
        const float bot = u.w0 * stack.at(c, r.y0 + t.i1, r.x0 + u.i0) +
                          u.w1 * stack.at(c, r.y0 + t.i1, r.x0 + u.i1);
        out[c * dd + static_cast<std::size_t>(i) * d + j] = t.w0 * top + t.w1 * bot;
      }
    }
  }
}

}  // namespace convboost
