#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <limits>
#include <map>
#include <span>
#include <sstream>
#include <vector>

#include "convboost/boost.hpp"
#include "convboost/channels.hpp"
#include "convboost/error.hpp"
#include "convboost/geometry.hpp"
#include "convboost/log.hpp"
#include "convboost/parallel.hpp"
#include "convboost/random.hpp"
#include "convboost/window_scorer.hpp"

namespace convboost {

// Pyramid and window parameters shared by training-time extraction and
// detection, so descriptors are read from the same levels at both times.
struct WindowParams {
  int d = 25;
  int shrink = 4;
  int S = 12;
  int R = 3;
  double band_margin = 0.0;
};

struct SampleSpec {
  std::size_t neg_per_round = 20000;
  int bootstrap_rounds = 3;
  double neg_max_iou = 0.3;
  std::uint64_t rng_seed = 0;
  // Negative box side sqrt(w h) in pixels; min 0 means one window (d * shrink).
  double min_side = 0.0;
  // Upper bound on the side as a fraction of sqrt(image area).
  double max_side_frac = 1.0;
  // Width / height range for negative boxes.
  double min_aspect = 0.5;
  double max_aspect = 2.0;

  void validate() const {
    if (!(neg_max_iou >= 0.0 && neg_max_iou < 1.0))
      throw ArgumentError("neg_max_iou must be in [0, 1)");
    if (bootstrap_rounds < 0) throw ArgumentError("bootstrap_rounds must be >= 0");
    if (!(min_aspect > 0 && max_aspect >= min_aspect))
      throw ArgumentError("invalid negative aspect range");
    if (!(max_side_frac > 0)) throw ArgumentError("max_side_frac must be positive");
  }
};

// Descriptors stored back to back, d x d x F each.
struct DescriptorList {
  int d = 0;
  int channels = 0;
  std::vector<float> data;

  std::size_t dim() const { return static_cast<std::size_t>(d) * d * channels; }
  std::size_t size() const { return dim() == 0 ? 0 : data.size() / dim(); }
  std::span<const float> row(std::size_t i) const { return {data.data() + i * dim(), dim()}; }
};

// Pyramid levels of one image, computed on first use.
class LevelCache {
 public:
  LevelCache(const ImagePlanes& image, const FilterBank& bank, const WindowParams& p)
      : image_(&image),
        bank_(&bank),
        plan_(plan_pyramid(image.width(), image.height(), p.S, p.R, p.d, p.shrink)),
        stacks_(plan_.size()) {}

  const std::vector<LevelGeometry>& plan() const { return plan_; }
  const ImagePlanes& image() const { return *image_; }

  const ChannelStack& channels(std::size_t level) {
    auto& slot = stacks_[level];
    if (slot.data.empty()) slot = compute_level(*image_, *bank_, plan_[level]);
    return slot;
  }

 private:
  const ImagePlanes* image_;
  const FilterBank* bank_;
  std::vector<LevelGeometry> plan_;
  std::vector<ChannelStack> stacks_;
};

// Level whose window (d * shrink / factor on each axis, in image pixels)
// is closest to the box in log-area and log-aspect. Ties go to the earlier level.
inline std::size_t best_level(std::span<const LevelGeometry> plan, const Box& box, int d) {
  if (plan.empty()) throw ArgumentError("no pyramid level fits a detector window");
  const double log_area = std::log(box.area());
  const double log_aspect = std::log(box.width() / box.height());
  std::size_t best = 0;
  double best_cost = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < plan.size(); ++i) {
    const double ww = d * plan[i].shrink / plan[i].x_factor;
    const double wh = d * plan[i].shrink / plan[i].y_factor;
    const double da = std::log(ww * wh) - log_area;
    const double dr = std::log(ww / wh) - log_aspect;
    const double cost = da * da + dr * dr;
    if (cost < best_cost) {
      best_cost = cost;
      best = i;
    }
  }
  return best;
}

// Writes the d x d x F descriptor of `box` into `out`. Returns false when the
// projected box covers fewer than 2 x 2 cells at its best level.
inline bool describe_box(LevelCache& cache, const Box& box, const WindowParams& p,
                         std::span<float> out) {
  const Box clipped = clip_box(box, cache.image().width(), cache.image().height());
  if (!clipped.valid()) throw ArgumentError("box lies outside the image");
  const std::size_t level = best_level(cache.plan(), clipped, p.d);
  const CellRect r = project_box(clipped, cache.plan()[level], p.band_margin);
  if (r.width() < 2 || r.height() < 2) return false;
  resample_cells(cache.channels(level), r, p.d, out);
  return true;
}

struct PositiveSamples {
  DescriptorList descriptors;
  std::size_t skipped = 0;
};

// One descriptor per annotation, read from the best-matching pyramid level.
inline PositiveSamples extract_positive(LevelCache& cache, std::span<const Box> annotations,
                                        const WindowParams& p, int channels) {
  PositiveSamples out;
  out.descriptors.d = p.d;
  out.descriptors.channels = channels;
  std::vector<float> desc(out.descriptors.dim());
  for (const auto& box : annotations) {
    if (describe_box(cache, box, p, desc))
      out.descriptors.data.insert(out.descriptors.data.end(), desc.begin(), desc.end());
    else
      ++out.skipped;
  }
  return out;
}

inline PositiveSamples extract_positive(const ImagePlanes& image, std::span<const Box> annotations,
                                        const FilterBank& bank, const WindowParams& p) {
  LevelCache cache(image, bank, p);
  return extract_positive(cache, annotations, p, bank.filters);
}

inline double max_iou(const Box& b, std::span<const Box> annotations) {
  double m = 0;
  for (const auto& a : annotations) m = std::max(m, iou(a, b));
  return m;
}

struct NegativeSamples {
  std::vector<Box> boxes;
  DescriptorList descriptors;
};

// Rejection-samples n boxes uniform in log-side, log-aspect and position
// whose IoU with every annotation is below spec.neg_max_iou. `stream`
// decorrelates images drawn from the same seed.
inline NegativeSamples sample_negatives(LevelCache& cache, std::span<const Box> annotations,
                                        const SampleSpec& spec, const WindowParams& p,
                                        int channels, std::size_t n, std::uint64_t stream) {
  spec.validate();
  NegativeSamples out;
  out.descriptors.d = p.d;
  out.descriptors.channels = channels;
  if (n == 0) return out;
  const double W = cache.image().width(), H = cache.image().height();
  const double min_side = spec.min_side > 0 ? spec.min_side : static_cast<double>(p.d) * p.shrink;
  const double max_side = std::max(min_side, spec.max_side_frac * std::sqrt(W * H));
  const double lo_side = std::log(min_side), hi_side = std::log(max_side);
  const double lo_asp = std::log(spec.min_aspect), hi_asp = std::log(spec.max_aspect);

  Rng rng(mix_seed(spec.rng_seed, stream));
  std::vector<float> desc(out.descriptors.dim());
  const std::size_t max_draws = 1000 * n;
  for (std::size_t draw = 0; draw < max_draws && out.boxes.size() < n; ++draw) {
    const double side = std::exp(rng.uniform(lo_side, hi_side));
    const double asp = std::exp(rng.uniform(lo_asp, hi_asp));
    const double w = side * std::sqrt(asp), h = side / std::sqrt(asp);
    const double ux = rng.uniform(), uy = rng.uniform();
    if (w > W || h > H) continue;
    const Box b{ux * (W - w), uy * (H - h), ux * (W - w) + w, uy * (H - h) + h};
    if (!(max_iou(b, annotations) < spec.neg_max_iou)) continue;
    if (!describe_box(cache, b, p, desc)) continue;
    out.boxes.push_back(b);
    out.descriptors.data.insert(out.descriptors.data.end(), desc.begin(), desc.end());
  }
  if (out.boxes.size() < n) {
    std::ostringstream os;
    os << "negative sampling accepted " << out.boxes.size() << " of " << n
       << " boxes after " << max_draws << " draws; the image is too densely annotated";
    throw SamplingError(os.str());
  }
  return out;
}

// Splits `total` across items proportionally to `areas` (largest remainder,
// ties to the lower index).
inline std::vector<std::size_t> allocate_by_area(std::span<const double> areas, std::size_t total) {
  std::vector<std::size_t> out(areas.size(), 0);
  double sum = 0;
  for (double a : areas) sum += a;
  if (areas.empty() || sum <= 0) return out;
  std::vector<std::pair<double, std::size_t>> rem;
  std::size_t given = 0;
  for (std::size_t i = 0; i < areas.size(); ++i) {
    const double exact = static_cast<double>(total) * areas[i] / sum;
    out[i] = static_cast<std::size_t>(std::floor(exact));
    given += out[i];
    rem.emplace_back(exact - std::floor(exact), i);
  }
  std::stable_sort(rem.begin(), rem.end(),
                   [](const auto& a, const auto& b) { return a.first > b.first; });
  for (std::size_t k = 0; given < total && k < rem.size(); ++k, ++given) ++out[rem[k].second];
  return out;
}

// A training image source: annotations and sizes up front, pixels on demand.
struct TrainingImages {
  std::vector<std::vector<Box>> annotations;
  std::vector<std::pair<int, int>> sizes;
  std::function<ImagePlanes(std::size_t)> load;

  std::size_t size() const { return annotations.size(); }
};

struct InitialSamples {
  DescriptorList positives;
  DescriptorList negatives;
  std::size_t skipped_positives = 0;
};

// Positives from every annotation plus `spec.neg_per_round` random negatives
// spread over images by area. Per-image work runs in parallel; results are
// concatenated in image order.
inline InitialSamples collect_initial_samples(const TrainingImages& data, const FilterBank& bank,
                                              const WindowParams& p, const SampleSpec& spec,
                                              int threads) {
  std::vector<double> areas;
  for (const auto& [w, h] : data.sizes) areas.push_back(static_cast<double>(w) * h);
  const auto quota = allocate_by_area(areas, spec.neg_per_round);
  std::vector<PositiveSamples> pos(data.size());
  std::vector<NegativeSamples> neg(data.size());
  parallel_for(data.size(), threads, [&](std::size_t i) {
    const ImagePlanes img = data.load(i);
    LevelCache cache(img, bank, p);
    pos[i] = extract_positive(cache, data.annotations[i], p, bank.filters);
    neg[i] = sample_negatives(cache, data.annotations[i], spec, p, bank.filters, quota[i], i);
  });
  InitialSamples out;
  out.positives = {p.d, bank.filters, {}};
  out.negatives = {p.d, bank.filters, {}};
  for (std::size_t i = 0; i < data.size(); ++i) {
    out.positives.data.insert(out.positives.data.end(), pos[i].descriptors.data.begin(),
                              pos[i].descriptors.data.end());
    out.negatives.data.insert(out.negatives.data.end(), neg[i].descriptors.data.begin(),
                              neg[i].descriptors.data.end());
    out.skipped_positives += pos[i].skipped;
  }
  return out;
}

struct MinedWindow {
  std::size_t image = 0;
  std::size_t level = 0;
  int cell_x = 0;
  int cell_y = 0;
  Box box;
  double score = 0;
};

struct HardNegatives {
  std::vector<MinedWindow> windows;
  DescriptorList descriptors;
};

namespace detail {

// Score descending, then image, level, row and column ascending.
inline bool mined_before(const MinedWindow& a, const MinedWindow& b) {
  if (a.score != b.score) return a.score > b.score;
  if (a.image != b.image) return a.image < b.image;
  if (a.level != b.level) return a.level < b.level;
  if (a.cell_y != b.cell_y) return a.cell_y < b.cell_y;
  return a.cell_x < b.cell_x;
}

}  // namespace detail

// One round of hard-negative mining: every window scoring above zero whose
// IoU with all annotations is below spec.neg_max_iou is a candidate; the
// spec.neg_per_round highest-scoring candidates are returned with their
// descriptors, sorted by descending score.
inline HardNegatives mine_hard_negatives(const BoostedModel& model, const TrainingImages& data,
                                         const FilterBank& bank, const WindowParams& p,
                                         const SampleSpec& spec, int threads) {
  const std::size_t budget = spec.neg_per_round;
  std::vector<std::vector<MinedWindow>> per_image(data.size());
  parallel_for(data.size(), threads, [&](std::size_t i) {
    const ImagePlanes img = data.load(i);
    const auto plan = plan_pyramid(img.width(), img.height(), p.S, p.R, p.d, p.shrink);
    auto& found = per_image[i];
    for (std::size_t l = 0; l < plan.size(); ++l) {
      const ChannelStack ch = compute_level(img, bank, plan[l]);
      const WindowScores ws = score_windows(model, ch, 1);
      for (int y = 0; y < ws.rows; ++y) {
        for (int x = 0; x < ws.cols; ++x) {
          const double s = ws.at(y, x);
          if (!(s > 0)) continue;
          const Box b = window_to_image_box(plan[l], x, y, p.d);
          if (!(max_iou(b, data.annotations[i]) < spec.neg_max_iou)) continue;
          found.push_back({i, l, x, y, b, s});
        }
      }
    }
    if (found.size() > budget) {
      std::partial_sort(found.begin(), found.begin() + static_cast<std::ptrdiff_t>(budget),
                        found.end(), detail::mined_before);
      found.resize(budget);
    }
  });

  HardNegatives out;
  for (auto& f : per_image) out.windows.insert(out.windows.end(), f.begin(), f.end());
  std::sort(out.windows.begin(), out.windows.end(), detail::mined_before);
  if (out.windows.size() > budget) out.windows.resize(budget);

  if (budget > 0 && out.windows.size() * 100 < budget) {
    std::ostringstream os;
    os << "hard-negative mining found only " << out.windows.size() << " of " << budget
       << " requested windows";
    log_warning(os.str());
  }

  // Second pass: read descriptors for the selected windows only.
  out.descriptors = {p.d, bank.filters, {}};
  const std::size_t dim = out.descriptors.dim();
  out.descriptors.data.assign(out.windows.size() * dim, 0.0f);
  std::map<std::size_t, std::vector<std::size_t>> by_image;
  for (std::size_t k = 0; k < out.windows.size(); ++k) by_image[out.windows[k].image].push_back(k);
  std::vector<std::pair<std::size_t, std::vector<std::size_t>>> jobs(by_image.begin(), by_image.end());
  parallel_for(jobs.size(), threads, [&](std::size_t j) {
    const ImagePlanes img = data.load(jobs[j].first);
    LevelCache cache(img, bank, p);
    for (auto k : jobs[j].second) {
      const auto& w = out.windows[k];
      const CellRect r{w.cell_x, w.cell_y, w.cell_x + p.d, w.cell_y + p.d};
      resample_cells(cache.channels(w.level), r, p.d,
                     std::span<float>(out.descriptors.data.data() + k * dim, dim));
    }
  });
  return out;
}

}  // namespace convboost
