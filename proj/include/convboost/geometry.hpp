#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numeric>
#include <span>
#include <sstream>
#include <vector>

#include "convboost/error.hpp"

namespace convboost {

// Axis-aligned half-open rectangle [x1, x2) x [y1, y2) in pixel coordinates.
struct Box {
  double x1 = 0, y1 = 0, x2 = 0, y2 = 0;

  double width() const { return x2 - x1; }
  double height() const { return y2 - y1; }
  double area() const { return width() * height(); }
  double center_x() const { return 0.5 * (x1 + x2); }
  double center_y() const { return 0.5 * (y1 + y2); }

  bool valid() const {
    return std::isfinite(x1) && std::isfinite(y1) && std::isfinite(x2) &&
           std::isfinite(y2) && x2 > x1 && y2 > y1;
  }

  friend bool operator==(const Box&, const Box&) = default;
};

struct ScoredBox {
  Box box;
  double score = 0;

  friend bool operator==(const ScoredBox&, const ScoredBox&) = default;
};

inline Box checked_box(double x1, double y1, double x2, double y2) {
  Box b{x1, y1, x2, y2};
  if (!b.valid()) {
    std::ostringstream os;
    os << "invalid box (" << x1 << ", " << y1 << ", " << x2 << ", " << y2 << ")";
    throw ArgumentError(os.str());
  }
  return b;
}

// VOC annotations use 1-based inclusive integer corners.
inline Box box_from_voc(double xmin, double ymin, double xmax, double ymax) {
  return Box{xmin - 1.0, ymin - 1.0, xmax, ymax};
}

inline double intersection_area(const Box& a, const Box& b) {
  const double w = std::min(a.x2, b.x2) - std::max(a.x1, b.x1);
  const double h = std::min(a.y2, b.y2) - std::max(a.y1, b.y1);
  if (w <= 0 || h <= 0) return 0.0;
  return w * h;
}

inline double iou(const Box& a, const Box& b) {
  const double inter = intersection_area(a, b);
  if (inter <= 0) return 0.0;
  return inter / (a.area() + b.area() - inter);
}

// Clips to [0, width) x [0, height). The result may be degenerate when the box
// lies entirely outside.
inline Box clip_box(const Box& b, double width, double height) {
  return Box{std::clamp(b.x1, 0.0, width), std::clamp(b.y1, 0.0, height),
             std::clamp(b.x2, 0.0, width), std::clamp(b.y2, 0.0, height)};
}

// Indices of `boxes` in decreasing score order; ties keep input order.
inline std::vector<std::size_t> score_order(std::span<const ScoredBox> boxes) {
  std::vector<std::size_t> order(boxes.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return boxes[a].score > boxes[b].score;
  });
  return order;
}

namespace detail {

// Uniform bucket grid over the extent of a box set. A kept box is registered
// in every bucket it touches, so any box with positive intersection shares at
// least one bucket with it.
class BucketGrid {
 public:
  explicit BucketGrid(std::span<const ScoredBox> boxes) {
    if (boxes.empty()) return;
    min_x_ = boxes[0].box.x1;
    min_y_ = boxes[0].box.y1;
    double max_x = boxes[0].box.x2, max_y = boxes[0].box.y2;
    double side_sum = 0;
    for (const auto& sb : boxes) {
      min_x_ = std::min(min_x_, sb.box.x1);
      min_y_ = std::min(min_y_, sb.box.y1);
      max_x = std::max(max_x, sb.box.x2);
      max_y = std::max(max_y, sb.box.y2);
      side_sum += std::sqrt(std::max(sb.box.area(), 0.0));
    }
    const double mean_side = side_sum / static_cast<double>(boxes.size());
    const double extent = std::max(max_x - min_x_, max_y - min_y_);
    // Buckets of roughly half a typical box side, capped to keep memory bounded.
    int n = static_cast<int>(std::ceil(extent / std::max(mean_side * 0.5, 1e-9)));
    n = std::clamp(n, 1, 64);
    if (boxes.size() < 64) n = 1;
    nx_ = ny_ = n;
    cell_w_ = std::max((max_x - min_x_) / n, 1e-12);
    cell_h_ = std::max((max_y - min_y_) / n, 1e-12);
    buckets_.resize(static_cast<std::size_t>(nx_) * ny_);
  }

  template <typename Fn>
  void for_each_bucket(const Box& b, Fn&& fn) {
    const int cx0 = cell_x(b.x1), cx1 = cell_x(b.x2);
    const int cy0 = cell_y(b.y1), cy1 = cell_y(b.y2);
    for (int cy = cy0; cy <= cy1; ++cy)
      for (int cx = cx0; cx <= cx1; ++cx)
        fn(buckets_[static_cast<std::size_t>(cy) * nx_ + cx]);
  }

 private:
  int cell_x(double x) const {
    return std::clamp(static_cast<int>(std::floor((x - min_x_) / cell_w_)), 0, nx_ - 1);
  }
  int cell_y(double y) const {
    return std::clamp(static_cast<int>(std::floor((y - min_y_) / cell_h_)), 0, ny_ - 1);
  }

  double min_x_ = 0, min_y_ = 0, cell_w_ = 1, cell_h_ = 1;
  int nx_ = 1, ny_ = 1;
  std::vector<std::vector<std::uint32_t>> buckets_;
};

}  // namespace detail

// Greedy non-maximum suppression. Boxes are visited in decreasing score
// (ties by input index); a box is kept iff its IoU with every previously kept
// box is <= threshold. Suppressed boxes never suppress others.
inline std::vector<ScoredBox> nms_greedy(std::span<const ScoredBox> boxes,
                                         double threshold) {
  if (!(threshold > 0.0 && threshold <= 1.0))
    throw ArgumentError("nms threshold must be in (0, 1]");
  std::vector<ScoredBox> kept;
  if (boxes.empty()) return kept;
  const auto order = score_order(boxes);
  if (threshold >= 1.0) {
    kept.reserve(boxes.size());
    for (auto i : order) kept.push_back(boxes[i]);
    return kept;
  }

  detail::BucketGrid grid(boxes);
  std::vector<std::uint32_t> stamp(boxes.size(), 0);
  std::uint32_t epoch = 0;
  for (auto i : order) {
    const Box& b = boxes[i].box;
    bool suppressed = false;
    ++epoch;
    grid.for_each_bucket(b, [&](std::vector<std::uint32_t>& bucket) {
      if (suppressed) return;
      for (auto k : bucket) {
        if (stamp[k] == epoch) continue;
        stamp[k] = epoch;
        if (iou(kept[k].box, b) > threshold) {
          suppressed = true;
          return;
        }
      }
    });
    if (suppressed) continue;
    const auto id = static_cast<std::uint32_t>(kept.size());
    kept.push_back(boxes[i]);
    grid.for_each_bucket(b, [&](std::vector<std::uint32_t>& bucket) { bucket.push_back(id); });
  }
  return kept;
}

}  // namespace convboost
