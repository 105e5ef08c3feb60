#pragma once

// Independent reference implementations used by unit and acceptance tests.

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "convboost/boost.hpp"
#include "convboost/geometry.hpp"

namespace oracles {

using convboost::Box;
using convboost::ScoredBox;

// IoU by counting unit lattice cells; boxes must have integer corners.
inline double lattice_iou(const Box& a, const Box& b) {
  long inter = 0, uni = 0;
  const int x0 = static_cast<int>(std::min(a.x1, b.x1)), x1 = static_cast<int>(std::max(a.x2, b.x2));
  const int y0 = static_cast<int>(std::min(a.y1, b.y1)), y1 = static_cast<int>(std::max(a.y2, b.y2));
  for (int y = y0; y < y1; ++y)
    for (int x = x0; x < x1; ++x) {
      const bool in_a = x >= a.x1 && x < a.x2 && y >= a.y1 && y < a.y2;
      const bool in_b = x >= b.x1 && x < b.x2 && y >= b.y1 && y < b.y2;
      inter += in_a && in_b;
      uni += in_a || in_b;
    }
  return static_cast<double>(inter) / static_cast<double>(uni);
}

// Quadratic greedy NMS straight from the definition.
inline std::vector<ScoredBox> reference_nms(const std::vector<ScoredBox>& boxes, double threshold) {
  std::vector<std::size_t> idx(boxes.size());
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  for (std::size_t i = 1; i < idx.size(); ++i)  // insertion sort, stable
    for (std::size_t j = i; j > 0 && boxes[idx[j]].score > boxes[idx[j - 1]].score; --j)
      std::swap(idx[j], idx[j - 1]);
  std::vector<ScoredBox> kept;
  for (auto i : idx) {
    bool keep = true;
    for (const auto& k : kept)
      if (convboost::iou(k.box, boxes[i].box) > threshold) keep = false;
    if (keep) kept.push_back(boxes[i]);
  }
  return kept;
}

// Weighted Gini impurity sum_side 2 W+ W- / W of sending x[f] < thr left,
// over the samples with member[i] set.
inline double split_impurity(const convboost::WeightedSet& set, const std::vector<bool>& member,
                             std::size_t f, double thr) {
  double lp = 0, ln = 0, rp = 0, rn = 0;
  for (std::size_t i = 0; i < set.size(); ++i) {
    if (!member[i]) continue;
    const bool left = set.row(i)[f] < thr;
    const bool pos = set.labels[i] > 0;
    (left ? (pos ? lp : ln) : (pos ? rp : rn)) += set.weights[i];
  }
  double imp = 0;
  if (lp + ln > 0) imp += 2 * lp * ln / (lp + ln);
  if (rp + rn > 0) imp += 2 * rp * rn / (rp + rn);
  return imp;
}

// Minimum impurity over every (feature, quantized threshold) pair.
inline double brute_force_min_impurity(const convboost::WeightedSet& set,
                                       const convboost::FeatureBins& fb,
                                       const std::vector<bool>& member) {
  double best = split_impurity(set, member, 0, std::numeric_limits<double>::infinity());
  for (std::size_t f = 0; f < set.dim(); ++f)
    for (float e : fb.edges_of(f)) best = std::min(best, split_impurity(set, member, f, e));
  return best;
}

}  // namespace oracles
