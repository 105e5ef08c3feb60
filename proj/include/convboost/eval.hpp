#pragma once

#include <algorithm>
#include <cstddef>
#include <set>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "convboost/error.hpp"
#include "convboost/geometry.hpp"
#include "convboost/log.hpp"

namespace convboost {

struct EvalImage {
  std::string id;
  std::vector<Box> truths;
  std::vector<ScoredBox> proposals;  // descending score
};

struct RecallCurve {
  std::vector<double> thresholds;
  std::vector<double> recall;
};

struct EvalReport {
  RecallCurve curve;
  double auc = 0;
  std::vector<std::pair<std::size_t, double>> recall_vs_count;
  std::size_t images_evaluated = 0;
  std::size_t images_blacklisted = 0;
  std::size_t ground_truths = 0;
  double avg_proposals_per_image = 0;
};

// 0.5, 0.525, ..., 1.0
inline std::vector<double> default_iou_grid() {
  std::vector<double> g;
  for (int k = 0; k <= 20; ++k) g.push_back((20 + k) / 40.0);
  return g;
}

namespace detail {

inline std::size_t count_truths(std::span<const EvalImage> images) {
  std::size_t n = 0;
  for (const auto& im : images) n += im.truths.size();
  if (n == 0) throw EvaluationError("no ground-truth boxes to evaluate");
  return n;
}

// Best IoU of every ground truth against the first `budget` proposals of
// its image, in image order.
inline std::vector<double> best_ious(std::span<const EvalImage> images, std::size_t budget) {
  std::vector<double> best;
  for (const auto& im : images) {
    const std::size_t n = std::min(budget, im.proposals.size());
    for (const auto& gt : im.truths) {
      double m = 0;
      for (std::size_t p = 0; p < n; ++p) m = std::max(m, iou(im.proposals[p].box, gt));
      best.push_back(m);
    }
  }
  return best;
}

inline double fraction_at_least(std::span<const double> best, double t) {
  std::size_t hit = 0;
  for (double v : best)
    if (v >= t) ++hit;
  return static_cast<double>(hit) / static_cast<double>(best.size());
}

}  // namespace detail

// Fraction of ground truths covered by some proposal of their image with
// IoU >= t. One proposal may cover several ground truths.
inline double recall_at(std::span<const EvalImage> images, double t) {
  if (!(t > 0 && t <= 1)) throw ArgumentError("IoU threshold must be in (0, 1]");
  detail::count_truths(images);
  const auto best = detail::best_ious(images, static_cast<std::size_t>(-1));
  return detail::fraction_at_least(best, t);
}

inline RecallCurve recall_curve(std::span<const EvalImage> images,
                                std::span<const double> grid) {
  if (grid.size() < 2) throw ArgumentError("recall curve needs at least two thresholds");
  for (std::size_t i = 0; i < grid.size(); ++i) {
    if (!(grid[i] > 0 && grid[i] <= 1)) throw ArgumentError("IoU threshold must be in (0, 1]");
    if (i > 0 && !(grid[i] > grid[i - 1])) throw ArgumentError("IoU grid must be increasing");
  }
  detail::count_truths(images);
  const auto best = detail::best_ious(images, static_cast<std::size_t>(-1));
  RecallCurve c;
  c.thresholds.assign(grid.begin(), grid.end());
  for (double t : grid) c.recall.push_back(detail::fraction_at_least(best, t));
  return c;
}

// Trapezoidal area under the curve divided by the width of its threshold
// range, so a constant-1 curve has AUC 1.
inline double auc(const RecallCurve& c) {
  if (c.thresholds.size() < 2 || c.thresholds.size() != c.recall.size())
    throw ArgumentError("malformed recall curve");
  double area = 0;
  for (std::size_t i = 1; i < c.thresholds.size(); ++i)
    area += 0.5 * (c.recall[i] + c.recall[i - 1]) * (c.thresholds[i] - c.thresholds[i - 1]);
  return area / (c.thresholds.back() - c.thresholds.front());
}

// Recall at IoU 0.5 when every image keeps only its top-b proposals.
inline std::vector<std::pair<std::size_t, double>> recall_vs_count(
    std::span<const EvalImage> images, std::span<const std::size_t> budgets) {
  detail::count_truths(images);
  std::vector<std::pair<std::size_t, double>> out;
  for (auto b : budgets)
    out.emplace_back(b, detail::fraction_at_least(detail::best_ious(images, b), 0.5));
  return out;
}

struct BlacklistResult {
  std::vector<EvalImage> images;
  std::size_t removed = 0;
  std::vector<std::string> unknown_ids;
};

inline BlacklistResult apply_blacklist(std::vector<EvalImage> images,
                                       const std::set<std::string>& blacklist) {
  BlacklistResult out;
  std::set<std::string> seen;
  for (auto& im : images) {
    if (blacklist.count(im.id)) {
      ++out.removed;
      seen.insert(im.id);
    } else {
      out.images.push_back(std::move(im));
    }
  }
  for (const auto& id : blacklist) {
    if (!seen.count(id)) {
      out.unknown_ids.push_back(id);
      log_warning("blacklist entry '" + id + "' matches no image; ignored");
    }
  }
  return out;
}

inline EvalReport evaluate(std::span<const EvalImage> images, std::span<const double> grid,
                           std::span<const std::size_t> budgets,
                           std::size_t images_blacklisted = 0) {
  EvalReport r;
  r.ground_truths = detail::count_truths(images);
  r.curve = recall_curve(images, grid);
  r.auc = auc(r.curve);
  r.recall_vs_count = recall_vs_count(images, budgets);
  r.images_evaluated = images.size();
  r.images_blacklisted = images_blacklisted;
  std::size_t props = 0;
  for (const auto& im : images) props += im.proposals.size();
  r.avg_proposals_per_image =
      images.empty() ? 0.0 : static_cast<double>(props) / static_cast<double>(images.size());
  return r;
}

}  // namespace convboost
