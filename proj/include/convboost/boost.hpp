#pragma once

#include <algorithm>
#include <array>
#include <cfloat>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "convboost/error.hpp"
#include "convboost/parallel.hpp"

namespace convboost {

// Labeled descriptors with a sample distribution. Descriptors are d x d x F
// values in channel-major, row-major order, stored back to back.
struct WeightedSet {
  int d = 0;
  int channels = 0;
  std::vector<float> data;
  std::vector<std::int8_t> labels;
  std::vector<double> weights;

  WeightedSet() = default;
  WeightedSet(int d_, int channels_) : d(d_), channels(channels_) {}

  std::size_t dim() const { return static_cast<std::size_t>(d) * d * channels; }
  std::size_t size() const { return labels.size(); }
  std::span<const float> row(std::size_t i) const { return {data.data() + i * dim(), dim()}; }

  void add(std::span<const float> desc, int label) {
    if (desc.size() != dim()) throw ArgumentError("descriptor size does not match the set");
    if (label != 1 && label != -1) throw ArgumentError("labels must be +1 or -1");
    data.insert(data.end(), desc.begin(), desc.end());
    labels.push_back(static_cast<std::int8_t>(label));
    weights.push_back(0.0);
  }

  void set_uniform_weights() {
    weights.assign(size(), size() == 0 ? 0.0 : 1.0 / static_cast<double>(size()));
  }

  std::size_t count(int label) const {
    return static_cast<std::size_t>(std::count(labels.begin(), labels.end(), label));
  }

  void validate() const {
    if (data.size() != size() * dim() || weights.size() != size())
      throw ArgumentError("weighted set arrays have inconsistent lengths");
    if (count(1) == 0 || count(-1) == 0)
      throw ArgumentError("weighted set needs at least one positive and one negative sample");
    double total = 0;
    for (double w : weights) {
      if (!(w > 0) || !std::isfinite(w)) throw ArgumentError("sample weights must be positive");
      total += w;
    }
    if (std::abs(total - 1.0) > 1e-9) throw ArgumentError("sample weights must sum to 1");
  }
};

// Per-feature quantization thresholds: `bins - 1` non-decreasing edges per
// feature. A value v falls in bin (number of edges <= v).
struct FeatureBins {
  int bins = 0;
  std::size_t features = 0;
  std::vector<float> edges;

  std::span<const float> edges_of(std::size_t f) const {
    const auto n = static_cast<std::size_t>(bins - 1);
    return {edges.data() + f * n, n};
  }

  int bin_of(std::size_t f, float v) const {
    const auto e = edges_of(f);
    return static_cast<int>(std::upper_bound(e.begin(), e.end(), v) - e.begin());
  }
};

namespace detail {

// Smallest float that is >= x, so `v < edge` for float v matches `v < x`.
inline float float_at_or_above(double x) {
  auto f = static_cast<float>(x);
  if (static_cast<double>(f) < x) f = std::nextafter(f, std::numeric_limits<float>::infinity());
  return f;
}

}  // namespace detail

// Equal-population edges from the empirical distribution of every feature:
// edge k sits halfway between order statistics floor(k N / bins) - 1 and
// floor(k N / bins).
inline FeatureBins quantize_features(const WeightedSet& set, int bins = 256,
                                     int threads = 1) {
  if (bins < 2 || bins > 256) throw ArgumentError("bins must be in [2, 256]");
  if (set.size() == 0) throw ArgumentError("cannot quantize an empty set");
  FeatureBins fb;
  fb.bins = bins;
  fb.features = set.dim();
  const std::size_t n = set.size();
  const auto per = static_cast<std::size_t>(bins - 1);
  fb.edges.assign(fb.features * per, 0.0f);
  constexpr std::size_t kBlock = 64;
  const std::size_t blocks = (fb.features + kBlock - 1) / kBlock;
  parallel_for(blocks, threads, [&](std::size_t b) {
    const std::size_t f0 = b * kBlock, f1 = std::min(fb.features, (b + 1) * kBlock);
    std::vector<float> block((f1 - f0) * n);
    for (std::size_t i = 0; i < n; ++i) {
      const float* row = set.data.data() + i * fb.features;
      for (std::size_t f = f0; f < f1; ++f) block[(f - f0) * n + i] = row[f];
    }
    for (std::size_t f = f0; f < f1; ++f) {
      const std::span<float> values(block.data() + (f - f0) * n, n);
      std::sort(values.begin(), values.end());
      for (std::size_t k = 1; k <= per; ++k) {
        const std::size_t hi = k * n / static_cast<std::size_t>(bins);  // < n
        const std::size_t lo = hi == 0 ? 0 : hi - 1;
        const double mid = 0.5 * (static_cast<double>(values[lo]) + values[hi]);
        fb.edges[f * per + k - 1] = detail::float_at_or_above(mid);
      }
    }
  });
  return fb;
}

struct Split {
  std::uint32_t feature = 0;
  float threshold = FLT_MAX;

  bool goes_left(std::span<const float> x) const { return x[feature] < threshold; }
  friend bool operator==(const Split&, const Split&) = default;
};

// One root split, two child splits and four leaves:
// leaves = {left-left, left-right, right-left, right-right}.
struct DepthTwoTree {
  Split root, left, right;
  std::array<double, 4> leaves{};

  double eval(std::span<const float> x) const {
    if (x[root.feature] < root.threshold)
      return leaves[x[left.feature] < left.threshold ? 0 : 1];
    return leaves[x[right.feature] < right.threshold ? 2 : 3];
  }

  friend bool operator==(const DepthTwoTree&, const DepthTwoTree&) = default;
};

// Weighted Gini impurity of a binary partition, sum over sides of
// W_side * (1 - p+^2 - p-^2) = 2 W+ W- / W.
inline double gini_impurity(double left_pos, double left_neg, double right_pos,
                            double right_neg) {
  double imp = 0;
  const double l = left_pos + left_neg, r = right_pos + right_neg;
  if (l > 0) imp += 2.0 * left_pos * left_neg / l;
  if (r > 0) imp += 2.0 * right_pos * right_neg / r;
  return imp;
}

struct TrainingMeta {
  int rounds = 0;
  std::size_t positives = 0;
  std::size_t negatives = 0;
  int bootstrap_rounds = 0;
  std::uint64_t seed = 0;

  friend bool operator==(const TrainingMeta&, const TrainingMeta&) = default;
};

struct BoostedModel {
  int d = 0;
  int channels = 0;
  int shrink = 1;
  std::string bank_fingerprint;
  std::vector<DepthTwoTree> trees;
  TrainingMeta meta;

  std::size_t dim() const { return static_cast<std::size_t>(d) * d * channels; }

  friend bool operator==(const BoostedModel&, const BoostedModel&) = default;
};

// Sum of tree outputs in tree order.
inline double score(const BoostedModel& model, std::span<const float> desc) {
  if (desc.size() != model.dim()) {
    std::ostringstream os;
    os << "descriptor has " << desc.size() << " values, model expects " << model.dim();
    throw ArgumentError(os.str());
  }
  double s = 0;
  for (const auto& t : model.trees) s += t.eval(desc);
  return s;
}

// Scores `count` descriptors stored back to back.
inline std::vector<double> score_batch(const BoostedModel& model, std::span<const float> descs,
                                       int threads = 1) {
  const std::size_t dim = model.dim();
  if (dim == 0 || descs.size() % dim != 0)
    throw ArgumentError("descriptor batch size is not a multiple of the model dimension");
  const std::size_t n = descs.size() / dim;
  std::vector<double> out(n);
  constexpr std::size_t kBlock = 256;
  parallel_for((n + kBlock - 1) / kBlock, threads, [&](std::size_t b) {
    for (std::size_t i = b * kBlock; i < std::min(n, (b + 1) * kBlock); ++i)
      out[i] = score(model, descs.subspan(i * dim, dim));
  });
  return out;
}

namespace detail {

// Feature-major bin indices, one byte per (feature, sample).
struct QuantizedSet {
  std::size_t n = 0;
  std::size_t features = 0;
  std::vector<std::uint8_t> bins;

  const std::uint8_t* column(std::size_t f) const { return bins.data() + f * n; }
};

inline QuantizedSet quantize_set(const WeightedSet& set, const FeatureBins& fb, int threads) {
  if (fb.features != set.dim()) throw ArgumentError("bin edges do not match the set dimension");
  QuantizedSet q;
  q.n = set.size();
  q.features = set.dim();
  q.bins.resize(q.n * q.features);
  constexpr std::size_t kBlock = 64;
  parallel_for((q.features + kBlock - 1) / kBlock, threads, [&](std::size_t b) {
    const std::size_t f_end = std::min(q.features, (b + 1) * kBlock);
    for (std::size_t i = 0; i < q.n; ++i) {
      const float* row = set.data.data() + i * q.features;
      for (std::size_t f = b * kBlock; f < f_end; ++f)
        q.bins[f * q.n + i] = static_cast<std::uint8_t>(fb.bin_of(f, row[f]));
    }
  });
  return q;
}

// A split on feature `feature` sending bins < `bin` left. bin == bins means
// "everything left" (no usable split was found).
struct BinSplit {
  double impurity = std::numeric_limits<double>::infinity();
  std::uint32_t feature = 0;
  int bin = 0;
  bool valid() const { return bin > 0 && std::isfinite(impurity); }
};

// Best threshold for one feature from its weighted histogram, stored as
// interleaved (negative, positive) masses per bin. Updates `best` on strict
// improvement, so earlier features and lower bins win ties. Weights are
// positive, so a bin is occupied exactly when its mass is nonzero.
inline void scan_histogram(const double* hist, int bins, std::span<const float> edges,
                           std::uint32_t feature, BinSplit& best) {
  // lp[k], ln[k]: mass of bins < k, for k = 1 .. bins - 1.
  double lp[256], ln[256], imp[256];
  int first = bins, last = -1;
  double cp = 0, cn = 0;
  for (int b = 0; b < bins; ++b) {
    const double bn = hist[2 * b], bp = hist[2 * b + 1];
    if (bn + bp > 0) {
      first = std::min(first, b);
      last = b;
    }
    cn += bn;
    cp += bp;
    lp[b + 1 < bins ? b + 1 : 0] = cp;
    ln[b + 1 < bins ? b + 1 : 0] = cn;
  }
  // Thresholds k with first < k <= last leave both sides non-empty.
  const int lo = first + 1, hi = last;
  if (lo > hi) return;
  const double tp = cp, tn = cn;
  for (int k = lo; k <= hi; ++k) {
    const double l = lp[k] + ln[k];
    const double rp = tp - lp[k], rn = tn - ln[k];
    const double r = rp + rn;
    imp[k] = 2.0 * lp[k] * ln[k] / l + 2.0 * rp * rn / r;
  }
  for (int k = lo; k <= hi; ++k) {
    if (k >= 2 && edges[static_cast<std::size_t>(k - 1)] == edges[static_cast<std::size_t>(k - 2)])
      continue;
    if (imp[k] < best.impurity) {
      best.impurity = imp[k];
      best.feature = feature;
      best.bin = k;
    }
  }
}

// Finds the best split for every group in one pass over the features.
// group[i] in [0, groups) selects the partition sample i belongs to.
inline std::vector<BinSplit> best_splits(const QuantizedSet& q, const FeatureBins& fb,
                                         std::span<const std::int8_t> labels,
                                         std::span<const double> weights,
                                         std::span<const std::uint8_t> group, int groups,
                                         int threads) {
  const auto stride = static_cast<std::size_t>(2 * fb.bins);  // one group's histogram
  // Offset of sample i inside its feature histogram, minus the bin term.
  std::vector<std::uint32_t> off(q.n);
  for (std::size_t i = 0; i < q.n; ++i)
    off[i] = static_cast<std::uint32_t>(group[i] * stride + (labels[i] > 0 ? 1 : 0));

  constexpr std::size_t kBlock = 32;
  constexpr std::size_t kLanes = 4;
  const std::size_t blocks = (q.features + kBlock - 1) / kBlock;
  std::vector<std::vector<BinSplit>> per_block(blocks, std::vector<BinSplit>(groups));
  parallel_for(blocks, threads, [&](std::size_t b) {
    const std::size_t per_feature = stride * static_cast<std::size_t>(groups);
    std::vector<double> hist(per_feature * kLanes);
    auto& best = per_block[b];
    const std::size_t f_end = std::min(q.features, (b + 1) * kBlock);
    for (std::size_t f0 = b * kBlock; f0 < f_end; f0 += kLanes) {
      const std::size_t lanes = std::min(kLanes, f_end - f0);
      std::fill(hist.begin(), hist.end(), 0.0);
      double* h0 = hist.data();
      double* h1 = h0 + per_feature;
      double* h2 = h1 + per_feature;
      double* h3 = h2 + per_feature;
      const std::uint8_t* c0 = q.column(f0);
      if (lanes == kLanes) {
        const std::uint8_t* c1 = q.column(f0 + 1);
        const std::uint8_t* c2 = q.column(f0 + 2);
        const std::uint8_t* c3 = q.column(f0 + 3);
        for (std::size_t i = 0; i < q.n; ++i) {
          const double w = weights[i];
          const std::uint32_t o = off[i];
          h0[o + 2u * c0[i]] += w;
          h1[o + 2u * c1[i]] += w;
          h2[o + 2u * c2[i]] += w;
          h3[o + 2u * c3[i]] += w;
        }
      } else {
        for (std::size_t l = 0; l < lanes; ++l) {
          const std::uint8_t* c = q.column(f0 + l);
          double* h = hist.data() + l * per_feature;
          for (std::size_t i = 0; i < q.n; ++i) h[off[i] + 2u * c[i]] += weights[i];
        }
      }
      for (std::size_t l = 0; l < lanes; ++l) {
        const auto f = f0 + l;
        for (int g = 0; g < groups; ++g)
          scan_histogram(hist.data() + l * per_feature + static_cast<std::size_t>(g) * stride, fb.bins,
                         fb.edges_of(f), static_cast<std::uint32_t>(f), best[static_cast<std::size_t>(g)]);
      }
    }
  });
  std::vector<BinSplit> best(static_cast<std::size_t>(groups));
  for (const auto& pb : per_block)
    for (int g = 0; g < groups; ++g)
      if (pb[static_cast<std::size_t>(g)].impurity < best[static_cast<std::size_t>(g)].impurity)
        best[static_cast<std::size_t>(g)] = pb[static_cast<std::size_t>(g)];
  return best;
}

inline double leaf_value(double w_pos, double w_neg, double eps) {
  return 0.5 * std::log((w_pos + eps) / (w_neg + eps));
}

// Tree in quantized form: thresholds as bin indices for fast evaluation on
// the training matrix.
struct QuantizedTree {
  DepthTwoTree tree;
  std::uint32_t root_f = 0, left_f = 0, right_f = 0;
  int root_bin = 0, left_bin = 0, right_bin = 0;

  double eval(const QuantizedSet& q, std::size_t i) const {
    if (q.column(root_f)[i] < root_bin) return tree.leaves[q.column(left_f)[i] < left_bin ? 0 : 1];
    return tree.leaves[q.column(right_f)[i] < right_bin ? 2 : 3];
  }
};

inline QuantizedTree fit_tree(const QuantizedSet& q, const FeatureBins& fb,
                              std::span<const std::int8_t> labels,
                              std::span<const double> weights, int threads) {
  const double eps = 1.0 / (2.0 * static_cast<double>(q.n));
  std::vector<std::uint8_t> group(q.n, 0);

  auto to_split = [&](const BinSplit& s, Split& out, std::uint32_t& f, int& bin) {
    if (s.valid()) {
      out.feature = s.feature;
      out.threshold = fb.edges_of(s.feature)[static_cast<std::size_t>(s.bin - 1)];
      f = s.feature;
      bin = s.bin;
    } else {
      out = Split{0, FLT_MAX};
      f = 0;
      bin = fb.bins;  // every bin index is below this
    }
  };

  QuantizedTree qt;
  const auto root = best_splits(q, fb, labels, weights, group, 1, threads)[0];
  to_split(root, qt.tree.root, qt.root_f, qt.root_bin);
  for (std::size_t i = 0; i < q.n; ++i) group[i] = q.column(qt.root_f)[i] < qt.root_bin ? 0 : 1;

  const auto children = best_splits(q, fb, labels, weights, group, 2, threads);
  to_split(children[0], qt.tree.left, qt.left_f, qt.left_bin);
  to_split(children[1], qt.tree.right, qt.right_f, qt.right_bin);

  // Leaf masses, plus per-child and whole-set masses for degenerate splits.
  std::array<double, 4> pos{}, neg{};
  std::array<double, 2> child_pos{}, child_neg{};
  std::array<std::size_t, 2> child_n{};
  double all_pos = 0, all_neg = 0;
  for (std::size_t i = 0; i < q.n; ++i) {
    const int g = group[i];
    int leaf;
    if (g == 0)
      leaf = q.column(qt.left_f)[i] < qt.left_bin ? 0 : 1;
    else
      leaf = q.column(qt.right_f)[i] < qt.right_bin ? 2 : 3;
    auto& p = labels[i] > 0 ? pos : neg;
    p[static_cast<std::size_t>(leaf)] += weights[i];
    (labels[i] > 0 ? child_pos : child_neg)[static_cast<std::size_t>(g)] += weights[i];
    ++child_n[static_cast<std::size_t>(g)];
    (labels[i] > 0 ? all_pos : all_neg) += weights[i];
  }
  const std::array<bool, 2> split_ok{children[0].valid(), children[1].valid()};
  for (int g = 0; g < 2; ++g) {
    const auto gi = static_cast<std::size_t>(g);
    if (split_ok[gi]) {
      qt.tree.leaves[2 * gi] = leaf_value(pos[2 * gi], neg[2 * gi], eps);
      qt.tree.leaves[2 * gi + 1] = leaf_value(pos[2 * gi + 1], neg[2 * gi + 1], eps);
    } else {
      // No split: both leaves take the child's distribution, or the whole
      // set's when the child received no samples.
      const double v = child_n[gi] > 0 ? leaf_value(child_pos[gi], child_neg[gi], eps)
                                       : leaf_value(all_pos, all_neg, eps);
      qt.tree.leaves[2 * gi] = v;
      qt.tree.leaves[2 * gi + 1] = v;
    }
  }
  return qt;
}

}  // namespace detail

// Fits one depth-two tree: root and child splits minimize weighted Gini
// impurity over all (feature, bin edge) thresholds; leaves hold
// 0.5 * ln((W+ + eps) / (W- + eps)) with eps = 1 / (2N).
inline DepthTwoTree train_depth2_tree(const WeightedSet& set, const FeatureBins& fb,
                                      int threads = 1) {
  set.validate();
  const auto q = detail::quantize_set(set, fb, threads);
  return detail::fit_tree(q, fb, set.labels, set.weights, threads).tree;
}

struct TrainingHistory {
  std::vector<double> exp_loss;     // mean exp(-y H) after each round
  std::vector<double> log_exp_loss;  // its log, finite after exp_loss underflows
  std::vector<double> train_error;  // fraction with sign(H) != y after each round
  std::vector<double> weight_sum;   // sum of sample weights after renormalization
  double min_weight = 1.0;          // smallest sample weight seen after any round
};

struct BoostOptions {
  int rounds = 2048;
  int threads = 1;
};

// Real AdaBoost over depth-two trees, exactly `rounds` rounds from uniform
// sample weights. Weights follow w_i ~ exp(-y_i H(x_i)), evaluated in the log
// domain; a weight that would underflow is floored at the smallest normal
// double before renormalization.
inline BoostedModel adaboost_train(const WeightedSet& set, const FeatureBins& fb,
                                   const BoostOptions& opt,
                                   TrainingHistory* history = nullptr) {
  if (opt.rounds < 1) throw ArgumentError("boosting needs at least one round");
  if (set.count(1) == 0 || set.count(-1) == 0)
    throw ArgumentError("weighted set needs at least one positive and one negative sample");
  const auto q = detail::quantize_set(set, fb, opt.threads);
  const std::size_t n = set.size();

  BoostedModel model;
  model.d = set.d;
  model.channels = set.channels;
  model.trees.reserve(static_cast<std::size_t>(opt.rounds));
  model.meta.rounds = opt.rounds;
  model.meta.positives = set.count(1);
  model.meta.negatives = set.count(-1);

  std::vector<double> margin(n, 0.0);  // -y_i H(x_i)
  std::vector<double> w(n, 1.0 / static_cast<double>(n));
  for (int t = 0; t < opt.rounds; ++t) {
    const auto qt = detail::fit_tree(q, fb, set.labels, w, opt.threads);
    model.trees.push_back(qt.tree);

    double max_margin = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < n; ++i) {
      margin[i] -= set.labels[i] * qt.eval(q, i);
      max_margin = std::max(max_margin, margin[i]);
    }
    if (!std::isfinite(max_margin)) {
      std::ostringstream os;
      os << "non-finite sample margin in boosting round " << t;
      throw TrainingError(os.str());
    }
    double sum = 0;
    for (std::size_t i = 0; i < n; ++i) {
      w[i] = std::max(std::exp(margin[i] - max_margin), DBL_MIN);
      sum += w[i];
    }
    if (!std::isfinite(sum) || sum <= 0) {
      std::ostringstream os;
      os << "sample weights overflowed in boosting round " << t;
      throw TrainingError(os.str());
    }
    for (auto& wi : w) wi /= sum;

    if (history) {
      double loss = 0, shifted = 0, wsum = 0;
      std::size_t errors = 0;
      for (std::size_t i = 0; i < n; ++i) {
        loss += std::exp(margin[i]);
        shifted += std::exp(margin[i] - max_margin);
        wsum += w[i];
        // sign(H) != y, with H = 0 counted as an error.
        if (margin[i] >= 0) ++errors;
        history->min_weight = std::min(history->min_weight, w[i]);
      }
      history->exp_loss.push_back(loss / static_cast<double>(n));
      history->log_exp_loss.push_back(max_margin + std::log(shifted / static_cast<double>(n)));
      history->train_error.push_back(static_cast<double>(errors) / static_cast<double>(n));
      history->weight_sum.push_back(wsum);
    }
  }
  return model;
}

}  // namespace convboost
