#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <limits>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "convboost/error.hpp"
#include "convboost/geometry.hpp"
#include "convboost/parallel.hpp"

namespace convboost {

// Center-relative, log-size box transform.
struct BoxDeltas {
  double dx = 0, dy = 0, dw = 0, dh = 0;

  double operator[](int i) const { return i == 0 ? dx : i == 1 ? dy : i == 2 ? dw : dh; }
  double& operator[](int i) { return i == 0 ? dx : i == 1 ? dy : i == 2 ? dw : dh; }
};

inline BoxDeltas make_targets(const Box& p, const Box& g) {
  return {(g.center_x() - p.center_x()) / p.width(), (g.center_y() - p.center_y()) / p.height(),
          std::log(g.width() / p.width()), std::log(g.height() / p.height())};
}

inline Box apply_deltas(const Box& p, const BoxDeltas& t) {
  // Edge offsets rather than center +- half size, so zero deltas are exact.
  const double pw = p.width(), ph = p.height();
  const double sx = t.dx * pw, sy = t.dy * ph;
  const double gx = 0.5 * (pw * std::exp(t.dw) - pw);
  const double gy = 0.5 * (ph * std::exp(t.dh) - ph);
  return {p.x1 + sx - gx, p.y1 + sy - gy, p.x2 + sx + gx, p.y2 + sy + gy};
}

inline constexpr double kRegressionMinIou = 0.7;

struct RegressionPair {
  Box proposal;
  Box truth;
  std::vector<float> phi;
};

// Four ridge regressors over standardized descriptors.
struct RegressorModel {
  int d = 0;
  int channels = 0;
  int shrink = 1;
  int S = 12;  // pyramid the descriptors were read from
  int R = 3;
  std::string bank_fingerprint;
  double lambda = 1000.0;
  std::vector<double> mean;
  std::vector<double> scale;
  std::array<std::vector<double>, 4> weights;
  std::array<double, 4> bias{};

  std::size_t dim() const { return mean.size(); }

  BoxDeltas predict(std::span<const float> phi) const {
    if (phi.size() != dim()) {
      std::ostringstream os;
      os << "descriptor has " << phi.size() << " values, regressor expects " << dim();
      throw ArgumentError(os.str());
    }
    BoxDeltas out;
    for (int k = 0; k < 4; ++k) {
      double s = bias[static_cast<std::size_t>(k)];
      const auto& w = weights[static_cast<std::size_t>(k)];
      for (std::size_t j = 0; j < phi.size(); ++j) s += w[j] * ((phi[j] - mean[j]) / scale[j]);
      out[k] = s;
    }
    return out;
  }

  friend bool operator==(const RegressorModel&, const RegressorModel&) = default;
};

// A regressor with all-zero weights and biases: the identity refinement.
inline RegressorModel zero_regressor(std::size_t dim) {
  RegressorModel m;
  m.mean.assign(dim, 0.0);
  m.scale.assign(dim, 1.0);
  for (auto& w : m.weights) w.assign(dim, 0.0);
  return m;
}

// Ridge fit per target dimension, (A^T A + lambda I) w = A^T (t - mean t),
// over descriptors standardized to zero mean and unit variance; the bias is
// the (unregularized) target mean. When there are fewer pairs than
// dimensions the identical solution is computed through the N x N dual
// system w = A^T (A A^T + lambda I)^-1 (t - mean t).
inline RegressorModel fit_regressor(std::span<const RegressionPair> pairs, double lambda) {
  if (pairs.empty()) throw ArgumentError("regression needs at least one pair");
  if (!(lambda > 0) || !std::isfinite(lambda)) throw ArgumentError("lambda must be positive");
  const std::size_t n = pairs.size();
  const std::size_t dim = pairs[0].phi.size();
  for (const auto& p : pairs)
    if (p.phi.size() != dim) throw ArgumentError("regression descriptors differ in size");

  RegressorModel m;
  m.lambda = lambda;
  m.mean.assign(dim, 0.0);
  m.scale.assign(dim, 0.0);
  for (const auto& p : pairs)
    for (std::size_t j = 0; j < dim; ++j) m.mean[j] += p.phi[j];
  for (auto& v : m.mean) v /= static_cast<double>(n);
  for (const auto& p : pairs)
    for (std::size_t j = 0; j < dim; ++j) {
      const double c = p.phi[j] - m.mean[j];
      m.scale[j] += c * c;
    }
  for (auto& v : m.scale) {
    v = std::sqrt(v / static_cast<double>(n));
    if (v < 1e-12) v = 1.0;
  }

  Eigen::MatrixXd a(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(dim));
  Eigen::MatrixXd t(static_cast<Eigen::Index>(n), 4);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < dim; ++j)
      a(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
          (pairs[i].phi[j] - m.mean[j]) / m.scale[j];
    const BoxDeltas targets = make_targets(pairs[i].proposal, pairs[i].truth);
    for (int k = 0; k < 4; ++k) t(static_cast<Eigen::Index>(i), k) = targets[k];
  }
  for (int k = 0; k < 4; ++k) {
    m.bias[static_cast<std::size_t>(k)] = t.col(k).mean();
    t.col(k).array() -= m.bias[static_cast<std::size_t>(k)];
  }

  Eigen::MatrixXd w;
  if (dim <= n) {
    Eigen::MatrixXd gram = a.transpose() * a;
    gram.diagonal().array() += lambda;
    w = gram.ldlt().solve(a.transpose() * t);
  } else {
    Eigen::MatrixXd gram = a * a.transpose();
    gram.diagonal().array() += lambda;
    w = a.transpose() * gram.ldlt().solve(t);
  }
  for (int k = 0; k < 4; ++k) {
    auto& wk = m.weights[static_cast<std::size_t>(k)];
    wk.resize(dim);
    for (std::size_t j = 0; j < dim; ++j) wk[j] = w(static_cast<Eigen::Index>(j), k);
    for (double v : wk)
      if (!std::isfinite(v)) throw TrainingError("ridge solve produced non-finite weights");
  }
  return m;
}

// Refined box for a proposal with descriptor phi (not clipped).
inline Box apply_regressor(const RegressorModel& model, const Box& box, std::span<const float> phi) {
  return apply_deltas(box, model.predict(phi));
}

struct SelectedPair {
  std::size_t image = 0;
  std::size_t truth = 0;
  std::size_t proposal = 0;
  double iou = 0;
};

// For every ground truth, its highest-IoU proposal in the same image (ties:
// higher score, then lower index), kept when IoU >= min_iou.
inline std::vector<SelectedPair> select_pairs(
    std::span<const std::vector<ScoredBox>> proposals,
    std::span<const std::vector<Box>> truths, double min_iou = kRegressionMinIou) {
  if (proposals.size() != truths.size())
    throw ArgumentError("proposal and annotation lists cover different image counts");
  std::vector<SelectedPair> out;
  for (std::size_t img = 0; img < truths.size(); ++img) {
    const auto& props = proposals[img];
    for (std::size_t g = 0; g < truths[img].size(); ++g) {
      double best = -1;
      std::size_t best_idx = 0;
      for (std::size_t p = 0; p < props.size(); ++p) {
        const double v = iou(props[p].box, truths[img][g]);
        if (v > best || (v == best && props[p].score > props[best_idx].score)) {
          best = v;
          best_idx = p;
        }
      }
      if (!props.empty() && best >= min_iou) out.push_back({img, g, best_idx, best});
    }
  }
  return out;
}

}  // namespace convboost
