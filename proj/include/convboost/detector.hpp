#pragma once

#include <algorithm>
#include <cstddef>
#include <limits>
#include <map>
#include <sstream>
#include <vector>

#include "convboost/boost.hpp"
#include "convboost/channels.hpp"
#include "convboost/error.hpp"
#include "convboost/geometry.hpp"
#include "convboost/io/cfbk.hpp"
#include "convboost/log.hpp"
#include "convboost/parallel.hpp"
#include "convboost/window_scorer.hpp"

namespace convboost {

struct DetectorConfig {
  int S = 12;
  int R = 3;
  double U = 0.63;
  double V = 0.90;
  int stride_cells = 1;
  std::size_t max_proposals = 10000;
  double score_floor = -std::numeric_limits<double>::infinity();
  std::vector<BoostedModel> models;
  int threads = 1;

  void validate() const {
    if (!(U > 0 && U <= 1) || !(V > 0 && V <= 1))
      throw ArgumentError("NMS thresholds U and V must be in (0, 1]");
    if (S < 1 || R < 1) throw ArgumentError("S and R must be >= 1");
    if (R % 2 == 0) throw ArgumentError("R must be odd");
    if (stride_cells < 1) throw ArgumentError("stride_cells must be >= 1");
    if (models.empty()) throw ArgumentError("detector needs at least one model");
    for (const auto& m : models)
      if (m.d < 1 || m.shrink < 1 || m.trees.empty())
        throw ArgumentError("detector model is empty or malformed");
  }
};

// Verifies every model was trained on descriptors from `bank`.
inline void check_models_against_bank(const std::vector<BoostedModel>& models,
                                      const FilterBank& bank) {
  const std::string fp = io::bank_fingerprint(bank);
  for (std::size_t i = 0; i < models.size(); ++i) {
    const auto& m = models[i];
    if (m.channels != bank.filters) {
      std::ostringstream os;
      os << "model " << i << " expects F=" << m.channels << " channels but the filter bank has F="
         << bank.filters;
      throw ConfigError(os.str());
    }
    if (m.bank_fingerprint != fp) {
      std::ostringstream os;
      os << "model " << i << " was trained with filter bank " << m.bank_fingerprint
         << " but the supplied bank is " << fp;
      throw ConfigError(os.str());
    }
  }
}

// Scored windows of one (scale, aspect, model) group after stage-one NMS.
struct ProposalGroup {
  std::size_t level = 0;
  std::size_t model = 0;
  std::size_t windows = 0;  // placements scored before NMS
  std::vector<ScoredBox> survivors;
};

namespace detail {

struct ShrinkPyramid {
  int shrink = 1;
  std::vector<PyramidLevel> levels;
};

}  // namespace detail

// Runs every model over every fitting pyramid level and applies per-group
// NMS at cfg.U. Groups come back ordered by (shrink, level, model).
inline std::vector<ProposalGroup> score_groups(const ImagePlanes& image, const FilterBank& bank,
                                               const DetectorConfig& cfg) {
  // One pyramid per distinct shrink, planned for the smallest window using it.
  std::map<int, int> min_d;
  for (const auto& m : cfg.models) {
    auto [it, inserted] = min_d.try_emplace(m.shrink, m.d);
    if (!inserted) it->second = std::min(it->second, m.d);
  }
  std::vector<detail::ShrinkPyramid> pyramids;
  for (auto [shrink, d] : min_d) {
    detail::ShrinkPyramid p;
    p.shrink = shrink;
    p.levels = build_pyramid(image, bank, cfg.S, cfg.R, d, shrink, cfg.threads);
    pyramids.push_back(std::move(p));
  }

  struct Task {
    const PyramidLevel* level;
    std::size_t level_index;
    std::size_t model;
  };
  std::vector<Task> tasks;
  for (const auto& p : pyramids)
    for (std::size_t l = 0; l < p.levels.size(); ++l)
      for (std::size_t m = 0; m < cfg.models.size(); ++m)
        if (cfg.models[m].shrink == p.shrink && p.levels[l].geometry.fits(cfg.models[m].d))
          tasks.push_back({&p.levels[l], l, m});

  std::vector<ProposalGroup> groups(tasks.size());
  parallel_for(tasks.size(), cfg.threads, [&](std::size_t t) {
    const auto& task = tasks[t];
    const auto& model = cfg.models[task.model];
    const auto& g = task.level->geometry;
    const WindowScores ws = score_windows(model, task.level->channels, cfg.stride_cells);
    std::vector<ScoredBox> boxes;
    boxes.reserve(ws.scores.size());
    for (int r = 0; r < ws.rows; ++r) {
      for (int c = 0; c < ws.cols; ++c) {
        const double s = ws.at(r, c);
        if (s < cfg.score_floor) continue;
        boxes.push_back({window_to_image_box(g, c * ws.stride, r * ws.stride, model.d), s});
      }
    }
    auto& out = groups[t];
    out.level = task.level_index;
    out.model = task.model;
    out.windows = ws.scores.size();
    out.survivors = nms_greedy(boxes, cfg.U);
  });
  return groups;
}

// Dense multi-scale, multi-aspect proposals: per-(scale, aspect, model) NMS
// at U, joint NMS at V over all survivors, then the max_proposals best.
inline std::vector<ScoredBox> propose(const ImagePlanes& image, const FilterBank& bank,
                                      const DetectorConfig& cfg) {
  cfg.validate();
  check_models_against_bank(cfg.models, bank);
  const auto groups = score_groups(image, bank, cfg);
  if (groups.empty()) {
    std::ostringstream os;
    os << "image " << image.width() << "x" << image.height()
       << " is smaller than every detector window; no proposals";
    log_info(os.str());
    return {};
  }
  std::size_t total = 0;
  for (const auto& g : groups) total += g.survivors.size();
  std::vector<ScoredBox> pooled;
  pooled.reserve(total);
  for (const auto& g : groups) pooled.insert(pooled.end(), g.survivors.begin(), g.survivors.end());
  auto out = nms_greedy(pooled, cfg.V);
  if (out.size() > cfg.max_proposals) out.resize(cfg.max_proposals);
  return out;
}

// Number of window placements propose() scores before any suppression.
inline std::size_t count_windows(int width, int height, const DetectorConfig& cfg) {
  std::size_t total = 0;
  for (const auto& m : cfg.models) {
    for (const auto& g : plan_pyramid(width, height, cfg.S, cfg.R, m.d, m.shrink)) {
      const auto cols = static_cast<std::size_t>((g.grid_width() - m.d) / cfg.stride_cells + 1);
      const auto rows = static_cast<std::size_t>((g.grid_height() - m.d) / cfg.stride_cells + 1);
      total += cols * rows;
    }
  }
  return total;
}

}  // namespace convboost
