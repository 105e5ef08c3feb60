#pragma once

#include <cstddef>
#include <sstream>
#include <vector>

#include "convboost/boost.hpp"
#include "convboost/channels.hpp"
#include "convboost/error.hpp"
#include "convboost/geometry.hpp"

namespace convboost {

// Scores of every d x d window placement on a channel grid.
struct WindowScores {
  int cols = 0;
  int rows = 0;
  int stride = 1;
  std::vector<double> scores;

  double at(int row, int col) const {
    return scores[static_cast<std::size_t>(row) * cols + col];
  }
};

// Image-space box of the window whose top-left cell is (cell_x, cell_y),
// clipped to the image.
inline Box window_to_image_box(const LevelGeometry& g, int cell_x, int cell_y, int d) {
  const double s = g.shrink;
  const Box b{cell_x * s / g.x_factor, cell_y * s / g.y_factor, (cell_x + d) * s / g.x_factor,
              (cell_y + d) * s / g.y_factor};
  return clip_box(b, g.image_width, g.image_height);
}

// Evaluates the model at every window placement with top-left cells on a
// `stride` lattice. Trees are applied in model order to whole rows of
// windows, so each window's score is accumulated exactly as score() would.
inline WindowScores score_windows(const BoostedModel& model, const ChannelStack& ch, int stride) {
  if (stride < 1) throw ArgumentError("window stride must be >= 1");
  if (model.channels != ch.channels) {
    std::ostringstream os;
    os << "model expects " << model.channels << " channels, stack has " << ch.channels;
    throw ArgumentError(os.str());
  }
  WindowScores ws;
  ws.stride = stride;
  const int d = model.d;
  if (ch.width < d || ch.height < d) return ws;
  ws.cols = (ch.width - d) / stride + 1;
  ws.rows = (ch.height - d) / stride + 1;
  ws.scores.assign(static_cast<std::size_t>(ws.cols) * ws.rows, 0.0);

  const std::size_t plane = ch.plane_size();
  const std::size_t dd = static_cast<std::size_t>(d) * d;
  auto offset = [&](std::uint32_t f) {
    const std::size_t c = f / dd, rem = f % dd;
    return c * plane + (rem / static_cast<std::size_t>(d)) * ch.width + rem % static_cast<std::size_t>(d);
  };
  struct FlatTree {
    std::size_t o0, o1, o2;
    float t0, t1, t2;
    double l0, l1, l2, l3;
  };
  std::vector<FlatTree> flat;
  flat.reserve(model.trees.size());
  for (const auto& t : model.trees)
    flat.push_back({offset(t.root.feature), offset(t.left.feature), offset(t.right.feature),
                    t.root.threshold, t.left.threshold, t.right.threshold, t.leaves[0],
                    t.leaves[1], t.leaves[2], t.leaves[3]});

  const float* base = ch.data.data();
  for (int r = 0; r < ws.rows; ++r) {
    double* out = ws.scores.data() + static_cast<std::size_t>(r) * ws.cols;
    const std::size_t row_off = static_cast<std::size_t>(r) * stride * ch.width;
    for (const auto& t : flat) {
      const float* a = base + row_off + t.o0;
      const float* b = base + row_off + t.o1;
      const float* c = base + row_off + t.o2;
      if (stride == 1) {
        for (int x = 0; x < ws.cols; ++x) {
          const double lv = b[x] < t.t1 ? t.l0 : t.l1;
          const double rv = c[x] < t.t2 ? t.l2 : t.l3;
          out[x] += a[x] < t.t0 ? lv : rv;
        }
      } else {
        for (int k = 0; k < ws.cols; ++k) {
          const int x = k * stride;
          const double lv = b[x] < t.t1 ? t.l0 : t.l1;
          const double rv = c[x] < t.t2 ? t.l2 : t.l3;
          out[k] += a[x] < t.t0 ? lv : rv;
        }
      }
    }
  }
  return ws;
}

}  // namespace convboost
