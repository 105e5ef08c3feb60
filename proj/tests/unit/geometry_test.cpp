#include <gtest/gtest.h>

#include <vector>

#include "convboost/geometry.hpp"
#include "oracles.hpp"
#include "test_support.hpp"

using namespace convboost;
using testing_support::random_int_box;

using oracles::lattice_iou;
using oracles::reference_nms;

TEST(Geometry, IouIdentityAndDisjoint) {
  const Box b{3, 4, 17.5, 9};
  EXPECT_EQ(iou(b, b), 1.0);
  EXPECT_EQ(iou(Box{0, 0, 10, 10}, Box{20, 20, 30, 30}), 0.0);
  EXPECT_EQ(iou(Box{0, 0, 10, 10}, Box{10, 0, 20, 10}), 0.0);  // touching edges
}

TEST(Geometry, IouHalfOverlapExample) {
  const Box a{0, 0, 10, 10}, b{5, 5, 15, 15};
  EXPECT_DOUBLE_EQ(lattice_iou(a, b), 25.0 / 175.0);
  EXPECT_DOUBLE_EQ(iou(a, b), 25.0 / 175.0);
}

TEST(Geometry, IouMatchesLatticeCounter) {
  convboost::Rng rng(11);
  for (int t = 0; t < 2000; ++t) {
    const Box a = random_int_box(rng, 40, 25), b = random_int_box(rng, 40, 25);
    ASSERT_DOUBLE_EQ(iou(a, b), lattice_iou(a, b)) << t;
  }
}

TEST(Geometry, IouSymmetricAndScaleTranslationInvariant) {
  convboost::Rng rng(12);
  for (int t = 0; t < 1000; ++t) {
    const Box a = random_int_box(rng, 100, 60), b = random_int_box(rng, 100, 60);
    const double v = iou(a, b);
    EXPECT_EQ(v, iou(b, a));
    const double s = rng.uniform(0.1, 10.0), dx = rng.uniform(-50, 50), dy = rng.uniform(-50, 50);
    auto tf = [&](const Box& q) { return Box{q.x1 * s + dx, q.y1 * s + dy, q.x2 * s + dx, q.y2 * s + dy}; };
    EXPECT_NEAR(iou(tf(a), tf(b)), v, 1e-12);
  }
}

TEST(Geometry, VocMappingGivesExactWidth) {
  const Box b = box_from_voc(1, 1, 10, 20);
  EXPECT_EQ(b, (Box{0, 0, 10, 20}));
  EXPECT_EQ(iou(b, box_from_voc(1, 1, 10, 20)), 1.0);
}

TEST(Geometry, CheckedBoxRejectsInvalid) {
  EXPECT_THROW(checked_box(5, 0, 5, 10), ArgumentError);
  EXPECT_THROW(checked_box(0, 0, 1, std::nan("")), ArgumentError);
  EXPECT_NO_THROW(checked_box(0, 0, 1, 1));
}

TEST(Nms, EmptyAndThresholdRange) {
  EXPECT_TRUE(nms_greedy({}, 0.5).empty());
  std::vector<ScoredBox> one{{{0, 0, 1, 1}, 1}};
  EXPECT_THROW(nms_greedy(one, 0.0), ArgumentError);
  EXPECT_THROW(nms_greedy(one, 1.5), ArgumentError);
}

TEST(Nms, IdenticalBoxesKeepHigherScore) {
  std::vector<ScoredBox> in{{{0, 0, 10, 10}, 0.4}, {{0, 0, 10, 10}, 0.9}};
  const auto out = nms_greedy(in, 0.5);
  ASSERT_EQ(out.size(), 1u);
  EXPECT_EQ(out[0].score, 0.9);
}

TEST(Nms, SuppressedBoxCannotSuppress) {
  // A-B and B-C overlap at IoU 0.6 (offset o with (10-o)/(10+o) = 0.6), A-C at 1/3.
  const Box a{0, 0, 10, 10}, b{2.5, 0, 12.5, 10}, c{5, 0, 15, 10};
  ASSERT_NEAR(iou(a, b), 0.6, 1e-12);
  ASSERT_NEAR(iou(b, c), 0.6, 1e-12);
  ASSERT_LT(iou(a, c), 0.5);
  std::vector<ScoredBox> in{{b, 2}, {c, 1}, {a, 3}};
  const auto out = nms_greedy(in, 0.5);
  ASSERT_EQ(out.size(), 2u);
  EXPECT_EQ(out[0].box, a);
  EXPECT_EQ(out[1].box, c);
  EXPECT_EQ(out, reference_nms(in, 0.5));
}

TEST(Nms, TiesBrokenByInputIndex) {
  std::vector<ScoredBox> in{{{0, 0, 10, 10}, 1}, {{1, 0, 11, 10}, 1}, {{50, 50, 60, 60}, 1}};
  const auto out = nms_greedy(in, 0.5);
  ASSERT_EQ(out.size(), 2u);
  EXPECT_EQ(out[0].box, in[0].box);
  EXPECT_EQ(out[1].box, in[2].box);
}

TEST(Nms, MatchesQuadraticReference) {
  convboost::Rng rng(13);
  for (int t = 0; t < 300; ++t) {
    const int n = static_cast<int>(rng.uniform_int(0, 150));
    std::vector<ScoredBox> in;
    for (int i = 0; i < n; ++i) {
      // Coarse scores force ties.
      in.push_back({random_int_box(rng, 200, 80), static_cast<double>(rng.uniform_int(0, 20))});
    }
    const double th = rng.uniform(0.05, 1.0);
    const auto out = nms_greedy(in, th);
    ASSERT_EQ(out, reference_nms(in, th)) << "trial " << t;
    for (std::size_t i = 0; i < out.size(); ++i)
      for (std::size_t j = i + 1; j < out.size(); ++j) ASSERT_LE(iou(out[i].box, out[j].box), th);
  }
}

TEST(Nms, ThresholdOneKeepsAllDistinct) {
  convboost::Rng rng(14);
  std::vector<ScoredBox> in;
  for (int i = 0; i < 100; ++i) in.push_back({random_int_box(rng, 50, 30), rng.uniform()});
  const auto out = nms_greedy(in, 1.0);
  EXPECT_EQ(out.size(), reference_nms(in, 1.0).size());
}

// Greedy NMS survivor counts are not monotone in the threshold in general:
// raising it lets B survive, and B then removes two boxes A would not.
TEST(Nms, SurvivorCountCanDropWhenThresholdRises) {
  const Box b{0, 0, 10, 10};
  const Box a{0, 2.5, 10, 12.5};  // IoU with b = 0.6
  const Box c{-2, 0, 8, 10};      // IoU with b = 8/12
  const Box d{2, 0, 12, 10};
  std::vector<ScoredBox> in{{a, 4}, {b, 3}, {c, 2}, {d, 1}};
  EXPECT_EQ(nms_greedy(in, 0.5).size(), 3u);
  EXPECT_EQ(nms_greedy(in, 0.65).size(), 2u);
  EXPECT_EQ(nms_greedy(in, 1.0).size(), 4u);
}

TEST(Nms, ThresholdOneIsUpperBound) {
  convboost::Rng rng(15);
  for (int t = 0; t < 50; ++t) {
    std::vector<ScoredBox> in;
    for (int i = 0; i < 200; ++i) in.push_back({random_int_box(rng, 120, 60), rng.uniform()});
    const auto all = nms_greedy(in, 1.0).size();
    for (double th : {0.3, 0.5, 0.63, 0.9}) {
      const auto out = nms_greedy(in, th);
      EXPECT_LE(out.size(), all);
      EXPECT_EQ(out.front(), nms_greedy(in, 1.0).front());
    }
  }
}
