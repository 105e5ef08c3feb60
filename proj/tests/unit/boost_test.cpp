#include <gtest/gtest.h>

#include <algorithm>
#include <numeric>

#include "convboost/boost.hpp"
#include "convboost/channels.hpp"
#include "convboost/detector.hpp"
#include "convboost/io/cfbk.hpp"
#include "convboost/io/model_io.hpp"
#include "oracles.hpp"
#include "test_support.hpp"

using namespace convboost;

namespace {

double tree_split_impurity(const WeightedSet& set, const Split& s, const std::vector<bool>& member) {
  return oracles::split_impurity(set, member, s.feature, s.threshold);
}

BoostedModel random_model(convboost::Rng& rng, int d, int channels, int trees) {
  BoostedModel m;
  m.d = d;
  m.channels = channels;
  const auto dim = static_cast<std::int64_t>(m.dim());
  for (int t = 0; t < trees; ++t) {
    DepthTwoTree tr;
    for (Split* s : {&tr.root, &tr.left, &tr.right}) {
      s->feature = static_cast<std::uint32_t>(rng.uniform_int(0, dim - 1));
      s->threshold = static_cast<float>(rng.uniform());
    }
    for (auto& l : tr.leaves) l = rng.uniform(-1, 1);
    m.trees.push_back(tr);
  }
  return m;
}

std::vector<float> random_descs(convboost::Rng& rng, std::size_t n, std::size_t dim) {
  std::vector<float> v(n * dim);
  for (auto& x : v) x = static_cast<float>(rng.uniform());
  return v;
}

}  // namespace

TEST(Quantize, TwoBinsSplitAtMedian) {
  WeightedSet set(1, 1);
  for (float v : {3.0f, 1.0f, 4.0f, 2.0f}) set.add(std::vector<float>{v}, v > 2 ? 1 : -1);
  set.set_uniform_weights();
  const auto fb = quantize_features(set, 2);
  ASSERT_EQ(fb.edges_of(0).size(), 1u);
  EXPECT_GT(fb.edges_of(0)[0], 2.0f);
  EXPECT_LE(fb.edges_of(0)[0], 3.0f);
  EXPECT_EQ(fb.edges_of(0)[0], 2.5f);
}

TEST(Quantize, ConstantFeatureHasEqualEdgesAndIsNeverSplit) {
  convboost::Rng rng(31);
  WeightedSet set(1, 2);
  for (int i = 0; i < 40; ++i) {
    const float v = static_cast<float>(rng.uniform());
    set.add(std::vector<float>{0.75f, v}, v > 0.5f ? 1 : -1);
  }
  set.set_uniform_weights();
  const auto fb = quantize_features(set, 16);
  for (float e : fb.edges_of(0)) EXPECT_EQ(e, 0.75f);
  const auto tree = train_depth2_tree(set, fb);
  EXPECT_EQ(tree.root.feature, 1u);
}

TEST(Quantize, EdgesAreMonotoneAndOrderInvariant) {
  convboost::Rng rng(32);
  const auto set = testing_support::random_weighted_set(rng, 150, 6);
  const auto fb = quantize_features(set, 32);
  for (std::size_t f = 0; f < 6; ++f) {
    const auto e = fb.edges_of(f);
    EXPECT_TRUE(std::is_sorted(e.begin(), e.end()));
  }
  std::vector<std::size_t> perm(set.size());
  std::iota(perm.begin(), perm.end(), 0u);
  for (std::size_t i = perm.size() - 1; i > 0; --i)
    std::swap(perm[i], perm[static_cast<std::size_t>(rng.uniform_int(0, i))]);
  WeightedSet shuffled(1, 6);
  for (auto i : perm) shuffled.add(set.row(i), set.labels[i]);
  shuffled.set_uniform_weights();
  EXPECT_EQ(quantize_features(shuffled, 32).edges, fb.edges);
  EXPECT_EQ(quantize_features(set, 32, 4).edges, fb.edges);
  EXPECT_THROW(quantize_features(set, 1), ArgumentError);
}

TEST(Tree, XorLayoutIsSolvedByOneTree) {
  WeightedSet set(1, 2);
  for (float a : {-1.0f, 1.0f})
    for (float b : {-1.0f, 1.0f}) set.add(std::vector<float>{a, b}, a * b > 0 ? 1 : -1);
  set.set_uniform_weights();
  const auto fb = quantize_features(set, 256);
  const auto tree = train_depth2_tree(set, fb);
  for (std::size_t i = 0; i < set.size(); ++i)
    EXPECT_GT(tree.eval(set.row(i)) * set.labels[i], 0) << i;
}

TEST(Tree, SplitsMatchBruteForce) {
  convboost::Rng rng(33);
  for (int t = 0; t < 50; ++t) {
    const std::size_t n = static_cast<std::size_t>(rng.uniform_int(10, 200));
    const int features = static_cast<int>(rng.uniform_int(1, 32));
    const auto set = testing_support::random_weighted_set(rng, n, features);
    const auto fb = quantize_features(set, static_cast<int>(rng.uniform_int(2, 256)));
    const auto tree = train_depth2_tree(set, fb);

    std::vector<bool> all(n, true), left(n), right(n);
    const double got = tree_split_impurity(set, tree.root, all);
    const double want = oracles::brute_force_min_impurity(set, fb, all);
    ASSERT_NEAR(got, want, 1e-12 * std::max(1.0, want)) << "trial " << t;

    for (std::size_t i = 0; i < n; ++i) {
      left[i] = set.row(i)[tree.root.feature] < tree.root.threshold;
      right[i] = !left[i];
    }
    EXPECT_NEAR(tree_split_impurity(set, tree.left, left), oracles::brute_force_min_impurity(set, fb, left), 1e-12);
    EXPECT_NEAR(tree_split_impurity(set, tree.right, right), oracles::brute_force_min_impurity(set, fb, right), 1e-12);
  }
}

TEST(Tree, LeavesAreSmoothedLogOdds) {
  convboost::Rng rng(34);
  const auto set = testing_support::random_weighted_set(rng, 60, 4);
  const auto fb = quantize_features(set, 8);
  const auto tree = train_depth2_tree(set, fb);
  std::array<double, 4> pos{}, neg{};
  for (std::size_t i = 0; i < set.size(); ++i) {
    const auto x = set.row(i);
    const int leaf = x[tree.root.feature] < tree.root.threshold
                         ? (x[tree.left.feature] < tree.left.threshold ? 0 : 1)
                         : (x[tree.right.feature] < tree.right.threshold ? 2 : 3);
    (set.labels[i] > 0 ? pos : neg)[static_cast<std::size_t>(leaf)] += set.weights[i];
  }
  const double eps = 1.0 / (2.0 * static_cast<double>(set.size()));
  for (std::size_t k = 0; k < 4; ++k) {
    if (pos[k] + neg[k] == 0) continue;  // degenerate leaf takes the parent value
    EXPECT_NEAR(tree.leaves[k], 0.5 * std::log((pos[k] + eps) / (neg[k] + eps)), 1e-12);
  }
}

TEST(Tree, RejectsSingleLabelSets) {
  WeightedSet set(1, 1);
  set.add(std::vector<float>{1}, 1);
  set.add(std::vector<float>{2}, 1);
  set.set_uniform_weights();
  const auto fb = quantize_features(set, 4);
  EXPECT_THROW(train_depth2_tree(set, fb), ArgumentError);
  EXPECT_THROW(adaboost_train(set, fb, {3, 1}), ArgumentError);
}

TEST(AdaBoost, OneDimensionalSeparableWithinThreeRounds) {
  WeightedSet set(1, 1);
  for (float v : {0.1f, 0.2f, 0.35f}) set.add(std::vector<float>{v}, -1);
  for (float v : {0.6f, 0.8f, 0.9f}) set.add(std::vector<float>{v}, 1);
  set.set_uniform_weights();
  TrainingHistory h;
  adaboost_train(set, quantize_features(set, 256), {3, 1}, &h);
  EXPECT_EQ(h.train_error.back(), 0.0);
}

TEST(AdaBoost, SeparableFixturesReachZeroErrorWithinFiveRounds) {
  convboost::Rng rng(35);
  for (int dims : {1, 2, 3, 5})
    for (std::size_t n : {6u, 20u, 50u})
      for (int trial = 0; trial < 10; ++trial) {
        const auto set = testing_support::separable_set(rng, dims, n, 0.1);
        TrainingHistory h;
        adaboost_train(set, quantize_features(set, 256), {5, 1}, &h);
        EXPECT_EQ(h.train_error.back(), 0.0) << dims << " " << n;
        for (std::size_t t = 1; t < h.train_error.size(); ++t)
          EXPECT_LE(h.train_error[t], h.train_error[t - 1]);
      }
}

TEST(AdaBoost, WeightsStayNormalizedAndLossNonIncreasing) {
  convboost::Rng rng(36);
  // Noisy labels keep the problem unsolvable so the weights keep moving.
  WeightedSet set(1, 8);
  std::vector<float> x(8);
  for (int i = 0; i < 300; ++i) {
    for (auto& v : x) v = static_cast<float>(rng.uniform());
    const bool flip = rng.uniform() < 0.15;
    set.add(x, ((x[0] + x[3] > 1.0) != flip) ? 1 : -1);
  }
  set.set_uniform_weights();
  TrainingHistory h;
  const auto model = adaboost_train(set, quantize_features(set, 64), {300, 1}, &h);
  ASSERT_EQ(model.trees.size(), 300u);
  ASSERT_EQ(h.exp_loss.size(), 300u);
  EXPECT_GT(h.min_weight, 0.0);
  for (std::size_t t = 0; t < h.exp_loss.size(); ++t) {
    EXPECT_NEAR(h.weight_sum[t], 1.0, 1e-9);
    if (t > 0) {
      EXPECT_LE(h.exp_loss[t], h.exp_loss[t - 1] * (1 + 1e-12)) << t;
      EXPECT_LE(h.log_exp_loss[t], h.log_exp_loss[t - 1]) << t;
    }
    EXPECT_NEAR(std::exp(h.log_exp_loss[t]), h.exp_loss[t], 1e-12 * h.exp_loss[t]);
  }
}

TEST(AdaBoost, LogLossKeepsFallingAfterTheLossUnderflows) {
  convboost::Rng rng(38);
  const auto set = testing_support::separable_set(rng, 2, 40, 0.2);
  TrainingHistory h;
  adaboost_train(set, quantize_features(set, 256), {600, 1}, &h);
  ASSERT_EQ(h.exp_loss.back(), 0.0);
  ASSERT_TRUE(std::isfinite(h.log_exp_loss.back()));
  for (std::size_t t = 1; t < h.log_exp_loss.size(); ++t) ASSERT_LE(h.log_exp_loss[t], h.log_exp_loss[t - 1]) << t;
  EXPECT_LT(h.log_exp_loss.back(), h.log_exp_loss[h.log_exp_loss.size() / 2]);
}

TEST(AdaBoost, SingleRoundModelEqualsItsTree) {
  convboost::Rng rng(37);
  const auto set = testing_support::random_weighted_set(rng, 80, 5);
  WeightedSet uniform = set;
  uniform.set_uniform_weights();
  const auto fb = quantize_features(uniform, 16);
  const auto model = adaboost_train(uniform, fb, {1, 1});
  const auto tree = train_depth2_tree(uniform, fb);
  ASSERT_EQ(model.trees.size(), 1u);
  EXPECT_EQ(model.trees[0], tree);
  for (std::size_t i = 0; i < uniform.size(); ++i) EXPECT_EQ(score(model, uniform.row(i)), tree.eval(uniform.row(i)));
}

TEST(AdaBoost, ThreadCountDoesNotChangeTheModel) {
  convboost::Rng rng(38);
  const auto set = testing_support::random_weighted_set(rng, 120, 70);
  WeightedSet uniform = set;
  uniform.set_uniform_weights();
  const auto fb = quantize_features(uniform, 32);
  EXPECT_EQ(adaboost_train(uniform, fb, {20, 1}), adaboost_train(uniform, fb, {20, 4}));
}

TEST(Score, ConstantTree) {
  BoostedModel m;
  m.d = 2;
  m.channels = 1;
  DepthTwoTree t;
  t.leaves = {0.7, 0.7, 0.7, 0.7};
  m.trees.push_back(t);
  convboost::Rng rng(39);
  for (int i = 0; i < 20; ++i) EXPECT_EQ(score(m, random_descs(rng, 1, 4)), 0.7);
  EXPECT_THROW(score(m, std::vector<float>(5)), ArgumentError);
}

TEST(Score, SumOfTreesAndBatchMatchesScalar) {
  convboost::Rng rng(40);
  const auto m = random_model(rng, 3, 4, 50);
  const auto descs = random_descs(rng, 1000, m.dim());
  const auto batch = score_batch(m, descs, 3);
  ASSERT_EQ(batch.size(), 1000u);
  for (std::size_t i = 0; i < 1000; ++i) {
    const std::span<const float> x(descs.data() + i * m.dim(), m.dim());
    double s = 0;
    for (const auto& t : m.trees) s += t.eval(x);
    EXPECT_EQ(batch[i], score(m, x));
    EXPECT_EQ(batch[i], s);
  }
}

TEST(Score, LeafShiftAddsTimesTreeCountAndKeepsRanking) {
  convboost::Rng rng(41);
  auto m = random_model(rng, 2, 3, 40);
  const auto descs = random_descs(rng, 200, m.dim());
  const auto before = score_batch(m, descs);
  const double c = 0.375;
  for (auto& t : m.trees)
    for (auto& l : t.leaves) l += c;
  const auto after = score_batch(m, descs);
  std::vector<std::size_t> ia(200), ib(200);
  std::iota(ia.begin(), ia.end(), 0u);
  std::iota(ib.begin(), ib.end(), 0u);
  std::stable_sort(ia.begin(), ia.end(), [&](auto a, auto b) { return before[a] > before[b]; });
  std::stable_sort(ib.begin(), ib.end(), [&](auto a, auto b) { return after[a] > after[b]; });
  for (std::size_t i = 0; i < 200; ++i) EXPECT_NEAR(after[i], before[i] + 40 * c, 1e-9);
  // Ranking compared on distinct score gaps only; rounding may reorder near-ties.
  for (std::size_t i = 0; i + 1 < 200; ++i)
    if (before[ia[i]] - before[ia[i + 1]] > 1e-9) {
      EXPECT_EQ(ia[i], ib[i]);
    }
}

TEST(ModelFile, RoundTripPreservesScores) {
  convboost::Rng rng(42);
  auto m = random_model(rng, 3, 2, 25);
  m.shrink = 4;
  m.bank_fingerprint = "0123456789abcdef";
  m.meta = {25, 10, 200, 3, 99};
  io::Metadata meta;
  meta.set("seed", "99");
  const auto doc = io::format_model(m, meta);
  io::Metadata back_meta;
  const auto back = io::parse_model(doc, &back_meta);
  EXPECT_EQ(back, m);
  EXPECT_EQ(back_meta, meta);
  const auto descs = random_descs(rng, 100, m.dim());
  EXPECT_EQ(score_batch(back, descs), score_batch(m, descs));
}

TEST(ModelFile, TruncatedOrMalformedIsFormatError) {
  convboost::Rng rng(43);
  const auto doc = io::format_model(random_model(rng, 2, 2, 5));
  EXPECT_THROW(io::parse_model(doc.substr(0, doc.size() / 2)), FormatError);
  EXPECT_THROW(io::parse_model("{}"), FormatError);
  auto bad = doc;
  bad.replace(bad.find("\"tree_count\": 5"), 15, "\"tree_count\": 6");
  EXPECT_THROW(io::parse_model(bad), FormatError);
}

TEST(ModelFile, MismatchedBankIsConfigErrorNamingBothValues) {
  const auto bank = synth_filter_bank(1, 8, 3, 3, 1);
  convboost::Rng rng(44);
  auto m = random_model(rng, 2, 6, 3);
  m.bank_fingerprint = io::bank_fingerprint(bank);
  try {
    check_models_against_bank({m}, bank);
    FAIL();
  } catch (const ConfigError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("F=6"), std::string::npos) << msg;
    EXPECT_NE(msg.find("F=8"), std::string::npos) << msg;
  }
  m.channels = 8;
  m.bank_fingerprint = "ffffffffffffffff";
  EXPECT_THROW(check_models_against_bank({m}, bank), ConfigError);
  m.bank_fingerprint = io::bank_fingerprint(bank);
  EXPECT_NO_THROW(check_models_against_bank({m}, bank));
}
