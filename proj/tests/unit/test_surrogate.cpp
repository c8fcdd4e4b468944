#include <gtest/gtest.h>

#include <cmath>
#include <limits>

#include "monolab/errors.hpp"
#include "monolab/surrogate.hpp"
#include "test_support.hpp"

using namespace monolab;

namespace {

InputMatrix make_input(std::vector<std::string> names, std::vector<double> values) {
  InputMatrix x;
  x.names = std::move(names);
  x.rows = values.size() / x.names.size();
  x.values = std::move(values);
  return x;
}

double gini(double pos, double n) {
  if (n == 0) return 0.0;
  const double p = pos / n;
  return 2.0 * p * (1.0 - p);
}

}  // namespace

TEST(Tree, OneDimensionalSplit) {
  auto x = make_input({"v"}, {0, 1, 2, 3});
  std::vector<std::uint8_t> y = {0, 0, 1, 1};
  auto t = fit_tree(x, y, 3, 1);
  ASSERT_FALSE(t.nodes[0].leaf);
  EXPECT_EQ(t.nodes[0].threshold, 1.5);
  EXPECT_EQ(t.depth(), 1u);
  EXPECT_EQ(t.leaves().size(), 2u);
  EXPECT_DOUBLE_EQ(agreement(t, x, y), 1.0);
}

TEST(Tree, PureInputIsLeaf) {
  auto x = make_input({"v"}, {0, 1, 2, 3});
  std::vector<std::uint8_t> y = {1, 1, 1, 1};
  auto t = fit_tree(x, y, 4, 1);
  EXPECT_EQ(t.nodes.size(), 1u);
  EXPECT_TRUE(t.nodes[0].leaf);
  EXPECT_EQ(t.nodes[0].predicted, 1);
  EXPECT_EQ(t.depth(), 0u);
}

TEST(Tree, RootMatchesExhaustiveGiniSearch) {
  RngStream rng(1, 0);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t n = 30 + rng.below(30);
    std::vector<double> vals(n * 3);
    std::vector<std::uint8_t> y(n);
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t f = 0; f < 3; ++f) vals[i * 3 + f] = rng.uniform01();
      y[i] = vals[i * 3 + 1] + 0.5 * rng.uniform01() > 0.7;
    }
    const std::size_t min_leaf = 3;
    // all (feature, midpoint) candidates, weighted child Gini
    double best_w = std::numeric_limits<double>::infinity();
    std::size_t best_f = 0;
    double best_t = 0.0;
    for (std::size_t f = 0; f < 3; ++f) {
      std::vector<double> col;
      for (std::size_t i = 0; i < n; ++i) col.push_back(vals[i * 3 + f]);
      std::sort(col.begin(), col.end());
      for (std::size_t k = 0; k + 1 < n; ++k) {
        const double thr = 0.5 * (col[k] + col[k + 1]);
        double nl = 0, pl = 0, nr = 0, pr = 0;
        for (std::size_t i = 0; i < n; ++i) {
          if (vals[i * 3 + f] <= thr) {
            ++nl;
            pl += y[i];
          } else {
            ++nr;
            pr += y[i];
          }
        }
        if (nl < min_leaf || nr < min_leaf) continue;
        const double w = (nl * gini(pl, nl) + nr * gini(pr, nr)) / static_cast<double>(n);
        if (w < best_w - 1e-12) {
          best_w = w;
          best_f = f;
          best_t = thr;
        }
      }
    }
    auto t = fit_tree(make_input({"a", "b", "c"}, vals), y, 1, min_leaf);
    if (t.nodes[0].leaf) continue;
    EXPECT_EQ(t.nodes[0].feature, best_f) << trial;
    EXPECT_DOUBLE_EQ(t.nodes[0].threshold, best_t) << trial;
  }
}

TEST(Tree, RespectsDepthAndMinLeaf) {
  RngStream rng(2, 0);
  std::vector<double> vals(2000);
  std::vector<std::uint8_t> y(1000);
  for (std::size_t i = 0; i < 1000; ++i) {
    vals[i * 2] = rng.uniform01();
    vals[i * 2 + 1] = rng.uniform01();
    y[i] = rng.below(2);
  }
  auto t = fit_tree(make_input({"a", "b"}, vals), y, 4, 50);
  EXPECT_LE(t.depth(), 4u);
  std::uint64_t total = 0;
  for (auto id : t.leaves()) {
    const auto& nd = t.nodes[id];
    EXPECT_GE(nd.counts[0] + nd.counts[1], 50u);
    total += nd.counts[0] + nd.counts[1];
  }
  EXPECT_EQ(total, 1000u);
  EXPECT_THROW(fit_tree(make_input({"a"}, {1, 2, 3}), std::vector<std::uint8_t>{0, 1, 0}, 2, 50), DegenerateData);
}

TEST(Bands, StumpGivesHalfPlane) {
  std::vector<double> vals;
  std::vector<std::uint8_t> y;
  for (int i = 0; i < 200; ++i) {
    const double r = i * 0.001;
    vals.push_back(r);
    vals.push_back(0.5 + (i % 7) * 0.1);
    y.push_back(r <= 0.1);
  }
  auto t = fit_tree(make_input({"abs_c_0", "abs_c_1"}, vals), y, 1, 10);
  auto bands = extract_monotone_bands(t);
  ASSERT_EQ(bands.size(), 1u);
  EXPECT_TRUE(std::isinf(bands[0].r_min) && bands[0].r_min < 0);
  EXPECT_NEAR(bands[0].r_max, 0.1005, 1e-12);
  EXPECT_TRUE(std::isinf(bands[0].s_min) && std::isinf(bands[0].s_max));
  EXPECT_TRUE(bands[0].contains(0.0, 1.0));
  EXPECT_FALSE(bands[0].contains(0.2, 1.0));
}

TEST(Bands, NoMonotoneLeavesAndNonPlanar) {
  auto x = make_input({"abs_c_0", "abs_c_1"}, {0, 0, 1, 1, 2, 2, 3, 3});
  auto t = fit_tree(x, std::vector<std::uint8_t>{0, 0, 0, 0}, 2, 1);
  EXPECT_TRUE(extract_monotone_bands(t).empty());
  auto z = make_input({"trace", "abs_c_1"}, {0, 0, 1, 0, 2, 0, 3, 0});
  auto u = fit_tree(z, std::vector<std::uint8_t>{1, 1, 0, 0}, 2, 1);
  EXPECT_THROW(extract_monotone_bands(u), NonPlanarTree);
}

TEST(Bands, SoundForTreePredictions) {
  // every point the tree calls monotone lies in exactly one band, and no other point does
  RngStream rng(3, 0);
  std::vector<double> vals;
  std::vector<std::uint8_t> y;
  for (int i = 0; i < 2000; ++i) {
    const double r = rng.uniform01() * 2, s = rng.uniform01() * 5;
    vals.push_back(r);
    vals.push_back(s);
    y.push_back(-12.0 * r + 1.3 * s - 0.6 + 0.5 * rng.normal() > 0);
  }
  auto x = make_input({"abs_c_0", "abs_c_1"}, vals);
  auto t = fit_tree(x, y, 4, 50);
  auto bands = extract_monotone_bands(t);
  for (std::size_t i = 0; i < x.rows; ++i) {
    int hits = 0;
    for (const auto& b : bands) hits += b.contains(vals[i * 2], vals[i * 2 + 1]);
    EXPECT_EQ(hits, t.predict_row(x.row(i)) ? 1 : 0) << i;
  }
  EXPECT_FALSE(tree_rules_text(t).empty());
}

TEST(Stump, WorkedExample) {
  const std::vector<double> v = {0.01, 0.02, 0.5, 0.6};
  const std::vector<std::uint8_t> y = {1, 1, 0, 0};
  auto s = fit_stump(v, y);
  EXPECT_DOUBLE_EQ(s.threshold, 0.26);
  EXPECT_DOUBLE_EQ(s.accuracy, 1.0);
  EXPECT_THROW(fit_stump(v, std::vector<std::uint8_t>{1, 1, 1, 1}), DegenerateData);
}

TEST(Stump, ExcludesUndefined) {
  const std::vector<double> v = {0.01, std::nan(""), 0.5, 0.6};
  auto s = fit_stump(v, std::vector<std::uint8_t>{1, 1, 0, 0});
  EXPECT_EQ(s.excluded, 1u);
  EXPECT_EQ(s.rows_used, 3u);
}

TEST(Stump, MatchesExhaustiveSearch) {
  RngStream rng(4, 0);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t n = 5 + rng.below(60);
    std::vector<double> v(n);
    std::vector<std::uint8_t> y(n);
    for (std::size_t i = 0; i < n; ++i) {
      // coarse grid so that repeated values occur
      v[i] = static_cast<double>(rng.below(25)) / 10.0;
      y[i] = v[i] + rng.uniform_pm1() < 1.2;
    }
    y[0] = 0;
    y[1] = 1;
    std::vector<double> sorted = v;
    std::sort(sorted.begin(), sorted.end());
    sorted.erase(std::unique(sorted.begin(), sorted.end()), sorted.end());
    if (sorted.size() < 2) continue;
    std::size_t best = 0;
    double best_t = 0.0;
    for (std::size_t k = 0; k + 1 < sorted.size(); ++k) {
      const double thr = 0.5 * (sorted[k] + sorted[k + 1]);
      std::size_t correct = 0;
      for (std::size_t i = 0; i < n; ++i) correct += (v[i] <= thr) == (y[i] == 1);
      if (correct > best) {
        best = correct;
        best_t = thr;
      }
    }
    auto s = fit_stump(v, y);
    EXPECT_DOUBLE_EQ(s.threshold, best_t) << trial;
    EXPECT_DOUBLE_EQ(s.accuracy, static_cast<double>(best) / static_cast<double>(n)) << trial;
  }
}

TEST(Svm, SeparableLine) {
  auto x = make_input({"v"}, {-1, 1, -1.2, 1.3, -0.9, 0.8});
  std::vector<std::uint8_t> y = {0, 1, 0, 1, 0, 1};
  auto m = fit_linear_svm(x, y, 1.0, 200, 1);
  EXPECT_GT(m.weights[0], 0.0);
  EXPECT_DOUBLE_EQ(m.training_accuracy, 1.0);
}

TEST(Svm, SignPatternAndObjective) {
  RngStream rng(5, 0);
  std::vector<double> vals;
  std::vector<std::uint8_t> y;
  for (int i = 0; i < 1000; ++i) {
    const double r = rng.uniform01() * 0.5, s = rng.uniform01() * 3;
    vals.push_back(r);
    vals.push_back(s);
    y.push_back(-10.0 * r + 1.0 * s - 0.5 + 0.3 * rng.normal() > 0);
  }
  auto x = make_input({"abs_c_0", "abs_c_1"}, vals);
  auto m = fit_linear_svm(x, y, 1.0, 50, 2);
  EXPECT_LT(m.weights[0], 0.0);
  EXPECT_GT(m.weights[1], 0.0);
  EXPECT_GT(m.training_accuracy, 0.85);
  ASSERT_EQ(m.objective_history.size(), 50u);
  EXPECT_LE(m.objective_history.back(), m.objective_history.front());
  EXPECT_NEAR(svm_objective(m, x, y), m.objective_history.back(), 1e-9 * m.objective_history.back());
  auto again = fit_linear_svm(x, y, 1.0, 50, 2);
  EXPECT_EQ(again.weights, m.weights);
}

TEST(Symbolic, Values) {
  auto a = symbolic_formula(0.0);
  ASSERT_TRUE(a.p_hat);
  EXPECT_NEAR(*a.p_hat, 0.9720 + 0.0331 / 1.5541, 1e-12);
  EXPECT_NEAR(*a.p_hat, 0.99330, 5e-6);
  EXPECT_TRUE(a.monotone);
  EXPECT_TRUE(a.reduced_rule);
  EXPECT_FALSE(symbolic_formula(1.5541).p_hat);
  auto c = symbolic_formula(2.0);
  EXPECT_NEAR(*c.p_hat, 0.89777, 5e-6);
  EXPECT_TRUE(c.monotone);
  EXPECT_FALSE(c.reduced_rule);
  EXPECT_THROW(symbolic_formula(-1.0), std::invalid_argument);
}
