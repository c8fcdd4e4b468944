#include <gtest/gtest.h>

#include <cmath>
#include <fstream>

#include "monolab/errors.hpp"
#include "monolab/xai.hpp"
#include "test_support.hpp"

using namespace monolab;

namespace {

MlpModel random_small_net(std::uint64_t seed, std::size_t in) {
  MlpSpec s;
  s.input_dim = in;
  s.hidden_widths = {8, 6};
  s.dropout_rates = {0.0, 0.0};
  s.head_width = 5;
  return build_model(s, seed);
}

InputMatrix random_inputs(std::size_t rows, std::size_t cols, std::uint64_t seed) {
  InputMatrix x;
  for (std::size_t i = 0; i < cols; ++i) x.names.push_back("f" + std::to_string(i));
  x.rows = rows;
  RngStream rng(seed, 0);
  x.values.resize(rows * cols);
  for (double& v : x.values) v = rng.uniform_pm1() * 2.0;
  return x;
}

}  // namespace

TEST(Ig, AffineFunctionIsExact) {
  const std::vector<double> w = {0.7, -1.9, 3.1, 0.0};
  const double b = 0.4;
  BatchGradientFn affine = [&](std::span<const double> rows, std::vector<double>& g, std::vector<double>& out) {
    const std::size_t n = rows.size() / w.size();
    g.resize(rows.size());
    out.resize(n);
    for (std::size_t r = 0; r < n; ++r) {
      double z = b;
      for (std::size_t i = 0; i < w.size(); ++i) {
        z += w[i] * rows[r * w.size() + i];
        g[r * w.size() + i] = w[i];
      }
      out[r] = z;
    }
  };
  RngStream rng(1, 0);
  for (auto q : {Quadrature::Trapezoid, Quadrature::Midpoint}) {
    IgConfig cfg;
    cfg.quadrature = q;
    for (int k = 0; k < 20; ++k) {
      std::vector<double> x(4), base(4);
      for (double& v : x) v = rng.uniform_pm1() * 5;
      for (double& v : base) v = rng.uniform_pm1() * 5;
      auto s = integrated_gradients_detail(affine, x, base, cfg);
      for (std::size_t i = 0; i < 4; ++i) EXPECT_NEAR(s.ig[i], (x[i] - base[i]) * w[i], 1e-12);
      EXPECT_LE(s.residual, 1e-12);
    }
  }
}

TEST(Ig, ZeroAtBaseline) {
  auto m = random_small_net(1, 3);
  const std::vector<double> x = {0.2, -0.5, 1.0};
  auto ig = integrated_gradients(m, x, x, IgConfig{});
  for (double v : ig) EXPECT_EQ(v, 0.0);
}

TEST(Ig, CompletenessOnSmallNets) {
  RngStream rng(2, 0);
  double worst = 0.0;
  for (int k = 0; k < 20; ++k) {
    auto m = random_small_net(10 + k, 3);
    std::vector<double> x(3), base(3, 0.0);
    for (double& v : x) v = rng.uniform_pm1();
    worst = std::max(worst, integrated_gradients_detail(m, x, base, IgConfig{}).residual);
  }
  EXPECT_LE(worst, 1e-3);
}

TEST(Ig, ResidualShrinksWithSteps) {
  // kinks along the path make the trapezoid error first order in 1/m
  RngStream rng(3, 0);
  double r100 = 0.0, r200 = 0.0, r400 = 0.0;
  for (int k = 0; k < 30; ++k) {
    auto m = random_small_net(50 + k, 3);
    std::vector<double> x(3), base(3, 0.0);
    for (double& v : x) v = rng.uniform_pm1() * 3;
    IgConfig c;
    c.steps = 100;
    r100 += integrated_gradients_detail(m, x, base, c).residual;
    c.steps = 200;
    r200 += integrated_gradients_detail(m, x, base, c).residual;
    c.steps = 400;
    r400 += integrated_gradients_detail(m, x, base, c).residual;
  }
  ASSERT_GT(r100, 0.0);
  EXPECT_LE(r200 / r100, 0.6);
  EXPECT_LE(r400 / r200, 0.6);
}

TEST(Ig, ValidatesInputs) {
  auto m = random_small_net(1, 3);
  IgConfig bad;
  bad.steps = 1;
  const std::vector<double> x = {0, 0, 0};
  EXPECT_THROW(integrated_gradients(m, x, x, bad), InvalidSpec);
  const std::vector<double> y = {0, 0};
  EXPECT_THROW(integrated_gradients(m, y, y, IgConfig{}), DimensionMismatch);
  EXPECT_EQ(parse_quadrature("midpoint"), Quadrature::Midpoint);
  EXPECT_THROW(parse_quadrature("simpson"), InvalidSpec);
}

TEST(Attribution, SingleFeatureModelRanksItFirst) {
  DenseLayer l1{4, 3, std::vector<double>(12, 0.0), {0.1, 0.1, 0.1}};
  l1.w[0 * 3 + 0] = 1.0;
  l1.w[0 * 3 + 1] = -2.0;
  l1.w[0 * 3 + 2] = 0.5;
  DenseLayer l2{3, 1, {1.0, 1.0, -1.0}, {0.0}};
  auto m = MlpModel::from_layers({l1, l2});
  auto x = random_inputs(50, 4, 4);
  auto rep = attribute_dataset(m, x, IgConfig{});
  EXPECT_EQ(rep.ranking[0], 0u);
  EXPECT_GT(rep.mean_abs[0], 0.0);
  for (std::size_t i = 1; i < 4; ++i) EXPECT_EQ(rep.mean_abs[i], 0.0);
  EXPECT_EQ(rep.ranking_names()[0], "f0");
}

TEST(Attribution, DuplicatingRowsKeepsMeans) {
  auto m = random_small_net(5, 3);
  auto x = random_inputs(40, 3, 5);
  auto twice = x;
  twice.values.insert(twice.values.end(), x.values.begin(), x.values.end());
  twice.rows *= 2;
  IgConfig cfg;
  cfg.baseline = BaselineKind::Zero;
  auto a = attribute_dataset(m, x, cfg);
  auto b = attribute_dataset(m, twice, cfg);
  for (std::size_t i = 0; i < 3; ++i) EXPECT_NEAR(a.mean_abs[i], b.mean_abs[i], 1e-12);
}

TEST(Attribution, ParallelMatchesReference) {
  auto m = random_small_net(6, 5);
  auto x = random_inputs(97, 5, 6);
  auto a = attribute_dataset(m, x, IgConfig{});
  auto b = reference::attribute_dataset(m, x, IgConfig{});
  EXPECT_EQ(a.per_sample, b.per_sample);
  EXPECT_EQ(a.residuals, b.residuals);
  EXPECT_EQ(a.ranking, b.ranking);
  EXPECT_EQ(a.baseline_hash, b.baseline_hash);
}

TEST(Attribution, DatasetMeanBaselineAndTolerance) {
  auto m = random_small_net(7, 2);
  auto x = random_inputs(10, 2, 7);
  auto rep = attribute_dataset(m, x, IgConfig{});
  double m0 = 0.0;
  for (std::size_t r = 0; r < 10; ++r) m0 += x.values[r * 2];
  EXPECT_NEAR(rep.baseline[0], m0 / 10, 1e-15);
  EXPECT_EQ(rep.steps, 100u);
  EXPECT_EQ(rep.within_tolerance, rep.max_residual <= 1e-3);
  IgConfig custom;
  custom.baseline = BaselineKind::Custom;
  custom.custom_baseline = {1.0};
  EXPECT_THROW(attribute_dataset(m, x, custom), DimensionMismatch);
}

TEST(Attribution, OutputsRoundTrip) {
  auto m = random_small_net(8, 3);
  auto x = random_inputs(12, 3, 8);
  auto rep = attribute_dataset(m, x, IgConfig{});
  auto dir = testsupport::scratch_dir("xai_out");
  save_ig_matrix(rep, dir / "ig.igmx");
  auto back = load_ig_matrix(dir / "ig.igmx");
  EXPECT_EQ(back.feature_names, rep.feature_names);
  EXPECT_EQ(back.rows, 12u);
  EXPECT_EQ(back.values, rep.per_sample);
  auto top = top_k(rep, 2);
  ASSERT_EQ(top.size(), 2u);
  EXPECT_EQ(top[0].rank, 1u);
  EXPECT_GE(top[0].mean_abs_ig, top[1].mean_abs_ig);
  write_attribution_csv(rep, dir / "ig.csv");
  std::ifstream in(dir / "ig.csv");
  std::string header;
  std::getline(in, header);
  EXPECT_EQ(header, "feature,mean_abs_ig,rank");
}
