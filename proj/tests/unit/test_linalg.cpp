#include <gtest/gtest.h>

#include <algorithm>
#include <complex>

#include "monolab/errors.hpp"
#include "monolab/linalg.hpp"
#include "test_support.hpp"

using namespace monolab;
using testsupport::random_matrix;

namespace {

SquareMatrix diag2(double a, double b) {
  const double d[] = {a, b};
  return SquareMatrix::diagonal(d);
}

SquareMatrix tridiag2() { return SquareMatrix::from_rows({{2, -1}, {-1, 2}}); }

}  // namespace

TEST(Lu, IdentityHasIdentityPermutation) {
  auto f = lu_decompose(SquareMatrix::identity(3));
  EXPECT_FALSE(f.singular);
  EXPECT_EQ(f.perm, (std::vector<std::size_t>{0, 1, 2}));
  EXPECT_EQ(f.perm_sign, 1);
}

TEST(Lu, ForcedSwap) {
  auto f = lu_decompose(SquareMatrix::from_rows({{0, 1}, {1, 0}}));
  EXPECT_FALSE(f.singular);
  EXPECT_EQ(f.perm, (std::vector<std::size_t>{1, 0}));
  EXPECT_EQ(f.perm_sign, -1);
  EXPECT_DOUBLE_EQ(determinant(f), -1.0);
}

TEST(Lu, RankOneIsSingular) {
  auto f = lu_decompose(SquareMatrix::from_rows({{1, 2}, {2, 4}}));
  EXPECT_TRUE(f.singular);
  EXPECT_EQ(determinant(f), 0.0);
  EXPECT_THROW(invert(f), SingularMatrix);
}

TEST(Determinant, SmallCases) {
  EXPECT_DOUBLE_EQ(determinant(lu_decompose(SquareMatrix::identity(7))), 1.0);
  EXPECT_DOUBLE_EQ(determinant(lu_decompose(diag2(1, 2))), 2.0);
  EXPECT_NEAR(determinant(lu_decompose(tridiag2())), 3.0, 1e-15);
}

TEST(Determinant, MatchesCofactorExpansion) {
  RngStream rng(11, 0);
  for (std::size_t n : {3, 4, 5, 6}) {
    for (int k = 0; k < 20; ++k) {
      auto a = random_matrix(n, rng);
      std::vector<double> e(a.entries().begin(), a.entries().end());
      EXPECT_NEAR(determinant(lu_decompose(a)), testsupport::cofactor_det(e, n), 1e-12);
    }
  }
}

TEST(Invert, SmallCases) {
  EXPECT_EQ(invert(lu_decompose(SquareMatrix::identity(5))), SquareMatrix::identity(5));
  auto d = invert(lu_decompose(diag2(1, 2)));
  EXPECT_DOUBLE_EQ(d(0, 0), 1.0);
  EXPECT_DOUBLE_EQ(d(1, 1), 0.5);
  EXPECT_EQ(d(0, 1), 0.0);
  auto t = invert(lu_decompose(tridiag2()));
  EXPECT_NEAR(t(0, 0), 2.0 / 3, 1e-15);
  EXPECT_NEAR(t(0, 1), 1.0 / 3, 1e-15);
  EXPECT_NEAR(t(1, 0), 1.0 / 3, 1e-15);
  EXPECT_NEAR(t(1, 1), 2.0 / 3, 1e-15);
}

TEST(Invert, ProductIsIdentityOnRandomMatrices) {
  RngStream rng(12, 0);
  for (std::size_t n : {3, 5, 7}) {
    for (int k = 0; k < 100; ++k) {
      auto a = random_matrix(n, rng);
      auto p = a * invert(lu_decompose(a));
      double worst = 0.0;
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) worst = std::max(worst, std::abs(p(i, j) - (i == j ? 1.0 : 0.0)));
      // U(-1,1) draws can be badly conditioned; keep those the contract excludes out
      auto gj = testsupport::gauss_jordan_inverse({a.entries().begin(), a.entries().end()}, n);
      double norm_a = 0.0, norm_inv = 0.0;
      for (double v : a.entries()) norm_a = std::max(norm_a, std::abs(v));
      for (double v : gj) norm_inv = std::max(norm_inv, std::abs(v));
      if (norm_a * norm_inv * static_cast<double>(n) > 1e8) continue;
      EXPECT_LE(worst, 1e-8);
    }
  }
}

TEST(Eigen, Diagonal) {
  const double d[] = {3, 1, 2};
  auto s = eigenvalues(SquareMatrix::diagonal(d));
  std::vector<double> re;
  for (auto z : s.eigenvalues) {
    EXPECT_EQ(z.imag(), 0.0);
    re.push_back(z.real());
  }
  std::sort(re.begin(), re.end());
  EXPECT_NEAR(re[0], 1.0, 1e-14);
  EXPECT_NEAR(re[1], 2.0, 1e-14);
  EXPECT_NEAR(re[2], 3.0, 1e-14);
}

TEST(Eigen, RotationAndTridiagonal) {
  auto r = eigenvalues(SquareMatrix::from_rows({{0, -1}, {1, 0}}));
  ASSERT_EQ(r.eigenvalues.size(), 2u);
  for (auto z : r.eigenvalues) {
    EXPECT_NEAR(z.real(), 0.0, 1e-14);
    EXPECT_NEAR(std::abs(z.imag()), 1.0, 1e-14);
  }
  EXPECT_NEAR(r.eigenvalues[0].imag() + r.eigenvalues[1].imag(), 0.0, 1e-14);
  auto sym = symmetric_eigenvalues(tridiag2());
  EXPECT_NEAR(sym[0], 1.0, 1e-14);
  EXPECT_NEAR(sym[1], 3.0, 1e-14);
}

TEST(Eigen, ConjugatePairsAndModulusProduct) {
  RngStream rng(13, 0);
  for (std::size_t n : {3, 5, 7}) {
    for (int k = 0; k < 50; ++k) {
      auto a = random_matrix(n, rng);
      auto s = eigenvalues(a);
      double prod = 1.0;
      double imag_sum = 0.0;
      for (auto z : s.eigenvalues) {
        prod *= std::abs(z);
        imag_sum += z.imag();
      }
      EXPECT_NEAR(imag_sum, 0.0, 1e-8);
      const double det = std::abs(determinant(lu_decompose(a)));
      EXPECT_LE(testsupport::rel_err(prod, det, 1e-300), 1e-6);
    }
  }
}

TEST(CharPoly, SmallCases) {
  auto i2 = char_poly(SquareMatrix::identity(2));
  EXPECT_DOUBLE_EQ(i2.coeff(0), 1.0);
  EXPECT_DOUBLE_EQ(i2.coeff(1), -2.0);
  EXPECT_DOUBLE_EQ(i2.coeff(2), 1.0);
  auto t = char_poly(tridiag2());
  EXPECT_NEAR(t.coeff(0), 3.0, 1e-14);
  EXPECT_NEAR(t.coeff(1), -4.0, 1e-14);
  auto d = char_poly(diag2(1, 2));
  EXPECT_NEAR(d.coeff(0), 2.0, 1e-14);
  EXPECT_NEAR(d.coeff(1), -3.0, 1e-14);
  EXPECT_NEAR(d.adj_trace, 3.0, 1e-14);
}

TEST(CharPoly, IdentityIsBinomial) {
  // (x - 1)^7: c_k = binom(7, k) (-1)^(7-k)
  auto c = char_poly(SquareMatrix::identity(7));
  const double binom[] = {1, 7, 21, 35, 35, 21, 7, 1};
  for (std::size_t k = 0; k < 7; ++k) {
    const double sign = ((7 - k) % 2 == 0) ? 1.0 : -1.0;
    EXPECT_NEAR(c.coeff(k), sign * binom[k], 1e-12);
  }
}

TEST(CharPoly, CoefficientIdentitiesOnRandomMatrices) {
  RngStream rng(14, 0);
  for (std::size_t n : {3, 5, 7}) {
    for (int k = 0; k < 200; ++k) {
      auto a = random_matrix(n, rng);
      auto c = char_poly(a);
      const double det = determinant(lu_decompose(a));
      const double sign_n = (n % 2 == 0) ? 1.0 : -1.0;
      EXPECT_LE(std::abs(c.coeff(0) - sign_n * det), 1e-9 * std::max(1.0, std::abs(det)));
      EXPECT_LE(std::abs(c.coeff(1) - (-sign_n) * c.adj_trace), 1e-9 * std::max(1.0, std::abs(c.adj_trace)));
      EXPECT_LE(std::abs(c.coeff(n - 1) + trace(a)), 1e-12 * static_cast<double>(n));
      // adj(A) = det(A) A^{-1}
      const double tr_inv = trace(invert(lu_decompose(a)));
      EXPECT_LE(testsupport::rel_err(c.adj_trace, det * tr_inv, 1e-300), 1e-8);
    }
  }
}

TEST(CharPoly, MatchesPolynomialFromEigenvalues) {
  // expand prod (x - lambda_i) from the eigen-solver and compare coefficients
  RngStream rng(15, 0);
  for (std::size_t n : {3, 5, 7}) {
    for (int k = 0; k < 50; ++k) {
      auto a = random_matrix(n, rng);
      std::vector<std::complex<double>> poly{1.0};
      for (auto lam : eigenvalues(a).eigenvalues) {
        std::vector<std::complex<double>> next(poly.size() + 1, 0.0);
        for (std::size_t i = 0; i < poly.size(); ++i) {
          next[i + 1] += poly[i];
          next[i] -= lam * poly[i];
        }
        poly = next;
      }
      auto c = char_poly(a);
      for (std::size_t j = 0; j < n; ++j) EXPECT_NEAR(c.coeff(j), poly[j].real(), 1e-8);
    }
  }
}

TEST(Trace, SmallCases) {
  EXPECT_EQ(trace(SquareMatrix::identity(7)), 7.0);
  EXPECT_EQ(trace(diag2(1, 2)), 3.0);
  EXPECT_EQ(trace(tridiag2()), 4.0);
}

TEST(SquareMatrix, Validation) {
  EXPECT_THROW(SquareMatrix(2, {1.0, 2.0, 3.0}), DimensionMismatch);
  EXPECT_THROW(SquareMatrix::from_rows({{1, 2}, {3}}), NonSquareInput);
  EXPECT_ANY_THROW(SquareMatrix(1, {std::nan("")}));
}
