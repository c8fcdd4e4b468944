#include "monolab/linalg.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <numeric>
#include <stdexcept>
#include <string>

#include "monolab/errors.hpp"

namespace monolab {

SquareMatrix::SquareMatrix(std::size_t n) : n_(n), entries_(n * n, 0.0) {}

SquareMatrix::SquareMatrix(std::size_t n, std::vector<double> entries)
    : n_(n), entries_(std::move(entries)) {
  if (entries_.size() != n_ * n_) {
    throw DimensionMismatch("SquareMatrix: expected " + std::to_string(n_ * n_) +
                            " entries, got " + std::to_string(entries_.size()));
  }
  for (double v : entries_) {
    if (!std::isfinite(v)) throw std::invalid_argument("SquareMatrix: non-finite entry");
  }
}

SquareMatrix SquareMatrix::identity(std::size_t n) {
  SquareMatrix m(n);
  for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
  return m;
}

SquareMatrix SquareMatrix::diagonal(std::span<const double> diag) {
  SquareMatrix m(diag.size());
  for (std::size_t i = 0; i < diag.size(); ++i) m(i, i) = diag[i];
  return m;
}

SquareMatrix SquareMatrix::from_rows(std::initializer_list<std::initializer_list<double>> rows) {
  const std::size_t n = rows.size();
  std::vector<double> e;
  e.reserve(n * n);
  for (const auto& row : rows) {
    if (row.size() != n) throw NonSquareInput("from_rows: ragged or non-square input");
    e.insert(e.end(), row.begin(), row.end());
  }
  return SquareMatrix(n, std::move(e));
}

SquareMatrix SquareMatrix::transposed() const {
  SquareMatrix t(n_);
  for (std::size_t i = 0; i < n_; ++i)
    for (std::size_t j = 0; j < n_; ++j) t(j, i) = (*this)(i, j);
  return t;
}

SquareMatrix operator*(const SquareMatrix& a, const SquareMatrix& b) {
  if (a.size() != b.size()) throw DimensionMismatch("matrix product: dimension mismatch");
  const std::size_t n = a.size();
  SquareMatrix c(n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t k = 0; k < n; ++k) {
      const double aik = a(i, k);
      for (std::size_t j = 0; j < n; ++j) c(i, j) += aik * b(k, j);
    }
  }
  return c;
}

LUFactorization lu_decompose(const SquareMatrix& a, double pivot_tol) {
  if (pivot_tol < 0.0) throw std::invalid_argument("lu_decompose: pivot_tol must be >= 0");
  const std::size_t n = a.size();
  LUFactorization f{a, std::vector<std::size_t>(n), 1, false};
  std::iota(f.perm.begin(), f.perm.end(), std::size_t{0});
  SquareMatrix& lu = f.lu;

  for (std::size_t k = 0; k < n; ++k) {
    std::size_t p = k;
    double best = std::abs(lu(k, k));
    for (std::size_t i = k + 1; i < n; ++i) {
      const double v = std::abs(lu(i, k));
      if (v > best) {
        best = v;
        p = i;
      }
    }
    if (p != k) {
      for (std::size_t j = 0; j < n; ++j) std::swap(lu(k, j), lu(p, j));
      std::swap(f.perm[k], f.perm[p]);
      f.perm_sign = -f.perm_sign;
    }
    const double pivot = lu(k, k);
    if (std::abs(pivot) <= pivot_tol) {
      // keep factoring so lu stays a complete record; the column is skipped
      f.singular = true;
      continue;
    }
    for (std::size_t i = k + 1; i < n; ++i) {
      const double m = lu(i, k) / pivot;
      lu(i, k) = m;
      for (std::size_t j = k + 1; j < n; ++j) lu(i, j) -= m * lu(k, j);
    }
  }
  return f;
}

double determinant(const LUFactorization& f) {
  if (f.singular) return 0.0;
  double det = static_cast<double>(f.perm_sign);
  for (std::size_t k = 0; k < f.lu.size(); ++k) det *= f.lu(k, k);
  return det;
}

SquareMatrix invert(const LUFactorization& f) {
  if (f.singular) throw SingularMatrix("invert: matrix is singular under the pivot tolerance");
  const std::size_t n = f.lu.size();
  const SquareMatrix& lu = f.lu;
  SquareMatrix inv(n);
  std::vector<double> col(n);
  for (std::size_t c = 0; c < n; ++c) {
    // column c of P*I
    for (std::size_t i = 0; i < n; ++i) col[i] = (f.perm[i] == c) ? 1.0 : 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      double s = col[i];
      for (std::size_t j = 0; j < i; ++j) s -= lu(i, j) * col[j];
      col[i] = s;
    }
    for (std::size_t ii = n; ii-- > 0;) {
      double s = col[ii];
      for (std::size_t j = ii + 1; j < n; ++j) s -= lu(ii, j) * col[j];
      col[ii] = s / lu(ii, ii);
    }
    for (std::size_t i = 0; i < n; ++i) inv(i, c) = col[i];
  }
  return inv;
}

namespace {

Eigen::MatrixXd to_eigen(const SquareMatrix& a) {
  const auto n = static_cast<Eigen::Index>(a.size());
  Eigen::MatrixXd m(n, n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j) m(i, j) = a(i, j);
  return m;
}

void check_supported(const SquareMatrix& a, const char* who) {
  if (a.size() == 0 || a.size() > kMaxDimension) {
    throw std::invalid_argument(std::string(who) + ": dimension outside 1..64");
  }
}

}  // namespace

Spectrum eigenvalues(const SquareMatrix& a) {
  check_supported(a, "eigenvalues");
  Eigen::EigenSolver<Eigen::MatrixXd> solver;
  solver.setMaxIterations(static_cast<Eigen::Index>(100 * a.size()));
  solver.compute(to_eigen(a), /*computeEigenvectors=*/false);
  if (solver.info() != Eigen::Success) {
    throw ConvergenceFailure("eigenvalues: QR iteration did not converge");
  }
  Spectrum s;
  const auto& ev = solver.eigenvalues();
  s.eigenvalues.assign(ev.data(), ev.data() + ev.size());
  return s;
}

std::vector<double> symmetric_eigenvalues(const SquareMatrix& a) {
  check_supported(a, "symmetric_eigenvalues");
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(to_eigen(a), Eigen::EigenvaluesOnly);
  if (solver.info() != Eigen::Success) {
    throw ConvergenceFailure("symmetric_eigenvalues: did not converge");
  }
  const auto& ev = solver.eigenvalues();
  return {ev.data(), ev.data() + ev.size()};
}

CharPoly char_poly(const SquareMatrix& a) {
  const std::size_t n = a.size();
  CharPoly cp;
  cp.coeffs.assign(n, 0.0);

  // M_k = A M_{k-1} + c_{n-k+1} I, c_{n-k} = -tr(A M_k) / k, with M_0 = 0, c_n = 1
  SquareMatrix m(n);
  SquareMatrix am(n);
  double prev_c = 1.0;
  for (std::size_t k = 1; k <= n; ++k) {
    m = am;
    for (std::size_t i = 0; i < n; ++i) m(i, i) += prev_c;
    am = a * m;
    const double c = -trace(am) / static_cast<double>(k);
    cp.coeffs[n - k] = c;
    prev_c = c;
  }
  // A M_n + c_0 I = 0, so adj(A) = (-1)^(n+1) M_n
  const double sign = (n % 2 == 1) ? 1.0 : -1.0;
  cp.adj_trace = sign * trace(m);
  return cp;
}

double trace(const SquareMatrix& a) {
  double t = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) t += a(i, i);
  return t;
}

}  // namespace monolab
