#pragma once

#include <complex>
#include <cstddef>
#include <initializer_list>
#include <span>
#include <vector>

namespace monolab {

// Dense real n x n matrix, row-major. Entries are validated finite on
// construction.
class SquareMatrix {
 public:
  SquareMatrix() = default;
  explicit SquareMatrix(std::size_t n);
  SquareMatrix(std::size_t n, std::vector<double> entries);

  static SquareMatrix identity(std::size_t n);
  static SquareMatrix diagonal(std::span<const double> diag);
  static SquareMatrix from_rows(std::initializer_list<std::initializer_list<double>> rows);

  std::size_t size() const { return n_; }
  double operator()(std::size_t i, std::size_t j) const { return entries_[i * n_ + j]; }
  double& operator()(std::size_t i, std::size_t j) { return entries_[i * n_ + j]; }

  std::span<const double> entries() const { return entries_; }
  std::span<double> entries() { return entries_; }

  SquareMatrix transposed() const;

  friend SquareMatrix operator*(const SquareMatrix& a, const SquareMatrix& b);
  friend bool operator==(const SquareMatrix&, const SquareMatrix&) = default;

 private:
  std::size_t n_ = 0;
  std::vector<double> entries_;
};

// P*A = L*U with partial pivoting. `lu` stores the unit-lower factor below the
// diagonal and U on and above it; perm[k] is the source row of row k.
struct LUFactorization {
  SquareMatrix lu;
  std::vector<std::size_t> perm;
  int perm_sign = 1;
  bool singular = false;
};

inline constexpr double kDefaultPivotTol = 1e-12;

LUFactorization lu_decompose(const SquareMatrix& a, double pivot_tol = kDefaultPivotTol);

// perm_sign * prod(U_kk); 0.0 when the factorization is flagged singular.
double determinant(const LUFactorization& f);

// Throws SingularMatrix when f.singular.
SquareMatrix invert(const LUFactorization& f);

struct Spectrum {
  std::vector<std::complex<double>> eigenvalues;
};

// All n eigenvalues of a general real matrix (n <= 64). Throws
// ConvergenceFailure when the QR iteration does not converge.
Spectrum eigenvalues(const SquareMatrix& a);

// Eigenvalues of a symmetric matrix, ascending.
std::vector<double> symmetric_eigenvalues(const SquareMatrix& a);

// Monic p(lambda) = det(lambda I - A) = lambda^n + c_{n-1} lambda^{n-1} + ... + c_0.
// coeffs[k] = c_k for k < n. adj_trace = tr(adj(A)).
struct CharPoly {
  std::vector<double> coeffs;
  double adj_trace = 0.0;

  // c_k for 0 <= k <= n, with c_n = 1.
  double coeff(std::size_t k) const { return k < coeffs.size() ? coeffs[k] : 1.0; }
};

// Faddeev-LeVerrier recurrence.
CharPoly char_poly(const SquareMatrix& a);

double trace(const SquareMatrix& a);

inline constexpr std::size_t kMaxDimension = 64;

}  // namespace monolab
