#pragma once

// Dense row-major matrices and the Cholesky toolkit used by exact GP inference.

#include <cmath>
#include <cstddef>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "gprcap/errors.hpp"

namespace gprcap {

using Vector = std::vector<double>;

class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

  static Matrix identity(std::size_t n) {
    Matrix m(n, n);
    for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
    return m;
  }

  static Matrix from_rows(const std::vector<Vector>& rows) {
    if (rows.empty()) return {};
    Matrix m(rows.size(), rows.front().size());
    for (std::size_t i = 0; i < rows.size(); ++i) {
      if (rows[i].size() != m.cols_) throw DimensionMismatch("ragged matrix rows");
      for (std::size_t j = 0; j < m.cols_; ++j) m(i, j) = rows[i][j];
    }
    return m;
  }

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }

  double& operator()(std::size_t i, std::size_t j) { return data_[i * cols_ + j]; }
  double operator()(std::size_t i, std::size_t j) const { return data_[i * cols_ + j]; }

  std::span<const double> row(std::size_t i) const { return {data_.data() + i * cols_, cols_}; }
  std::span<const double> data() const { return data_; }

  Matrix transposed() const {
    Matrix t(cols_, rows_);
    for (std::size_t i = 0; i < rows_; ++i)
      for (std::size_t j = 0; j < cols_; ++j) t(j, i) = (*this)(i, j);
    return t;
  }

  bool operator==(const Matrix&) const = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  Vector data_;
};

inline Matrix operator*(const Matrix& a, const Matrix& b) {
  if (a.cols() != b.rows()) throw DimensionMismatch("matrix product dimensions disagree");
  Matrix c(a.rows(), b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t k = 0; k < a.cols(); ++k) {
      const double aik = a(i, k);
      for (std::size_t j = 0; j < b.cols(); ++j) c(i, j) += aik * b(k, j);
    }
  return c;
}

inline Vector operator*(const Matrix& a, std::span<const double> x) {
  if (a.cols() != x.size()) throw DimensionMismatch("matrix-vector dimensions disagree");
  Vector y(a.rows(), 0.0);
  for (std::size_t i = 0; i < a.rows(); ++i) {
    double s = 0.0;
    for (std::size_t j = 0; j < a.cols(); ++j) s += a(i, j) * x[j];
    y[i] = s;
  }
  return y;
}

inline double dot(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw DimensionMismatch("dot product lengths disagree");
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

inline double frobenius_norm(const Matrix& a) {
  double s = 0.0;
  for (double v : a.data()) s += v * v;
  return std::sqrt(s);
}

/// Square symmetric matrix. Construction symmetrizes the input as (A + Aᵀ)/2 so
/// that floating-point drift from kernel evaluation order is tolerated.
class SymMatrix {
 public:
  explicit SymMatrix(const Matrix& a) : m_(a) {
    if (a.rows() == 0 || a.rows() != a.cols())
      throw DimensionMismatch("symmetric matrix must be square with n >= 1");
    const std::size_t n = a.rows();
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = i + 1; j < n; ++j) {
        const double s = 0.5 * (a(i, j) + a(j, i));
        m_(i, j) = s;
        m_(j, i) = s;
      }
  }

  static SymMatrix identity(std::size_t n) { return SymMatrix(Matrix::identity(n)); }

  std::size_t size() const noexcept { return m_.rows(); }
  double operator()(std::size_t i, std::size_t j) const { return m_(i, j); }
  const Matrix& matrix() const noexcept { return m_; }

  double mean_diagonal() const {
    double s = 0.0;
    for (std::size_t i = 0; i < size(); ++i) s += m_(i, i);
    return s / static_cast<double>(size());
  }

 private:
  Matrix m_;
};

struct CholFactor {
  Matrix L;
  double jitter = 0.0;

  std::size_t size() const noexcept { return L.rows(); }
};

namespace detail {

// Returns false on a non-positive (or non-finite) pivot.
inline bool try_cholesky(const SymMatrix& a, double jitter, Matrix& out, std::size_t& bad_pivot) {
  const std::size_t n = a.size();
  out = Matrix(n, n);
  for (std::size_t j = 0; j < n; ++j) {
    double d = a(j, j) + jitter;
    for (std::size_t k = 0; k < j; ++k) d -= out(j, k) * out(j, k);
    if (!(d > 0.0) || !std::isfinite(d)) {
      bad_pivot = j;
      return false;
    }
    const double ljj = std::sqrt(d);
    out(j, j) = ljj;
    for (std::size_t i = j + 1; i < n; ++i) {
      double s = a(i, j);
      for (std::size_t k = 0; k < j; ++k) s -= out(i, k) * out(j, k);
      out(i, j) = s / ljj;
    }
  }
  return true;
}

}  // namespace detail

inline CholFactor cholesky(const SymMatrix& a) {
  CholFactor f;
  std::size_t bad = 0;
  if (!detail::try_cholesky(a, 0.0, f.L, bad))
    throw NotPositiveDefinite("non-positive pivot at index " + std::to_string(bad));
  return f;
}

inline constexpr double kJitterRelative = 1e-10;
inline constexpr double kJitterFloor = 1e-12;
inline constexpr std::size_t kDefaultJitterAttempts = 8;

/// Tries jitter 0, eps, 10 eps, ... with eps = 1e-10 * mean diagonal (floor 1e-12).
inline CholFactor cholesky_jittered(const SymMatrix& a,
                                    std::size_t max_attempts = kDefaultJitterAttempts) {
  if (max_attempts < 1) throw ValidationError("max_attempts must be >= 1");
  const double mean_diag = a.mean_diagonal();
  double eps = kJitterRelative * std::abs(mean_diag);
  if (!(eps >= kJitterFloor) || !std::isfinite(eps)) eps = kJitterFloor;

  CholFactor f;
  std::size_t bad = 0;
  double jitter = 0.0;
  for (std::size_t attempt = 0; attempt < max_attempts; ++attempt) {
    if (detail::try_cholesky(a, jitter, f.L, bad)) {
      f.jitter = jitter;
      return f;
    }
    jitter = attempt == 0 ? eps : jitter * 10.0;
  }
  throw NotPositiveDefinite("factorization failed after " + std::to_string(max_attempts) +
                            " jitter attempts (last pivot failure at index " +
                            std::to_string(bad) + ")");
}

inline Vector solve_lower(const Matrix& L, std::span<const double> b) {
  const std::size_t n = L.rows();
  if (L.cols() != n || b.size() != n) throw DimensionMismatch("solve_lower dimensions disagree");
  Vector x(n);
  for (std::size_t i = 0; i < n; ++i) {
    if (L(i, i) == 0.0) throw SingularTriangular("zero diagonal at index " + std::to_string(i));
    double s = b[i];
    for (std::size_t k = 0; k < i; ++k) s -= L(i, k) * x[k];
    x[i] = s / L(i, i);
  }
  return x;
}

inline Vector solve_upper(const Matrix& U, std::span<const double> b) {
  const std::size_t n = U.rows();
  if (U.cols() != n || b.size() != n) throw DimensionMismatch("solve_upper dimensions disagree");
  Vector x(n);
  for (std::size_t ii = n; ii-- > 0;) {
    if (U(ii, ii) == 0.0) throw SingularTriangular("zero diagonal at index " + std::to_string(ii));
    double s = b[ii];
    for (std::size_t k = ii + 1; k < n; ++k) s -= U(ii, k) * x[k];
    x[ii] = s / U(ii, ii);
  }
  return x;
}

// Solves Lᵀx = b reading L in place.
inline Vector solve_lower_transposed(const Matrix& L, std::span<const double> b) {
  const std::size_t n = L.rows();
  if (L.cols() != n || b.size() != n)
    throw DimensionMismatch("solve_lower_transposed dimensions disagree");
  Vector x(n);
  for (std::size_t ii = n; ii-- > 0;) {
    if (L(ii, ii) == 0.0) throw SingularTriangular("zero diagonal at index " + std::to_string(ii));
    double s = b[ii];
    for (std::size_t k = ii + 1; k < n; ++k) s -= L(k, ii) * x[k];
    x[ii] = s / L(ii, ii);
  }
  return x;
}

/// A⁻¹b for A = LLᵀ.
inline Vector cholesky_solve(const CholFactor& f, std::span<const double> b) {
  return solve_lower_transposed(f.L, solve_lower(f.L, b));
}

/// Explicit A⁻¹ from the factor; used only where a full inverse is needed (trace terms).
inline Matrix cholesky_inverse(const CholFactor& f) {
  const std::size_t n = f.size();
  Matrix inv(n, n);
  Vector e(n, 0.0);
  for (std::size_t j = 0; j < n; ++j) {
    e[j] = 1.0;
    const Vector col = cholesky_solve(f, e);
    for (std::size_t i = 0; i < n; ++i) inv(i, j) = col[i];
    e[j] = 0.0;
  }
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) {
      const double s = 0.5 * (inv(i, j) + inv(j, i));
      inv(i, j) = s;
      inv(j, i) = s;
    }
  return inv;
}

inline double log_det_from_factor(const CholFactor& f) {
  double s = 0.0;
  for (std::size_t i = 0; i < f.size(); ++i) s += std::log(f.L(i, i));
  return 2.0 * s;
}

}  // namespace gprcap
