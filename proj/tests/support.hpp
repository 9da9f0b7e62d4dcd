#pragma once

// Independent reference implementations used as test oracles. None of these
// share code with the library's Cholesky path.

#include <algorithm>
#include <cmath>
#include <random>
#include <stdexcept>
#include <utility>
#include <vector>

#include "gprcap/gprcap.hpp"

namespace oracle {

using gprcap::Matrix;
using gprcap::Points;
using gprcap::Vector;

/// Cyclic Jacobi rotations; returns eigenvalues in ascending order.
inline Vector jacobi_eigenvalues(Matrix a, int max_sweeps = 100) {
  const std::size_t n = a.rows();
  for (int sweep = 0; sweep < max_sweeps; ++sweep) {
    double off = 0.0;
    for (std::size_t p = 0; p < n; ++p)
      for (std::size_t q = p + 1; q < n; ++q) off += a(p, q) * a(p, q);
    if (off < 1e-30) break;
    for (std::size_t p = 0; p < n; ++p)
      for (std::size_t q = p + 1; q < n; ++q) {
        if (a(p, q) == 0.0) continue;
        const double theta = (a(q, q) - a(p, p)) / (2.0 * a(p, q));
        const double t = (theta >= 0 ? 1.0 : -1.0) / (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0), s = t * c;
        for (std::size_t k = 0; k < n; ++k) {
          const double akp = a(k, p), akq = a(k, q);
          a(k, p) = c * akp - s * akq;
          a(k, q) = s * akp + c * akq;
        }
        for (std::size_t k = 0; k < n; ++k) {
          const double apk = a(p, k), aqk = a(q, k);
          a(p, k) = c * apk - s * aqk;
          a(q, k) = s * apk + c * aqk;
        }
      }
  }
  Vector ev(n);
  for (std::size_t i = 0; i < n; ++i) ev[i] = a(i, i);
  std::sort(ev.begin(), ev.end());
  return ev;
}

/// Gauss-Jordan elimination with partial pivoting.
inline Matrix explicit_inverse(const Matrix& m) {
  const std::size_t n = m.rows();
  Matrix a = m, inv = Matrix::identity(n);
  for (std::size_t c = 0; c < n; ++c) {
    std::size_t piv = c;
    for (std::size_t r = c + 1; r < n; ++r)
      if (std::abs(a(r, c)) > std::abs(a(piv, c))) piv = r;
    if (a(piv, c) == 0.0) throw std::runtime_error("singular");
    for (std::size_t k = 0; k < n; ++k) {
      std::swap(a(c, k), a(piv, k));
      std::swap(inv(c, k), inv(piv, k));
    }
    const double d = a(c, c);
    for (std::size_t k = 0; k < n; ++k) {
      a(c, k) /= d;
      inv(c, k) /= d;
    }
    for (std::size_t r = 0; r < n; ++r) {
      if (r == c) continue;
      const double f = a(r, c);
      if (f == 0.0) continue;
      for (std::size_t k = 0; k < n; ++k) {
        a(r, k) -= f * a(c, k);
        inv(r, k) -= f * inv(c, k);
      }
    }
  }
  return inv;
}

inline Vector gauss_solve(const Matrix& m, const Vector& b) {
  const Matrix inv = explicit_inverse(m);
  return inv * std::span<const double>(b);
}

inline Matrix random_spd(std::size_t n, std::mt19937_64& rng) {
  std::normal_distribution<double> g(0.0, 1.0);
  Matrix b(n, n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) b(i, j) = g(rng);
  Matrix a = b * b.transposed();
  for (std::size_t i = 0; i < n; ++i) a(i, i) += static_cast<double>(n);
  return a;
}

inline Points random_points(std::size_t n, std::size_t dim, std::mt19937_64& rng, double lo = -1.0,
                            double hi = 1.0) {
  std::uniform_real_distribution<double> u(lo, hi);
  Points X(n, Vector(dim));
  for (auto& p : X)
    for (auto& v : p) v = u(rng);
  return X;
}

/// Feature points shaped like [lags..., T(K), dod] in physically valid ranges.
inline Points random_features(std::size_t n, std::size_t lags, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> cap(16.0, 21.0), tk(298.15, 328.15), dod(0.3, 1.0);
  Points X(n);
  for (auto& p : X) {
    for (std::size_t i = 0; i < lags; ++i) p.push_back(cap(rng));
    p.push_back(tk(rng));
    p.push_back(dod(rng));
  }
  return X;
}

inline double rel_err(double a, double b, double floor = 1e-12) {
  return std::abs(a - b) / std::max({std::abs(a), std::abs(b), floor});
}

/// Numerator scale for comparing gradient vectors: max(|g|_inf, 1).
inline double grad_rel_err(const Vector& a, const Vector& b) {
  double num = 0.0, den = 1e-12;
  for (std::size_t i = 0; i < a.size(); ++i) {
    num = std::max(num, std::abs(a[i] - b[i]));
    den = std::max({den, std::abs(a[i]), std::abs(b[i])});
  }
  return num / den;
}

/// Central differences of nll in log space.
inline Vector fd_nll_grad(const gprcap::KernelNode& k, const gprcap::HyperParamSet& p,
                          const gprcap::TrainingSet& data, const gprcap::InputScaling& s = {},
                          double h = 1e-6) {
  Vector g(p.size());
  const Vector x0 = p.log_values();
  for (std::size_t i = 0; i < p.size(); ++i) {
    Vector xp = x0, xm = x0;
    xp[i] += h;
    xm[i] -= h;
    gprcap::HyperParamSet pp = p, pm = p;
    pp.set_log_values(xp);
    pm.set_log_values(xm);
    g[i] = (gprcap::nll(k, pp, data, s) - gprcap::nll(k, pm, data, s)) / (2.0 * h);
  }
  return g;
}

/// Hyperparameters with wide bounds so finite-difference steps never clamp.
inline gprcap::HyperParamSet wide(std::vector<std::pair<std::string, double>> nv) {
  std::vector<gprcap::HyperParam> e;
  for (auto& [n, v] : nv) e.push_back({n, v, 1e-8, 1e8});
  return gprcap::HyperParamSet(std::move(e));
}

inline gprcap::HyperParamSet model_b_params(std::size_t lags, double l_f, double lag_ls,
                                            double sigma_T, double c_D, double d_D, double sn) {
  std::vector<std::pair<std::string, double>> nv{{"l_f", l_f}};
  for (std::size_t i = 0; i < lags; ++i) nv.push_back({gprcap::lag_param_name(i), lag_ls});
  nv.push_back({"sigma_T", sigma_T});
  nv.push_back({"c_D", c_D});
  nv.push_back({"d_D", d_D});
  nv.push_back({gprcap::kNoiseParam, sn});
  return wide(std::move(nv));
}

}  // namespace oracle
