#pragma once

// Exact GP regression: negative log marginal likelihood, its log-space gradient,
// multi-start bounded optimization, and posterior prediction.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "gprcap/errors.hpp"
#include "gprcap/kernels.hpp"
#include "gprcap/matrix.hpp"

namespace gprcap {

inline constexpr const char* kNoiseParam = "sigma_n";
inline constexpr double kNoiseLower = 1e-4;
inline constexpr double kNoiseUpper = 1e1;
inline constexpr double kScaleLower = 1e-3;
inline constexpr double kScaleUpper = 1e3;
inline constexpr double kDegreeLower = 0.5;
inline constexpr double kDegreeUpper = 4.0;

/// Per-dimension affine input map z = (x - mean) / scale. Empty means identity.
struct InputScaling {
  Vector mean;
  Vector scale;

  bool is_identity() const noexcept { return mean.empty(); }

  static InputScaling standardize(const Points& X) {
    const std::size_t d = common_dim(X);
    InputScaling s{Vector(d, 0.0), Vector(d, 0.0)};
    const double n = static_cast<double>(X.size());
    for (const auto& p : X)
      for (std::size_t j = 0; j < d; ++j) s.mean[j] += p[j] / n;
    for (const auto& p : X)
      for (std::size_t j = 0; j < d; ++j) s.scale[j] += (p[j] - s.mean[j]) * (p[j] - s.mean[j]) / n;
    for (double& v : s.scale) {
      v = std::sqrt(v);
      if (!(v > 1e-12)) v = 1.0;  // constant feature
    }
    return s;
  }

  Point apply(std::span<const double> x) const {
    if (is_identity()) return Point(x.begin(), x.end());
    if (x.size() != mean.size()) throw DimensionMismatch("scaling dimension mismatch");
    Point z(x.size());
    for (std::size_t j = 0; j < x.size(); ++j) z[j] = (x[j] - mean[j]) / scale[j];
    return z;
  }

  Points apply(const Points& X) const {
    Points out;
    out.reserve(X.size());
    for (const auto& p : X) out.push_back(apply(p));
    return out;
  }

  /// d z_j / d x_j.
  double jacobian(std::size_t j) const { return is_identity() ? 1.0 : 1.0 / scale[j]; }

  bool operator==(const InputScaling&) const = default;
};

struct TrainingSet {
  Points X;  // raw (unscaled) points
  Vector y;  // targets, centered when `centered`
  double y_mean = 0.0;
  bool centered = true;

  std::size_t size() const noexcept { return X.size(); }

  void validate() const {
    if (X.size() < 2) throw ValidationError("training set needs at least two rows");
    if (y.size() != X.size()) throw DimensionMismatch("training targets and inputs disagree");
    common_dim(X);
    for (const auto& p : X)
      for (double v : p)
        if (!std::isfinite(v)) throw ValidationError("non-finite training input");
    for (double v : y)
      if (!std::isfinite(v)) throw ValidationError("non-finite training target");
  }

  static TrainingSet make(Points X, const Vector& targets, bool center = true) {
    TrainingSet t;
    t.X = std::move(X);
    t.centered = center;
    if (center && !targets.empty()) {
      double s = 0.0;
      for (double v : targets) s += v;
      t.y_mean = s / static_cast<double>(targets.size());
    }
    t.y.reserve(targets.size());
    for (double v : targets) t.y.push_back(v - t.y_mean);
    t.validate();
    return t;
  }

  bool operator==(const TrainingSet&) const = default;
};

struct FitConfig {
  std::size_t restarts = 8;
  std::size_t max_iters = 200;
  double grad_tol = 1e-6;
  std::uint64_t seed = 0;
  std::size_t jitter_attempts = kDefaultJitterAttempts;

  void validate() const {
    if (restarts < 1) throw ValidationError("restarts must be >= 1");
    if (max_iters < 1) throw ValidationError("max_iters must be >= 1");
    if (!(grad_tol > 0.0)) throw ValidationError("grad_tol must be > 0");
    if (jitter_attempts < 1) throw ValidationError("jitter_attempts must be >= 1");
  }
};

/// Checks that `params` names exactly the kernel's hyperparameters plus sigma_n.
inline void validate_params(const KernelNode& kernel, const HyperParamSet& params) {
  params.validate();
  auto declared = kernel.declared_params();
  declared.emplace_back(kNoiseParam);
  if (declared.size() != params.size())
    throw ValidationError("hyperparameter set does not match kernel (expected " +
                          std::to_string(declared.size()) + " entries, got " +
                          std::to_string(params.size()) + ")");
  for (const auto& name : declared)
    if (!params.find(name)) throw ValidationError("hyperparameter '" + name + "' missing");
}

// ---------------------------------------------------------------------------
// Negative log marginal likelihood

/// L = ½ log det λ + ½ yᵀλ⁻¹y + n/2 log 2π for an explicit λ.
inline double nll_from_matrix(const SymMatrix& lambda, std::span<const double> y,
                              std::size_t jitter_attempts = kDefaultJitterAttempts) {
  if (y.size() != lambda.size()) throw DimensionMismatch("nll: targets and matrix disagree");
  const CholFactor f = cholesky_jittered(lambda, jitter_attempts);
  const Vector v = solve_lower(f.L, y);
  const double n = static_cast<double>(y.size());
  return 0.5 * log_det_from_factor(f) + 0.5 * dot(v, v) + 0.5 * n * std::log(2.0 * std::numbers::pi);
}

namespace detail {

struct Posterior {
  CholFactor factor;
  Vector alpha;
  double nll = 0.0;
};

inline SymMatrix noisy_gram(const BoundKernel& k, const Points& Z, double sigma_n) {
  Matrix K = gram(k, Z, Z);
  for (std::size_t i = 0; i < Z.size(); ++i) K(i, i) += sigma_n * sigma_n;
  return SymMatrix(K);
}

inline Posterior posterior(const BoundKernel& k, const Points& Z, std::span<const double> y,
                           double sigma_n, std::size_t jitter_attempts,
                           const HyperParamSet& params) {
  Posterior p;
  const SymMatrix lambda = noisy_gram(k, Z, sigma_n);
  try {
    p.factor = cholesky_jittered(lambda, jitter_attempts);
  } catch (const NotPositiveDefinite& e) {
    throw NotPositiveDefinite(std::string(e.what()) + " at parameters {" + params.describe() + "}");
  }
  const Vector v = solve_lower(p.factor.L, y);
  p.alpha = solve_lower_transposed(p.factor.L, v);
  const double n = static_cast<double>(y.size());
  p.nll = 0.5 * log_det_from_factor(p.factor) + 0.5 * dot(v, v) +
          0.5 * n * std::log(2.0 * std::numbers::pi);
  if (!std::isfinite(p.nll))
    throw NotPositiveDefinite("non-finite nll at parameters {" + params.describe() + "}");
  return p;
}

inline std::size_t noise_index(const HyperParamSet& params) {
  const auto i = params.find(kNoiseParam);
  if (!i) throw ValidationError("hyperparameter set lacks sigma_n");
  return *i;
}

// ∂L/∂log θ_j = ½ Σ_ab (λ⁻¹ − ααᵀ)_ab ∂λ_ab/∂log θ_j.
inline Vector nll_gradient(const BoundKernel& k, const Points& Z, const Posterior& post,
                           const HyperParamSet& params) {
  const std::size_t n = Z.size();
  const Matrix W = cholesky_inverse(post.factor);
  Vector grad(params.size(), 0.0);
  Vector g(params.size());
  for (std::size_t a = 0; a < n; ++a)
    for (std::size_t b = a; b < n; ++b) {
      std::fill(g.begin(), g.end(), 0.0);
      k.accumulate_grad(Z[a], Z[b], 1.0, g);
      const double w = (W(a, b) - post.alpha[a] * post.alpha[b]) * (a == b ? 0.5 : 1.0);
      for (std::size_t j = 0; j < g.size(); ++j) grad[j] += w * g[j];
    }
  const std::size_t ni = noise_index(params);
  const double sn2 = params[ni].value * params[ni].value;
  double trace_term = 0.0;
  for (std::size_t a = 0; a < n; ++a) trace_term += W(a, a) - post.alpha[a] * post.alpha[a];
  grad[ni] += 0.5 * 2.0 * sn2 * trace_term;
  return grad;
}

}  // namespace detail

inline double nll(const KernelNode& kernel, const HyperParamSet& params, const TrainingSet& data,
                  const InputScaling& scaling = {},
                  std::size_t jitter_attempts = kDefaultJitterAttempts) {
  validate_params(kernel, params);
  data.validate();
  const Points Z = scaling.apply(data.X);
  const BoundKernel k(kernel, params, common_dim(Z));
  return detail::posterior(k, Z, data.y, params.value(kNoiseParam), jitter_attempts, params).nll;
}

/// Gradient of nll with respect to log hyperparameters, in set order.
inline Vector nll_grad(const KernelNode& kernel, const HyperParamSet& params,
                       const TrainingSet& data, const InputScaling& scaling = {},
                       std::size_t jitter_attempts = kDefaultJitterAttempts) {
  validate_params(kernel, params);
  data.validate();
  const Points Z = scaling.apply(data.X);
  const BoundKernel k(kernel, params, common_dim(Z));
  const auto post =
      detail::posterior(k, Z, data.y, params.value(kNoiseParam), jitter_attempts, params);
  return detail::nll_gradient(k, Z, post, params);
}

// ---------------------------------------------------------------------------
// Trained model

class TrainedModel {
 public:
  TrainedModel(KernelNode kernel, HyperParamSet params, TrainingSet training,
               InputScaling scaling = {}, std::size_t jitter_attempts = kDefaultJitterAttempts)
      : kernel_(std::move(kernel)),
        params_(std::move(params)),
        training_(std::move(training)),
        scaling_(std::move(scaling)) {
    validate_params(kernel_, params_);
    training_.validate();
    Z_ = scaling_.apply(training_.X);
    bound_.emplace(kernel_, params_, common_dim(Z_));
    auto post = detail::posterior(*bound_, Z_, training_.y, sigma_n(), jitter_attempts, params_);
    factor_ = std::move(post.factor);
    alpha_ = std::move(post.alpha);
    nll_ = post.nll;
  }

  const KernelNode& kernel() const noexcept { return kernel_; }
  const HyperParamSet& params() const noexcept { return params_; }
  const TrainingSet& training() const noexcept { return training_; }
  const InputScaling& scaling() const noexcept { return scaling_; }
  const CholFactor& factor() const noexcept { return factor_; }
  const Vector& alpha() const noexcept { return alpha_; }
  double nll() const noexcept { return nll_; }
  double sigma_n() const { return params_.value(kNoiseParam); }
  std::size_t dim() const noexcept { return Z_.front().size(); }

  const BoundKernel& bound_kernel() const noexcept { return *bound_; }
  const Points& scaled_inputs() const noexcept { return Z_; }

 private:
  KernelNode kernel_;
  HyperParamSet params_;
  TrainingSet training_;
  InputScaling scaling_;
  Points Z_;
  std::optional<BoundKernel> bound_;
  CholFactor factor_;
  Vector alpha_;
  double nll_ = 0.0;
};

struct Prediction {
  Vector mean;
  SymMatrix cov;
};

/// Posterior mean (un-centered) and latent-function covariance at Xstar (raw points).
inline Prediction predict(const TrainedModel& model, const Points& Xstar) {
  if (Xstar.empty()) throw EmptyInput("predict needs at least one test point");
  const Points Zs = model.scaling().apply(Xstar);
  for (const auto& z : Zs)
    if (z.size() != model.dim()) throw DimensionMismatch("test point dimension mismatch");
  const BoundKernel& k = model.bound_kernel();
  const Points& Z = model.scaled_inputs();
  const std::size_t n = Z.size(), m = Zs.size();

  Vector mean(m);
  Matrix V(m, n);  // row j: L⁻¹ k(X, x*_j)
  for (std::size_t j = 0; j < m; ++j) {
    Vector ks(n);
    for (std::size_t i = 0; i < n; ++i) ks[i] = k(Z[i], Zs[j]);
    mean[j] = dot(ks, model.alpha()) + model.training().y_mean;
    const Vector v = solve_lower(model.factor().L, ks);
    for (std::size_t i = 0; i < n; ++i) V(j, i) = v[i];
  }
  Matrix cov(m, m);
  for (std::size_t a = 0; a < m; ++a)
    for (std::size_t b = a; b < m; ++b) {
      const double c = k(Zs[a], Zs[b]) - dot(V.row(a), V.row(b));
      cov(a, b) = c;
      cov(b, a) = c;
    }
  // Cancellation in K** - VᵀV can leave tiny negative diagonals on ill-conditioned
  // Gram matrices; the latent variance is non-negative by construction.
  for (std::size_t a = 0; a < m; ++a) cov(a, a) = std::max(cov(a, a), 0.0);
  return {std::move(mean), SymMatrix(cov)};
}

// ---------------------------------------------------------------------------
// Hyperparameter initialization and fitting

namespace detail {

inline double stddev(std::span<const double> v) {
  double m = 0.0;
  for (double x : v) m += x;
  m /= static_cast<double>(v.size());
  double s = 0.0;
  for (double x : v) s += (x - m) * (x - m);
  return std::sqrt(s / static_cast<double>(v.size()));
}

inline double positive_or(double v, double fallback) { return v > 1e-12 && std::isfinite(v) ? v : fallback; }

inline void init_leaves(const KernelNode& node, const Points& Z, std::span<const double> y,
                        std::vector<HyperParam>& out) {
  auto seen = [&](const std::string& name) {
    return std::any_of(out.begin(), out.end(), [&](const HyperParam& p) { return p.name == name; });
  };
  auto column_std = [&](std::size_t d) {
    Vector col;
    col.reserve(Z.size());
    for (const auto& z : Z) col.push_back(z[d]);
    return positive_or(stddev(col), 1.0);
  };
  auto push = [&](const ParamRef& ref, double value, double lo, double hi) {
    if (ref.is_constant() || seen(ref.name)) return;
    out.push_back({ref.name, std::clamp(value, lo, hi), lo, hi});
  };

  if (!node.is_leaf()) {
    for (const auto& c : node.children) init_leaves(c, Z, y, out);
    return;
  }
  const auto [b, e] = slice_range(node.slice, Z.front().size());
  const double amp = positive_or(stddev(y), 1.0);
  switch (node.variant) {
    case KernelVariant::SE: {
      double var = 0.0;
      for (std::size_t d = b; d < e; ++d) var += column_std(d) * column_std(d);
      push(node.params[0], amp, kScaleLower, kScaleUpper);
      push(node.params[1], std::sqrt(var / static_cast<double>(e - b)), kScaleLower, kScaleUpper);
      break;
    }
    case KernelVariant::ArdSE:
    case KernelVariant::CapacitySE:
      push(node.params[0], amp, kScaleLower, kScaleUpper);
      for (std::size_t d = b; d < e; ++d)
        push(node.params[1 + d - b], column_std(d), kScaleLower, kScaleUpper);
      break;
    case KernelVariant::ArrheniusLaplacian: {
      Vector recip;
      for (const auto& z : Z) recip.push_back(1.0 / z[b]);
      push(node.params[0], 1.0, kScaleLower, kScaleUpper);
      push(node.params[1], positive_or(stddev(recip), 1.0), kScaleLower, kScaleUpper);
      break;
    }
    case KernelVariant::Polynomial:
      push(node.params[0], 1.0, kScaleLower, kScaleUpper);
      push(node.params[1], 1.0, kScaleLower, kScaleUpper);
      push(node.params[2], 1.0, kDegreeLower, kDegreeUpper);
      break;
    default: break;
  }
}

}  // namespace detail

/// Initialization rule: lengthscales = feature std, amplitudes = target std,
/// sigma_n = 0.1 x target std, unit offsets/slopes/degree. Computed on scaled inputs.
inline HyperParamSet initial_params(const KernelNode& kernel, const TrainingSet& data,
                                    const InputScaling& scaling = {}) {
  data.validate();
  const Points Z = scaling.apply(data.X);
  std::vector<HyperParam> entries;
  detail::init_leaves(kernel, Z, data.y, entries);
  const double noise = 0.1 * detail::positive_or(detail::stddev(data.y), 1.0);
  entries.push_back({kNoiseParam, std::clamp(noise, kNoiseLower, kNoiseUpper), kNoiseLower,
                     kNoiseUpper});
  HyperParamSet set(std::move(entries));
  validate_params(kernel, set);
  return set;
}

struct RestartResult {
  std::size_t index = 0;
  bool ok = false;
  double nll = std::numeric_limits<double>::infinity();
  HyperParamSet params;
  std::size_t iterations = 0;
  std::vector<double> trace;  // nll after each accepted step, starting point first
};

inline constexpr double kArmijo = 1e-4;

namespace detail {

struct Objective {
  const KernelNode& kernel;
  const TrainingSet& data;
  const Points& Z;
  std::size_t jitter_attempts;

  // nullopt on a numerically infeasible point.
  std::optional<double> value(const HyperParamSet& p) const {
    try {
      const BoundKernel k(kernel, p, Z.front().size());
      return posterior(k, Z, data.y, p.value(kNoiseParam), jitter_attempts, p).nll;
    } catch (const NumericalError&) {
      return std::nullopt;
    }
  }

  std::pair<double, Vector> value_grad(const HyperParamSet& p) const {
    const BoundKernel k(kernel, p, Z.front().size());
    const auto post = posterior(k, Z, data.y, p.value(kNoiseParam), jitter_attempts, p);
    return {post.nll, nll_gradient(k, Z, post, p)};
  }
};

// Zeroes components that point out of the box at an active bound.
inline Vector projected_gradient(const HyperParamSet& p, std::span<const double> g) {
  Vector pg(g.begin(), g.end());
  for (std::size_t i = 0; i < pg.size(); ++i) {
    const auto& e = p[i];
    if (e.lower == e.upper) pg[i] = 0.0;
    else if (e.value <= e.lower && pg[i] > 0.0) pg[i] = 0.0;
    else if (e.value >= e.upper && pg[i] < 0.0) pg[i] = 0.0;
  }
  return pg;
}

inline double inf_norm(std::span<const double> v) {
  double m = 0.0;
  for (double x : v) m = std::max(m, std::abs(x));
  return m;
}

}  // namespace detail

/// Projected gradient descent in log space with halving backtracking (Armijo 1e-4).
/// The trial step of each iteration is the Barzilai-Borwein step from the last move.
inline RestartResult descend(const KernelNode& kernel, const TrainingSet& data,
                             const InputScaling& scaling, HyperParamSet start,
                             const FitConfig& cfg) {
  const Points Z = scaling.apply(data.X);
  const detail::Objective obj{kernel, data, Z, cfg.jitter_attempts};
  RestartResult r;
  r.params = start;
  auto [f, g] = obj.value_grad(r.params);
  r.trace.push_back(f);

  double trial = 1.0 / std::max(1.0, detail::inf_norm(g));
  Vector x = r.params.log_values();
  for (std::size_t it = 0; it < cfg.max_iters; ++it) {
    const Vector pg = detail::projected_gradient(r.params, g);
    if (detail::inf_norm(pg) < cfg.grad_tol) break;

    bool accepted = false;
    double t = trial;
    HyperParamSet cand = r.params;
    Vector x_new(x.size());
    for (int halvings = 0; halvings < 60; ++halvings, t *= 0.5) {
      for (std::size_t i = 0; i < x.size(); ++i) x_new[i] = x[i] - t * pg[i];
      cand.set_log_values(x_new);
      const Vector x_proj = cand.log_values();
      double decrease = 0.0;
      for (std::size_t i = 0; i < x.size(); ++i) decrease += g[i] * (x_proj[i] - x[i]);
      const auto fv = obj.value(cand);
      if (fv && *fv <= f + kArmijo * decrease) {
        x_new = x_proj;
        accepted = true;
        break;
      }
    }
    if (!accepted) break;

    auto [fn, gn] = obj.value_grad(cand);
    Vector s(x.size()), yv(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
      s[i] = x_new[i] - x[i];
      yv[i] = gn[i] - g[i];
    }
    const double sy = dot(s, yv);
    trial = sy > 0.0 ? std::clamp(dot(s, s) / sy, 1e-10, 1e3) : std::min(2.0 * t, 1e3);

    x = std::move(x_new);
    r.params = std::move(cand);
    f = fn;
    g = std::move(gn);
    r.trace.push_back(f);
    r.iterations = it + 1;
  }
  r.nll = f;
  r.ok = true;
  return r;
}

/// Starting point of restart `index`: 0 is the initialization rule, the rest are
/// log-uniform within the bounds drawn from (seed, index).
inline HyperParamSet restart_start(const HyperParamSet& init, std::uint64_t seed,
                                   std::size_t index) {
  if (index == 0) return init;
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(index)};
  std::mt19937_64 rng(seq);
  Vector logs(init.size());
  for (std::size_t i = 0; i < init.size(); ++i) {
    const auto& e = init[i];
    std::uniform_real_distribution<double> u(std::log(e.lower), std::log(e.upper));
    logs[i] = e.lower == e.upper ? std::log(e.lower) : u(rng);
  }
  HyperParamSet s = init;
  s.set_log_values(logs);
  return s;
}

struct FitResult {
  TrainedModel model;
  std::vector<RestartResult> restarts;
};

inline FitResult fit_detailed(const KernelNode& kernel, const TrainingSet& data,
                              const FitConfig& cfg, const InputScaling& scaling = {},
                              std::optional<HyperParamSet> init = std::nullopt) {
  cfg.validate();
  data.validate();
  const HyperParamSet start0 = init ? *init : initial_params(kernel, data, scaling);
  validate_params(kernel, start0);

  std::vector<RestartResult> results;
  for (std::size_t r = 0; r < cfg.restarts; ++r) {
    RestartResult res;
    try {
      res = descend(kernel, data, scaling, restart_start(start0, cfg.seed, r), cfg);
    } catch (const NumericalError&) {
      res.ok = false;
    }
    res.index = r;
    results.push_back(std::move(res));
  }
  const RestartResult* best = nullptr;
  for (const auto& r : results)
    if (r.ok && (!best || r.nll < best->nll)) best = &r;
  if (!best) throw AllStartsFailed("all " + std::to_string(cfg.restarts) + " restarts failed");
  TrainedModel model(kernel, best->params, data, scaling, cfg.jitter_attempts);
  return {std::move(model), std::move(results)};
}

inline TrainedModel fit(const KernelNode& kernel, const TrainingSet& data, const FitConfig& cfg,
                        const InputScaling& scaling = {}) {
  return fit_detailed(kernel, data, cfg, scaling).model;
}

}  // namespace gprcap
