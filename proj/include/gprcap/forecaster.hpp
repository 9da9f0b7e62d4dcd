#pragma once

// Lagged input/output construction and one-step / recursive multi-step capacity
// forecasting with first-order propagation of input uncertainty.

#include <cmath>
#include <cstddef>
#include <iomanip>
#include <limits>
#include <ostream>
#include <string>
#include <vector>

#include "gprcap/dataset.hpp"
#include "gprcap/errors.hpp"
#include "gprcap/gpr.hpp"
#include "gprcap/kernels.hpp"
#include "gprcap/matrix.hpp"

namespace gprcap {

struct LagConfig {
  std::size_t lags = 2;

  void validate() const {
    if (lags < 1) throw ValidationError("lag count must be >= 1");
  }
};

struct TrainingPair {
  FeatureVector features;
  double target = 0.0;       // Ah
  double cycle_index = 0.0;  // of the target point
  std::string case_id;
};

inline FeatureVector make_features(std::span<const double> window, double tC, double dod_pct) {
  FeatureVector f{Vector(window.begin(), window.end()), to_kelvin(tC), dod_fraction(dod_pct)};
  f.validate();
  return f;
}

/// One pair per sliding window of `lags` consecutive capacities; target is the next one.
inline std::vector<TrainingPair> build_pairs(const CyclicCase& c, const LagConfig& cfg) {
  cfg.validate();
  c.validate();
  if (c.points.size() <= cfg.lags)
    throw TooShort("case '" + c.case_id + "' has " + std::to_string(c.points.size()) +
                   " points, needs more than " + std::to_string(cfg.lags));
  const Vector caps = c.capacities();
  std::vector<TrainingPair> out;
  for (std::size_t t = cfg.lags; t < caps.size(); ++t) {
    const std::span<const double> window(caps.data() + t - cfg.lags, cfg.lags);
    out.push_back({make_features(window, c.temperature_c, c.dod_pct), caps[t],
                   c.points[t].cycle_index, c.case_id});
  }
  return out;
}

/// Pairs of every case, concatenated; windows never cross case boundaries.
inline std::vector<TrainingPair> build_pairs(const Dataset& ds, const LagConfig& cfg) {
  std::vector<TrainingPair> out;
  for (const auto& c : ds.cases) {
    auto p = build_pairs(c, cfg);
    out.insert(out.end(), p.begin(), p.end());
  }
  return out;
}

inline TrainingSet to_training_set(const std::vector<TrainingPair>& pairs) {
  Points X;
  Vector y;
  for (const auto& p : pairs) {
    X.push_back(p.features.flatten());
    y.push_back(p.target);
  }
  return TrainingSet::make(std::move(X), y);
}

inline constexpr double kZ95 = 1.96;

struct ForecastPoint {
  std::size_t step = 1;
  double mean = 0.0;
  double variance = 0.0;
  double lower95 = 0.0;
  double upper95 = 0.0;

  static ForecastPoint make(std::size_t step, double mean, double variance) {
    const double half = kZ95 * std::sqrt(variance);
    return {step, mean, variance, mean - half, mean + half};
  }
};

inline std::size_t model_lags(const TrainedModel& model) { return model.dim() - 2; }

namespace detail {

struct LatentPrediction {
  double mean;
  double variance;
};

inline LatentPrediction predict_one(const TrainedModel& model, const FeatureVector& x) {
  if (x.lags() != model_lags(model))
    throw DimensionMismatch("window has " + std::to_string(x.lags()) + " lags, model expects " +
                            std::to_string(model_lags(model)));
  const Prediction p = predict(model, {x.flatten()});
  return {p.mean[0], p.cov(0, 0)};
}

}  // namespace detail

inline ForecastPoint one_step(const TrainedModel& model, std::span<const double> window, double tC,
                              double dod_pct, bool observation_noise = false) {
  const auto p = detail::predict_one(model, make_features(window, tC, dod_pct));
  const double sn = model.sigma_n();
  return ForecastPoint::make(1, p.mean, p.variance + (observation_noise ? sn * sn : 0.0));
}

/// Analytic d(predictive mean)/d(capacity lag) in raw units (Ah/Ah).
inline Vector mean_gradient(const TrainedModel& model, const FeatureVector& x) {
  const std::size_t lags = model_lags(model);
  if (x.lags() != lags) throw DimensionMismatch("mean_gradient lag count mismatch");
  const Point z = model.scaling().apply(x.flatten());
  const Points& Z = model.scaled_inputs();
  Vector gz(z.size(), 0.0);
  for (std::size_t i = 0; i < Z.size(); ++i)
    model.bound_kernel().accumulate_input_grad(z, Z[i], model.alpha()[i], gz);
  Vector g(lags);
  for (std::size_t d = 0; d < lags; ++d) g[d] = gz[d] * model.scaling().jacobian(d);
  return g;
}

struct MultiStepOptions {
  bool propagate = true;          // add the J Σ Jᵀ input-uncertainty term
  bool observation_noise = false;  // add σ_n² to reported variances
};

/// Recursive forecast feeding each predicted mean back as the newest lag.
///
/// The lag window's input covariance Σ (lags x lags) starts at zero for measured
/// values. Each step linearizes the predictive mean, J = ∂mean/∂window, so
///   var_k = var_GP(window mean) + J Σ Jᵀ,   cov(c_k, window) = Σ Jᵀ,
/// then Σ shifts by one lag and is bordered with those two quantities. The fed-back
/// lag stands in for a measured capacity, so its entry carries var_k + σ_n².
inline std::vector<ForecastPoint> multi_step(const TrainedModel& model,
                                             std::span<const double> seed_window, double tC,
                                             double dod_pct, std::size_t k,
                                             const MultiStepOptions& opts = {}) {
  if (k < 1) throw ValidationError("multi_step needs k >= 1");
  const std::size_t L = model_lags(model);
  if (seed_window.size() != L)
    throw DimensionMismatch("seed window has " + std::to_string(seed_window.size()) +
                            " lags, model expects " + std::to_string(L));
  const double sn2 = model.sigma_n() * model.sigma_n();

  Vector window(seed_window.begin(), seed_window.end());
  Matrix sigma(L, L);
  std::vector<ForecastPoint> out;
  out.reserve(k);
  for (std::size_t step = 1; step <= k; ++step) {
    const FeatureVector x = make_features(window, tC, dod_pct);
    const auto p = detail::predict_one(model, x);
    double var = p.variance;
    Vector cross(L, 0.0);
    if (opts.propagate) {
      const Vector J = mean_gradient(model, x);
      cross = sigma * std::span<const double>(J);
      var = p.variance + dot(J, cross);
    }
    out.push_back(ForecastPoint::make(step, p.mean, var + (opts.observation_noise ? sn2 : 0.0)));

    Matrix next(L, L);
    for (std::size_t i = 0; i + 1 < L; ++i) {
      for (std::size_t j = 0; j + 1 < L; ++j) next(i, j) = sigma(i + 1, j + 1);
      next(i, L - 1) = next(L - 1, i) = cross[i + 1];
    }
    next(L - 1, L - 1) = opts.propagate ? var + sn2 : 0.0;
    sigma = std::move(next);
    for (std::size_t i = 0; i + 1 < L; ++i) window[i] = window[i + 1];
    window[L - 1] = p.mean;
    if (!(p.mean > 0.0))
      throw NumericalError("forecast capacity fell to " + std::to_string(p.mean) + " Ah at step " +
                           std::to_string(step));
  }
  return out;
}

// ---------------------------------------------------------------------------
// CSV: step,cycle_index,mean_ah,variance_ah2,lower95,upper95

inline constexpr const char* kForecastHeader = "step,cycle_index,mean_ah,variance_ah2,lower95,upper95";

inline void write_forecast_csv(std::ostream& out, const std::vector<ForecastPoint>& points,
                               const std::vector<double>& cycle_indices) {
  if (cycle_indices.size() != points.size())
    throw DimensionMismatch("one cycle index per forecast row required");
  out << kForecastHeader << '\n';
  out << std::setprecision(std::numeric_limits<double>::max_digits10);
  for (std::size_t i = 0; i < points.size(); ++i) {
    const auto& p = points[i];
    out << p.step << ',' << cycle_indices[i] << ',' << p.mean << ',' << p.variance << ','
        << p.lower95 << ',' << p.upper95 << '\n';
  }
}

/// Cycle index of forecast step s seeded from the first `lags` points of `c`:
/// the case's own index where recorded, else extrapolated at the last spacing.
inline double forecast_cycle_index(const CyclicCase& c, std::size_t lags, std::size_t step) {
  const std::size_t i = lags - 1 + step;
  if (i < c.points.size()) return c.points[i].cycle_index;
  const std::size_t n = c.points.size();
  const double spacing = n >= 2 ? c.points[n - 1].cycle_index - c.points[n - 2].cycle_index : 1.0;
  return c.points[n - 1].cycle_index + spacing * static_cast<double>(i - (n - 1));
}

}  // namespace gprcap
