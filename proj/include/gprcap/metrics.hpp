#pragma once

#include <algorithm>
#include <cmath>
#include <span>

#include "gprcap/errors.hpp"

namespace gprcap {

namespace detail {

inline void check_metric_inputs(std::span<const double> actual, std::span<const double> predicted) {
  if (actual.size() != predicted.size())
    throw DimensionMismatch("metric inputs have different lengths");
  if (actual.empty()) throw EmptyInput("metric inputs are empty");
}

}  // namespace detail

/// Mean absolute error.
inline double mae(std::span<const double> actual, std::span<const double> predicted) {
  detail::check_metric_inputs(actual, predicted);
  double s = 0.0;
  for (std::size_t i = 0; i < actual.size(); ++i) s += std::abs(actual[i] - predicted[i]);
  return s / static_cast<double>(actual.size());
}

/// Maximum absolute error.
inline double me(std::span<const double> actual, std::span<const double> predicted) {
  detail::check_metric_inputs(actual, predicted);
  double m = 0.0;
  for (std::size_t i = 0; i < actual.size(); ++i) m = std::max(m, std::abs(actual[i] - predicted[i]));
  return m;
}

inline double rmse(std::span<const double> actual, std::span<const double> predicted) {
  detail::check_metric_inputs(actual, predicted);
  double s = 0.0;
  for (std::size_t i = 0; i < actual.size(); ++i) {
    const double e = actual[i] - predicted[i];
    s += e * e;
  }
  return std::sqrt(s / static_cast<double>(actual.size()));
}

struct Metrics {
  double me_ah = 0.0;
  double mae_ah = 0.0;
  double rmse_ah = 0.0;

  static Metrics of(std::span<const double> actual, std::span<const double> predicted) {
    return {me(actual, predicted), mae(actual, predicted), rmse(actual, predicted)};
  }

  bool operator==(const Metrics&) const = default;
};

}  // namespace gprcap
