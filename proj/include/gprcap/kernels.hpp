#pragma once

// Covariance functions, their composition tree, Gram assembly and analytic
// hyperparameter / input gradients.
//
// Kernels operate on flattened input points laid out as
//   [capacity_lag_1 (oldest), ..., capacity_lag_L, temperature, dod]
// so a point of dimension D carries L = D - 2 capacity lags. FeatureVector is the
// physical-unit view of the same layout.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "gprcap/errors.hpp"
#include "gprcap/matrix.hpp"

namespace gprcap {

using Point = Vector;
using Points = std::vector<Point>;

struct FeatureVector {
  Vector capacity_lags;  // Ah, oldest first
  double temperature_k = 0.0;
  double dod = 0.0;  // fraction in (0, 1]

  std::size_t lags() const noexcept { return capacity_lags.size(); }

  void validate() const {
    if (capacity_lags.empty()) throw ValidationError("feature vector needs at least one lag");
    if (!(temperature_k > 0.0) || !std::isfinite(temperature_k))
      throw NonPositiveTemperature("temperature must be > 0 K, got " +
                                   std::to_string(temperature_k));
    if (!(dod > 0.0 && dod <= 1.0)) throw ValidationError("dod must lie in (0, 1]");
    for (double c : capacity_lags)
      if (!(c > 0.0) || !std::isfinite(c)) throw ValidationError("capacity lags must be > 0 Ah");
  }

  Point flatten() const {
    Point p(capacity_lags);
    p.push_back(temperature_k);
    p.push_back(dod);
    return p;
  }

  static FeatureVector from_point(std::span<const double> p) {
    if (p.size() < 3) throw DimensionMismatch("point needs at least one lag plus T and DOD");
    FeatureVector f;
    f.capacity_lags.assign(p.begin(), p.end() - 2);
    f.temperature_k = p[p.size() - 2];
    f.dod = p[p.size() - 1];
    return f;
  }

  bool operator==(const FeatureVector&) const = default;
};

// ---------------------------------------------------------------------------
// Hyperparameters

struct HyperParam {
  std::string name;
  double value = 1.0;
  double lower = 1e-3;
  double upper = 1e3;

  bool operator==(const HyperParam&) const = default;
};

class HyperParamSet {
 public:
  HyperParamSet() = default;
  explicit HyperParamSet(std::vector<HyperParam> entries) : entries_(std::move(entries)) {
    validate();
  }

  void validate() const {
    for (std::size_t i = 0; i < entries_.size(); ++i) {
      const auto& e = entries_[i];
      if (e.name.empty()) throw ValidationError("hyperparameter with empty name");
      if (!(e.lower > 0.0) || !(e.upper >= e.lower))
        throw ValidationError("hyperparameter '" + e.name + "' has invalid bounds");
      if (!(e.value >= e.lower && e.value <= e.upper))
        throw ValidationError("hyperparameter '" + e.name + "' = " + std::to_string(e.value) +
                              " lies outside [" + std::to_string(e.lower) + ", " +
                              std::to_string(e.upper) + "]");
      for (std::size_t j = 0; j < i; ++j)
        if (entries_[j].name == e.name)
          throw ValidationError("duplicate hyperparameter '" + e.name + "'");
    }
  }

  std::size_t size() const noexcept { return entries_.size(); }
  const std::vector<HyperParam>& entries() const noexcept { return entries_; }
  const HyperParam& operator[](std::size_t i) const { return entries_[i]; }

  std::optional<std::size_t> find(const std::string& name) const {
    for (std::size_t i = 0; i < entries_.size(); ++i)
      if (entries_[i].name == name) return i;
    return std::nullopt;
  }

  double value(const std::string& name) const {
    const auto i = find(name);
    if (!i) throw ValidationError("missing hyperparameter '" + name + "'");
    return entries_[*i].value;
  }

  void set_value(const std::string& name, double v) {
    const auto i = find(name);
    if (!i) throw ValidationError("missing hyperparameter '" + name + "'");
    entries_[*i].value = std::clamp(v, entries_[*i].lower, entries_[*i].upper);
  }

  Vector values() const {
    Vector v;
    v.reserve(entries_.size());
    for (const auto& e : entries_) v.push_back(e.value);
    return v;
  }

  Vector log_values() const {
    Vector v;
    v.reserve(entries_.size());
    for (const auto& e : entries_) v.push_back(std::log(e.value));
    return v;
  }

  /// Sets values from log coordinates, projecting onto the bounds.
  void set_log_values(std::span<const double> logs) {
    if (logs.size() != entries_.size()) throw DimensionMismatch("log-value count mismatch");
    for (std::size_t i = 0; i < logs.size(); ++i)
      entries_[i].value = std::clamp(std::exp(logs[i]), entries_[i].lower, entries_[i].upper);
  }

  void push_back(HyperParam p) {
    entries_.push_back(std::move(p));
    validate();
  }

  std::string describe() const {
    std::string s;
    for (const auto& e : entries_) {
      if (!s.empty()) s += ", ";
      s += e.name + "=" + std::to_string(e.value);
    }
    return s;
  }

  bool operator==(const HyperParamSet&) const = default;

 private:
  std::vector<HyperParam> entries_;
};

// ---------------------------------------------------------------------------
// Kernel tree

enum class KernelVariant { SE, ArdSE, ArrheniusLaplacian, Polynomial, CapacitySE, Product, Sum };

enum class FeatureSlice { All, Capacity, Temperature, Dod };

/// Binding of one leaf role: either a named hyperparameter or a fixed constant.
struct ParamRef {
  std::string name;
  double constant = 0.0;

  static ParamRef named(std::string n) { return {std::move(n), 0.0}; }
  static ParamRef fixed(double c) { return {{}, c}; }
  bool is_constant() const noexcept { return name.empty(); }

  bool operator==(const ParamRef&) const = default;
};

enum class ParamKind { Amplitude, Lengthscale, ReciprocalScale, Slope, Offset, Degree };

struct KernelNode {
  KernelVariant variant = KernelVariant::SE;
  FeatureSlice slice = FeatureSlice::All;
  // Role-ordered leaf bindings:
  //   SE:                 amplitude, lengthscale
  //   ArdSE, CapacitySE:  amplitude, lengthscale per slice dimension
  //   ArrheniusLaplacian: amplitude, scale
  //   Polynomial:         slope, offset, degree
  std::vector<ParamRef> params;
  std::vector<KernelNode> children;

  bool is_leaf() const noexcept {
    return variant != KernelVariant::Product && variant != KernelVariant::Sum;
  }

  static KernelNode leaf(KernelVariant v, FeatureSlice s, std::vector<ParamRef> p) {
    KernelNode n;
    n.variant = v;
    n.slice = s;
    n.params = std::move(p);
    n.validate();
    return n;
  }

  static KernelNode product(std::vector<KernelNode> c) {
    KernelNode n;
    n.variant = KernelVariant::Product;
    n.children = std::move(c);
    n.validate();
    return n;
  }

  static KernelNode sum(std::vector<KernelNode> c) {
    KernelNode n;
    n.variant = KernelVariant::Sum;
    n.children = std::move(c);
    n.validate();
    return n;
  }

  void validate() const {
    if (is_leaf()) {
      if (!children.empty()) throw ValidationError("kernel leaf must not have children");
      const std::size_t fixed_arity = variant == KernelVariant::Polynomial ? 3 : 2;
      const bool per_dim = variant == KernelVariant::ArdSE || variant == KernelVariant::CapacitySE;
      if (per_dim ? params.size() < 2 : params.size() != fixed_arity)
        throw ValidationError("kernel leaf has wrong parameter count");
      for (const auto& p : params)
        if (p.is_constant() && !(p.constant > 0.0))
          throw ValidationError("kernel constants must be positive");
    } else {
      if (children.size() < 2) throw ValidationError("product/sum needs at least two children");
      if (!params.empty()) throw ValidationError("product/sum carries no parameters");
      for (const auto& c : children) c.validate();
    }
  }

  /// Unique hyperparameter names in depth-first order of first appearance.
  std::vector<std::string> declared_params() const {
    std::vector<std::string> out;
    collect(out);
    return out;
  }

  /// Kind of every declared hyperparameter, aligned with declared_params().
  std::vector<ParamKind> declared_kinds() const {
    std::vector<std::string> names;
    std::vector<ParamKind> kinds;
    collect_kinds(names, kinds);
    return kinds;
  }

  bool operator==(const KernelNode&) const = default;

 private:
  void collect(std::vector<std::string>& out) const {
    for (const auto& p : params)
      if (!p.is_constant() && std::find(out.begin(), out.end(), p.name) == out.end())
        out.push_back(p.name);
    for (const auto& c : children) c.collect(out);
  }

  void collect_kinds(std::vector<std::string>& names, std::vector<ParamKind>& kinds) const {
    for (std::size_t r = 0; r < params.size(); ++r) {
      const auto& p = params[r];
      if (p.is_constant() || std::find(names.begin(), names.end(), p.name) != names.end())
        continue;
      names.push_back(p.name);
      kinds.push_back(role_kind(r));
    }
    for (const auto& c : children) c.collect_kinds(names, kinds);
  }

  ParamKind role_kind(std::size_t role) const {
    switch (variant) {
      case KernelVariant::Polynomial:
        return role == 0 ? ParamKind::Slope : role == 1 ? ParamKind::Offset : ParamKind::Degree;
      case KernelVariant::ArrheniusLaplacian:
        return role == 0 ? ParamKind::Amplitude : ParamKind::ReciprocalScale;
      default:
        return role == 0 ? ParamKind::Amplitude : ParamKind::Lengthscale;
    }
  }
};

inline std::pair<std::size_t, std::size_t> slice_range(FeatureSlice s, std::size_t dim) {
  if (s != FeatureSlice::All && dim < 3)
    throw DimensionMismatch("points need at least one lag plus T and DOD");
  switch (s) {
    case FeatureSlice::Capacity: return {0, dim - 2};
    case FeatureSlice::Temperature: return {dim - 2, dim - 1};
    case FeatureSlice::Dod: return {dim - 1, dim};
    case FeatureSlice::All: break;
  }
  return {0, dim};
}

// ---------------------------------------------------------------------------
// Base covariance functions

inline double eval_se(std::span<const double> x, std::span<const double> x2, double sigma_f,
                      double sigma_l) {
  if (x.size() != x2.size()) throw DimensionMismatch("eval_se input dimensions disagree");
  double r2 = 0.0;
  for (std::size_t d = 0; d < x.size(); ++d) r2 += (x[d] - x2[d]) * (x[d] - x2[d]);
  return sigma_f * sigma_f * std::exp(-r2 / (2.0 * sigma_l * sigma_l));
}

namespace detail {

inline double ard_exponent(std::span<const double> x, std::span<const double> x2,
                           std::span<const double> lengthscales) {
  if (x.size() != x2.size() || x.size() != lengthscales.size())
    throw DimensionMismatch("ARD input/lengthscale dimensions disagree");
  double s = 0.0;
  for (std::size_t d = 0; d < x.size(); ++d) {
    const double diff = x[d] - x2[d];
    s += diff * diff / (lengthscales[d] * lengthscales[d]);
  }
  return s;
}

}  // namespace detail

inline double eval_ard_se(std::span<const double> x, std::span<const double> x2, double sigma_f,
                          std::span<const double> lengthscales) {
  return sigma_f * sigma_f * std::exp(-0.5 * detail::ard_exponent(x, x2, lengthscales));
}

inline double eval_ard_se(const FeatureVector& x, const FeatureVector& x2, double sigma_f,
                          std::span<const double> lengthscales) {
  return eval_ard_se(x.flatten(), x2.flatten(), sigma_f, lengthscales);
}

inline double eval_arrhenius(double tK, double tK2, double l_T, double sigma_T) {
  if (!(tK > 0.0) || !(tK2 > 0.0))
    throw NonPositiveTemperature("Arrhenius kernel needs temperatures > 0 K");
  return l_T * std::exp(-std::abs(1.0 / tK - 1.0 / tK2) / sigma_T);
}

inline double eval_poly(double d, double d2, double l_D, double c_D, double deg) {
  const double base = l_D * d * d2 + c_D;
  if (!(base > 0.0)) throw NonPositiveBase("polynomial kernel base must be > 0");
  return std::pow(base, deg);
}

inline double eval_capacity_se(std::span<const double> lags, std::span<const double> lags2,
                               double l_c, std::span<const double> lengthscales) {
  return l_c * l_c * std::exp(-0.5 * detail::ard_exponent(lags, lags2, lengthscales));
}

/// Isotropic SE over the concatenated (standardized) feature vector.
inline double eval_segm(const FeatureVector& x, const FeatureVector& x2, double sigma_f,
                        double sigma_l) {
  return eval_se(x.flatten(), x2.flatten(), sigma_f, sigma_l);
}

inline std::string lag_param_name(std::size_t i) { return "sigma_" + std::to_string(i + 1); }

/// Capacity-SE x Arrhenius x polynomial with l_T = l_D = 1.
inline double eval_model_b(const FeatureVector& x, const FeatureVector& x2,
                           const HyperParamSet& params) {
  if (x.lags() != x2.lags()) throw DimensionMismatch("Model B lag counts disagree");
  Vector ls(x.lags());
  for (std::size_t i = 0; i < ls.size(); ++i) ls[i] = params.value(lag_param_name(i));
  const double kc = eval_capacity_se(x.capacity_lags, x2.capacity_lags, params.value("l_f"), ls);
  const double kt = eval_arrhenius(x.temperature_k, x2.temperature_k, 1.0, params.value("sigma_T"));
  const double kd = eval_poly(x.dod, x2.dod, 1.0, params.value("c_D"), params.value("d_D"));
  return kc * kt * kd;
}

// ---------------------------------------------------------------------------
// Standard compositions

inline KernelNode segm_kernel() {
  return KernelNode::leaf(KernelVariant::SE, FeatureSlice::All,
                          {ParamRef::named("sigma_f"), ParamRef::named("sigma_l")});
}

inline KernelNode model_a_kernel(std::size_t lags) {
  std::vector<ParamRef> p{ParamRef::named("sigma_f")};
  for (std::size_t i = 0; i < lags; ++i) p.push_back(ParamRef::named(lag_param_name(i)));
  p.push_back(ParamRef::named("sigma_T"));
  p.push_back(ParamRef::named("sigma_DOD"));
  return KernelNode::leaf(KernelVariant::ArdSE, FeatureSlice::All, std::move(p));
}

inline KernelNode model_b_kernel(std::size_t lags) {
  std::vector<ParamRef> cap{ParamRef::named("l_f")};
  for (std::size_t i = 0; i < lags; ++i) cap.push_back(ParamRef::named(lag_param_name(i)));
  return KernelNode::product({
      KernelNode::leaf(KernelVariant::CapacitySE, FeatureSlice::Capacity, std::move(cap)),
      KernelNode::leaf(KernelVariant::ArrheniusLaplacian, FeatureSlice::Temperature,
                       {ParamRef::fixed(1.0), ParamRef::named("sigma_T")}),
      KernelNode::leaf(KernelVariant::Polynomial, FeatureSlice::Dod,
                       {ParamRef::fixed(1.0), ParamRef::named("c_D"), ParamRef::named("d_D")}),
  });
}

// ---------------------------------------------------------------------------
// Bound evaluation

/// A kernel tree resolved against a HyperParamSet for points of a fixed dimension.
/// Gradients are with respect to log hyperparameters, indexed like the set.
class BoundKernel {
 public:
  BoundKernel(const KernelNode& kernel, const HyperParamSet& params, std::size_t dim)
      : values_(params.values()), dim_(dim) {
    kernel.validate();
    root_ = compile(kernel, params);
  }

  std::size_t dim() const noexcept { return dim_; }
  std::size_t param_count() const noexcept { return values_.size(); }

  double operator()(std::span<const double> x, std::span<const double> y) const {
    check(x, y);
    return eval(root_, x, y);
  }

  /// Adds mult * dk/dlog(theta_j) into grad[j]; returns k(x, y).
  double accumulate_grad(std::span<const double> x, std::span<const double> y, double mult,
                         std::span<double> grad) const {
    check(x, y);
    if (grad.size() != values_.size()) throw DimensionMismatch("gradient buffer size mismatch");
    return grad_node(root_, x, y, mult, grad);
  }

  /// Adds mult * dk(x, y)/dx_d into gx[d]; returns k(x, y).
  double accumulate_input_grad(std::span<const double> x, std::span<const double> y, double mult,
                               std::span<double> gx) const {
    check(x, y);
    if (gx.size() != dim_) throw DimensionMismatch("input gradient buffer size mismatch");
    return input_grad_node(root_, x, y, mult, gx);
  }

 private:
  struct Node {
    KernelVariant variant;
    std::size_t begin = 0, end = 0;
    std::vector<long> index;  // -1 marks a constant role
    Vector constant;
    std::vector<Node> children;
  };

  Node compile(const KernelNode& k, const HyperParamSet& params) const {
    Node n;
    n.variant = k.variant;
    if (k.is_leaf()) {
      std::tie(n.begin, n.end) = slice_range(k.slice, dim_);
      const std::size_t width = n.end - n.begin;
      const bool per_dim = k.variant == KernelVariant::ArdSE || k.variant == KernelVariant::CapacitySE;
      if (per_dim && k.params.size() != width + 1)
        throw DimensionMismatch("ARD leaf needs one lengthscale per slice dimension (" +
                                std::to_string(width) + "), got " +
                                std::to_string(k.params.size() - 1));
      if (k.variant == KernelVariant::ArrheniusLaplacian && width != 1)
        throw DimensionMismatch("Arrhenius leaf must consume a scalar temperature slice");
      for (const auto& p : k.params) {
        if (p.is_constant()) {
          n.index.push_back(-1);
          n.constant.push_back(p.constant);
        } else {
          const auto i = params.find(p.name);
          if (!i) throw ValidationError("kernel parameter '" + p.name + "' missing from set");
          n.index.push_back(static_cast<long>(*i));
          n.constant.push_back(0.0);
        }
      }
    } else {
      for (const auto& c : k.children) n.children.push_back(compile(c, params));
    }
    return n;
  }

  void check(std::span<const double> x, std::span<const double> y) const {
    if (x.size() != dim_ || y.size() != dim_)
      throw DimensionMismatch("kernel input dimension " + std::to_string(x.size()) + "/" +
                              std::to_string(y.size()) + ", expected " + std::to_string(dim_));
  }

  double param(const Node& n, std::size_t role) const {
    return n.index[role] < 0 ? n.constant[role] : values_[static_cast<std::size_t>(n.index[role])];
  }

  static void add(std::span<double> grad, const Node& n, std::size_t role, double v) {
    if (n.index[role] >= 0) grad[static_cast<std::size_t>(n.index[role])] += v;
  }

  double eval(const Node& n, std::span<const double> x, std::span<const double> y) const {
    switch (n.variant) {
      case KernelVariant::Product: {
        double p = 1.0;
        for (const auto& c : n.children) p *= eval(c, x, y);
        return p;
      }
      case KernelVariant::Sum: {
        double s = 0.0;
        for (const auto& c : n.children) s += eval(c, x, y);
        return s;
      }
      case KernelVariant::SE: {
        const double a = param(n, 0), l = param(n, 1);
        double r2 = 0.0;
        for (std::size_t d = n.begin; d < n.end; ++d) r2 += (x[d] - y[d]) * (x[d] - y[d]);
        return a * a * std::exp(-r2 / (2.0 * l * l));
      }
      case KernelVariant::ArdSE:
      case KernelVariant::CapacitySE: {
        const double a = param(n, 0);
        double s = 0.0;
        for (std::size_t d = n.begin; d < n.end; ++d) {
          const double l = param(n, 1 + d - n.begin);
          s += (x[d] - y[d]) * (x[d] - y[d]) / (l * l);
        }
        return a * a * std::exp(-0.5 * s);
      }
      case KernelVariant::ArrheniusLaplacian: {
        const double r = reciprocal_distance(n, x, y);
        return param(n, 0) * std::exp(-r / param(n, 1));
      }
      case KernelVariant::Polynomial: return std::pow(poly_base(n, x, y), param(n, 2));
    }
    return 0.0;
  }

  double reciprocal_distance(const Node& n, std::span<const double> x,
                             std::span<const double> y) const {
    double u = 0.0;
    for (std::size_t d = n.begin; d < n.end; ++d) {
      if (!(x[d] > 0.0) || !(y[d] > 0.0))
        throw NonPositiveTemperature("Arrhenius kernel needs temperatures > 0 K");
      const double diff = 1.0 / x[d] - 1.0 / y[d];
      u += diff * diff;
    }
    return std::sqrt(u);
  }

  double poly_base(const Node& n, std::span<const double> x, std::span<const double> y) const {
    double t = 0.0;
    for (std::size_t d = n.begin; d < n.end; ++d) t += x[d] * y[d];
    const double base = param(n, 0) * t + param(n, 1);
    if (!(base > 0.0)) throw NonPositiveBase("polynomial kernel base must be > 0");
    return base;
  }

  // Products distribute the multiplier as mult * prod_{j != i} k_j to child i and
  // hand each child its already computed value.
  template <typename Leaf>
  double combine(const Node& n, std::span<const double> x, std::span<const double> y, double mult,
                 Leaf&& leaf) const {
    if (n.variant == KernelVariant::Sum) {
      double s = 0.0;
      for (const auto& c : n.children) s += leaf(c, mult, nullptr);
      return s;
    }
    Vector v(n.children.size());
    for (std::size_t i = 0; i < v.size(); ++i) v[i] = eval(n.children[i], x, y);
    double p = 1.0;
    for (std::size_t i = 0; i < v.size(); ++i) {
      double others = mult;
      for (std::size_t j = 0; j < v.size(); ++j)
        if (j != i) others *= v[j];
      leaf(n.children[i], others, &v[i]);
      p *= v[i];
    }
    return p;
  }

  double grad_node(const Node& n, std::span<const double> x, std::span<const double> y,
                   double mult, std::span<double> grad, const double* known = nullptr) const {
    switch (n.variant) {
      case KernelVariant::Product:
      case KernelVariant::Sum:
        return combine(n, x, y, mult, [&](const Node& c, double m, const double* kv) {
          return grad_node(c, x, y, m, grad, kv);
        });
      case KernelVariant::SE: {
        const double l = param(n, 1);
        double r2 = 0.0;
        for (std::size_t d = n.begin; d < n.end; ++d) r2 += (x[d] - y[d]) * (x[d] - y[d]);
        const double k = known ? *known : eval(n, x, y);
        add(grad, n, 0, mult * 2.0 * k);
        add(grad, n, 1, mult * k * r2 / (l * l));
        return k;
      }
      case KernelVariant::ArdSE:
      case KernelVariant::CapacitySE: {
        const double k = known ? *known : eval(n, x, y);
        add(grad, n, 0, mult * 2.0 * k);
        for (std::size_t d = n.begin; d < n.end; ++d) {
          const std::size_t role = 1 + d - n.begin;
          const double l = param(n, role);
          const double diff = x[d] - y[d];
          add(grad, n, role, mult * k * diff * diff / (l * l));
        }
        return k;
      }
      case KernelVariant::ArrheniusLaplacian: {
        const double r = reciprocal_distance(n, x, y);
        const double s = param(n, 1);
        const double k = known ? *known : param(n, 0) * std::exp(-r / s);
        add(grad, n, 0, mult * k);
        add(grad, n, 1, mult * k * r / s);
        return k;
      }
      case KernelVariant::Polynomial: {
        const double base = poly_base(n, x, y);
        const double offset = param(n, 1), deg = param(n, 2);
        const double k = known ? *known : std::pow(base, deg);
        const double dk_dbase = deg * k / base;
        add(grad, n, 0, mult * dk_dbase * (base - offset));  // slope * t
        add(grad, n, 1, mult * dk_dbase * offset);
        add(grad, n, 2, mult * k * std::log(base) * deg);
        return k;
      }
    }
    return 0.0;
  }

  double input_grad_node(const Node& n, std::span<const double> x, std::span<const double> y,
                         double mult, std::span<double> gx, const double* known = nullptr) const {
    switch (n.variant) {
      case KernelVariant::Product:
      case KernelVariant::Sum:
        return combine(n, x, y, mult, [&](const Node& c, double m, const double* kv) {
          return input_grad_node(c, x, y, m, gx, kv);
        });
      case KernelVariant::SE: {
        const double l = param(n, 1);
        const double k = known ? *known : eval(n, x, y);
        for (std::size_t d = n.begin; d < n.end; ++d) gx[d] -= mult * k * (x[d] - y[d]) / (l * l);
        return k;
      }
      case KernelVariant::ArdSE:
      case KernelVariant::CapacitySE: {
        const double k = known ? *known : eval(n, x, y);
        for (std::size_t d = n.begin; d < n.end; ++d) {
          const double l = param(n, 1 + d - n.begin);
          gx[d] -= mult * k * (x[d] - y[d]) / (l * l);
        }
        return k;
      }
      case KernelVariant::ArrheniusLaplacian: {
        const double r = reciprocal_distance(n, x, y);
        const double s = param(n, 1);
        const double k = known ? *known : param(n, 0) * std::exp(-r / s);
        if (r > 0.0)
          for (std::size_t d = n.begin; d < n.end; ++d) {
            const double dr_dx = (1.0 / x[d] - 1.0 / y[d]) / r * (-1.0 / (x[d] * x[d]));
            gx[d] -= mult * k / s * dr_dx;
          }
        return k;
      }
      case KernelVariant::Polynomial: {
        const double base = poly_base(n, x, y);
        const double deg = param(n, 2);
        const double k = known ? *known : std::pow(base, deg);
        const double dk_dbase = deg * k / base;
        for (std::size_t d = n.begin; d < n.end; ++d) gx[d] += mult * dk_dbase * param(n, 0) * y[d];
        return k;
      }
    }
    return 0.0;
  }

  Vector values_;
  std::size_t dim_;
  Node root_;
};

inline std::size_t common_dim(const Points& X) {
  if (X.empty()) throw EmptyInput("empty point list");
  const std::size_t d = X.front().size();
  for (const auto& p : X)
    if (p.size() != d) throw DimensionMismatch("points of differing dimension");
  return d;
}

inline Matrix gram(const BoundKernel& k, const Points& X, const Points& X2) {
  Matrix g(X.size(), X2.size());
  if (&X == &X2) {
    for (std::size_t i = 0; i < X.size(); ++i)
      for (std::size_t j = i; j < X.size(); ++j) g(i, j) = g(j, i) = k(X[i], X[j]);
    return g;
  }
  for (std::size_t i = 0; i < X.size(); ++i)
    for (std::size_t j = 0; j < X2.size(); ++j) g(i, j) = k(X[i], X2[j]);
  return g;
}

inline Matrix gram(const KernelNode& kernel, const HyperParamSet& params, const Points& X,
                   const Points& X2) {
  const std::size_t d = common_dim(X);
  if (common_dim(X2) != d) throw DimensionMismatch("gram inputs of differing dimension");
  return gram(BoundKernel(kernel, params, d), X, X2);
}

inline Points flatten_all(const std::vector<FeatureVector>& xs) {
  Points out;
  out.reserve(xs.size());
  for (const auto& f : xs) {
    f.validate();
    out.push_back(f.flatten());
  }
  return out;
}

inline Matrix gram(const KernelNode& kernel, const HyperParamSet& params,
                   const std::vector<FeatureVector>& X, const std::vector<FeatureVector>& X2) {
  return gram(kernel, params, flatten_all(X), flatten_all(X2));
}

/// One symmetric n x n matrix dK/dlog(theta_j) per hyperparameter, in set order.
inline std::vector<Matrix> grad_hyper(const KernelNode& kernel, const HyperParamSet& params,
                                      const Points& X) {
  const std::size_t n = X.size();
  const BoundKernel k(kernel, params, common_dim(X));
  std::vector<Matrix> out(params.size(), Matrix(n, n));
  Vector g(params.size());
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i; j < n; ++j) {
      std::fill(g.begin(), g.end(), 0.0);
      k.accumulate_grad(X[i], X[j], 1.0, g);
      for (std::size_t p = 0; p < g.size(); ++p) {
        out[p](i, j) = g[p];
        out[p](j, i) = g[p];
      }
    }
  return out;
}

}  // namespace gprcap
