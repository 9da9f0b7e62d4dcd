#pragma once

// JSON documents for kernel specs and trained models.
//
// Kernel node:
//   {"variant": "product", "children": [...]}
//   {"variant": "capacity_se", "slice": "capacity",
//    "params": {"amplitude": "l_f", "lengthscales": ["sigma_1", "sigma_2"]}}
// A leaf role maps to a hyperparameter name (string) or a fixed constant (number).
// Values and bounds of named hyperparameters travel alongside in "hyperparameters".

#include <cmath>
#include <fstream>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "gprcap/errors.hpp"
#include "gprcap/gpr.hpp"
#include "gprcap/kernels.hpp"

namespace gprcap {

using json = nlohmann::json;

namespace detail {

inline const char* variant_name(KernelVariant v) {
  switch (v) {
    case KernelVariant::SE: return "se";
    case KernelVariant::ArdSE: return "ard_se";
    case KernelVariant::ArrheniusLaplacian: return "arrhenius_laplacian";
    case KernelVariant::Polynomial: return "polynomial";
    case KernelVariant::CapacitySE: return "capacity_se";
    case KernelVariant::Product: return "product";
    case KernelVariant::Sum: return "sum";
  }
  return "?";
}

inline KernelVariant parse_variant(const std::string& s) {
  for (auto v : {KernelVariant::SE, KernelVariant::ArdSE, KernelVariant::ArrheniusLaplacian,
                 KernelVariant::Polynomial, KernelVariant::CapacitySE, KernelVariant::Product,
                 KernelVariant::Sum})
    if (s == variant_name(v)) return v;
  throw ValidationError("unknown kernel variant '" + s + "'");
}

inline const char* slice_name(FeatureSlice s) {
  switch (s) {
    case FeatureSlice::All: return "all";
    case FeatureSlice::Capacity: return "capacity";
    case FeatureSlice::Temperature: return "temperature";
    case FeatureSlice::Dod: return "dod";
  }
  return "?";
}

inline FeatureSlice parse_slice(const std::string& s) {
  for (auto v : {FeatureSlice::All, FeatureSlice::Capacity, FeatureSlice::Temperature,
                 FeatureSlice::Dod})
    if (s == slice_name(v)) return v;
  throw ValidationError("unknown feature slice '" + s + "'");
}

inline std::vector<std::string> scalar_roles(KernelVariant v) {
  switch (v) {
    case KernelVariant::SE: return {"amplitude", "lengthscale"};
    case KernelVariant::ArrheniusLaplacian: return {"amplitude", "scale"};
    case KernelVariant::Polynomial: return {"slope", "offset", "degree"};
    default: return {"amplitude"};
  }
}

inline bool per_dimension(KernelVariant v) {
  return v == KernelVariant::ArdSE || v == KernelVariant::CapacitySE;
}

inline json ref_to_json(const ParamRef& r) {
  return r.is_constant() ? json(r.constant) : json(r.name);
}

inline ParamRef ref_from_json(const json& j) {
  if (j.is_string()) return ParamRef::named(j.get<std::string>());
  if (j.is_number()) return ParamRef::fixed(j.get<double>());
  throw ValidationError("kernel parameter must be a name or a number");
}

}  // namespace detail

inline json kernel_to_json(const KernelNode& k) {
  json j;
  j["variant"] = detail::variant_name(k.variant);
  if (!k.is_leaf()) {
    j["children"] = json::array();
    for (const auto& c : k.children) j["children"].push_back(kernel_to_json(c));
    return j;
  }
  j["slice"] = detail::slice_name(k.slice);
  json p = json::object();
  const auto roles = detail::scalar_roles(k.variant);
  for (std::size_t r = 0; r < roles.size(); ++r) p[roles[r]] = detail::ref_to_json(k.params[r]);
  if (detail::per_dimension(k.variant)) {
    p["lengthscales"] = json::array();
    for (std::size_t r = 1; r < k.params.size(); ++r)
      p["lengthscales"].push_back(detail::ref_to_json(k.params[r]));
  }
  j["params"] = std::move(p);
  return j;
}

inline KernelNode kernel_from_json(const json& j) {
  try {
    KernelNode k;
    k.variant = detail::parse_variant(j.at("variant").get<std::string>());
    if (!k.is_leaf()) {
      for (const auto& c : j.at("children")) k.children.push_back(kernel_from_json(c));
    } else {
      k.slice = detail::parse_slice(j.at("slice").get<std::string>());
      const json& p = j.at("params");
      for (const auto& role : detail::scalar_roles(k.variant))
        k.params.push_back(detail::ref_from_json(p.at(role)));
      if (detail::per_dimension(k.variant))
        for (const auto& r : p.at("lengthscales")) k.params.push_back(detail::ref_from_json(r));
    }
    k.validate();
    return k;
  } catch (const json::exception& e) {
    throw ValidationError(std::string("kernel spec: ") + e.what());
  }
}

inline json params_to_json(const HyperParamSet& s) {
  json a = json::array();
  for (const auto& e : s.entries())
    a.push_back({{"name", e.name}, {"value", e.value}, {"lower", e.lower}, {"upper", e.upper}});
  return a;
}

inline HyperParamSet params_from_json(const json& a) {
  try {
    std::vector<HyperParam> v;
    for (const auto& e : a)
      v.push_back({e.at("name").get<std::string>(), e.at("value").get<double>(),
                   e.at("lower").get<double>(), e.at("upper").get<double>()});
    return HyperParamSet(std::move(v));
  } catch (const json::exception& e) {
    throw ValidationError(std::string("hyperparameters: ") + e.what());
  }
}

inline json kernel_spec_to_json(const KernelNode& k, const HyperParamSet& params) {
  return {{"kernel", kernel_to_json(k)}, {"hyperparameters", params_to_json(params)}};
}

inline std::pair<KernelNode, HyperParamSet> kernel_spec_from_json(const json& j) {
  try {
    return {kernel_from_json(j.at("kernel")), params_from_json(j.at("hyperparameters"))};
  } catch (const json::exception& e) {
    throw ValidationError(std::string("kernel spec: ") + e.what());
  }
}

// ---------------------------------------------------------------------------
// Trained models

inline constexpr double kModelNllTolerance = 1e-8;

inline json model_to_json(const TrainedModel& m, const std::string& label = {}) {
  const auto& t = m.training();
  json j;
  j["format"] = "gprcap-model";
  j["version"] = 1;
  if (!label.empty()) j["label"] = label;
  j["kernel"] = kernel_to_json(m.kernel());
  j["hyperparameters"] = params_to_json(m.params());
  j["scaling"] = {{"mean", m.scaling().mean}, {"scale", m.scaling().scale}};
  j["training"] = {{"X", t.X}, {"y", t.y}, {"y_mean", t.y_mean}, {"centered", t.centered}};
  j["nll"] = m.nll();
  return j;
}

/// Rebuilds the factor and weights, then checks them against the stored nll.
inline TrainedModel model_from_json(const json& j) {
  try {
    const auto& tj = j.at("training");
    TrainingSet t;
    t.X = tj.at("X").get<Points>();
    t.y = tj.at("y").get<Vector>();
    t.y_mean = tj.at("y_mean").get<double>();
    t.centered = tj.at("centered").get<bool>();
    InputScaling s{j.at("scaling").at("mean").get<Vector>(),
                   j.at("scaling").at("scale").get<Vector>()};
    TrainedModel m(kernel_from_json(j.at("kernel")), params_from_json(j.at("hyperparameters")),
                   std::move(t), std::move(s));
    const double stored = j.at("nll").get<double>();
    if (!(std::abs(m.nll() - stored) <= kModelNllTolerance * std::max(1.0, std::abs(stored))))
      throw ValidationError("model nll mismatch: stored " + std::to_string(stored) +
                            ", recomputed " + std::to_string(m.nll()));
    return m;
  } catch (const json::exception& e) {
    throw ValidationError(std::string("model document: ") + e.what());
  }
}

inline json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open '" + path + "'");
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw ValidationError("'" + path + "': " + e.what());
  }
}

inline void write_json_file(const std::string& path, const json& j) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write '" + path + "'");
  out << j.dump(2) << '\n';
  if (!out) throw IoError("write failed for '" + path + "'");
}

}  // namespace gprcap
