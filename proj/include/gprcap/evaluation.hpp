#pragma once

// Model variants, evaluation reports, k-fold cross-validation, the three-model
// comparison harness and the lag-count sweep.

#include <algorithm>
#include <cstdint>
#include <map>
#include <numeric>
#include <optional>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "gprcap/dataset.hpp"
#include "gprcap/errors.hpp"
#include "gprcap/forecaster.hpp"
#include "gprcap/gpr.hpp"
#include "gprcap/kernels.hpp"
#include "gprcap/metrics.hpp"

namespace gprcap {

enum class ModelKind { SEGM, ModelA, ModelB };

inline constexpr ModelKind kAllModels[] = {ModelKind::SEGM, ModelKind::ModelA, ModelKind::ModelB};

inline std::string model_label(ModelKind k) {
  switch (k) {
    case ModelKind::SEGM: return "SEGM";
    case ModelKind::ModelA: return "ModelA";
    case ModelKind::ModelB: return "ModelB";
  }
  return "?";
}

/// Accepts the CLI spellings (segm, a, b) and the report labels.
inline ModelKind parse_model_kind(const std::string& s) {
  if (s == "segm" || s == "SEGM") return ModelKind::SEGM;
  if (s == "a" || s == "ModelA") return ModelKind::ModelA;
  if (s == "b" || s == "ModelB") return ModelKind::ModelB;
  throw ValidationError("unknown model '" + s + "' (expected segm, a or b)");
}

inline KernelNode model_kernel(ModelKind k, std::size_t lags) {
  switch (k) {
    case ModelKind::SEGM: return segm_kernel();
    case ModelKind::ModelA: return model_a_kernel(lags);
    case ModelKind::ModelB: return model_b_kernel(lags);
  }
  throw ValidationError("unknown model kind");
}

/// SEGM and Model A see standardized inputs; Model B sees physical units.
inline bool model_standardizes(ModelKind k) { return k != ModelKind::ModelB; }

inline TrainedModel train_model(ModelKind kind, const std::vector<TrainingPair>& pairs,
                                const LagConfig& lags, const FitConfig& cfg) {
  lags.validate();
  const TrainingSet data = to_training_set(pairs);
  const InputScaling scaling =
      model_standardizes(kind) ? InputScaling::standardize(data.X) : InputScaling{};
  return fit(model_kernel(kind, lags.lags), data, cfg, scaling);
}

// ---------------------------------------------------------------------------
// Reports

enum class Phase { Train, OneStep, MultiStep };

inline std::string phase_name(Phase p) {
  switch (p) {
    case Phase::Train: return "train";
    case Phase::OneStep: return "one_step";
    case Phase::MultiStep: return "multi_step";
  }
  return "?";
}

inline Phase parse_phase(const std::string& s) {
  for (auto p : {Phase::Train, Phase::OneStep, Phase::MultiStep})
    if (s == phase_name(p)) return p;
  throw ValidationError("unknown phase '" + s + "'");
}

struct EvalReport {
  std::string model_label;
  Phase phase = Phase::Train;
  std::map<std::string, Metrics> per_case;
  Metrics aggregate;
  std::size_t lags = 2;
  std::optional<std::size_t> fold;

  bool operator==(const EvalReport&) const = default;
};

namespace detail {

// Accumulates (actual, predicted) pairs per case plus the pooled set.
struct ErrorPool {
  std::map<std::string, std::pair<Vector, Vector>> by_case;
  Vector actual, predicted;

  void add(const std::string& id, double a, double p) {
    by_case[id].first.push_back(a);
    by_case[id].second.push_back(p);
    actual.push_back(a);
    predicted.push_back(p);
  }

  EvalReport report(std::string label, Phase phase, std::size_t lags) const {
    EvalReport r;
    r.model_label = std::move(label);
    r.phase = phase;
    r.lags = lags;
    for (const auto& [id, v] : by_case) r.per_case[id] = Metrics::of(v.first, v.second);
    r.aggregate = Metrics::of(actual, predicted);
    return r;
  }
};

}  // namespace detail

inline void to_json(nlohmann::json& j, const Metrics& m) {
  j = {{"me_ah", m.me_ah}, {"mae_ah", m.mae_ah}, {"rmse_ah", m.rmse_ah}};
}

inline void from_json(const nlohmann::json& j, Metrics& m) {
  m.me_ah = j.at("me_ah").get<double>();
  m.mae_ah = j.at("mae_ah").get<double>();
  m.rmse_ah = j.at("rmse_ah").get<double>();
}

inline void to_json(nlohmann::json& j, const EvalReport& r) {
  j = {{"model", r.model_label}, {"phase", phase_name(r.phase)}, {"lags", r.lags},
       {"per_case", r.per_case}, {"aggregate", r.aggregate}};
  if (r.fold) j["fold"] = *r.fold;
}

inline void from_json(const nlohmann::json& j, EvalReport& r) {
  r.model_label = j.at("model").get<std::string>();
  r.phase = parse_phase(j.at("phase").get<std::string>());
  r.lags = j.at("lags").get<std::size_t>();
  r.per_case = j.at("per_case").get<std::map<std::string, Metrics>>();
  r.aggregate = j.at("aggregate").get<Metrics>();
  r.fold = j.contains("fold") ? std::optional<std::size_t>(j.at("fold").get<std::size_t>())
                              : std::nullopt;
}

inline nlohmann::json reports_to_json(const std::vector<EvalReport>& reports) {
  return {{"reports", reports}};
}

inline std::vector<EvalReport> reports_from_json(const nlohmann::json& j) {
  try {
    return j.at("reports").get<std::vector<EvalReport>>();
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("report document: ") + e.what());
  }
}

// ---------------------------------------------------------------------------
// Per-phase evaluation

inline EvalReport evaluate_train(const TrainedModel& model, const std::string& label,
                                 const std::vector<TrainingPair>& pairs) {
  Points X;
  for (const auto& p : pairs) X.push_back(p.features.flatten());
  const Prediction pred = predict(model, X);
  detail::ErrorPool pool;
  for (std::size_t i = 0; i < pairs.size(); ++i)
    pool.add(pairs[i].case_id, pairs[i].target, pred.mean[i]);
  return pool.report(label, Phase::Train, model_lags(model));
}

/// One-step predictions from measured lags over every window of each case.
inline EvalReport evaluate_one_step(const TrainedModel& model, const std::string& label,
                                    const Dataset& cases) {
  const LagConfig lc{model_lags(model)};
  detail::ErrorPool pool;
  for (const auto& c : cases.cases)
    for (const auto& p : build_pairs(c, lc)) {
      const auto fp = one_step(model, p.features.capacity_lags, c.temperature_c, c.dod_pct);
      pool.add(c.case_id, p.target, fp.mean);
    }
  auto r = pool.report(label, Phase::OneStep, lc.lags);
  return r;
}

inline std::size_t available_horizon(const CyclicCase& c, std::size_t lags) {
  if (c.points.size() <= lags)
    throw TooShort("case '" + c.case_id + "' has " + std::to_string(c.points.size()) +
                   " points, needs more than " + std::to_string(lags));
  return c.points.size() - lags;
}

/// Seeds each case with its first `lags` capacities and forecasts `horizons[id]`
/// steps (all remaining points when absent).
inline EvalReport evaluate_multi_step(const TrainedModel& model, const std::string& label,
                                      const Dataset& cases,
                                      const std::map<std::string, std::size_t>& horizons = {}) {
  const std::size_t L = model_lags(model);
  detail::ErrorPool pool;
  for (const auto& c : cases.cases) {
    const std::size_t avail = available_horizon(c, L);
    const auto it = horizons.find(c.case_id);
    const std::size_t h = it == horizons.end() ? avail : it->second;
    if (h < 1) throw ValidationError("horizon for case '" + c.case_id + "' must be >= 1");
    if (h > avail)
      throw TooShort("case '" + c.case_id + "' supports a horizon of " + std::to_string(avail) +
                     " steps, requested " + std::to_string(h));
    const Vector caps = c.capacities();
    const auto fc = multi_step(model, std::span<const double>(caps.data(), L), c.temperature_c,
                               c.dod_pct, h);
    for (std::size_t s = 0; s < h; ++s) pool.add(c.case_id, caps[L + s], fc[s].mean);
  }
  return pool.report(label, Phase::MultiStep, L);
}

// ---------------------------------------------------------------------------
// Cross-validation

/// Seeded Fisher-Yates shuffle, then index i goes to fold i mod k.
inline std::vector<std::size_t> fold_assignment(std::size_t n, std::size_t k, std::uint64_t seed) {
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::mt19937_64 rng(seed);
  for (std::size_t i = n; i > 1; --i) {
    std::uniform_int_distribution<std::size_t> pick(0, i - 1);
    std::swap(order[i - 1], order[pick(rng)]);
  }
  std::vector<std::size_t> fold(n);
  for (std::size_t i = 0; i < n; ++i) fold[order[i]] = i % k;
  return fold;
}

inline std::vector<EvalReport> kfold_cv(const std::vector<TrainingPair>& pairs, std::size_t k,
                                        ModelKind kind, const LagConfig& lags, std::uint64_t seed,
                                        FitConfig cfg = {}) {
  if (k < 2) throw ValidationError("kfold_cv needs k >= 2");
  if (pairs.size() < k)
    throw TooFewPairs(std::to_string(pairs.size()) + " pairs cannot fill " + std::to_string(k) +
                      " folds");
  cfg.seed = seed;
  const auto fold = fold_assignment(pairs.size(), k, seed);
  std::vector<EvalReport> out;
  for (std::size_t f = 0; f < k; ++f) {
    std::vector<TrainingPair> train, held;
    for (std::size_t i = 0; i < pairs.size(); ++i) (fold[i] == f ? held : train).push_back(pairs[i]);
    if (train.size() < 2) throw TooFewPairs("fold leaves fewer than two training pairs");
    const TrainedModel m = train_model(kind, train, lags, cfg);
    Points X;
    for (const auto& p : held) X.push_back(p.features.flatten());
    const Prediction pred = predict(m, X);
    detail::ErrorPool pool;
    for (std::size_t i = 0; i < held.size(); ++i) pool.add(held[i].case_id, held[i].target, pred.mean[i]);
    auto r = pool.report(model_label(kind), Phase::OneStep, lags.lags);
    r.fold = f;
    out.push_back(std::move(r));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Comparison harness

struct CompareOptions {
  std::size_t lags = 2;
  FitConfig fit;
  std::vector<ModelKind> models{std::begin(kAllModels), std::end(kAllModels)};
};

/// For each model: fit on the pooled training cases, then train / one-step /
/// multi-step reports, in that order.
inline std::vector<EvalReport> compare(const Dataset& ds, const std::vector<std::string>& train_ids,
                                       const std::vector<std::string>& test_ids,
                                       const std::map<std::string, std::size_t>& horizons,
                                       std::uint64_t seed, CompareOptions opts = {}) {
  const auto [train, test] = split(ds, train_ids, test_ids);
  const LagConfig lc{opts.lags};
  const auto pairs = build_pairs(train, lc);
  opts.fit.seed = seed;
  std::vector<EvalReport> out;
  for (ModelKind kind : opts.models) {
    const TrainedModel m = train_model(kind, pairs, lc, opts.fit);
    const std::string label = model_label(kind);
    out.push_back(evaluate_train(m, label, pairs));
    out.push_back(evaluate_one_step(m, label, test));
    out.push_back(evaluate_multi_step(m, label, test, horizons));
  }
  return out;
}

/// Model B multi-step reports, one per lag count.
inline std::vector<EvalReport> lag_sweep(const Dataset& ds, const std::vector<std::string>& train_ids,
                                         const std::vector<std::string>& test_ids,
                                         const std::vector<std::size_t>& lags_range,
                                         std::uint64_t seed,
                                         const std::map<std::string, std::size_t>& horizons = {},
                                         FitConfig cfg = {}) {
  if (lags_range.empty()) throw ValidationError("lag sweep needs at least one lag count");
  const auto [train, test] = split(ds, train_ids, test_ids);
  const std::size_t max_lag = *std::max_element(lags_range.begin(), lags_range.end());
  for (const auto* part : {&train, &test})
    for (const auto& c : part->cases) available_horizon(c, max_lag);
  cfg.seed = seed;
  std::vector<EvalReport> out;
  for (std::size_t lags : lags_range) {
    const LagConfig lc{lags};
    const TrainedModel m = train_model(ModelKind::ModelB, build_pairs(train, lc), lc, cfg);
    out.push_back(evaluate_multi_step(m, model_label(ModelKind::ModelB), test, horizons));
  }
  return out;
}

}  // namespace gprcap
