#include <gtest/gtest.h>

#include <random>

#include "support.hpp"

using namespace gprcap;

namespace {

FitConfig quick(std::uint64_t seed = 0) {
  FitConfig c;
  c.restarts = 2;
  c.max_iters = 100;
  c.seed = seed;
  return c;
}

Dataset synth(std::uint64_t seed, double noise = 0.05) {
  SynthConfig cfg;
  cfg.seed = seed;
  cfg.noise_std_ah = noise;
  return synth_matrix(cfg);
}

}  // namespace

TEST(Metrics, HandExamples) {
  const Vector y{1, 2}, yh{1, 3};
  EXPECT_EQ(mae(y, yh), 0.5);
  EXPECT_EQ(me(y, yh), 1.0);
  EXPECT_EQ(rmse(y, yh), std::sqrt(0.5));
  EXPECT_EQ(mae(y, y), 0.0);
  EXPECT_EQ(me(y, y), 0.0);
  EXPECT_EQ(rmse(y, y), 0.0);
  EXPECT_EQ(mae(Vector{0, 0, 0}, Vector{1, -1, 2}), 4.0 / 3.0);
  EXPECT_EQ(me(Vector{0, 0}, Vector{-2, 1}), 2.0);
  EXPECT_DOUBLE_EQ(rmse(Vector{1, 2, 3}, Vector{1.25, 2.25, 3.25}), 0.25);
  EXPECT_THROW(mae(Vector{}, Vector{}), EmptyInput);
  EXPECT_THROW(rmse(Vector{1}, Vector{1, 2}), DimensionMismatch);
}

TEST(Metrics, OrderingPropertiesOnRandomVectors) {
  std::mt19937_64 rng(31);
  std::uniform_int_distribution<std::size_t> len(1, 50);
  std::normal_distribution<double> g(0.0, 2.0);
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t n = len(rng);
    Vector a(n), b(n);
    for (std::size_t i = 0; i < n; ++i) {
      a[i] = g(rng);
      b[i] = g(rng);
    }
    const auto m = Metrics::of(a, b);
    ASSERT_LE(m.mae_ah, m.me_ah);
    ASSERT_LE(m.rmse_ah, m.me_ah + 1e-12);
    ASSERT_GE(m.rmse_ah, m.mae_ah - 1e-12);
  }
}

TEST(Reports, JsonRoundTripIsLossless) {
  EvalReport r{"ModelB", Phase::MultiStep, {}, {0.1, 1.0 / 3.0, 0.2}, 2, std::nullopt};
  r.per_case["5"] = {0.3, 0.1234567890123456, 0.2};
  r.per_case["6"] = {1e-17, 2.5e-3, std::nextafter(1.0, 2.0)};
  EvalReport f = r;
  f.fold = 3;
  f.phase = Phase::OneStep;
  const std::vector<EvalReport> in{r, f};
  const auto text = reports_to_json(in).dump();
  EXPECT_EQ(reports_from_json(json::parse(text)), in);
  EXPECT_THROW(reports_from_json(json::parse(R"({"reports": [{"model": "x"}]})")), ValidationError);
  EXPECT_THROW(parse_phase("later"), ValidationError);
}

TEST(ModelKinds, Parsing) {
  EXPECT_EQ(parse_model_kind("segm"), ModelKind::SEGM);
  EXPECT_EQ(parse_model_kind("a"), ModelKind::ModelA);
  EXPECT_EQ(parse_model_kind("ModelB"), ModelKind::ModelB);
  EXPECT_THROW(parse_model_kind("c"), ValidationError);
}

TEST(Folds, AssignmentSizesAndDeterminism) {
  const auto a = fold_assignment(56, 5, 7);
  EXPECT_EQ(a, fold_assignment(56, 5, 7));
  EXPECT_NE(a, fold_assignment(56, 5, 8));
  std::vector<std::size_t> sizes(5, 0);
  for (auto f : a) ++sizes[f];
  EXPECT_LE(*std::max_element(sizes.begin(), sizes.end()) -
                *std::min_element(sizes.begin(), sizes.end()),
            1u);
}

TEST(KFold, LeaveOneOutAndErrors) {
  const Dataset ds = synth(1);
  const auto pairs = build_pairs(ds.at("1"), {2});
  std::vector<TrainingPair> few(pairs.begin(), pairs.begin() + 6);
  const auto reports = kfold_cv(few, few.size(), ModelKind::ModelB, {2}, 3, quick());
  ASSERT_EQ(reports.size(), 6u);
  for (std::size_t f = 0; f < reports.size(); ++f) {
    EXPECT_EQ(reports[f].fold, f);
    EXPECT_EQ(reports[f].aggregate.me_ah, reports[f].aggregate.mae_ah);  // single pair
  }
  EXPECT_THROW(kfold_cv(few, 7, ModelKind::ModelB, {2}, 3, quick()), TooFewPairs);
  EXPECT_THROW(kfold_cv(few, 1, ModelKind::ModelB, {2}, 3, quick()), ValidationError);
}

TEST(KFold, FiveFoldsOnTrainingSplitAreReproducible) {
  const Dataset ds = synth(2);
  const auto [train, unused] = split(ds, {"1", "2", "3", "4"}, {});
  const auto pairs = build_pairs(train, {2});
  FitConfig cfg = quick();
  cfg.restarts = 1;
  const auto a = kfold_cv(pairs, 5, ModelKind::SEGM, {2}, 11, cfg);
  const auto b = kfold_cv(pairs, 5, ModelKind::SEGM, {2}, 11, cfg);
  EXPECT_EQ(a.size(), 5u);
  EXPECT_EQ(a, b);
}

TEST(EvaluateMultiStep, HorizonHandling) {
  const Dataset ds = synth(3);
  const auto [train, test] = split(ds, {"1", "4"}, {"5", "6"});
  const TrainedModel m = train_model(ModelKind::ModelB, build_pairs(train, {2}), {2}, quick());
  const auto full = evaluate_multi_step(m, "ModelB", test);
  const auto part = evaluate_multi_step(m, "ModelB", test, {{"5", 14}, {"6", 9}});
  EXPECT_EQ(full.per_case.at("5"), part.per_case.at("5"));
  EXPECT_NE(full.per_case.at("6"), part.per_case.at("6"));
  EXPECT_THROW(evaluate_multi_step(m, "ModelB", test, {{"5", 15}}), TooShort);
  EXPECT_THROW(evaluate_multi_step(m, "ModelB", test, {{"5", 0}}), ValidationError);
}

TEST(Compare, StructureAndDegenerateSplit) {
  const Dataset ds = synth(4);
  CompareOptions opts;
  opts.fit = quick();
  const auto reports = compare(ds, {"1", "2", "3", "4"}, {"5", "6"}, {{"5", 14}, {"6", 9}}, 4, opts);
  ASSERT_EQ(reports.size(), 9u);
  const std::vector<std::string> labels{"SEGM", "ModelA", "ModelB"};
  for (std::size_t i = 0; i < 9; ++i) {
    EXPECT_EQ(reports[i].model_label, labels[i / 3]);
    EXPECT_EQ(reports[i].phase, static_cast<Phase>(i % 3));
    EXPECT_EQ(reports[i].lags, 2u);
  }
  EXPECT_EQ(reports[0].per_case.size(), 4u);
  EXPECT_EQ(reports[2].per_case.size(), 2u);

  const auto single = compare(ds, {"1"}, {"2"}, {{"2", 3}}, 4, opts);
  ASSERT_EQ(single.size(), 9u);
  EXPECT_EQ(single[2].per_case.count("2"), 1u);
  EXPECT_THROW(compare(ds, {"1"}, {"1"}, {}, 4, opts), OverlappingSplit);
}

TEST(Compare, NoiseFreeTrainingCasesInterpolateOneStep) {
  // Identical train and test data: with sigma_n driven to its floor every model
  // reproduces the training targets.
  const Dataset ds = synth(5, 0.0);
  const auto [train, unused] = split(ds, {"1", "2", "3", "4"}, {});
  const auto pairs = build_pairs(train, {2});
  for (ModelKind kind : kAllModels) {
    const TrainingSet data = to_training_set(pairs);
    const InputScaling s =
        model_standardizes(kind) ? InputScaling::standardize(data.X) : InputScaling{};
    HyperParamSet p = fit(model_kernel(kind, 2), data, quick(), s).params();
    p.set_value(kNoiseParam, kNoiseLower);
    const TrainedModel m(model_kernel(kind, 2), p, data, s);
    const auto r = evaluate_one_step(m, model_label(kind), train);
    EXPECT_LT(r.aggregate.mae_ah, 1e-4) << model_label(kind);
  }
}

TEST(LagSweep, SingleLagAndTooShort) {
  const Dataset ds = synth(6);
  const auto one = lag_sweep(ds, {"1", "2", "3", "4"}, {"5", "6"}, {3}, 0, {}, quick());
  ASSERT_EQ(one.size(), 1u);
  EXPECT_EQ(one[0].lags, 3u);
  EXPECT_EQ(one[0].model_label, "ModelB");
  EXPECT_EQ(one[0].phase, Phase::MultiStep);

  Dataset tiny = ds;
  tiny.cases[4].points.resize(3);
  EXPECT_THROW(lag_sweep(tiny, {"1", "2", "3", "4"}, {"5", "6"}, {5}, 0, {}, quick()), TooShort);
  EXPECT_THROW(lag_sweep(ds, {"1"}, {"5"}, {}, 0), ValidationError);
}
