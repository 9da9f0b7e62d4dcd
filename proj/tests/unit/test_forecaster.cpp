#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <sstream>

#include "support.hpp"

using namespace gprcap;

namespace {

CyclicCase make_case(const std::string& id, const Vector& caps, double tC = 35.0,
                     double dod = 80.0) {
  CyclicCase c{id, tC, dod, {}};
  for (std::size_t i = 0; i < caps.size(); ++i)
    c.points.push_back({100.0 * static_cast<double>(i), caps[i], std::nullopt});
  return c;
}

Dataset synth(std::uint64_t seed, double noise = 0.05) {
  SynthConfig cfg;
  cfg.seed = seed;
  cfg.noise_std_ah = noise;
  return synth_matrix(cfg);
}

const CyclicCase& case5(const Dataset& ds) { return ds.at("5"); }

// Fixed (not fitted) Model B on pooled training cases 1-4.
TrainedModel fixed_model_b(const Dataset& ds, double sn = 0.05) {
  const auto [train, unused] = split(ds, {"1", "2", "3", "4"}, {});
  const auto pairs = build_pairs(train, {2});
  return TrainedModel(model_b_kernel(2), oracle::model_b_params(2, 2.0, 1.5, 0.05, 1.0, 1.0, sn),
                      to_training_set(pairs));
}

}  // namespace

TEST(BuildPairs, SingleWindow) {
  const auto c = make_case("x", {21, 20, 19}, 35.0, 80.0);
  const auto pairs = build_pairs(c, {2});
  ASSERT_EQ(pairs.size(), 1u);
  EXPECT_EQ(pairs[0].features.capacity_lags, (Vector{21, 20}));
  EXPECT_EQ(pairs[0].features.temperature_k, 308.15);
  EXPECT_EQ(pairs[0].features.dod, 0.8);
  EXPECT_EQ(pairs[0].target, 19.0);
  EXPECT_EQ(pairs[0].cycle_index, 200.0);
  EXPECT_EQ(pairs[0].case_id, "x");
}

TEST(BuildPairs, CountsAndTooShort) {
  Vector caps(14);
  for (std::size_t i = 0; i < caps.size(); ++i) caps[i] = 21.0 - 0.1 * static_cast<double>(i);
  EXPECT_EQ(build_pairs(make_case("a", caps), {2}).size(), 12u);
  EXPECT_THROW(build_pairs(make_case("b", {21, 20}), {2}), TooShort);
  EXPECT_THROW(build_pairs(make_case("c", {21, 20, 19}), {0}), ValidationError);
}

TEST(BuildPairs, WindowsNeverCrossCases) {
  const Dataset ds = synth(1);
  for (std::size_t lags : {1u, 2u, 4u}) {
    const auto pairs = build_pairs(ds, {lags});
    std::size_t expect = 0;
    for (const auto& c : ds.cases) expect += c.points.size() - lags;
    ASSERT_EQ(pairs.size(), expect);
    for (const auto& p : pairs) {
      const auto caps = ds.at(p.case_id).capacities();
      const auto it = std::search(caps.begin(), caps.end(), p.features.capacity_lags.begin(),
                                  p.features.capacity_lags.end());
      ASSERT_NE(it, caps.end());
      EXPECT_EQ(*(it + static_cast<long>(lags)), p.target);
    }
  }
}

TEST(OneStep, InterpolatesTrainingWindowWithTinyNoise) {
  const auto c = make_case("a", {21.0, 20.6, 20.3, 20.05, 19.8, 19.6, 19.45, 19.3});
  const auto pairs = build_pairs(c, {2});
  const auto data = to_training_set(pairs);
  const auto X = data.X;
  const HyperParamSet p({{"sigma_f", 1.0, 1e-8, 1e8}, {"sigma_l", 0.3, 1e-8, 1e8},
                         {kNoiseParam, 1e-6, 1e-8, 1e8}});
  const TrainedModel m(segm_kernel(), p, data, InputScaling::standardize(X));
  for (const auto& pr : pairs) {
    const auto fp = one_step(m, pr.features.capacity_lags, c.temperature_c, c.dod_pct);
    EXPECT_NEAR(fp.mean, pr.target, 1e-6);
  }
}

TEST(OneStep, BandBracketsMeanAndWiringIsDirect) {
  const Dataset ds = synth(2);
  const TrainedModel m = fixed_model_b(ds);
  const auto caps = case5(ds).capacities();
  for (std::size_t t = 2; t < caps.size(); ++t) {
    const std::span<const double> w(caps.data() + t - 2, 2);
    const auto fp = one_step(m, w, 35.0, 80.0);
    EXPECT_LE(fp.lower95, fp.mean);
    EXPECT_LE(fp.mean, fp.upper95);
    EXPECT_EQ(fp.step, 1u);
    const FeatureVector x{Vector(w.begin(), w.end()), 308.15, 0.8};
    const auto pred = predict(m, {x.flatten()});
    EXPECT_EQ(fp.mean, pred.mean[0]);
    EXPECT_EQ(fp.variance, pred.cov(0, 0));
    const auto noisy = one_step(m, w, 35.0, 80.0, true);
    EXPECT_EQ(noisy.variance, fp.variance + m.sigma_n() * m.sigma_n());
  }
  EXPECT_THROW(one_step(m, Vector{20.0}, 35.0, 80.0), DimensionMismatch);
  EXPECT_THROW(one_step(m, Vector{20.0, 19.0}, -300.0, 80.0), BelowAbsoluteZero);
}

TEST(MeanGradient, ConstantTargetsGiveZero) {
  std::mt19937_64 rng(3);
  const Points X = oracle::random_features(10, 2, rng);
  const TrainedModel m(model_b_kernel(2), oracle::model_b_params(2, 1.0, 1.5, 0.05, 1.0, 1.0, 0.1),
                       TrainingSet::make(X, Vector(10, 20.0)));
  const auto g = mean_gradient(m, FeatureVector::from_point(X[0]));
  for (double v : g) EXPECT_NEAR(v, 0.0, 1e-12);
}

TEST(MeanGradient, SingleEffectivePointClosedForm) {
  // Two training points far apart; near the first the second contributes nothing.
  const Points X{{20.0, 19.0, 300.0, 0.5}, {2000.0, 1900.0, 300.0, 0.5}};
  const HyperParamSet p({{"sigma_f", 1.3, 1e-8, 1e8}, {"sigma_l", 0.8, 1e-8, 1e8},
                         {kNoiseParam, 0.1, 1e-8, 1e8}});
  const TrainedModel m(segm_kernel(), p, TrainingSet::make(X, Vector{1.0, -1.0}, false));
  const FeatureVector x{{20.3, 18.6}, 300.0, 0.5};
  const double k = eval_se(x.flatten(), X[0], 1.3, 0.8);
  const double a = m.alpha()[0];
  const auto g = mean_gradient(m, x);
  EXPECT_NEAR(g[0], -k * (20.3 - 20.0) / (0.8 * 0.8) * a, 1e-14);
  EXPECT_NEAR(g[1], -k * (18.6 - 19.0) / (0.8 * 0.8) * a, 1e-14);
}

TEST(MeanGradient, MatchesFiniteDifferences) {
  const Dataset ds = synth(4);
  const auto [train, unused] = split(ds, {"1", "2", "3", "4"}, {});
  const auto pairs = build_pairs(train, {2});
  const auto data = to_training_set(pairs);
  const std::vector<std::pair<KernelNode, InputScaling>> models{
      {model_b_kernel(2), {}},
      {model_a_kernel(2), InputScaling::standardize(data.X)},
  };
  const std::vector<HyperParamSet> params{
      oracle::model_b_params(2, 2.0, 1.5, 0.05, 1.0, 1.3, 0.05),
      oracle::wide({{"sigma_f", 1.0}, {"sigma_1", 1.1}, {"sigma_2", 0.9}, {"sigma_T", 2.0},
                    {"sigma_DOD", 1.5}, {kNoiseParam, 0.05}})};
  const double h = 1e-6;
  for (std::size_t mi = 0; mi < models.size(); ++mi) {
    const TrainedModel m(models[mi].first, params[mi], data, models[mi].second);
    for (std::size_t t : {2u, 7u, 12u}) {
      const auto caps = case5(ds).capacities();
      const FeatureVector x{{caps[t - 2], caps[t - 1]}, 308.15, 0.8};
      const Vector g = mean_gradient(m, x);
      Vector fd(2);
      for (std::size_t d = 0; d < 2; ++d) {
        FeatureVector xp = x, xm = x;
        xp.capacity_lags[d] += h;
        xm.capacity_lags[d] -= h;
        fd[d] = (predict(m, {xp.flatten()}).mean[0] - predict(m, {xm.flatten()}).mean[0]) / (2 * h);
      }
      EXPECT_LT(oracle::grad_rel_err(g, fd), 1e-4) << mi << " " << t;
    }
  }
}

TEST(MultiStep, FirstStepIsOneStepBitwise) {
  const Dataset ds = synth(5);
  const TrainedModel m = fixed_model_b(ds);
  const auto caps = case5(ds).capacities();
  const std::span<const double> w(caps.data(), 2);
  const auto one = one_step(m, w, 35.0, 80.0);
  for (std::size_t k : {1u, 5u, 14u}) {
    const auto ms = multi_step(m, w, 35.0, 80.0, k);
    ASSERT_EQ(ms.size(), k);
    EXPECT_EQ(ms[0].mean, one.mean);
    EXPECT_EQ(ms[0].variance, one.variance);
    EXPECT_EQ(ms[0].lower95, one.lower95);
    EXPECT_EQ(ms[0].upper95, one.upper95);
    for (std::size_t s = 0; s < k; ++s) EXPECT_EQ(ms[s].step, s + 1);
  }
  EXPECT_THROW(multi_step(m, w, 35.0, 80.0, 0), ValidationError);
  EXPECT_THROW(multi_step(m, std::span<const double>(caps.data(), 3), 35.0, 80.0, 2),
               DimensionMismatch);
}

TEST(MultiStep, DiagnosticModeReportsRawVarianceAndPropagationAddsToIt) {
  const Dataset ds = synth(6);
  const TrainedModel m = fixed_model_b(ds);
  const auto caps = case5(ds).capacities();
  const std::span<const double> w(caps.data(), 2);
  MultiStepOptions raw;
  raw.propagate = false;
  const auto a = multi_step(m, w, 35.0, 80.0, 14, raw);
  const auto b = multi_step(m, w, 35.0, 80.0, 14);
  Vector win(w.begin(), w.end());
  for (std::size_t s = 0; s < a.size(); ++s) {
    const auto fp = one_step(m, win, 35.0, 80.0);
    EXPECT_EQ(a[s].mean, fp.mean);
    EXPECT_EQ(a[s].variance, fp.variance);
    EXPECT_EQ(b[s].mean, a[s].mean);
    EXPECT_GE(b[s].variance, a[s].variance);
    win = {win[1], fp.mean};
  }
  MultiStepOptions noisy;
  noisy.observation_noise = true;
  const auto c = multi_step(m, w, 35.0, 80.0, 14, noisy);
  for (std::size_t s = 0; s < c.size(); ++s)
    EXPECT_NEAR(c[s].variance, b[s].variance + m.sigma_n() * m.sigma_n(), 1e-15);
}

TEST(MultiStep, TrainingTrajectoryWithTinyNoiseHasNoUncertainty) {
  const auto c = make_case("a", {21.0, 20.6, 20.3, 20.05, 19.8, 19.6, 19.45, 19.3});
  const auto pairs = build_pairs(c, {2});
  const auto data = to_training_set(pairs);
  const HyperParamSet p({{"sigma_f", 1.0, 1e-8, 1e8}, {"sigma_l", 0.3, 1e-8, 1e8},
                         {kNoiseParam, 1e-6, 1e-8, 1e8}});
  const TrainedModel m(segm_kernel(), p, data, InputScaling::standardize(data.X));
  const auto caps = c.capacities();
  const auto fc = multi_step(m, std::span<const double>(caps.data(), 2), c.temperature_c, c.dod_pct,
                             caps.size() - 2);
  for (std::size_t s = 0; s < fc.size(); ++s) {
    EXPECT_NEAR(fc[s].mean, caps[s + 2], 1e-5);
    EXPECT_LE(fc[s].variance, 1e-6);
  }
}

TEST(MultiStep, FittedModelBandCoversCase5) {
  // Median over five seeds of the fraction of true capacities inside the band.
  Vector coverage;
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const Dataset ds = synth(seed);
    const auto [train, unused] = split(ds, {"1", "2", "3", "4"}, {});
    FitConfig cfg;
    cfg.seed = seed;
    const TrainedModel m = train_model(ModelKind::ModelB, build_pairs(train, {2}), {2}, cfg);
    const auto caps = case5(ds).capacities();
    const auto fc = multi_step(m, std::span<const double>(caps.data(), 2), 35.0, 80.0, 14);
    MultiStepOptions obs;
    obs.observation_noise = true;
    const auto fco = multi_step(m, std::span<const double>(caps.data(), 2), 35.0, 80.0, 14, obs);
    std::size_t inside = 0;
    for (std::size_t s = 0; s < 14; ++s) {
      if (caps[s + 2] >= fco[s].lower95 && caps[s + 2] <= fco[s].upper95) ++inside;
      if (s > 0) {
        EXPECT_GE(fc[s].variance, fc[s - 1].variance) << "seed " << seed;
      }
    }
    coverage.push_back(static_cast<double>(inside) / 14.0);
  }
  std::sort(coverage.begin(), coverage.end());
  EXPECT_GE(coverage[2], 0.9);
}

TEST(ForecastCsv, HeaderRowsAndCycleIndex) {
  const auto c = make_case("a", {21.0, 20.6, 20.3});
  EXPECT_EQ(forecast_cycle_index(c, 2, 1), 200.0);
  EXPECT_EQ(forecast_cycle_index(c, 2, 3), 400.0);
  std::ostringstream out;
  write_forecast_csv(out, {ForecastPoint::make(1, 20.0, 0.04)}, {200.0});
  std::istringstream in(out.str());
  std::string header, row;
  std::getline(in, header);
  std::getline(in, row);
  EXPECT_EQ(header, kForecastHeader);
  std::vector<double> f;
  std::istringstream cells(row);
  for (std::string cell; std::getline(cells, cell, ',');) f.push_back(std::stod(cell));
  const std::vector<double> expect{1, 200, 20.0, 0.04, 20.0 - 1.96 * 0.2, 20.0 + 1.96 * 0.2};
  ASSERT_EQ(f.size(), expect.size());
  for (std::size_t i = 0; i < f.size(); ++i) EXPECT_NEAR(f[i], expect[i], 1e-12) << i;
  EXPECT_THROW(write_forecast_csv(out, {ForecastPoint::make(1, 20.0, 0.04)}, {}), DimensionMismatch);
}
