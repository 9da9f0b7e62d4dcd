// Fit the physics-informed kernel on four synthetic cases and forecast the
// 35 C / 80 % DOD case recursively from its first two measurements.

#include <cstdio>
#include <cstdlib>

#include "gprcap/gprcap.hpp"

using namespace gprcap;

int main(int argc, char** argv) {
  SynthConfig cfg;
  if (argc > 1) cfg.seed = std::strtoull(argv[1], nullptr, 10);
  const Dataset ds = synth_matrix(cfg);
  const auto [train, test] = split(ds, {"1", "2", "3", "4"}, {"5"});

  const LagConfig lags{2};
  const TrainedModel m = train_model(ModelKind::ModelB, build_pairs(train, lags), lags, FitConfig{});
  std::printf("fitted %s\n", m.params().describe().c_str());

  const CyclicCase& c = test.at("5");
  const auto caps = c.capacities();
  const std::size_t k = available_horizon(c, lags.lags);
  const auto fc = multi_step(m, std::span<const double>(caps.data(), lags.lags), c.temperature_c,
                             c.dod_pct, k, {.propagate = true, .observation_noise = true});

  std::printf("%5s %7s %9s %9s %17s\n", "step", "cycle", "actual", "mean", "95% band");
  for (const auto& p : fc) {
    const std::size_t i = lags.lags - 1 + p.step;
    std::printf("%5zu %7.0f %9.4f %9.4f  [%7.4f, %7.4f]\n", p.step, c.points[i].cycle_index, caps[i],
                p.mean, p.lower95, p.upper95);
  }
}
