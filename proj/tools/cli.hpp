#pragma once

// Command-line front end. Kept in a header so the integration tests can drive
// run_cli() in-process.

#include <cstdint>
#include <fstream>
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "gprcap/gprcap.hpp"

namespace gprcap::cli {

enum ExitCode : int { kOk = 0, kValidation = 2, kNumerical = 3, kIo = 4 };

inline std::vector<std::string> split_list(const std::string& s, char sep = ',') {
  std::vector<std::string> out;
  std::string cur;
  for (char ch : s) {
    if (ch == sep) {
      if (!cur.empty()) out.push_back(cur);
      cur.clear();
    } else if (ch != ' ') {
      cur += ch;
    }
  }
  if (!cur.empty()) out.push_back(cur);
  return out;
}

inline std::size_t parse_count(const std::string& s, const std::string& what) {
  std::size_t pos = 0;
  unsigned long v = 0;
  try {
    v = std::stoul(s, &pos);
  } catch (const std::exception&) {
    pos = 0;
  }
  if (pos == 0 || pos != s.size()) throw ValidationError("invalid " + what + " '" + s + "'");
  return v;
}

/// "id=k,id=k" -> map.
inline std::map<std::string, std::size_t> parse_horizons(const std::string& s) {
  std::map<std::string, std::size_t> out;
  for (const auto& item : split_list(s)) {
    const auto eq = item.find('=');
    if (eq == std::string::npos || eq == 0)
      throw ValidationError("horizon entry '" + item + "' must look like id=k");
    out[item.substr(0, eq)] = parse_count(item.substr(eq + 1), "horizon");
  }
  return out;
}

/// "1..5", "1,2,4" or "2".
inline std::vector<std::size_t> parse_lag_range(const std::string& s) {
  std::vector<std::size_t> out;
  const auto dots = s.find("..");
  if (dots != std::string::npos) {
    const std::size_t lo = parse_count(s.substr(0, dots), "lag range");
    const std::size_t hi = parse_count(s.substr(dots + 2), "lag range");
    if (lo < 1 || hi < lo) throw ValidationError("lag range '" + s + "' is empty or starts below 1");
    for (std::size_t l = lo; l <= hi; ++l) out.push_back(l);
    return out;
  }
  for (const auto& item : split_list(s)) out.push_back(parse_count(item, "lag count"));
  if (out.empty()) throw ValidationError("empty lag list");
  return out;
}

struct SavedModel {
  std::string label;
  TrainedModel model;
};

inline SavedModel load_model(const std::string& path) {
  const json j = read_json_file(path);
  return {j.value("label", std::string{}), model_from_json(j)};
}

inline void write_reports(const std::string& path, const std::vector<EvalReport>& reports) {
  write_json_file(path, reports_to_json(reports));
}

inline void print_reports(std::ostream& out, const std::vector<EvalReport>& reports) {
  for (const auto& r : reports)
    out << r.model_label << " " << phase_name(r.phase) << " lags=" << r.lags
        << " ME=" << r.aggregate.me_ah << " MAE=" << r.aggregate.mae_ah
        << " RMSE=" << r.aggregate.rmse_ah << "\n";
}

inline int run_cli(int argc, const char* const* argv, std::ostream& out = std::cout,
                   std::ostream& err = std::cerr) {
  CLI::App app{"Gaussian-process capacity-fade modelling for cyclic ageing data", "gprcap"};
  app.require_subcommand(1);

  // synth
  std::string synth_config, synth_out;
  auto* synth = app.add_subcommand("synth", "Generate the six-case synthetic test matrix as CSV");
  synth->add_option("--config", synth_config, "Synthetic generator config (JSON)");
  synth->add_option("--out", synth_out, "Output dataset CSV")->required();

  // train
  std::string tr_data, tr_model, tr_cases, tr_out;
  std::size_t tr_lags = 2;
  std::uint64_t tr_seed = 0;
  auto* train = app.add_subcommand("train", "Fit one model variant on pooled training cases");
  train->add_option("--data", tr_data, "Dataset CSV")->required();
  train->add_option("--model", tr_model, "Model variant")
      ->required()
      ->check(CLI::IsMember({"segm", "a", "b"}));
  train->add_option("--train-cases", tr_cases, "Comma-separated training case ids")->required();
  train->add_option("--lags", tr_lags, "Number of capacity lags");
  train->add_option("--seed", tr_seed, "Random seed");
  train->add_option("--out", tr_out, "Output model JSON")->required();

  // predict
  std::string pr_model, pr_data, pr_case, pr_mode = "one-step", pr_out;
  std::size_t pr_steps = 0;
  bool pr_obs_noise = false;
  auto* pred = app.add_subcommand("predict", "Forecast one case and write forecast rows as CSV");
  pred->add_option("--model", pr_model, "Model JSON")->required();
  pred->add_option("--data", pr_data, "Dataset CSV")->required();
  pred->add_option("--case", pr_case, "Case id")->required();
  pred->add_option("--mode", pr_mode, "Prediction mode")
      ->check(CLI::IsMember({"one-step", "multi-step"}));
  pred->add_option("--steps", pr_steps, "Number of steps (default: all available)");
  pred->add_flag("--observation-noise", pr_obs_noise, "Add sigma_n^2 to reported variances");
  pred->add_option("--out", pr_out, "Output forecast CSV")->required();

  // evaluate
  std::string ev_model, ev_data, ev_cases, ev_out;
  auto* eval = app.add_subcommand("evaluate", "One-step and multi-step metrics of a saved model");
  eval->add_option("--model", ev_model, "Model JSON")->required();
  eval->add_option("--data", ev_data, "Dataset CSV")->required();
  eval->add_option("--cases", ev_cases, "Comma-separated case ids")->required();
  eval->add_option("--out", ev_out, "Output report JSON")->required();

  // compare
  std::string cmp_data, cmp_train, cmp_test, cmp_horizons, cmp_out;
  std::uint64_t cmp_seed = 0;
  auto* cmp = app.add_subcommand("compare", "Fit and evaluate SEGM, Model A and Model B");
  cmp->add_option("--data", cmp_data, "Dataset CSV")->required();
  cmp->add_option("--train-cases", cmp_train, "Comma-separated training case ids")->required();
  cmp->add_option("--test-cases", cmp_test, "Comma-separated test case ids")->required();
  cmp->add_option("--horizons", cmp_horizons, "Multi-step horizons as id=k,...");
  cmp->add_option("--seed", cmp_seed, "Random seed");
  cmp->add_option("--out", cmp_out, "Output report JSON")->required();

  // lag-sweep
  std::string ls_data, ls_lags = "1..5", ls_train = "1,2,3,4", ls_test = "5,6", ls_horizons, ls_out;
  std::uint64_t ls_seed = 0;
  auto* sweep = app.add_subcommand("lag-sweep", "Model B multi-step metrics versus lag count");
  sweep->add_option("--data", ls_data, "Dataset CSV")->required();
  sweep->add_option("--lags", ls_lags, "Lag counts, e.g. 1..5 or 1,2,4");
  sweep->add_option("--seed", ls_seed, "Random seed");
  sweep->add_option("--train-cases", ls_train, "Comma-separated training case ids");
  sweep->add_option("--test-cases", ls_test, "Comma-separated test case ids");
  sweep->add_option("--horizons", ls_horizons, "Multi-step horizons as id=k,...");
  sweep->add_option("--out", ls_out, "Output report JSON")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kOk : kValidation;
  }

  try {
    if (synth->parsed()) {
      const SynthConfig cfg = synth_config.empty() ? SynthConfig{} : load_synth_config(synth_config);
      const Dataset ds = synth_matrix(cfg);
      save_csv(synth_out, ds);
      out << "wrote " << ds.cases.size() << " cases to " << synth_out << "\n";
    } else if (train->parsed()) {
      const Dataset ds = load_csv(tr_data);
      const auto [train_ds, unused] = split(ds, split_list(tr_cases), {});
      const LagConfig lc{tr_lags};
      FitConfig fc;
      fc.seed = tr_seed;
      const ModelKind kind = parse_model_kind(tr_model);
      const TrainedModel m = train_model(kind, build_pairs(train_ds, lc), lc, fc);
      write_json_file(tr_out, model_to_json(m, model_label(kind)));
      out << model_label(kind) << " nll=" << m.nll() << " {" << m.params().describe() << "}\n";
    } else if (pred->parsed()) {
      const SavedModel sm = load_model(pr_model);
      const Dataset ds = load_csv(pr_data);
      const CyclicCase& c = ds.at(pr_case);
      const std::size_t L = model_lags(sm.model);
      std::vector<ForecastPoint> rows;
      std::vector<double> cycles;
      if (pr_mode == "one-step") {
        const auto pairs = build_pairs(c, {L});
        const std::size_t n = pr_steps == 0 ? pairs.size() : std::min(pr_steps, pairs.size());
        for (std::size_t i = 0; i < n; ++i) {
          rows.push_back(one_step(sm.model, pairs[i].features.capacity_lags, c.temperature_c,
                                  c.dod_pct, pr_obs_noise));
          cycles.push_back(pairs[i].cycle_index);
        }
      } else {
        const std::size_t k = pr_steps == 0 ? available_horizon(c, L) : pr_steps;
        const Vector caps = c.capacities();
        if (caps.size() < L) throw TooShort("case '" + c.case_id + "' is shorter than the lag window");
        MultiStepOptions opts;
        opts.observation_noise = pr_obs_noise;
        rows = multi_step(sm.model, std::span<const double>(caps.data(), L), c.temperature_c,
                          c.dod_pct, k, opts);
        for (std::size_t s = 1; s <= k; ++s) cycles.push_back(forecast_cycle_index(c, L, s));
      }
      std::ofstream f(pr_out);
      if (!f) throw IoError("cannot write '" + pr_out + "'");
      write_forecast_csv(f, rows, cycles);
      if (!f) throw IoError("write failed for '" + pr_out + "'");
      out << "wrote " << rows.size() << " forecast rows to " << pr_out << "\n";
    } else if (eval->parsed()) {
      const SavedModel sm = load_model(ev_model);
      const Dataset ds = load_csv(ev_data);
      const auto [cases, unused] = split(ds, split_list(ev_cases), {});
      const std::string label = sm.label.empty() ? "model" : sm.label;
      const std::vector<EvalReport> reports{evaluate_one_step(sm.model, label, cases),
                                            evaluate_multi_step(sm.model, label, cases)};
      write_reports(ev_out, reports);
      print_reports(out, reports);
    } else if (cmp->parsed()) {
      const Dataset ds = load_csv(cmp_data);
      const auto reports = compare(ds, split_list(cmp_train), split_list(cmp_test),
                                   parse_horizons(cmp_horizons), cmp_seed);
      write_reports(cmp_out, reports);
      print_reports(out, reports);
    } else if (sweep->parsed()) {
      const Dataset ds = load_csv(ls_data);
      const auto reports = lag_sweep(ds, split_list(ls_train), split_list(ls_test),
                                     parse_lag_range(ls_lags), ls_seed, parse_horizons(ls_horizons));
      write_reports(ls_out, reports);
      print_reports(out, reports);
    }
  } catch (const ValidationError& e) {
    err << "validation error: " << e.what() << "\n";
    return kValidation;
  } catch (const NumericalError& e) {
    err << "numerical failure: " << e.what() << "\n";
    return kNumerical;
  } catch (const IoError& e) {
    err << "I/O error: " << e.what() << "\n";
    return kIo;
  }
  return kOk;
}

}  // namespace gprcap::cli
