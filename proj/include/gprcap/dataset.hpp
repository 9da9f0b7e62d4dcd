#pragma once

// Cyclic-ageing datasets: CSV ingestion/export, validation, the train/test
// split, and a synthetic generator built on an Arrhenius fade law.

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <iomanip>
#include <istream>
#include <limits>
#include <optional>
#include <ostream>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "gprcap/errors.hpp"

namespace gprcap {

inline constexpr double kAbsoluteZeroC = -273.15;

inline double to_kelvin(double tC) {
  if (!(tC > kAbsoluteZeroC)) throw BelowAbsoluteZero("temperature " + std::to_string(tC) + " C");
  return tC + 273.15;
}

inline double dod_fraction(double dod_pct) {
  if (!(dod_pct > 0.0 && dod_pct <= 100.0))
    throw ValidationError("DOD must lie in (0, 100] percent, got " + std::to_string(dod_pct));
  return dod_pct / 100.0;
}

struct CapacityPoint {
  double cycle_index = 0.0;  // full equivalent cycles
  double capacity_ah = 0.0;
  std::optional<double> std_ah;

  bool operator==(const CapacityPoint&) const = default;
};

struct CyclicCase {
  std::string case_id;
  double temperature_c = 25.0;
  double dod_pct = 100.0;
  std::vector<CapacityPoint> points;

  std::vector<double> capacities() const {
    std::vector<double> c;
    c.reserve(points.size());
    for (const auto& p : points) c.push_back(p.capacity_ah);
    return c;
  }

  void validate() const {
    const std::string where = "case '" + case_id + "': ";
    if (case_id.empty()) throw ValidationError("case with empty id");
    if (!(temperature_c > kAbsoluteZeroC))
      throw ValidationError(where + "temperature below absolute zero");
    if (!(dod_pct > 0.0 && dod_pct <= 100.0)) throw ValidationError(where + "DOD outside (0, 100]");
    for (std::size_t i = 0; i < points.size(); ++i) {
      const auto& p = points[i];
      if (!(p.capacity_ah > 0.0) || !std::isfinite(p.capacity_ah))
        throw ValidationError(where + "capacity must be > 0 Ah at point " + std::to_string(i));
      if (p.std_ah && !(*p.std_ah >= 0.0))
        throw ValidationError(where + "std_ah must be non-negative at point " + std::to_string(i));
      if (!std::isfinite(p.cycle_index))
        throw ValidationError(where + "non-finite cycle index at point " + std::to_string(i));
      if (i > 0 && !(p.cycle_index > points[i - 1].cycle_index))
        throw ValidationError(where + "cycle_index not strictly increasing at point " +
                              std::to_string(i));
    }
  }

  bool operator==(const CyclicCase&) const = default;
};

struct Dataset {
  std::vector<CyclicCase> cases;
  double nominal_capacity_ah = 21.0;

  void validate() const {
    if (!(nominal_capacity_ah > 0.0)) throw ValidationError("nominal capacity must be > 0");
    std::set<std::string> ids;
    for (const auto& c : cases) {
      c.validate();
      if (!ids.insert(c.case_id).second)
        throw ValidationError("duplicate case id '" + c.case_id + "'");
    }
  }

  const CyclicCase* find(const std::string& id) const {
    for (const auto& c : cases)
      if (c.case_id == id) return &c;
    return nullptr;
  }

  const CyclicCase& at(const std::string& id) const {
    if (const auto* c = find(id)) return *c;
    throw UnknownCase("unknown case '" + id + "'");
  }

  std::vector<std::string> ids() const {
    std::vector<std::string> out;
    for (const auto& c : cases) out.push_back(c.case_id);
    return out;
  }

  bool operator==(const Dataset&) const = default;
};

// ---------------------------------------------------------------------------
// CSV: case_id,temperature_c,dod_pct,cycle_index,capacity_ah,std_ah

inline constexpr const char* kCsvHeader = "case_id,temperature_c,dod_pct,cycle_index,capacity_ah,std_ah";

namespace detail {

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char ch : line) {
    if (ch == ',') {
      out.push_back(cur);
      cur.clear();
    } else if (ch != '\r') {
      cur += ch;
    }
  }
  out.push_back(cur);
  return out;
}

inline std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t");
  return s.substr(b, e - b + 1);
}

inline double parse_number(const std::string& raw, std::size_t row, std::size_t col) {
  const std::string s = trim(raw);
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (s.empty() || ec != std::errc() || ptr != s.data() + s.size() || !std::isfinite(v))
    throw ParseError("expected a number, got '" + s + "'", row, col);
  return v;
}

inline std::string format_number(double v) {
  std::ostringstream os;
  os << std::setprecision(std::numeric_limits<double>::max_digits10) << v;
  return os.str();
}

}  // namespace detail

/// Rows are grouped into cases by case_id in order of first appearance. Rows and
/// columns in errors are 1-based; row 1 is the header.
inline Dataset read_csv(std::istream& in, double nominal_capacity_ah = 21.0) {
  std::string line;
  if (!std::getline(in, line)) throw ParseError("missing header", 1, 1);
  if (line.size() >= 3 && static_cast<unsigned char>(line[0]) == 0xEF) line.erase(0, 3);  // BOM
  const auto header = detail::split_csv_line(line);
  const std::vector<std::string> expected = detail::split_csv_line(kCsvHeader);
  if (header.size() != expected.size())
    throw ParseError("header must be '" + std::string(kCsvHeader) + "'", 1, 1);
  for (std::size_t c = 0; c < expected.size(); ++c)
    if (detail::trim(header[c]) != expected[c])
      throw ParseError("unexpected column '" + detail::trim(header[c]) + "'", 1, c + 1);

  Dataset ds;
  ds.nominal_capacity_ah = nominal_capacity_ah;
  std::size_t row = 1;
  while (std::getline(in, line)) {
    ++row;
    if (detail::trim(line).empty() || detail::trim(line) == "\r") continue;
    const auto f = detail::split_csv_line(line);
    if (f.size() != expected.size())
      throw ParseError("expected 6 fields, got " + std::to_string(f.size()), row, f.size());
    const std::string id = detail::trim(f[0]);
    if (id.empty()) throw ParseError("empty case_id", row, 1);
    const double t = detail::parse_number(f[1], row, 2);
    const double dod = detail::parse_number(f[2], row, 3);
    CapacityPoint p;
    p.cycle_index = detail::parse_number(f[3], row, 4);
    p.capacity_ah = detail::parse_number(f[4], row, 5);
    if (!detail::trim(f[5]).empty()) p.std_ah = detail::parse_number(f[5], row, 6);

    auto it = std::find_if(ds.cases.begin(), ds.cases.end(),
                           [&](const CyclicCase& c) { return c.case_id == id; });
    if (it == ds.cases.end()) {
      ds.cases.push_back({id, t, dod, {}});
      it = ds.cases.end() - 1;
    } else if (it->temperature_c != t || it->dod_pct != dod) {
      throw ValidationError("case '" + id + "': temperature/DOD must be constant (row " +
                            std::to_string(row) + ")");
    }
    it->points.push_back(p);
  }
  ds.validate();
  return ds;
}

inline Dataset load_csv(const std::string& path, double nominal_capacity_ah = 21.0) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open '" + path + "'");
  return read_csv(in, nominal_capacity_ah);
}

inline void write_csv(std::ostream& out, const Dataset& ds) {
  out << kCsvHeader << '\n';
  for (const auto& c : ds.cases)
    for (const auto& p : c.points) {
      out << c.case_id << ',' << detail::format_number(c.temperature_c) << ','
          << detail::format_number(c.dod_pct) << ',' << detail::format_number(p.cycle_index) << ','
          << detail::format_number(p.capacity_ah) << ',';
      if (p.std_ah) out << detail::format_number(*p.std_ah);
      out << '\n';
    }
}

inline void save_csv(const std::string& path, const Dataset& ds) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write '" + path + "'");
  write_csv(out, ds);
  if (!out) throw IoError("write failed for '" + path + "'");
}

// ---------------------------------------------------------------------------
// Split

inline std::pair<Dataset, Dataset> split(const Dataset& ds, const std::vector<std::string>& train_ids,
                                         const std::vector<std::string>& test_ids) {
  for (const auto& a : train_ids)
    if (std::find(test_ids.begin(), test_ids.end(), a) != test_ids.end())
      throw OverlappingSplit("case '" + a + "' is in both train and test sets");
  Dataset train, test;
  train.nominal_capacity_ah = test.nominal_capacity_ah = ds.nominal_capacity_ah;
  for (const auto& id : train_ids) train.cases.push_back(ds.at(id));
  for (const auto& id : test_ids) test.cases.push_back(ds.at(id));
  return {std::move(train), std::move(test)};
}

// ---------------------------------------------------------------------------
// Synthetic generator
//
// capacity(n) = c0 - a exp(-Ea / (R T)) dod^beta n^z + N(0, noise_std)

struct SynthConfig {
  double c0_ah = 21.0;
  double a = 4.5e5;
  double ea_j_mol = 40000.0;
  double r_j_molk = 8.314;
  double beta = 1.5;
  double z = 0.5;
  double noise_std_ah = 0.05;
  std::uint64_t seed = 0;
  std::size_t n_points = 16;
  double cycles_per_point = 100.0;

  void validate() const {
    if (!(c0_ah > 0.0) || !(a > 0.0) || !(ea_j_mol > 0.0) || !(r_j_molk > 0.0))
      throw ValidationError("synth config: physical parameters must be > 0");
    if (!(beta >= 0.0)) throw ValidationError("synth config: beta must be >= 0");
    if (!(z > 0.0 && z <= 1.5)) throw ValidationError("synth config: z must lie in (0, 1.5]");
    if (!(noise_std_ah >= 0.0)) throw ValidationError("synth config: noise_std_ah must be >= 0");
    if (n_points < 3) throw ValidationError("synth config: n_points must be >= 3");
    if (!(cycles_per_point > 0.0)) throw ValidationError("synth config: cycles_per_point must be > 0");
  }

  bool operator==(const SynthConfig&) const = default;
};

NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(SynthConfig, c0_ah, a, ea_j_mol, r_j_molk, beta, z,
                                                noise_std_ah, seed, n_points, cycles_per_point)

inline SynthConfig load_synth_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open '" + path + "'");
  SynthConfig cfg;
  try {
    cfg = nlohmann::json::parse(in).get<SynthConfig>();
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("synth config: ") + e.what());
  }
  cfg.validate();
  return cfg;
}

/// Noise-free capacity after `cycles` full equivalent cycles.
inline double fade_capacity(const SynthConfig& cfg, double tC, double dod_pct, double cycles) {
  const double rate = cfg.a * std::exp(-cfg.ea_j_mol / (cfg.r_j_molk * to_kelvin(tC))) *
                      std::pow(dod_fraction(dod_pct), cfg.beta);
  return cfg.c0_ah - rate * std::pow(cycles, cfg.z);
}

/// Noise stream is seeded from (cfg.seed, case_id) so cases are independent of order.
inline CyclicCase synth_case(const SynthConfig& cfg, const std::string& case_id, double tC,
                             double dod_pct, std::size_t n_points, double cycles_per_point) {
  cfg.validate();
  if (n_points < 3) throw ValidationError("synth_case needs n_points >= 3");
  std::vector<std::uint32_t> material{static_cast<std::uint32_t>(cfg.seed),
                                      static_cast<std::uint32_t>(cfg.seed >> 32)};
  for (unsigned char ch : case_id) material.push_back(ch);
  std::seed_seq seq(material.begin(), material.end());
  std::mt19937_64 rng(seq);
  std::normal_distribution<double> noise(0.0, 1.0);

  CyclicCase c{case_id, tC, dod_pct, {}};
  for (std::size_t i = 0; i < n_points; ++i) {
    const double n = static_cast<double>(i) * cycles_per_point;
    double cap = fade_capacity(cfg, tC, dod_pct, n);
    if (cfg.noise_std_ah > 0.0) cap += cfg.noise_std_ah * noise(rng);
    c.points.push_back({n, cap, std::nullopt});
  }
  c.validate();
  return c;
}

struct CaseCondition {
  const char* id;
  double dod_pct;
  double temperature_c;
};

/// The six-cell test matrix: DOD in {50, 80, 100} %, temperature in {35, 45} C.
inline constexpr CaseCondition kTestMatrix[] = {
    {"1", 100.0, 35.0}, {"2", 50.0, 45.0}, {"3", 50.0, 35.0},
    {"4", 100.0, 45.0}, {"5", 80.0, 35.0}, {"6", 80.0, 45.0},
};

inline Dataset synth_matrix(const SynthConfig& cfg) {
  cfg.validate();
  Dataset ds;
  ds.nominal_capacity_ah = cfg.c0_ah;
  for (const auto& cond : kTestMatrix)
    ds.cases.push_back(
        synth_case(cfg, cond.id, cond.temperature_c, cond.dod_pct, cfg.n_points, cfg.cycles_per_point));
  ds.validate();
  return ds;
}

}  // namespace gprcap
