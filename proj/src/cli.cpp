// Copyright 2026 The qlimit Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "qlimit/cli.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <limits>

#include "CLI11.hpp"
#include "qlimit/errors.hpp"
#include "qlimit/likelihood.hpp"
#include "qlimit/measurement.hpp"
#include "qlimit/montecarlo.hpp"
#include "qlimit/quantum_limit.hpp"
#include "qlimit/records_io.hpp"

namespace qlimit::cli {

using nlohmann::json;
using nlohmann::ordered_json;

namespace {

// Bounds are evaluated at this d / sigma where the grid asks for d = 0;
// the Fisher information of every scheme is a 0/0 limit there.
constexpr double kZeroSubstitute = 1e-6;
constexpr double kMeanGate = 4.0;
constexpr double kCovGate = 5.0;

std::string join(const std::string& prefix, const std::string& key) {
  return prefix.empty() ? key : prefix + "." + key;
}

double get_number(const json& j, const std::string& field) {
  if (!j.is_number()) throw UsageError(field, "expected a number");
  const double v = j.get<double>();
  if (!std::isfinite(v)) throw UsageError(field, "must be finite");
  return v;
}

int get_int(const json& j, const std::string& field) {
  if (!j.is_number_integer()) throw UsageError(field, "expected an integer");
  const auto v = j.get<std::int64_t>();
  if (v < std::numeric_limits<int>::min() || v > std::numeric_limits<int>::max()) {
    throw UsageError(field, "out of range");
  }
  return static_cast<int>(v);
}

std::uint64_t get_count(const json& j, const std::string& field) {
  if (!j.is_number_unsigned()) throw UsageError(field, "expected a non-negative integer");
  return j.get<std::uint64_t>();
}

bool get_bool(const json& j, const std::string& field) {
  if (!j.is_boolean()) throw UsageError(field, "expected true or false");
  return j.get<bool>();
}

template <class T, class Get>
std::vector<T> get_list(const json& j, const std::string& field, Get get) {
  if (!j.is_array()) throw UsageError(field, "expected an array");
  std::vector<T> out;
  for (std::size_t i = 0; i < j.size(); ++i) {
    out.push_back(get(j[i], field + "[" + std::to_string(i) + "]"));
  }
  return out;
}

const json& object(const json& j, const std::string& field) {
  if (!j.is_object()) throw UsageError(field, "expected an object");
  return j;
}

[[noreturn]] void unknown(const std::string& field) {
  throw UsageError(field, "unknown config field");
}

void require_positive_counts(const std::vector<int>& v, const std::string& field) {
  if (v.empty()) throw UsageError(field, "must not be empty");
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (v[i] < 1) throw UsageError(field + "[" + std::to_string(i) + "]", "must be >= 1");
  }
}

PsfModel psf_for(const RunConfig& config) {
  if (config.psf_grid.empty()) return PsfModel::gaussian(config.sigma);
  return PsfModel::sampled(read_psf_csv(config.psf_grid));
}

Scene make_scene(double n_s, double d_over_sigma, const PsfModel& psf) {
  Scene s;
  s.n_s = n_s;
  s.d = d_over_sigma * psf.sigma();
  s.psf = psf;
  s.validate();
  return s;
}

// Divides by the d = 0 QFI, 2 (Delta k_x^2) n_s (= n_s / 2 sigma^2 for the
// Gaussian PSF).
double normalize(double value, double n_s, const PsfModel& psf) {
  return n_s > 0.0 ? value / (2.0 * mean_square_bandwidth(psf) * n_s) : 0.0;
}

ordered_json manifest_for(const RunConfig& config, const std::string& command) {
  ordered_json m;
  m["tool"] = "qlimit";
  m["version"] = QLIMIT_VERSION;
  m["command"] = command;
  m["config"] = config.to_json();
  // Outputs must not depend on where they are written.
  m["config"].erase("out");
  return m;
}

std::string label(const char* prefix, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%s%g", prefix, v);
  return buf;
}

}  // namespace

void RunConfig::validate() const {
  if (!(n_s >= 0.0) || !std::isfinite(n_s)) throw UsageError("n_s", "must be finite and >= 0");
  if (!(sigma > 0.0) || !std::isfinite(sigma)) throw UsageError("sigma", "must be positive");
  if (!(d_min >= 0.0)) throw UsageError("d_grid.min", "must be >= 0");
  if (d_steps < 1) throw UsageError("d_grid.steps", "must be >= 1");
  if (d_steps > 1 && !(d_max > d_min)) throw UsageError("d_grid.max", "must exceed d_grid.min");
  if (d_steps == 1 && d_max != d_min && d_max < d_min) {
    throw UsageError("d_grid.max", "must not be below d_grid.min");
  }
  if (q_max < 0) throw UsageError("spade.q_max", "must be >= 0");
  for (std::size_t i = 0; i < q_set.size(); ++i) {
    if (q_set[i] < 0) throw UsageError("spade.q_set[" + std::to_string(i) + "]", "must be >= 0");
  }
  if (q_set.empty()) throw UsageError("spade.q_set", "must not be empty");
  if (!(width_sigmas > 0.0) || !std::isfinite(width_sigmas)) {
    throw UsageError("detector.width_sigmas", "must be positive");
  }
  if (pixels && *pixels < 1) throw UsageError("detector.pixels", "must be >= 1");
  if (di_pixels < 1) throw UsageError("detector.di_pixels", "must be >= 1");
  if (di_companion_pixels < 1) throw UsageError("detector.di_companion_pixels", "must be >= 1");
  if (sliver_pixels < 1) throw UsageError("sliver.pixels", "must be >= 1");
  require_positive_counts(p_set, "sliver.p_set");
  if (fig2_n_s.empty()) throw UsageError("fig2.n_s_set", "must not be empty");
  for (std::size_t i = 0; i < fig2_n_s.size(); ++i) {
    if (!(fig2_n_s[i] >= 0.0)) {
      throw UsageError("fig2.n_s_set[" + std::to_string(i) + "]", "must be >= 0");
    }
  }
}

void RunConfig::validate_simulation() const {
  validate();
  if (!(sim_d >= 0.0) || !std::isfinite(sim_d)) throw UsageError("simulate.d", "must be >= 0");
  if (trials < 2) throw UsageError("simulate.trials", "must be >= 2");
  if (estimate) {
    if (sim_scheme == Scheme::DirectImaging) {
      throw UsageError("simulate.estimate", "maximum likelihood is not available for di");
    }
    if (estimates < 2) throw UsageError("simulate.estimates", "must be >= 2");
    if (records_per_estimate < 1) throw UsageError("simulate.records_per_estimate", "must be >= 1");
  }
}

std::vector<double> RunConfig::d_grid() const {
  std::vector<double> out(static_cast<std::size_t>(d_steps));
  for (int i = 0; i < d_steps; ++i) {
    out[static_cast<std::size_t>(i)] =
        d_steps == 1 ? d_min : d_min + (d_max - d_min) * i / (d_steps - 1);
  }
  return out;
}

int RunConfig::pixels_for(Scheme scheme) const {
  if (pixels) return *pixels;
  return scheme == Scheme::Sliver ? sliver_pixels : di_pixels;
}

ordered_json RunConfig::to_json() const {
  ordered_json j;
  j["n_s"] = n_s;
  j["sigma"] = sigma;
  if (!psf_grid.empty()) j["psf_grid"] = psf_grid.string();
  j["d_grid"] = {{"min", d_min}, {"max", d_max}, {"steps", d_steps}};
  j["spade"] = {{"q_max", q_max}, {"q_set", q_set}};
  ordered_json det = {{"width_sigmas", width_sigmas}};
  if (pixels) det["pixels"] = *pixels;
  det["di_pixels"] = di_pixels;
  det["di_companion_pixels"] = di_companion_pixels;
  j["detector"] = det;
  j["sliver"] = {{"pixels", sliver_pixels}, {"p_set", p_set}};
  j["fig2"] = {{"n_s_set", fig2_n_s}};
  j["simulate"] = {{"scheme", std::string(to_string(sim_scheme))},
                   {"d", sim_d},
                   {"trials", trials},
                   {"seed", seed},
                   {"estimate", estimate},
                   {"estimates", estimates},
                   {"records_per_estimate", records_per_estimate},
                   {"write_records", write_records}};
  j["out"] = out.string();
  return j;
}

void apply_json(RunConfig& c, const json& j) {
  object(j, "<config>");
  for (const auto& [key, v] : j.items()) {
    if (key == "n_s") {
      c.n_s = get_number(v, key);
    } else if (key == "sigma") {
      c.sigma = get_number(v, key);
    } else if (key == "psf_grid") {
      if (!v.is_string()) throw UsageError(key, "expected a path string");
      c.psf_grid = v.get<std::string>();
    } else if (key == "out") {
      if (!v.is_string()) throw UsageError(key, "expected a path string");
      c.out = v.get<std::string>();
    } else if (key == "d_grid") {
      for (const auto& [k, w] : object(v, key).items()) {
        const std::string f = join(key, k);
        if (k == "min") c.d_min = get_number(w, f);
        else if (k == "max") c.d_max = get_number(w, f);
        else if (k == "steps") c.d_steps = get_int(w, f);
        else unknown(f);
      }
    } else if (key == "spade") {
      for (const auto& [k, w] : object(v, key).items()) {
        const std::string f = join(key, k);
        if (k == "q_max") c.q_max = get_int(w, f);
        else if (k == "q_set") c.q_set = get_list<int>(w, f, get_int);
        else unknown(f);
      }
    } else if (key == "detector") {
      for (const auto& [k, w] : object(v, key).items()) {
        const std::string f = join(key, k);
        if (k == "width_sigmas") c.width_sigmas = get_number(w, f);
        else if (k == "pixels") c.pixels = get_int(w, f);
        else if (k == "di_pixels") c.di_pixels = get_int(w, f);
        else if (k == "di_companion_pixels") c.di_companion_pixels = get_int(w, f);
        else unknown(f);
      }
    } else if (key == "sliver") {
      for (const auto& [k, w] : object(v, key).items()) {
        const std::string f = join(key, k);
        if (k == "pixels") c.sliver_pixels = get_int(w, f);
        else if (k == "p_set") c.p_set = get_list<int>(w, f, get_int);
        else unknown(f);
      }
    } else if (key == "fig2") {
      for (const auto& [k, w] : object(v, key).items()) {
        const std::string f = join(key, k);
        if (k == "n_s_set") c.fig2_n_s = get_list<double>(w, f, get_number);
        else unknown(f);
      }
    } else if (key == "simulate") {
      for (const auto& [k, w] : object(v, key).items()) {
        const std::string f = join(key, k);
        if (k == "scheme") {
          if (!w.is_string()) throw UsageError(f, "expected di, spade or sliver");
          try {
            c.sim_scheme = parse_scheme(w.get<std::string>());
          } catch (const UsageError& e) {
            throw UsageError(f, e.what());
          }
        } else if (k == "d") {
          c.sim_d = get_number(w, f);
        } else if (k == "trials") {
          c.trials = get_count(w, f);
        } else if (k == "seed") {
          c.seed = w.is_string() ? parse_seed(w.get<std::string>(), f) : get_count(w, f);
        } else if (k == "estimate") {
          c.estimate = get_bool(w, f);
        } else if (k == "estimates") {
          c.estimates = get_count(w, f);
        } else if (k == "records_per_estimate") {
          c.records_per_estimate = get_count(w, f);
        } else if (k == "write_records") {
          c.write_records = get_bool(w, f);
        } else {
          unknown(f);
        }
      }
    } else {
      unknown(key);
    }
  }
}

RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw UsageError("--config", "cannot open " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw UsageError("--config", std::string("invalid JSON: ") + e.what());
  }
  RunConfig c;
  apply_json(c, j);
  return c;
}

std::uint64_t parse_seed(const std::string& text, const std::string& field) {
  std::uint64_t v = 0;
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (text.empty() || ec != std::errc() || ptr != text.data() + text.size()) {
    throw UsageError(field, "seed must be a decimal integer in [0, 2^64)");
  }
  return v;
}

double Table::number(std::size_t row, const std::string& column) const {
  for (std::size_t c = 0; c < columns.size(); ++c) {
    if (columns[c] == column) return std::stod(rows.at(row).at(c));
  }
  throw Error("no column " + column);
}

std::string format_number(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

void write_csv(const std::filesystem::path& path, const Table& table, const ordered_json& manifest) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot open " + path.string() + " for writing");
  out << "# qlimit " << QLIMIT_VERSION << " manifest " << manifest.dump() << '\n';
  for (std::size_t c = 0; c < table.columns.size(); ++c) {
    out << (c ? "," : "") << table.columns[c];
  }
  out << '\n';
  for (const auto& row : table.rows) {
    for (std::size_t c = 0; c < row.size(); ++c) out << (c ? "," : "") << row[c];
    out << '\n';
  }
  if (!out) throw Error("write failed: " + path.string());
}

Table cmd_qfi(const RunConfig& config) {
  config.validate();
  const std::vector<double> grid = config.d_grid();
  Table t;
  const PsfModel psf = psf_for(config);
  t.columns = {"d_over_sigma", "n_s", "qfi", "qfi_sym", "qfi_asym", "qfi_normalized"};
  t.rows.resize(grid.size());
  parallel_for(grid.size(), [&](std::size_t i) {
    const QfiBreakdown k = qfi(make_scene(config.n_s, grid[i], psf));
    t.rows[i] = {format_number(grid[i]), format_number(config.n_s), format_number(k.total),
                 format_number(k.sym), format_number(k.asym),
                 format_number(normalize(k.total, config.n_s, psf))};
  });
  return t;
}

Table cmd_bound(const RunConfig& config, Scheme scheme, int param) {
  config.validate();
  if (param < (scheme == Scheme::Spade ? 0 : 1)) {
    throw UsageError(scheme == Scheme::Spade ? "spade.q_max" : "detector.pixels",
                     "invalid scheme parameter");
  }
  const std::vector<double> grid = config.d_grid();
  const PsfModel psf = psf_for(config);
  const DetectorGeometry geom{config.width_sigmas * psf.sigma(), param};
  Table t;
  t.columns = {"d_over_sigma", "scheme", "param", "bound", "bound_normalized", "sym_part", "asym_part"};
  t.rows.resize(grid.size());
  parallel_for(grid.size(), [&](std::size_t i) {
    const double x = grid[i] == 0.0 ? kZeroSubstitute : grid[i];
    const Scene scene = make_scene(config.n_s, x, psf);
    MomentSet m;
    switch (scheme) {
      case Scheme::DirectImaging:
        m = di_moments(scene, geom);
        break;
      case Scheme::Spade:
        m = spade_moments(scene, param);
        break;
      case Scheme::Sliver:
        m = sliver_moments(scene, geom);
        break;
    }
    const BoundResult b = fi_lower_bound(m);
    std::string sym;
    std::string asym;
    if (scheme == Scheme::Sliver) {
      sym = format_number(b.block_value("sym").value_or(0.0));
      asym = format_number(b.block_value("asym").value_or(0.0));
    }
    t.rows[i] = {format_number(x), std::string(to_string(scheme)), std::to_string(param),
                 format_number(b.value), format_number(normalize(b.value, config.n_s, psf)),
                 sym, asym};
  });
  return t;
}

FigureBundle reproduce_figure(int id, const RunConfig& config) {
  config.validate();
  FigureBundle bundle;
  ordered_json& m = bundle.manifest;
  m["tool"] = "qlimit";
  m["version"] = QLIMIT_VERSION;
  m["figure"] = id;
  m["sigma"] = config.sigma;
  m["d_grid"] = {{"min", config.d_min}, {"max", config.d_max}, {"steps", config.d_steps}};
  m["bound_d_zero_replaced_by"] = kZeroSubstitute;
  m["detector_width_sigmas"] = config.width_sigmas;
  ordered_json curves = ordered_json::array();
  ordered_json choices = ordered_json::array();

  auto add = [&](std::string file, Table t, ordered_json entry) {
    entry["file"] = file;
    curves.push_back(entry);
    bundle.curves.emplace_back(std::move(file), std::move(t));
  };

  if (id == 2) {
    m["n_s_set"] = config.fig2_n_s;
    choices.push_back("n_s_set");
    m["di_pixels"] = config.di_pixels;
    for (double n : config.fig2_n_s) {
      RunConfig c = config;
      c.n_s = n;
      add(label("qfi_ns", n) + ".csv", cmd_qfi(c), {{"curve", "qfi"}, {"n_s", n}});
      add(label("di_ns", n) + ".csv", cmd_bound(c, Scheme::DirectImaging, config.di_pixels),
          {{"curve", "di"}, {"n_s", n}, {"pixels", config.di_pixels}});
    }
  } else if (id == 4) {
    m["n_s"] = config.n_s;
    m["q_set"] = config.q_set;
    for (int q : config.q_set) {
      if (q != 5) choices.push_back(label("Q=", q));
    }
    m["di_pixels"] = config.di_pixels;
    m["di_companion_pixels"] = config.di_companion_pixels;
    choices.push_back(label("P_d=", config.di_companion_pixels));
    add("qfi.csv", cmd_qfi(config), {{"curve", "qfi"}});
    for (int q : config.q_set) {
      add(label("spade_q", q) + ".csv", cmd_bound(config, Scheme::Spade, q),
          {{"curve", "spade"}, {"q", q}});
    }
    for (int p : {config.di_pixels, config.di_companion_pixels}) {
      add(label("di_p", p) + ".csv", cmd_bound(config, Scheme::DirectImaging, p),
          {{"curve", "di"}, {"pixels", p}});
    }
  } else if (id == 6) {
    m["n_s"] = config.n_s;
    m["p_set"] = config.p_set;
    for (int p : config.p_set) {
      if (p != 40) choices.push_back(label("P=", p));
    }
    m["di_pixels"] = config.di_pixels;
    add("qfi.csv", cmd_qfi(config), {{"curve", "qfi"}});
    for (int p : config.p_set) {
      add(label("sliver_p", p) + ".csv", cmd_bound(config, Scheme::Sliver, p),
          {{"curve", "sliver"}, {"pixels", p}, {"columns_sym_asym", true}});
    }
    add(label("di_p", config.di_pixels) + ".csv",
        cmd_bound(config, Scheme::DirectImaging, config.di_pixels),
        {{"curve", "di"}, {"pixels", config.di_pixels}});
  } else {
    throw UsageError("--id", "figure must be 2, 4 or 6");
  }
  m["curves"] = curves;
  m["reproduction_choices"] = choices;
  return bundle;
}

std::filesystem::path write_figure(int id, const FigureBundle& bundle, const RunConfig& config) {
  const std::filesystem::path dir = config.out / ("fig" + std::to_string(id));
  std::filesystem::create_directories(dir);
  for (const auto& [file, table] : bundle.curves) {
    ordered_json manifest = manifest_for(config, "reproduce-figure");
    manifest["figure"] = id;
    manifest["file"] = file;
    write_csv(dir / file, table, manifest);
  }
  std::ofstream out(dir / "manifest.json");
  if (!out) throw Error("cannot write " + (dir / "manifest.json").string());
  out << bundle.manifest.dump(2) << '\n';
  return dir;
}

SimulationSummary cmd_simulate(const RunConfig& config) {
  config.validate_simulation();
  const Scene scene = make_scene(config.n_s, config.sim_d, psf_for(config));
  SchemeParams params;
  params.scheme = config.sim_scheme;
  params.q_max = config.q_max;
  params.geometry = {config.width_sigmas * scene.psf.sigma(), config.pixels_for(config.sim_scheme)};

  const std::vector<TrialRecord> records = simulate_batch(scene, params, config.seed, config.trials);
  std::filesystem::create_directories(config.out);
  if (config.write_records) {
    const std::string head = "qlimit " QLIMIT_VERSION " manifest " +
                             manifest_for(config, "simulate").dump();
    write_records_csv(config.out / "records.csv", records, {head});
    write_records_sidecar(config.out / "records.json", scene, params, config.seed, config.trials);
  }

  const MomentSet analytic = analytic_moments(scene, params);
  const EmpiricalMoments emp = empirical_moments(records);
  const MomentComparison cmp = compare_moments(emp, analytic);

  SimulationSummary s;
  ordered_json& j = s.json;
  j["tool"] = "qlimit";
  j["version"] = QLIMIT_VERSION;
  j["config"] = config.to_json();
  j["config"].erase("out");
  ordered_json comps = ordered_json::array();
  for (std::size_t i = 0; i < analytic.size(); ++i) {
    const auto k = static_cast<Eigen::Index>(i);
    comps.push_back({{"block", analytic.labels[i].block},
                     {"index", analytic.labels[i].index},
                     {"analytic_mean", analytic.mean(k)},
                     {"empirical_mean", emp.mean(k)},
                     {"mean_stderr", emp.mean_se(k)},
                     {"analytic_variance", analytic.cov(k, k)},
                     {"empirical_variance", emp.cov(k, k)},
                     {"variance_stderr", emp.cov_se(k, k)}});
  }
  const bool moments_ok = cmp.pass(kMeanGate, kCovGate);
  j["moments"] = {{"components", comps},
                  {"max_mean_z", cmp.max_mean_z},
                  {"max_cov_z", cmp.max_cov_z},
                  {"max_cross_block_z", cmp.max_cross_block_z},
                  {"skipped_cov_entries", cmp.skipped_cov_entries},
                  {"mean_gate", kMeanGate},
                  {"cov_gate", kCovGate},
                  {"pass", moments_ok}};
  s.pass = moments_ok;

  if (config.estimate) {
    const MlBenchmark b = ml_benchmark(scene, params, config.estimates,
                                       config.records_per_estimate, config.seed);
    const double lo = 0.95;
    const double hi = config.sim_scheme == Scheme::Spade ? 1.3 : std::numeric_limits<double>::infinity();
    const bool ok = b.ratio >= lo && b.ratio <= hi;
    ordered_json e = {{"estimates", b.estimates},
                      {"records_per_estimate", b.records_per_estimate},
                      {"mse", b.mse},
                      {"bias", b.bias},
                      {"qcrb", b.qcrb},
                      {"mse_over_qcrb", b.ratio},
                      {"boundary_hits", b.boundary_hits},
                      {"gate_min", lo}};
    if (std::isfinite(hi)) e["gate_max"] = hi;
    e["pass"] = ok;
    j["estimation"] = e;
    s.pass = s.pass && ok;
  }
  j["pass"] = s.pass;

  std::ofstream out(config.out / "summary.json");
  if (!out) throw Error("cannot write " + (config.out / "summary.json").string());
  out << j.dump(2) << '\n';
  return s;
}

namespace {

struct Overrides {
  std::string config;
  double n_s = 0, sigma = 0, d_min = 0, d_max = 0, d = 0;
  int d_steps = 0, q_max = 0, pixels = 0;
  double width = 0;
  std::string seed;
  std::string out;
  std::string psf_grid;
  std::string scheme;
  std::uint64_t trials = 0, estimates = 0, records = 0;
  bool estimate = false;
  bool no_records = false;
  int fig = 0;
};

struct Options {
  CLI::Option* config = nullptr;
  CLI::Option* n_s = nullptr;
  CLI::Option* sigma = nullptr;
  CLI::Option* d_min = nullptr;
  CLI::Option* d_max = nullptr;
  CLI::Option* d_steps = nullptr;
  CLI::Option* q_max = nullptr;
  CLI::Option* pixels = nullptr;
  CLI::Option* width = nullptr;
  CLI::Option* seed = nullptr;
  CLI::Option* out = nullptr;
  CLI::Option* psf_grid = nullptr;
};

Options add_common(CLI::App* app, Overrides& o) {
  Options opt;
  opt.config = app->add_option("--config", o.config, "JSON config file");
  opt.n_s = app->add_option("--ns", o.n_s, "mean photon number per source");
  opt.sigma = app->add_option("--sigma", o.sigma, "Gaussian PSF half-width");
  opt.d_min = app->add_option("--d-min", o.d_min, "first d / sigma");
  opt.d_max = app->add_option("--d-max", o.d_max, "last d / sigma");
  opt.d_steps = app->add_option("--d-steps", o.d_steps, "number of d points");
  opt.q_max = app->add_option("--q-max", o.q_max, "highest HG mode index Q");
  opt.pixels = app->add_option("--pixels", o.pixels, "pixels (P_d, or P per arm)");
  opt.width = app->add_option("--width-sigmas", o.width, "detector width / sigma");
  opt.seed = app->add_option("--seed", o.seed, "master RNG seed");
  opt.out = app->add_option("--out", o.out, "output directory");
  opt.psf_grid = app->add_option("--psf-grid", o.psf_grid, "sampled PSF grid CSV (qfi only)");
  return opt;
}

RunConfig build_config(const Options& opt, const Overrides& o) {
  RunConfig c = opt.config->count() ? load_config(o.config) : RunConfig{};
  if (opt.n_s->count()) c.n_s = o.n_s;
  if (opt.sigma->count()) c.sigma = o.sigma;
  if (opt.d_min->count()) c.d_min = o.d_min;
  if (opt.d_max->count()) c.d_max = o.d_max;
  if (opt.d_steps->count()) c.d_steps = o.d_steps;
  if (opt.q_max->count()) c.q_max = o.q_max;
  if (opt.pixels->count()) c.pixels = o.pixels;
  if (opt.width->count()) c.width_sigmas = o.width;
  if (opt.seed->count()) c.seed = parse_seed(o.seed, "--seed");
  if (opt.out->count()) c.out = o.out;
  if (opt.psf_grid->count()) c.psf_grid = o.psf_grid;
  return c;
}

}  // namespace

int run(int argc, char** argv) {
  CLI::App app{"Quantum and classical limits for two-point separation estimation", "qlimit"};
  app.set_version_flag("--version", std::string("qlimit ") + QLIMIT_VERSION);
  app.require_subcommand(1);
  Overrides o;

  CLI::App* qfi_cmd = app.add_subcommand("qfi", "quantum Fisher information sweep");
  const Options qfi_opt = add_common(qfi_cmd, o);

  CLI::App* bound_cmd = app.add_subcommand("bound", "moment bound on the Fisher information");
  const Options bound_opt = add_common(bound_cmd, o);
  bound_cmd->add_option("--scheme", o.scheme, "di, spade or sliver")
      ->required()
      ->check(CLI::IsMember({"di", "spade", "sliver"}));

  CLI::App* fig_cmd = app.add_subcommand("reproduce-figure", "write the curves of a figure");
  const Options fig_opt = add_common(fig_cmd, o);
  fig_cmd->add_option("--id", o.fig, "figure: 2, 4 or 6")->required()->check(CLI::IsMember({2, 4, 6}));

  CLI::App* sim_cmd = app.add_subcommand("simulate", "Monte Carlo moments and ML benchmark");
  const Options sim_opt = add_common(sim_cmd, o);
  CLI::Option* sim_scheme = sim_cmd->add_option("--scheme", o.scheme, "di, spade or sliver")
                                ->check(CLI::IsMember({"di", "spade", "sliver"}));
  CLI::Option* sim_d = sim_cmd->add_option("--d", o.d, "true d / sigma");
  CLI::Option* sim_trials = sim_cmd->add_option("--trials", o.trials, "trials for the moment check");
  CLI::Option* sim_est = sim_cmd->add_flag("--estimate", o.estimate, "run the ML benchmark");
  CLI::Option* sim_nest = sim_cmd->add_option("--estimates", o.estimates, "ML estimates");
  CLI::Option* sim_rec = sim_cmd->add_option("--records", o.records, "records per ML estimate");
  CLI::Option* sim_norec = sim_cmd->add_flag("--no-records", o.no_records, "skip records.csv");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (qfi_cmd->parsed()) {
      const RunConfig c = build_config(qfi_opt, o);
      std::filesystem::create_directories(c.out);
      write_csv(c.out / "qfi.csv", cmd_qfi(c), manifest_for(c, "qfi"));
      std::cout << (c.out / "qfi.csv").string() << '\n';
    } else if (bound_cmd->parsed()) {
      const RunConfig c = build_config(bound_opt, o);
      const Scheme scheme = parse_scheme(o.scheme);
      const int param = scheme == Scheme::Spade ? c.q_max : c.pixels_for(scheme);
      std::filesystem::create_directories(c.out);
      const auto path = c.out / ("bound_" + o.scheme + ".csv");
      ordered_json manifest = manifest_for(c, "bound");
      manifest["scheme"] = o.scheme;
      manifest["param"] = param;
      manifest["d_zero_replaced_by"] = kZeroSubstitute;
      write_csv(path, cmd_bound(c, scheme, param), manifest);
      std::cout << path.string() << '\n';
    } else if (fig_cmd->parsed()) {
      const RunConfig c = build_config(fig_opt, o);
      std::cout << write_figure(o.fig, reproduce_figure(o.fig, c), c).string() << '\n';
    } else if (sim_cmd->parsed()) {
      RunConfig c = build_config(sim_opt, o);
      if (sim_scheme->count()) c.sim_scheme = parse_scheme(o.scheme);
      if (sim_d->count()) c.sim_d = o.d;
      if (sim_trials->count()) c.trials = o.trials;
      if (sim_est->count()) c.estimate = true;
      if (sim_nest->count()) c.estimates = o.estimates;
      if (sim_rec->count()) c.records_per_estimate = o.records;
      if (sim_norec->count()) c.write_records = false;
      if (sim_trials->count() && o.trials < 2) {
        throw UsageError("--trials", "must be >= 2");
      }
      const SimulationSummary s = cmd_simulate(c);
      std::cout << s.json["moments"]["max_mean_z"].get<double>() << ' '
                << s.json["moments"]["max_cov_z"].get<double>() << ' '
                << (s.pass ? "pass" : "FAIL") << '\n';
      return s.pass ? 0 : 1;
    }
  } catch (const UsageError& e) {
    std::cerr << "qlimit: usage error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "qlimit: error: " << e.what() << '\n';
    return 3;
  }
  return 0;
}

}  // namespace qlimit::cli
