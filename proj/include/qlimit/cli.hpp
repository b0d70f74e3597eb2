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

#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "qlimit/fisher.hpp"

namespace qlimit::cli {

// Every tunable of the tool. JSON config fields (dotted paths below) map
// one-to-one onto members; command-line flags override them.
struct RunConfig {
  double n_s = 1.5;     // n_s
  double sigma = 1.0;   // sigma
  // psf_grid: sampled PSF CSV; replaces the Gaussian PSF (and sigma) when
  // set. Only the QFI supports it.
  std::filesystem::path psf_grid;
  double d_min = 0.0;   // d_grid.min, in units of sigma
  double d_max = 6.0;   // d_grid.max
  int d_steps = 121;    // d_grid.steps

  int q_max = 5;                            // spade.q_max
  std::vector<int> q_set = {1, 2, 5};       // spade.q_set
  double width_sigmas = 17.0;               // detector.width_sigmas
  std::optional<int> pixels;                // detector.pixels
  int di_pixels = 50;                       // detector.di_pixels
  int di_companion_pixels = 100;            // detector.di_companion_pixels
  int sliver_pixels = 40;                   // sliver.pixels
  std::vector<int> p_set = {2, 6, 40};      // sliver.p_set
  std::vector<double> fig2_n_s = {0.1, 1.5, 5.0};  // fig2.n_s_set

  Scheme sim_scheme = Scheme::Spade;   // simulate.scheme
  double sim_d = 2.0;                  // simulate.d, in units of sigma
  std::uint64_t trials = 100000;       // simulate.trials
  std::uint64_t seed = 12345;          // simulate.seed
  bool estimate = false;               // simulate.estimate
  std::uint64_t estimates = 200;       // simulate.estimates
  std::uint64_t records_per_estimate = 1000;  // simulate.records_per_estimate
  bool write_records = true;           // simulate.write_records

  std::filesystem::path out = ".";  // out

  // Throws UsageError naming the offending field.
  void validate() const;
  // validate() plus the simulate.* fields.
  void validate_simulation() const;

  // d / sigma sample points, strictly increasing.
  std::vector<double> d_grid() const;

  // Pixel count used by `bound` for the scheme (the --pixels override, or
  // the scheme default).
  int pixels_for(Scheme scheme) const;

  nlohmann::ordered_json to_json() const;
};

// Applies the fields present in `j` on top of `config`.
void apply_json(RunConfig& config, const nlohmann::json& j);
RunConfig load_config(const std::filesystem::path& path);

// Parses a decimal 64-bit seed; UsageError on anything else.
std::uint64_t parse_seed(const std::string& text, const std::string& field);

// A CSV table whose cells are already formatted (numbers with 17
// significant digits).
struct Table {
  std::vector<std::string> columns;
  std::vector<std::vector<std::string>> rows;

  double number(std::size_t row, const std::string& column) const;
};

std::string format_number(double v);

// Writes `# qlimit <version> manifest <json>` followed by the table.
void write_csv(const std::filesystem::path& path, const Table& table,
               const nlohmann::ordered_json& manifest);

Table cmd_qfi(const RunConfig& config);

// param is Q for fin-SPADE and the pixel count for direct imaging and
// pix-SLIVER.
Table cmd_bound(const RunConfig& config, Scheme scheme, int param);

struct FigureBundle {
  std::vector<std::pair<std::string, Table>> curves;  // file name, data
  nlohmann::ordered_json manifest;
};

FigureBundle reproduce_figure(int id, const RunConfig& config);
// Writes the bundle to <out>/fig<id>/ and returns the directory.
std::filesystem::path write_figure(int id, const FigureBundle& bundle, const RunConfig& config);

struct SimulationSummary {
  nlohmann::ordered_json json;
  bool pass = false;
};

// Simulates, writes records (<out>/records.csv, records.json) and
// <out>/summary.json.
SimulationSummary cmd_simulate(const RunConfig& config);

// Entry point of the qlimit executable. Returns the process exit code:
// 0 success, 1 a simulation gate failed, 2 usage error, 3 other error.
int run(int argc, char** argv);

}  // namespace qlimit::cli
