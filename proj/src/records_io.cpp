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

#include "qlimit/records_io.hpp"

#include <charconv>
#include <fstream>
#include <sstream>
#include <string>

#include "json.hpp"
#include "qlimit/errors.hpp"

namespace qlimit {

namespace {

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string field;
  while (std::getline(ss, field, ',')) out.push_back(field);
  return out;
}

template <class T>
T parse_int(const std::string& s, const char* what) {
  T v{};
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) {
    throw ConfigurationError(std::string("record CSV: bad ") + what + " '" + s + "'");
  }
  return v;
}

}  // namespace

void write_records_csv(const std::filesystem::path& path, const std::vector<TrialRecord>& records,
                       const std::vector<std::string>& header) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot open " + path.string() + " for writing");
  for (const auto& h : header) out << "# " << h << '\n';
  out << "scheme,seed,trial,component_index,value\n";
  std::string buf;
  for (const auto& r : records) {
    const std::string prefix = std::string(to_string(r.scheme)) + ',' + std::to_string(r.seed) +
                               ',' + std::to_string(r.trial) + ',';
    for (std::size_t i = 0; i < r.outcome.size(); ++i) {
      buf.clear();
      buf += prefix;
      buf += std::to_string(i);
      buf += ',';
      buf += std::to_string(r.outcome[i]);
      buf += '\n';
      out << buf;
    }
  }
  if (!out) throw Error("write failed: " + path.string());
}

std::vector<TrialRecord> read_records_csv(const std::filesystem::path& path, const Scene& scene) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open " + path.string());
  std::vector<TrialRecord> out;
  std::string line;
  bool header_seen = false;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    if (!header_seen) {
      header_seen = true;
      if (line.rfind("scheme,", 0) == 0) continue;
    }
    const auto f = split(line);
    if (f.size() != 5) throw ConfigurationError("record CSV: expected 5 fields: " + line);
    const Scheme scheme = parse_scheme(f[0]);
    const auto seed = parse_int<std::uint64_t>(f[1], "seed");
    const auto trial = parse_int<std::uint64_t>(f[2], "trial");
    const auto index = parse_int<std::size_t>(f[3], "component_index");
    const auto value = parse_int<std::int64_t>(f[4], "value");
    if (out.empty() || out.back().trial != trial || out.back().seed != seed ||
        out.back().scheme != scheme) {
      TrialRecord r;
      r.scheme = scheme;
      r.scene = scene;
      r.seed = seed;
      r.trial = trial;
      out.push_back(std::move(r));
    }
    if (index != out.back().outcome.size()) {
      throw ConfigurationError("record CSV: components out of order in trial " + f[2]);
    }
    out.back().outcome.push_back(value);
  }
  return out;
}

void write_records_sidecar(const std::filesystem::path& path, const Scene& scene,
                           const SchemeParams& params, std::uint64_t seed, std::uint64_t trials) {
  nlohmann::ordered_json j;
  j["scheme"] = std::string(to_string(params.scheme));
  j["seed"] = seed;
  j["trials"] = trials;
  j["scene"] = {{"n_s", scene.n_s},
                {"d", scene.d},
                {"psf", scene.psf.is_gaussian() ? "gaussian" : "sampled"},
                {"sigma", scene.psf.sigma()}};
  if (params.scheme == Scheme::Spade) {
    j["q_max"] = params.q_max;
  } else {
    j["geometry"] = {{"width", params.geometry.width}, {"pixels", params.geometry.pixels}};
  }
  j["outcome_dimension"] = params.dimension();
  std::ofstream out(path);
  if (!out) throw Error("cannot open " + path.string() + " for writing");
  out << j.dump(2) << '\n';
}

}  // namespace qlimit
