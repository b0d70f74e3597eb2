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
#include <map>
#include <vector>

#include "qlimit/montecarlo.hpp"

namespace qlimit {

// Exact marginal log-likelihood of one outcome at candidate separation d;
// every other parameter is taken from `scene`.
//
// fin-SPADE: within each parity block the counts are Poisson given one
// exponential variate (|S|^2 or |D|^2), and the mixture integral is closed
// form. pix-SLIVER: each arm is an exponential mixture of independent
// Bernoulli clicks, integrated by adaptive Gauss-Legendre. Direct imaging
// has no tractable marginal and throws UnsupportedModelError.
double log_likelihood(const Scene& scene, const SchemeParams& params,
                      const std::vector<std::int64_t>& outcome, double d);

// Summed log-likelihood of a batch as a function of d. Identical outcomes
// (per pix-SLIVER arm) are grouped and evaluated once.
class BatchLikelihood {
 public:
  BatchLikelihood(Scene scene, SchemeParams params, const std::vector<TrialRecord>& records);

  double operator()(double d) const;

  std::size_t records() const { return records_; }
  std::size_t unique_patterns() const;
  const Scene& scene() const { return scene_; }

 private:
  using Pattern = std::vector<std::int64_t>;

  Scene scene_;
  SchemeParams params_;
  std::size_t records_ = 0;
  // fin-SPADE: whole count vectors. pix-SLIVER: clicked pixel indices per arm.
  std::map<Pattern, std::size_t> spade_;
  std::map<Pattern, std::size_t> sym_;
  std::map<Pattern, std::size_t> asym_;
};

struct MlEstimate {
  double d = 0.0;
  double log_likelihood = 0.0;
  bool on_boundary = false;  // argmax at (or within tolerance of) an interval end
  bool flat = false;         // all grid values equal; d carries no information
  int evaluations = 0;
};

// Maximizes the batch likelihood on [lo, hi]: a 64-point grid, then golden
// section around the best grid point down to 1e-4 sigma.
MlEstimate ml_estimate(const BatchLikelihood& likelihood, double lo, double hi);

struct MlBenchmark {
  std::size_t estimates = 0;
  std::size_t records_per_estimate = 0;
  double true_d = 0.0;
  double mse = 0.0;
  double bias = 0.0;
  double qcrb = 0.0;  // 1 / (records_per_estimate K_d)
  double ratio = 0.0;  // mse / qcrb
  std::size_t boundary_hits = 0;
  std::vector<double> values;
};

// `estimates` independent ML estimates, each from `records` trials (trial
// indices e * records .. (e + 1) * records - 1 under `seed`), searched on
// [0, 8 sigma].
MlBenchmark ml_benchmark(const Scene& scene, const SchemeParams& params, std::size_t estimates,
                         std::size_t records, std::uint64_t seed);

}  // namespace qlimit
