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

#include <complex>
#include <cstdint>
#include <functional>
#include <random>
#include <vector>

#include <Eigen/Dense>

#include "qlimit/fisher.hpp"
#include "qlimit/measurement.hpp"
#include "qlimit/quantum_limit.hpp"

namespace qlimit {

// Complex field amplitudes of the two sources for one trial.
struct SourceAmplitudes {
  std::complex<double> a_plus;
  std::complex<double> a_minus;

  std::complex<double> s() const { return a_plus + a_minus; }
  std::complex<double> d() const { return a_plus - a_minus; }
};

using Rng = std::mt19937_64;

// Circular complex Gaussian amplitudes with E|a|^2 = n_s each.
SourceAmplitudes sample_amplitudes(double n_s, Rng& rng);

// Seed of trial `trial` under `master`: splitmix64 of the pair, so any
// subset of trials can be regenerated independently and in any order.
std::uint64_t trial_seed(std::uint64_t master, std::uint64_t trial);

struct SchemeParams {
  Scheme scheme = Scheme::Spade;
  int q_max = 5;              // fin-SPADE
  DetectorGeometry geometry;  // direct imaging (P_d) and pix-SLIVER (P per arm)

  // Length of the outcome vector.
  std::size_t dimension() const;
  void validate() const;
};

MomentSet analytic_moments(const Scene& scene, const SchemeParams& params);

struct TrialRecord {
  Scheme scheme = Scheme::Spade;
  std::vector<std::int64_t> outcome;  // counts, or 0/1 clicks
  Scene scene;
  std::uint64_t seed = 0;  // master seed
  std::uint64_t trial = 0;
};

// Draws trials for one scene and scheme. Coefficients are computed once at
// construction; run() is const and safe to call from several threads.
class TrialSimulator {
 public:
  TrialSimulator(Scene scene, SchemeParams params);

  TrialRecord run(std::uint64_t master_seed, std::uint64_t trial) const;
  void outcome(Rng& rng, std::int64_t* out) const;

  const Scene& scene() const { return scene_; }
  const SchemeParams& params() const { return params_; }

 private:
  Scene scene_;
  SchemeParams params_;
  PixelCoefficients di_;
  SpadeWeights spade_;
  SliverCoefficients sliver_;
};

TrialRecord simulate_trial(const Scene& scene, const SchemeParams& params,
                           std::uint64_t master_seed, std::uint64_t trial);

// Trials first_trial .. first_trial + count - 1, in order.
std::vector<TrialRecord> simulate_batch(const Scene& scene, const SchemeParams& params,
                                        std::uint64_t master_seed, std::uint64_t count,
                                        std::uint64_t first_trial = 0);

// Sample moments of a homogeneous batch with blocked-jackknife standard
// errors (at most 200 blocks). compare_moments never lets an error drop
// below the normal-theory value implied by the analytic moments, since the
// jackknife underestimates it for coordinates that rarely fire.
struct EmpiricalMoments {
  std::size_t trials = 0;
  Eigen::VectorXd mean;
  Eigen::VectorXd mean_se;
  Eigen::MatrixXd cov;
  Eigen::MatrixXd cov_se;
};

EmpiricalMoments empirical_moments(const std::vector<TrialRecord>& records);

struct MomentComparison {
  double max_mean_z = 0.0;
  double max_cov_z = 0.0;
  // Largest |z| among covariances between different label blocks whose
  // analytic value is zero (pix-SLIVER cross-arm entries).
  double max_cross_block_z = 0.0;
  // Covariance entries left out because one coordinate is expected to fire
  // fewer than kMinExpectedEvents times in the whole batch.
  std::size_t skipped_cov_entries = 0;

  bool pass(double mean_gate, double cov_gate) const {
    return max_mean_z <= mean_gate && max_cov_z <= cov_gate && max_cross_block_z <= cov_gate;
  }
};

inline constexpr double kMinExpectedEvents = 10.0;

MomentComparison compare_moments(const EmpiricalMoments& empirical, const MomentSet& analytic);

// Runs body(i) for i in [0, n) on up to max_threads() workers.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& body);

// QLIMIT_THREADS if set to a positive integer, else the hardware count.
unsigned max_threads();

}  // namespace qlimit
