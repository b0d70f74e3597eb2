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

#include "qlimit/likelihood.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "qlimit/errors.hpp"
#include "qlimit/quadrature.hpp"

namespace qlimit {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();
constexpr double kTailRelTol = 1e-12;
constexpr double kQuadRelTol = 1e-10;
constexpr int kGridPoints = 64;
constexpr double kGoldenTol = 1e-4;

// x * log(y) with 0 * log(0) = 0.
double xlogy(double x, double log_y) { return x == 0.0 ? 0.0 : x * log_y; }

// log(e^t - 1) for t >= 0.
double log_expm1(double t) { return t > 30.0 ? t + std::log1p(-std::exp(-t)) : std::log(std::expm1(t)); }

Scene with_d(const Scene& scene, double d) {
  if (!(d >= 0.0) || !std::isfinite(d)) {
    throw ConfigurationError("likelihood: candidate d must be finite and >= 0");
  }
  Scene s = scene;
  s.d = d;
  return s;
}

void require_tractable(const SchemeParams& params) {
  if (params.scheme == Scheme::DirectImaging) {
    throw UnsupportedModelError(
        "direct-imaging likelihood needs a 3D mixture integral and is not provided");
  }
}

std::vector<double> log_poisson_weights(const Scene& scene, int q_max) {
  const SpadeWeights w = weights_spade(scene, q_max);
  std::vector<double> out(w.f.size());
  const double log_kappa = w.kappa > 0.0 ? std::log(w.kappa) : kNegInf;
  for (std::size_t q = 0; q < out.size(); ++q) {
    const double dq = static_cast<double>(q);
    out[q] = q == 0 ? -w.kappa : dq * log_kappa - w.kappa - std::lgamma(dq + 1.0);
  }
  return out;
}

// Log-likelihood of one fin-SPADE count vector given log f_q and block sums.
double spade_log_likelihood(const std::vector<std::int64_t>& counts, const std::vector<double>& log_f,
                            const double block_f[2], double n_s) {
  const double m = 2.0 * n_s;
  double out = 0.0;
  double total[2] = {0.0, 0.0};
  for (std::size_t q = 0; q < counts.size(); ++q) {
    const double n = static_cast<double>(counts[q]);
    if (n < 0.0) throw ConfigurationError("likelihood: negative count");
    if (n > 0.0 && log_f[q] == kNegInf) return kNegInf;
    out += xlogy(n, log_f[q]) - std::lgamma(n + 1.0);
    total[q % 2] += n;
  }
  for (int b = 0; b < 2; ++b) {
    const double n = total[b];
    if (m == 0.0) {
      if (n > 0.0) return kNegInf;
      continue;
    }
    out += std::lgamma(n + 1.0) + n * std::log(m) - (n + 1.0) * std::log1p(m * block_f[b]);
  }
  return out;
}

// Log marginal probabilities of click patterns in one pix-SLIVER arm.
// f: pixel coefficients of the arm; patterns: clicked pixel indices.
std::vector<double> arm_log_likelihoods(const std::vector<double>& f,
                                        const std::vector<std::vector<std::int64_t>>& patterns,
                                        double n_s) {
  const double m = 2.0 * n_s;
  double f_total = 0.0;
  for (double v : f) f_total += v;

  std::vector<double> out(patterns.size(), 0.0);
  // Patterns that need the mixture integral.
  std::vector<std::size_t> hard;
  std::vector<double> c_tail;
  for (std::size_t k = 0; k < patterns.size(); ++k) {
    const auto& clicked = patterns[k];
    if (clicked.empty()) {
      out[k] = -std::log1p(m * f_total / 4.0);
      continue;
    }
    double f_clicked = 0.0;
    bool impossible = m == 0.0;
    for (auto p : clicked) {
      const double fp = f[static_cast<std::size_t>(p)];
      if (!(fp > 0.0)) impossible = true;
      f_clicked += fp;
    }
    if (impossible) {
      out[k] = kNegInf;
      continue;
    }
    hard.push_back(k);
    c_tail.push_back(1.0 + m * std::max(0.0, f_total - f_clicked) / 4.0);
  }
  if (hard.empty()) return out;

  // In u = |X|^2 / m the integrand is
  //   exp(-u (1 + m F / 4)) prod_{clicked} (exp(m f_p u / 4) - 1).
  const double decay = 1.0 + m * f_total / 4.0;
  std::vector<double> log_g(f.size());
  auto integrand = [&](double u, double* values) {
    for (std::size_t p = 0; p < f.size(); ++p) {
      log_g[p] = f[p] > 0.0 ? log_expm1(m * f[p] * u / 4.0) : kNegInf;
    }
    for (std::size_t i = 0; i < hard.size(); ++i) {
      double e = -u * decay;
      for (auto p : patterns[hard[i]]) e += log_g[static_cast<std::size_t>(p)];
      values[i] = std::exp(e);
    }
  };

  double lo = 0.0;
  double hi = 20.0;  // |X|^2 up to 40 n_s
  std::vector<double> acc(hard.size(), 0.0);
  for (int round = 0; round < 40; ++round) {
    const std::vector<double> part =
        integrate_adaptive_vector(integrand, hard.size(), lo, hi, kQuadRelTol);
    bool converged = true;
    for (std::size_t i = 0; i < hard.size(); ++i) {
      acc[i] += part[i];
      // The clicked factors are bounded by 1, so the tail beyond hi is at
      // most exp(-c hi) / c.
      const double tail = std::exp(-c_tail[i] * hi) / c_tail[i];
      if (!(tail < kTailRelTol * acc[i])) converged = false;
    }
    if (converged) {
      for (std::size_t i = 0; i < hard.size(); ++i) out[hard[i]] = std::log(acc[i]);
      return out;
    }
    lo = hi;
    hi *= 2.0;
  }
  throw QuadratureError("pix-SLIVER likelihood: mixture tail did not converge");
}

std::vector<std::int64_t> clicked(const std::vector<std::int64_t>& outcome, std::size_t offset,
                                  std::size_t n) {
  std::vector<std::int64_t> out;
  for (std::size_t p = 0; p < n; ++p) {
    const auto v = outcome[offset + p];
    if (v != 0 && v != 1) throw ConfigurationError("likelihood: clicks must be 0 or 1");
    if (v == 1) out.push_back(static_cast<std::int64_t>(p));
  }
  return out;
}

}  // namespace

BatchLikelihood::BatchLikelihood(Scene scene, SchemeParams params,
                                 const std::vector<TrialRecord>& records)
    : scene_(std::move(scene)), params_(std::move(params)), records_(records.size()) {
  require_tractable(params_);
  scene_.validate();
  params_.validate();
  const std::size_t dim = params_.dimension();
  for (const auto& r : records) {
    if (r.scheme != params_.scheme || r.outcome.size() != dim) {
      throw LabelMismatchError("likelihood: record does not match the scheme");
    }
    if (params_.scheme == Scheme::Spade) {
      ++spade_[r.outcome];
    } else {
      const std::size_t n = dim / 2;
      ++sym_[clicked(r.outcome, 0, n)];
      ++asym_[clicked(r.outcome, n, n)];
    }
  }
}

std::size_t BatchLikelihood::unique_patterns() const {
  return spade_.size() + sym_.size() + asym_.size();
}

double BatchLikelihood::operator()(double d) const {
  const Scene s = with_d(scene_, d);
  if (params_.scheme == Scheme::Spade) {
    const std::vector<double> log_f = log_poisson_weights(s, params_.q_max);
    double block_f[2] = {0.0, 0.0};
    for (std::size_t q = 0; q < log_f.size(); ++q) block_f[q % 2] += std::exp(log_f[q]);
    double total = 0.0;
    for (const auto& [counts, mult] : spade_) {
      const double l = spade_log_likelihood(counts, log_f, block_f, s.n_s);
      if (l == kNegInf) return kNegInf;
      total += static_cast<double>(mult) * l;
    }
    return total;
  }

  const SliverCoefficients c = coefficients_sliver(s, params_.geometry);
  double total = 0.0;
  auto arm = [&](const std::vector<double>& f, const std::map<Pattern, std::size_t>& groups) {
    std::vector<Pattern> patterns;
    patterns.reserve(groups.size());
    for (const auto& g : groups) patterns.push_back(g.first);
    const std::vector<double> logs = arm_log_likelihoods(f, patterns, s.n_s);
    std::size_t i = 0;
    for (const auto& g : groups) {
      if (logs[i] == kNegInf) {
        total = kNegInf;
        return;
      }
      total += static_cast<double>(g.second) * logs[i++];
    }
  };
  arm(c.f_sym, sym_);
  if (total == kNegInf) return total;
  arm(c.f_asym, asym_);
  return total;
}

double log_likelihood(const Scene& scene, const SchemeParams& params,
                      const std::vector<std::int64_t>& outcome, double d) {
  TrialRecord r;
  r.scheme = params.scheme;
  r.outcome = outcome;
  r.scene = scene;
  return BatchLikelihood(scene, params, {r})(d);
}

MlEstimate ml_estimate(const BatchLikelihood& likelihood, double lo, double hi) {
  if (!(lo >= 0.0) || !(hi > lo) || !std::isfinite(hi)) {
    throw ConfigurationError("ml_estimate: search interval must satisfy 0 <= lo < hi");
  }
  if (likelihood.records() == 0) throw ConfigurationError("ml_estimate: no records");
  const double tol = kGoldenTol * likelihood.scene().psf.sigma();

  MlEstimate est;
  std::vector<double> grid(kGridPoints);
  std::vector<double> values(kGridPoints);
  for (int i = 0; i < kGridPoints; ++i) {
    grid[static_cast<std::size_t>(i)] = lo + (hi - lo) * i / (kGridPoints - 1);
    values[static_cast<std::size_t>(i)] = likelihood(grid[static_cast<std::size_t>(i)]);
  }
  est.evaluations = kGridPoints;
  const auto best_it = std::max_element(values.begin(), values.end());
  const auto best = static_cast<std::size_t>(best_it - values.begin());
  est.d = grid[best];
  est.log_likelihood = values[best];
  const auto [min_it, max_it] = std::minmax_element(values.begin(), values.end());
  if (*min_it == *max_it) {
    est.flat = true;
    est.on_boundary = true;
    return est;
  }

  // Golden section on the bracket around the best grid point.
  const double r = (std::sqrt(5.0) - 1.0) / 2.0;
  double a = grid[best == 0 ? 0 : best - 1];
  double b = grid[std::min<std::size_t>(best + 1, grid.size() - 1)];
  double x1 = b - r * (b - a);
  double x2 = a + r * (b - a);
  double f1 = likelihood(x1);
  double f2 = likelihood(x2);
  est.evaluations += 2;
  while (b - a > tol) {
    if (f1 >= f2) {
      b = x2;
      x2 = x1;
      f2 = f1;
      x1 = b - r * (b - a);
      f1 = likelihood(x1);
    } else {
      a = x1;
      x1 = x2;
      f1 = f2;
      x2 = a + r * (b - a);
      f2 = likelihood(x2);
    }
    ++est.evaluations;
  }
  for (auto [x, f] : {std::pair{x1, f1}, std::pair{x2, f2}}) {
    if (f > est.log_likelihood) {
      est.d = x;
      est.log_likelihood = f;
    }
  }
  est.on_boundary = est.d - lo <= tol || hi - est.d <= tol;
  return est;
}

MlBenchmark ml_benchmark(const Scene& scene, const SchemeParams& params, std::size_t estimates,
                         std::size_t records, std::uint64_t seed) {
  require_tractable(params);
  if (estimates < 1 || records < 1) {
    throw ConfigurationError("ml_benchmark: estimates and records must be >= 1");
  }
  const TrialSimulator sim(scene, params);
  const double hi = 8.0 * scene.psf.sigma();
  MlBenchmark out;
  out.estimates = estimates;
  out.records_per_estimate = records;
  out.true_d = scene.d;
  out.values.resize(estimates);
  std::vector<char> boundary(estimates, 0);
  parallel_for(estimates, [&](std::size_t e) {
    std::vector<TrialRecord> batch(records);
    for (std::size_t i = 0; i < records; ++i) batch[i] = sim.run(seed, e * records + i);
    const MlEstimate est = ml_estimate(BatchLikelihood(scene, params, batch), 0.0, hi);
    out.values[e] = est.d;
    boundary[e] = est.on_boundary ? 1 : 0;
  });
  double sq = 0.0;
  double sum = 0.0;
  for (std::size_t e = 0; e < estimates; ++e) {
    const double err = out.values[e] - scene.d;
    sq += err * err;
    sum += err;
    out.boundary_hits += static_cast<std::size_t>(boundary[e]);
  }
  out.mse = sq / static_cast<double>(estimates);
  out.bias = sum / static_cast<double>(estimates);
  const CramerRaoBound bound = qcrb(scene, static_cast<std::int64_t>(records));
  out.qcrb = bound.infinite ? std::numeric_limits<double>::infinity() : bound.value;
  out.ratio = out.mse / out.qcrb;
  return out;
}

}  // namespace qlimit
