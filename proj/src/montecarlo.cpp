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

#include "qlimit/montecarlo.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <exception>
#include <limits>
#include <mutex>
#include <thread>

#include "qlimit/errors.hpp"

namespace qlimit {

namespace {

std::uint64_t splitmix64(std::uint64_t z) {
  z += 0x9E3779B97F4A7C15ULL;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

std::int64_t poisson(double mean, Rng& rng) {
  if (!(mean > 0.0)) return 0;
  return std::poisson_distribution<std::int64_t>(mean)(rng);
}

constexpr std::size_t kMaxJackknifeBlocks = 200;

}  // namespace

SourceAmplitudes sample_amplitudes(double n_s, Rng& rng) {
  if (n_s < 0.0 || !std::isfinite(n_s)) {
    throw ConfigurationError("sample_amplitudes: n_s must be finite and >= 0");
  }
  if (n_s == 0.0) return {};
  std::normal_distribution<double> quad(0.0, std::sqrt(0.5 * n_s));
  const double r1 = quad(rng);
  const double i1 = quad(rng);
  const double r2 = quad(rng);
  const double i2 = quad(rng);
  return {{r1, i1}, {r2, i2}};
}

std::uint64_t trial_seed(std::uint64_t master, std::uint64_t trial) {
  return splitmix64(splitmix64(master) ^ trial);
}

std::size_t SchemeParams::dimension() const {
  switch (scheme) {
    case Scheme::DirectImaging:
      return static_cast<std::size_t>(geometry.pixels);
    case Scheme::Spade:
      return static_cast<std::size_t>(q_max) + 1;
    case Scheme::Sliver:
      return 2 * static_cast<std::size_t>(geometry.pixels);
  }
  return 0;
}

void SchemeParams::validate() const {
  if (scheme == Scheme::Spade) {
    if (q_max < 0) throw ConfigurationError("fin-SPADE: q_max must be >= 0");
  } else {
    geometry.validate();
  }
}

MomentSet analytic_moments(const Scene& scene, const SchemeParams& params) {
  switch (params.scheme) {
    case Scheme::DirectImaging:
      return di_moments(scene, params.geometry);
    case Scheme::Spade:
      return spade_moments(scene, params.q_max);
    case Scheme::Sliver:
      return sliver_moments(scene, params.geometry);
  }
  throw UnsupportedModelError("unknown scheme");
}

TrialSimulator::TrialSimulator(Scene scene, SchemeParams params)
    : scene_(std::move(scene)), params_(std::move(params)) {
  scene_.validate();
  params_.validate();
  switch (params_.scheme) {
    case Scheme::DirectImaging:
      di_ = coefficients_di(scene_, params_.geometry);
      break;
    case Scheme::Spade:
      spade_ = weights_spade(scene_, params_.q_max);
      break;
    case Scheme::Sliver:
      sliver_ = coefficients_sliver(scene_, params_.geometry);
      break;
  }
}

void TrialSimulator::outcome(Rng& rng, std::int64_t* out) const {
  const SourceAmplitudes a = sample_amplitudes(scene_.n_s, rng);
  switch (params_.scheme) {
    case Scheme::DirectImaging:
      for (std::size_t p = 0; p < di_.size(); ++p) {
        out[p] = poisson(di_conditional_mean(di_, p, a.a_plus, a.a_minus), rng);
      }
      break;
    case Scheme::Spade:
      for (std::size_t q = 0; q < spade_.f.size(); ++q) {
        out[q] = poisson(spade_conditional_mean(spade_, q, a.s(), a.d()), rng);
      }
      break;
    case Scheme::Sliver: {
      std::uniform_real_distribution<double> u(0.0, 1.0);
      const std::size_t n = sliver_.size();
      const std::complex<double> s = a.s();
      const std::complex<double> d = a.d();
      // A pixel clicks when U < 1 - exp(-I), i.e. when -log1p(-U) < I.
      for (std::size_t p = 0; p < n; ++p) {
        const double i = sliver_conditional_intensity(sliver_.f_sym[p], s);
        out[p] = -std::log1p(-u(rng)) < i ? 1 : 0;
      }
      for (std::size_t p = 0; p < n; ++p) {
        const double i = sliver_conditional_intensity(sliver_.f_asym[p], d);
        out[n + p] = -std::log1p(-u(rng)) < i ? 1 : 0;
      }
      break;
    }
  }
}

TrialRecord TrialSimulator::run(std::uint64_t master_seed, std::uint64_t trial) const {
  TrialRecord r;
  r.scheme = params_.scheme;
  r.scene = scene_;
  r.seed = master_seed;
  r.trial = trial;
  r.outcome.resize(params_.dimension());
  Rng rng(trial_seed(master_seed, trial));
  outcome(rng, r.outcome.data());
  return r;
}

TrialRecord simulate_trial(const Scene& scene, const SchemeParams& params,
                           std::uint64_t master_seed, std::uint64_t trial) {
  return TrialSimulator(scene, params).run(master_seed, trial);
}

std::vector<TrialRecord> simulate_batch(const Scene& scene, const SchemeParams& params,
                                        std::uint64_t master_seed, std::uint64_t count,
                                        std::uint64_t first_trial) {
  const TrialSimulator sim(scene, params);
  std::vector<TrialRecord> out(count);
  parallel_for(count, [&](std::size_t i) { out[i] = sim.run(master_seed, first_trial + i); });
  return out;
}

EmpiricalMoments empirical_moments(const std::vector<TrialRecord>& records) {
  if (records.size() < 2) {
    throw ConfigurationError("empirical_moments: need at least 2 records");
  }
  const TrialRecord& first = records.front();
  const std::size_t k = first.outcome.size();
  for (const auto& r : records) {
    if (r.scheme != first.scheme || r.outcome.size() != k || r.scene.n_s != first.scene.n_s ||
        r.scene.d != first.scene.d) {
      throw ConfigurationError("empirical_moments: records are not from one scheme and scene");
    }
  }
  const std::size_t n = records.size();
  const auto kk = static_cast<Eigen::Index>(k);
  const auto nn = static_cast<Eigen::Index>(n);

  Eigen::MatrixXd x(nn, kk);
  for (Eigen::Index i = 0; i < nn; ++i) {
    for (Eigen::Index j = 0; j < kk; ++j) {
      x(i, j) = static_cast<double>(records[static_cast<std::size_t>(i)].outcome[static_cast<std::size_t>(j)]);
    }
  }
  const Eigen::RowVectorXd shift = x.colwise().mean();
  x.rowwise() -= shift;

  // Block sums of the centered data and of its outer products.
  const std::size_t blocks = std::min(n, kMaxJackknifeBlocks);
  std::vector<Eigen::VectorXd> s1(blocks);
  std::vector<Eigen::MatrixXd> s2(blocks);
  std::vector<double> size(blocks);
  Eigen::VectorXd t1 = Eigen::VectorXd::Zero(kk);
  Eigen::MatrixXd t2 = Eigen::MatrixXd::Zero(kk, kk);
  for (std::size_t b = 0; b < blocks; ++b) {
    const auto lo = static_cast<Eigen::Index>(b * n / blocks);
    const auto hi = static_cast<Eigen::Index>((b + 1) * n / blocks);
    const auto rows = x.middleRows(lo, hi - lo);
    s1[b] = rows.colwise().sum().transpose();
    s2[b] = rows.transpose() * rows;
    size[b] = static_cast<double>(hi - lo);
    t1 += s1[b];
    t2 += s2[b];
  }

  auto estimate = [&](const Eigen::VectorXd& a1, const Eigen::MatrixXd& a2, double m,
                      Eigen::VectorXd& mean, Eigen::MatrixXd& cov) {
    mean = a1 / m;
    cov = (a2 - m * mean * mean.transpose()) / (m - 1.0);
  };

  EmpiricalMoments out;
  out.trials = n;
  Eigen::VectorXd centered_mean;
  estimate(t1, t2, static_cast<double>(n), centered_mean, out.cov);
  out.mean = centered_mean + shift.transpose();

  out.mean_se = Eigen::VectorXd::Zero(kk);
  out.cov_se = Eigen::MatrixXd::Zero(kk, kk);
  if (blocks >= 2) {
    std::vector<Eigen::VectorXd> means(blocks);
    std::vector<Eigen::MatrixXd> covs(blocks);
    Eigen::VectorXd mean_bar = Eigen::VectorXd::Zero(kk);
    Eigen::MatrixXd cov_bar = Eigen::MatrixXd::Zero(kk, kk);
    for (std::size_t b = 0; b < blocks; ++b) {
      estimate(t1 - s1[b], t2 - s2[b], static_cast<double>(n) - size[b], means[b], covs[b]);
      mean_bar += means[b];
      cov_bar += covs[b];
    }
    const double bb = static_cast<double>(blocks);
    mean_bar /= bb;
    cov_bar /= bb;
    for (std::size_t b = 0; b < blocks; ++b) {
      out.mean_se += (means[b] - mean_bar).array().square().matrix();
      out.cov_se += (covs[b] - cov_bar).array().square().matrix();
    }
    const double scale = (bb - 1.0) / bb;
    out.mean_se = (scale * out.mean_se).array().sqrt().matrix();
    out.cov_se = (scale * out.cov_se).array().sqrt().matrix();
  }
  return out;
}

MomentComparison compare_moments(const EmpiricalMoments& e, const MomentSet& a) {
  const auto k = static_cast<Eigen::Index>(a.size());
  if (e.mean.size() != k) {
    throw LabelMismatchError("compare_moments: dimension mismatch");
  }
  const double n = static_cast<double>(e.trials);
  auto z = [](double diff, double se) {
    if (se > 0.0) return std::abs(diff) / se;
    return diff == 0.0 ? 0.0 : std::numeric_limits<double>::infinity();
  };
  MomentComparison c;
  for (Eigen::Index i = 0; i < k; ++i) {
    // Jackknife errors collapse for components that fire a handful of times,
    // so the normal-theory error from the analytic moments acts as a floor.
    const double se = std::max(e.mean_se(i), std::sqrt(a.cov(i, i) / n));
    c.max_mean_z = std::max(c.max_mean_z, z(e.mean(i) - a.mean(i), se));
    for (Eigen::Index j = 0; j <= i; ++j) {
      // A second moment of a coordinate that fires a few times per batch
      // has no usable error estimate.
      if (n * std::min(a.mean(i), a.mean(j)) < kMinExpectedEvents) {
        ++c.skipped_cov_entries;
        continue;
      }
      const double cse = std::max(
          e.cov_se(i, j), std::sqrt((a.cov(i, i) * a.cov(j, j) + a.cov(i, j) * a.cov(i, j)) / n));
      const double zz = z(e.cov(i, j) - a.cov(i, j), cse);
      c.max_cov_z = std::max(c.max_cov_z, zz);
      const auto& li = a.labels[static_cast<std::size_t>(i)];
      const auto& lj = a.labels[static_cast<std::size_t>(j)];
      if (li.block != lj.block && a.cov(i, j) == 0.0) {
        c.max_cross_block_z = std::max(c.max_cross_block_z, zz);
      }
    }
  }
  return c;
}

unsigned max_threads() {
  if (const char* env = std::getenv("QLIMIT_THREADS")) {
    char* end = nullptr;
    const long v = std::strtol(env, &end, 10);
    if (end != env && *end == '\0' && v > 0) return static_cast<unsigned>(v);
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

void parallel_for(std::size_t n, const std::function<void(std::size_t)>& body) {
  const std::size_t workers = std::min<std::size_t>(max_threads(), n);
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) body(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < n; i = next++) {
        try {
          body(i);
        } catch (...) {
          std::lock_guard lock(error_mutex);
          if (!error) error = std::current_exception();
          next = n;
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  if (error) std::rethrow_exception(error);
}

}  // namespace qlimit
