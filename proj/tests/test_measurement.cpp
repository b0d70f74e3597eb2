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

#include <gtest/gtest.h>

#include <cmath>
#include <functional>
#include <numbers>

#include "qlimit/errors.hpp"
#include "qlimit/measurement.hpp"
#include "qlimit/quadrature.hpp"

using namespace qlimit;

namespace {

Scene scene(double n_s, double d, double sigma = 1.0) {
  return {n_s, d, PsfModel::gaussian(sigma)};
}

using Provider = std::function<MomentSet(const Scene&)>;

std::vector<std::pair<std::string, Provider>> providers() {
  return {
      {"di50", [](const Scene& s) { return di_moments(s, {17.0 * s.psf.sigma(), 50}); }},
      {"di7", [](const Scene& s) { return di_moments(s, {6.0 * s.psf.sigma(), 7}); }},
      {"spade5", [](const Scene& s) { return spade_moments(s, 5); }},
      {"spade12", [](const Scene& s) { return spade_moments(s, 12); }},
      {"sliver6", [](const Scene& s) { return sliver_moments(s, {17.0 * s.psf.sigma(), 6}); }},
      {"sliver40", [](const Scene& s) { return sliver_moments(s, {17.0 * s.psf.sigma(), 40}); }},
  };
}

// Standard normal density integrated with a 2000-panel Simpson rule in long
// double; independent of erfc.
long double q_oracle(double x) {
  const long double a = x;
  const long double b = x + 40.0L;
  const int n = 20000;
  const long double h = (b - a) / n;
  auto phi = [](long double t) { return std::exp(-t * t / 2.0L); };
  long double s = phi(a) + phi(b);
  for (int i = 1; i < n; ++i) s += (i % 2 ? 4.0L : 2.0L) * phi(a + i * h);
  return s * h / 3.0L / std::sqrt(2.0L * std::numbers::pi_v<long double>);
}

}  // namespace

TEST(QFunction, Values) {
  EXPECT_EQ(q_function(0.0), 0.5);
  EXPECT_LT(q_function(10.0), 1e-23);
  EXPECT_NEAR(q_function(1.0), 0.158655, 5e-7);
  // Reference values from 40-digit quadrature.
  const std::pair<double, double> ref[] = {{1.0, 0.15865525393145705141},
                                           {3.0, 0.0013498980316300945267},
                                           {-2.0, 0.9772498680518207928},
                                           {8.0, 6.2209605742717841235e-16},
                                           {0.5, 0.30853753872598689636}};
  for (auto [x, q] : ref) EXPECT_NEAR(q_function(x), q, 1e-14 * q) << x;
  EXPECT_NEAR(q_function(1.0), static_cast<double>(q_oracle(1.0)), 1e-13);
}

TEST(QFunction, IntervalAvoidsCancellation) {
  EXPECT_NEAR(gaussian_interval(8.0, 9.0), q_function(8.0) - q_function(9.0), 1e-30);
  EXPECT_NEAR(gaussian_interval(-9.0, -8.0), q_function(8.0) - q_function(9.0), 1e-30);
  EXPECT_NEAR(gaussian_interval(-1.0, 1.0), 1.0 - 2.0 * q_function(1.0), 1e-15);
  EXPECT_EQ(gaussian_interval(2.0, 2.0), 0.0);
  EXPECT_GT(gaussian_interval(-12.0, -11.0), 0.0);
}

TEST(Geometry, EdgesPartitionDetector) {
  const DetectorGeometry g{17.0, 50};
  const auto e = g.edges();
  ASSERT_EQ(e.size(), 50u);
  EXPECT_EQ(e.front().first, -8.5);
  EXPECT_EQ(e.back().second, 8.5);
  for (std::size_t p = 0; p < e.size(); ++p) {
    EXPECT_NEAR(e[p].second - e[p].first, 17.0 / 50, 1e-14);
    if (p > 0) EXPECT_EQ(e[p].first, e[p - 1].second);
  }
  EXPECT_THROW((DetectorGeometry{17.0, 0}).validate(), ConfigurationError);
  EXPECT_THROW((DetectorGeometry{-1.0, 3}).validate(), ConfigurationError);
  EXPECT_THROW(di_moments(scene(1.0, 1.0), {17.0, 0}), ConfigurationError);
}

TEST(Coefficients, WideSinglePixelCollectsEverything) {
  for (double d : {0.0, 1.0, 3.0}) {
    const auto c = coefficients_di(scene(1.5, d), {100.0, 1});
    EXPECT_NEAR(c.alpha[0], 1.0, 1e-15);
    EXPECT_NEAR(c.gamma[0], 1.0, 1e-15);
  }
}

TEST(Coefficients, BetaAtZeroSeparation) {
  const auto c = coefficients_di(scene(1.5, 0.0), {17.0, 50});
  for (std::size_t p = 0; p < c.size(); ++p) {
    EXPECT_NEAR(c.beta[p], c.alpha[p] + c.gamma[p], 1e-15);
    EXPECT_EQ(c.alpha[p], c.gamma[p]);
  }
}

TEST(Coefficients, Ranges) {
  for (double d : {0.0, 0.01, 0.3, 1.0, 2.5, 6.0}) {
    const auto c = coefficients_di(scene(1.5, d), {17.0, 50});
    double sa = 0.0;
    double sg = 0.0;
    for (std::size_t p = 0; p < c.size(); ++p) {
      for (double v : {c.alpha[p], c.beta[p], c.gamma[p]}) {
        EXPECT_GE(v, 0.0);
        EXPECT_LE(v, 2.0);
      }
      sa += c.alpha[p];
      sg += c.gamma[p];
    }
    EXPECT_LE(sa, 1.0 + 1e-15);
    EXPECT_LE(sg, 1.0 + 1e-15);
    const auto s = coefficients_sliver(scene(1.5, d), {17.0, 40});
    for (std::size_t p = 0; p < s.size(); ++p) {
      EXPECT_GE(s.f_sym[p], -1e-12);
      EXPECT_GE(s.f_asym[p], -1e-12);
      if (d == 0.0) EXPECT_NEAR(s.f_asym[p], 0.0, 1e-12);
    }
  }
}

TEST(Coefficients, SmallSeparationBranchIsContinuous) {
  const DetectorGeometry g{17.0, 40};
  const auto below = coefficients_sliver(scene(1.5, 0.05 * (1.0 - 1e-9)), g);
  const auto above = coefficients_sliver(scene(1.5, 0.05 * (1.0 + 1e-9)), g);
  double total = 0.0;
  for (double v : above.f_asym) total += v;
  for (std::size_t p = 0; p < g.pixels; ++p) {
    EXPECT_NEAR(below.f_asym[p], above.f_asym[p], 1e-9 * total) << p;
    EXPECT_NEAR(below.f_asym_dot[p], above.f_asym_dot[p], 1e-7 * std::abs(above.f_asym_dot[p]) + 1e-12) << p;
  }
}

TEST(SpadeWeights, PoissonPmf) {
  const auto w = weights_spade(scene(1.5, 2.0), 5);
  EXPECT_DOUBLE_EQ(w.kappa, 0.25);
  for (int q = 0; q <= 5; ++q) {
    const double direct = std::pow(0.25, q) * std::exp(-0.25) / std::tgamma(q + 1.0);
    EXPECT_NEAR(w.f[static_cast<std::size_t>(q)], direct, 1e-14 * direct);
  }
  const auto z = weights_spade(scene(1.5, 0.0), 4);
  EXPECT_EQ(z.f[0], 1.0);
  for (int q = 1; q <= 4; ++q) EXPECT_EQ(z.f[static_cast<std::size_t>(q)], 0.0);
}

TEST(SpadeWeights, LogSpaceForLargeKappa) {
  // kappa = 36 uses the log-space branch; kappa = 25 the recurrence.
  for (double d : {20.0, 24.0}) {
    const auto w = weights_spade(scene(1.0, d), 80);
    double sum = 0.0;
    for (int q = 0; q <= 80; ++q) {
      const double direct = std::exp(q * std::log(w.kappa) - w.kappa - std::lgamma(q + 1.0));
      EXPECT_NEAR(w.f[static_cast<std::size_t>(q)], direct, 1e-12 * direct + 1e-300);
      EXPECT_GE(w.f[static_cast<std::size_t>(q)], 0.0);
      EXPECT_LE(w.f[static_cast<std::size_t>(q)], 1.0);
      sum += w.f[static_cast<std::size_t>(q)];
    }
    EXPECT_NEAR(sum, 1.0, 1e-9);
  }
}

TEST(DiMoments, RayleighDerivativeVanishesAtZero) {
  const MomentSet m = di_moments(scene(1.5, 0.0), {17.0, 50});
  for (Eigen::Index p = 0; p < m.mean_dot.size(); ++p) EXPECT_EQ(m.mean_dot(p), 0.0);
}

TEST(DiMoments, CurseAtSmallSeparation) {
  const double b = fi_lower_bound(di_moments(scene(1.5, 0.01), {17.0, 50})).value;
  EXPECT_LT(b, 1e-3 * 0.75);
}

TEST(DiMoments, SinglePixelMeanMatchesIntensityQuadrature) {
  // Integrate the mean intensity N (|psi(x + d/2)|^2 + |psi(x - d/2)|^2) over
  // the pixel in x and all of y with tensor Gauss-Legendre panels.
  const double n = 1.5;
  const double d = 2.0;
  const double w = 6.0;
  const auto& gl = GaussLegendre::rule64();
  auto psi2 = [](double x, double y) {
    return std::exp(-(x * x + y * y) / 2.0) / (2.0 * std::numbers::pi);
  };
  double total = 0.0;
  for (int px = 0; px < 24; ++px) {
    const double xa = -w / 2 + px * (w / 24);
    for (int py = 0; py < 40; ++py) {
      const double ya = -20.0 + py * 1.0;
      total += gl.integrate(
          [&](double x) {
            return gl.integrate(
                [&](double y) { return n * (psi2(x + d / 2, y) + psi2(x - d / 2, y)); }, ya,
                ya + 1.0);
          },
          xa, xa + w / 24);
    }
  }
  const MomentSet m = di_moments(scene(n, d), {w, 1});
  EXPECT_NEAR(m.mean(0), total, 1e-8);
}

TEST(DiMoments, PhotonNumberSanity) {
  for (double d : {0.0, 1.0, 4.0}) {
    double sum = di_moments(scene(1.5, d), {17.0, 50}).mean.sum();
    EXPECT_LE(sum, 3.0);
    EXPECT_GT(sum, 3.0 * (1.0 - 1e-10));
    sum = di_moments(scene(1.5, d), {4.0, 10}).mean.sum();
    EXPECT_LT(sum, 3.0 * 0.96);
  }
  EXPECT_NEAR(di_moments(scene(1.5, 2.0), {200.0, 400}).mean.sum(), 3.0, 1e-14);
}

TEST(SpadeMoments, Examples) {
  const MomentSet z = spade_moments(scene(1.5, 0.0), 4);
  EXPECT_EQ(z.mean(0), 3.0);
  for (Eigen::Index q = 1; q < 5; ++q) EXPECT_EQ(z.mean(q), 0.0);
  const MomentSet m = spade_moments(scene(1.5, 2.0), 5);
  EXPECT_NEAR(m.mean(0), 3.0 * std::exp(-0.25), 1e-14);
  EXPECT_NEAR(m.mean(0), 2.3364, 5e-5);
  EXPECT_EQ(m.cov(0, 1), 0.0);
  EXPECT_EQ(m.cov(2, 5), 0.0);
  const auto w = weights_spade(scene(1.5, 2.0), 5);
  EXPECT_NEAR(m.cov(0, 2), 4.0 * 1.5 * 1.5 * w.f[0] * w.f[2], 1e-15);
  EXPECT_NEAR(m.cov(3, 3), 4.0 * 1.5 * 1.5 * w.f[3] * w.f[3] + 2.0 * 1.5 * w.f[3], 1e-15);
  EXPECT_EQ(m.labels[0].block, "even");
  EXPECT_EQ(m.labels[3].block, "odd");
}

TEST(SpadeMoments, Completeness) {
  EXPECT_NEAR(spade_moments(scene(1.5, 2.0), 20).mean.sum(), 3.0, 1e-14);
  EXPECT_LT(spade_moments(scene(1.5, 2.0), 1).mean.sum(), 3.0 - 0.05);
}

TEST(SpadeMoments, NearZeroBoundReachesQfi) {
  for (int q : {1, 2, 5, 10}) {
    const double b = fi_lower_bound(spade_moments(scene(1.5, 1e-3), q)).value;
    EXPECT_NEAR(b, 0.75, 0.01 * 0.75) << q;
  }
}

TEST(SliverMoments, ZeroSeparationAsymArmIsDark) {
  const MomentSet m = sliver_moments(scene(1.5, 0.0), {17.0, 40});
  for (Eigen::Index p = 40; p < 80; ++p) {
    EXPECT_EQ(m.mean(p), 0.0);
    EXPECT_EQ(m.cov(p, p), 0.0);
  }
  const auto b = fi_lower_bound(m);
  EXPECT_EQ(b.block_value("asym").value_or(-1.0), 0.0);
}

TEST(SliverMoments, DarkPixel) {
  // A pixel far outside the PSF has f = 0 to double precision.
  const MomentSet m = sliver_moments(scene(1.5, 1.0, 0.1), {17.0, 40});
  EXPECT_EQ(m.mean(0), 0.0);
  EXPECT_EQ(m.cov(0, 0), 0.0);
  EXPECT_TRUE(std::isfinite(m.mean_dot(0)));
}

TEST(SliverMoments, StableCovarianceMatchesLiteralForm) {
  const double n = 1.5;
  const auto c = coefficients_sliver(scene(n, 0.8), {17.0, 12});
  const MomentSet m = sliver_moments(scene(n, 0.8), {17.0, 12});
  for (std::size_t p = 0; p < 12; ++p) {
    for (std::size_t q = 0; q < 12; ++q) {
      const double a = c.f_sym[p] * n;
      const double b = c.f_sym[q] * n;
      const double mu_a = a / (2.0 + a);
      const double mu_b = b / (2.0 + b);
      const double ekk = p == q ? mu_a : 1.0 - 2.0 / (2.0 + a) - 2.0 / (2.0 + b) + 2.0 / (2.0 + a + b);
      EXPECT_NEAR(m.cov(static_cast<Eigen::Index>(p), static_cast<Eigen::Index>(q)), ekk - mu_a * mu_b, 1e-13);
    }
  }
  for (Eigen::Index p = 0; p < 12; ++p)
    for (Eigen::Index q = 12; q < 24; ++q) EXPECT_EQ(m.cov(p, q), 0.0);
}

TEST(SliverMoments, BlocksAndOrdering) {
  const MomentSet m = sliver_moments(scene(1.5, 1.0), {17.0, 40});
  const auto b = fi_lower_bound(m);
  ASSERT_EQ(b.per_component.size(), 2u);
  EXPECT_NEAR(*b.block_value("sym") + *b.block_value("asym"), b.value, 1e-10 * b.value);
  for (int i = 1; i < 20; ++i) {
    const auto r = fi_lower_bound(sliver_moments(scene(1.5, 0.05 * i), {17.0, 40}));
    EXPECT_GT(*r.block_value("asym"), *r.block_value("sym")) << 0.05 * i;
  }
}

TEST(SliverMoments, EnergySplitMatchesDirectImaging) {
  for (double d : {0.0, 0.02, 0.3, 1.0, 3.0}) {
    const DetectorGeometry g{17.0, 40};
    const auto s = coefficients_sliver(scene(1.5, d), g);
    double split = 0.0;
    for (std::size_t p = 0; p < s.size(); ++p) split += 0.5 * 1.5 * (s.f_sym[p] + s.f_asym[p]);
    EXPECT_NEAR(split, di_moments(scene(1.5, d), g).mean.sum(), 1e-8) << d;
  }
}

TEST(Moments, GradientCheck) {
  for (const auto& [name, make] : providers()) {
    for (double n : {0.1, 1.5, 5.0}) {
      for (double x : {0.02, 0.1, 0.45, 1.0, 2.0, 3.7, 6.0}) {
        for (double sigma : {1.0, 0.5}) {
          const double h = 1e-5 * sigma;
          const MomentSet m = make(scene(n, x * sigma, sigma));
          const MomentSet up = make(scene(n, x * sigma + h, sigma));
          const MomentSet dn = make(scene(n, x * sigma - h, sigma));
          const double scale = m.mean_dot.cwiseAbs().maxCoeff();
          for (Eigen::Index i = 0; i < m.mean.size(); ++i) {
            const double fd = (up.mean(i) - dn.mean(i)) / (2.0 * h);
            EXPECT_NEAR(m.mean_dot(i), fd, 1e-4 * std::abs(m.mean_dot(i)) + 1e-10 * scale)
                << name << " n=" << n << " d/s=" << x << " i=" << i;
          }
        }
      }
    }
  }
}

TEST(Moments, CovariancePsdAndBoundBelowQfi) {
  for (const auto& [name, make] : providers()) {
    for (double n : {0.01, 0.1, 1.5, 5.0, 20.0}) {
      for (double x : {1e-6, 0.01, 0.1, 0.3, 0.7, 1.0, 1.5, 2.0, 3.0, 4.5, 6.0}) {
        const Scene s = scene(n, x);
        const MomentSet m = make(s);
        m.validate();
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(m.cov);
        EXPECT_GE(eig.eigenvalues().minCoeff(), -1e-10 * m.cov.trace()) << name;
        EXPECT_LE(fi_lower_bound(m).value, qfi(s).total + 1e-9) << name << ' ' << n << ' ' << x;
      }
    }
  }
}

TEST(Moments, UnsupportedPsf) {
  const PsfModel sampled = PsfModel::sampled(sample_gaussian(1.0, 9.0, 0.1));
  const Scene s{1.5, 1.0, sampled};
  EXPECT_THROW(di_moments(s, {17.0, 10}), UnsupportedModelError);
  EXPECT_THROW(spade_moments(s, 3), UnsupportedModelError);
  EXPECT_THROW(sliver_moments(s, {17.0, 10}), UnsupportedModelError);

  // Inversion-symmetric but not reflection-symmetric in x.
  SampledGrid g = sample_gaussian(1.0, 9.0, 0.1);
  double norm = 0.0;
  for (int iy = 0; iy < g.ny; ++iy) {
    for (int ix = 0; ix < g.nx; ++ix) {
      auto& v = g.values[static_cast<std::size_t>(iy) * g.nx + ix];
      v *= 1.0 + 0.3 * g.x(ix) * g.y(iy);
      norm += std::norm(v) * g.dx * g.dy;
    }
  }
  for (auto& v : g.values) v /= std::sqrt(norm);
  const PsfModel skew = PsfModel::sampled(g);
  EXPECT_FALSE(skew.reflection_symmetric());
  try {
    sliver_moments({1.5, 1.0, skew}, {17.0, 10});
    ADD_FAILURE() << "accepted";
  } catch (const UnsupportedModelError& e) {
    EXPECT_NE(std::string(e.what()).find("symmetric"), std::string::npos);
  }
}

TEST(DiStability, FiftyVersusHundredPixels) {
  for (int i = 0; i < 60; ++i) {
    const double d = 0.1 + (6.0 - 0.1) * i / 59.0;
    const double b50 = fi_lower_bound(di_moments(scene(1.5, d), {17.0, 50})).value;
    const double b100 = fi_lower_bound(di_moments(scene(1.5, d), {17.0, 100})).value;
    EXPECT_LT(std::abs(b50 - b100) / b50, 0.01) << "d=" << d;
  }
}
