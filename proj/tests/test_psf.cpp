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
#include <filesystem>
#include <limits>
#include <numbers>

#include "qlimit/errors.hpp"
#include "qlimit/psf.hpp"

using namespace qlimit;

namespace {

double gaussian_amplitude(double x, double y, double s) {
  return std::exp(-(x * x + y * y) / (4.0 * s * s)) / std::sqrt(2.0 * std::numbers::pi * s * s);
}

// Midpoint rule on a square box, independent of the closed forms.
double brute_overlap(double d, double s) {
  const double h = 0.02;
  const double lo = -12.0 * s;
  const int n = static_cast<int>(std::round((24.0 * s + d) / h));
  const int ny = static_cast<int>(std::round(24.0 * s / h));
  double sum = 0.0;
  for (int i = 0; i < n; ++i) {
    const double x = lo + (i + 0.5) * h;
    for (int j = 0; j < ny; ++j) {
      const double y = lo + (j + 0.5) * h;
      sum += gaussian_amplitude(x, y, s) * gaussian_amplitude(x - d, y, s);
    }
  }
  return sum * h * h;
}

const PsfModel& sampled_unit() {
  static const PsfModel psf = PsfModel::sampled(sample_gaussian(1.0, 9.0, 0.1));
  return psf;
}

}  // namespace

TEST(Overlap, GaussianClosedForm) {
  const PsfModel g = PsfModel::gaussian(1.0);
  EXPECT_EQ(overlap(g, 0.0), 1.0);
  EXPECT_NEAR(overlap(g, 2.0), 0.60653, 5e-6);
  EXPECT_EQ(overlap(g, -2.0), overlap(g, 2.0));
}

TEST(Overlap, MatchesBruteForceQuadrature) {
  const PsfModel g = PsfModel::gaussian(1.0);
  for (double d : {0.5, 2.0, 4.0}) {
    EXPECT_NEAR(overlap(g, d), brute_overlap(d, 1.0), 1e-9) << d;
  }
}

TEST(Overlap, NonFiniteShiftThrows) {
  const PsfModel g = PsfModel::gaussian(1.0);
  EXPECT_THROW(overlap(g, std::numeric_limits<double>::quiet_NaN()), ConfigurationError);
  EXPECT_THROW(overlap_derivatives(g, std::numeric_limits<double>::infinity()), ConfigurationError);
  EXPECT_THROW(overlap(sampled_unit(), std::numeric_limits<double>::quiet_NaN()),
               ConfigurationError);
}

TEST(OverlapDerivatives, AtOrigin) {
  const auto o = overlap_derivatives(PsfModel::gaussian(1.0), 0.0);
  EXPECT_EQ(o.delta, 1.0);
  EXPECT_EQ(o.gamma, 0.0);
  EXPECT_DOUBLE_EQ(o.beta, -0.25);
  EXPECT_NEAR(overlap_derivatives(sampled_unit(), 0.0).gamma, 0.0, 1e-15);
}

TEST(OverlapDerivatives, GammaAtTwoMatchesFiniteDifference) {
  const PsfModel g = PsfModel::gaussian(1.0);
  const double h = 1e-6;
  const double fd = (overlap(g, 2.0 + h) - overlap(g, 2.0 - h)) / (2.0 * h);
  EXPECT_NEAR(overlap_derivatives(g, 2.0).gamma, fd, 1e-8);
  EXPECT_NEAR(fd, -0.30327, 5e-6);
}

TEST(OverlapDerivatives, NegativeShiftParity) {
  for (const PsfModel& psf : {PsfModel::gaussian(1.3), sampled_unit()}) {
    const auto p = overlap_derivatives(psf, 1.7);
    const auto m = overlap_derivatives(psf, -1.7);
    EXPECT_DOUBLE_EQ(m.delta, p.delta);
    EXPECT_DOUBLE_EQ(m.gamma, -p.gamma);
    EXPECT_DOUBLE_EQ(m.beta, p.beta);
  }
}

TEST(OverlapDerivatives, GradientCheck) {
  for (const PsfModel& psf : {PsfModel::gaussian(1.0), PsfModel::gaussian(0.5), sampled_unit()}) {
    const double s = psf.sigma();
    for (double x : {0.1, 0.3, 0.7, 1.3, 2.5, 3.5, 5.0}) {
      const double d = x * s;
      const auto o = overlap_derivatives(psf, d);
      const double h1 = 1e-4 * s;
      const double g_fd = (overlap(psf, d + h1) - overlap(psf, d - h1)) / (2.0 * h1);
      EXPECT_NEAR(o.gamma, g_fd, 1e-5 * std::abs(o.gamma)) << x;
      const double h2 = 1e-3 * s;
      const double b_fd =
          (overlap(psf, d + h2) - 2.0 * overlap(psf, d) + overlap(psf, d - h2)) / (h2 * h2);
      EXPECT_NEAR(o.beta, b_fd, 1e-4 * std::abs(o.beta)) << x;
    }
  }
}

TEST(Overlap, BoundedAndMonotone) {
  const PsfModel g = PsfModel::gaussian(0.8);
  double prev = 1.0;
  for (int i = 0; i <= 400; ++i) {
    const double v = overlap(g, 0.02 * i);
    EXPECT_LE(std::abs(v), 1.0);
    EXPECT_LE(v, prev);
    prev = v;
  }
  for (int i = 0; i <= 100; ++i) EXPECT_LE(std::abs(overlap(sampled_unit(), 0.08 * i)), 1.0 + 1e-12);
}

TEST(Bandwidth, Gaussian) {
  EXPECT_DOUBLE_EQ(mean_square_bandwidth(PsfModel::gaussian(1.0)), 0.25);
  EXPECT_DOUBLE_EQ(mean_square_bandwidth(PsfModel::gaussian(2.0)), 0.0625);
}

TEST(Bandwidth, EqualsMinusBetaAtZero) {
  for (const PsfModel& psf : {PsfModel::gaussian(1.0), PsfModel::gaussian(3.0), sampled_unit()}) {
    EXPECT_NEAR(mean_square_bandwidth(psf), -overlap_derivatives(psf, 0.0).beta, 1e-9);
  }
}

TEST(Bandwidth, SampledGaussianMatchesAnalytic) {
  EXPECT_NEAR(mean_square_bandwidth(sampled_unit()), 0.25, 1e-6);
  // Independent check: trapezoid sum of |d psi/dx|^2 with the analytic
  // derivative on the same grid.
  const SampledGrid& g = *sampled_unit().grid();
  double sum = 0.0;
  for (int iy = 0; iy < g.ny; ++iy) {
    for (int ix = 0; ix < g.nx; ++ix) {
      const double x = g.x(ix);
      const double dpsi = -x / 2.0 * gaussian_amplitude(x, g.y(iy), 1.0);
      sum += dpsi * dpsi * g.dx * g.dy;
    }
  }
  EXPECT_NEAR(sum, 0.25, 1e-6);
}

TEST(SampledPsf, MatchesGaussianClosedForm) {
  const PsfModel g = PsfModel::gaussian(1.0);
  EXPECT_TRUE(sampled_unit().reflection_symmetric());
  EXPECT_NEAR(sampled_unit().sigma(), 1.0, 1e-9);
  for (double d : {0.0, 0.25, 1.0, 2.0, 4.0, 7.5}) {
    const auto s = overlap_derivatives(sampled_unit(), d);
    const auto e = overlap_derivatives(g, d);
    EXPECT_NEAR(s.delta, e.delta, 1e-9) << d;
    EXPECT_NEAR(s.gamma, e.gamma, 1e-9) << d;
    EXPECT_NEAR(s.beta, e.beta, 1e-9) << d;
    EXPECT_LT(std::abs(overlap_complex(sampled_unit(), d).imag()), 1e-10) << d;
  }
}

TEST(SampledPsf, ImaginaryResidualVanishesForComplexSymmetricPsf) {
  // A phase pattern even under inversion keeps the overlap real.
  SampledGrid g = sample_gaussian(1.0, 9.0, 0.1);
  for (int iy = 0; iy < g.ny; ++iy) {
    for (int ix = 0; ix < g.nx; ++ix) {
      const double r2 = g.x(ix) * g.x(ix) + g.y(iy) * g.y(iy);
      g.values[static_cast<std::size_t>(iy) * g.nx + ix] *= std::polar(1.0, 0.05 * r2);
    }
  }
  const PsfModel psf = PsfModel::sampled(g);
  for (double d : {0.3, 1.0, 3.0}) {
    EXPECT_LT(std::abs(overlap_complex(psf, d).imag()), 1e-10);
    EXPECT_LE(std::abs(overlap(psf, d)), 1.0);
  }
}

TEST(SampledPsf, RejectsBadGrids) {
  // Too coarse: normalized, but spectral content reaches the Nyquist band.
  try {
    PsfModel::sampled(sample_gaussian(1.0, 9.0, 0.8));
    ADD_FAILURE() << "coarse grid accepted";
  } catch (const ConfigurationError& e) {
    EXPECT_NE(std::string(e.what()).find("too coarse"), std::string::npos) << e.what();
  }
  EXPECT_NO_THROW(PsfModel::sampled(sample_gaussian(1.0, 9.0, 0.5)));
  // Too small an extent.
  SampledGrid small = sample_gaussian(1.0, 4.0, 0.1);
  double norm = 0.0;
  for (const auto& v : small.values) norm += std::norm(v) * small.dx * small.dy;
  for (auto& v : small.values) v /= std::sqrt(norm);
  EXPECT_THROW(PsfModel::sampled(small), ConfigurationError);
  // Not normalized.
  SampledGrid scaled = sample_gaussian(1.0, 9.0, 0.1);
  for (auto& v : scaled.values) v *= 1.01;
  EXPECT_THROW(PsfModel::sampled(scaled), ConfigurationError);
  // Not inversion-symmetric.
  SampledGrid bent = sample_gaussian(1.0, 9.0, 0.1);
  bent.values[static_cast<std::size_t>(bent.nx / 2) * bent.nx + bent.nx / 2 + 3] += 1e-6;
  EXPECT_THROW(PsfModel::sampled(bent), ConfigurationError);
  EXPECT_THROW(PsfModel::gaussian(0.0), ConfigurationError);
  EXPECT_THROW(PsfModel::gaussian(-1.0), ConfigurationError);
}

TEST(SampledPsf, ShiftBeyondGridThrows) {
  const double extent = sampled_unit().max_shift();
  EXPECT_NO_THROW(overlap(sampled_unit(), 0.99 * extent));
  EXPECT_THROW(overlap(sampled_unit(), 1.01 * extent), ConfigurationError);
}

TEST(SampledPsf, CsvRoundTrip) {
  const auto path = std::filesystem::temp_directory_path() / "qlimit_psf_roundtrip.csv";
  const SampledGrid g = sample_gaussian(0.7, 6.0, 0.1);
  write_psf_csv(path, g);
  const SampledGrid r = read_psf_csv(path);
  std::filesystem::remove(path);
  ASSERT_EQ(r.nx, g.nx);
  ASSERT_EQ(r.ny, g.ny);
  EXPECT_EQ(r.dx, g.dx);
  EXPECT_EQ(r.dy, g.dy);
  EXPECT_EQ(r.values, g.values);
  const PsfModel psf = PsfModel::sampled(r);
  EXPECT_NEAR(overlap(psf, 1.0), overlap(PsfModel::gaussian(0.7), 1.0), 1e-9);
}
