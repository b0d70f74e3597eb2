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

#include "qlimit/measurement.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "qlimit/errors.hpp"
#include "qlimit/quadrature.hpp"

namespace qlimit {

namespace {

// Below this separation (in units of sigma) the antisymmetric coefficient
// is integrated directly; alpha + gamma - beta cancels to O(d^2).
constexpr double kSmallSeparation = 0.05;
// Largest panel (in sigma) for the small-d pixel quadrature.
constexpr double kPanelWidth = 0.5;
constexpr double kLogSpaceKappa = 30.0;

void require_gaussian(const Scene& scene, const char* scheme) {
  if (!scene.psf.is_gaussian()) {
    throw UnsupportedModelError(std::string(scheme) +
                                " moments are closed form for the Gaussian PSF only");
  }
}

double gauss(double x, double sigma) { return std::exp(-x * x / (2.0 * sigma * sigma)); }

// f_asym and its d-derivative by quadrature of
//   phi(x) e^{-d^2/8s^2} 4 sinh^2(x d / 4 s^2)
// over [l, r], where phi is the N(0, s^2) density.
std::pair<double, double> asym_by_quadrature(double l, double r, double d, double s) {
  const double s2 = s * s;
  const double damp = std::exp(-d * d / (8.0 * s2));
  const double norm = 1.0 / std::sqrt(2.0 * std::numbers::pi * s2);
  const int panels = std::max(1, static_cast<int>(std::ceil((r - l) / (kPanelWidth * s))));
  const double h = (r - l) / panels;
  const auto& gl = GaussLegendre::rule20();
  double f = 0.0;
  double fdot = 0.0;
  for (int i = 0; i < panels; ++i) {
    const double a = l + i * h;
    const double b = a + h;
    f += gl.integrate(
        [&](double x) {
          const double sh = std::sinh(x * d / (4.0 * s2));
          return norm * gauss(x, s) * damp * 4.0 * sh * sh;
        },
        a, b);
    fdot += gl.integrate(
        [&](double x) {
          const double sh = std::sinh(x * d / (4.0 * s2));
          return norm * gauss(x, s) * damp *
                 ((x / s2) * std::sinh(x * d / (2.0 * s2)) - (d / s2) * sh * sh);
        },
        a, b);
  }
  return {f, fdot};
}

}  // namespace

void DetectorGeometry::validate() const {
  if (!(width > 0.0) || !std::isfinite(width)) {
    throw ConfigurationError("detector: width must be positive and finite");
  }
  if (pixels < 1) throw ConfigurationError("detector: pixels must be >= 1");
}

double DetectorGeometry::left(int p) const {
  return -0.5 * width + width * static_cast<double>(p) / pixels;
}

double DetectorGeometry::right(int p) const {
  return p + 1 == pixels ? 0.5 * width : left(p + 1);
}

std::vector<std::pair<double, double>> DetectorGeometry::edges() const {
  std::vector<std::pair<double, double>> out;
  out.reserve(static_cast<std::size_t>(pixels));
  for (int p = 0; p < pixels; ++p) out.emplace_back(left(p), right(p));
  return out;
}

double q_function(double x) { return 0.5 * std::erfc(x / std::numbers::sqrt2); }

double gaussian_interval(double a, double b) {
  if (b <= a) return 0.0;
  if (a >= 0.0) return q_function(a) - q_function(b);
  if (b <= 0.0) return q_function(-b) - q_function(-a);
  return 1.0 - q_function(-a) - q_function(b);
}

PixelCoefficients coefficients_di(const Scene& scene, const DetectorGeometry& geom) {
  scene.validate();
  geom.validate();
  require_gaussian(scene, "direct-imaging");
  const double s = scene.psf.sigma();
  const double d = scene.d;
  const double h = 0.5 * d;
  const double damp = std::exp(-d * d / (8.0 * s * s));
  const double slope = 1.0 / (2.0 * std::sqrt(2.0 * std::numbers::pi) * s);

  PixelCoefficients c;
  const auto n = static_cast<std::size_t>(geom.pixels);
  c.alpha.resize(n);
  c.beta.resize(n);
  c.gamma.resize(n);
  c.direct_dot.resize(n);
  c.beta_dot.resize(n);
  for (int p = 0; p < geom.pixels; ++p) {
    const double l = geom.left(p);
    const double r = geom.right(p);
    const auto i = static_cast<std::size_t>(p);
    c.alpha[i] = gaussian_interval((l + h) / s, (r + h) / s);
    c.gamma[i] = gaussian_interval((l - h) / s, (r - h) / s);
    c.beta[i] = 2.0 * damp * gaussian_interval(l / s, r / s);
    // Paired so that each difference vanishes exactly at d = 0.
    c.direct_dot[i] = slope * ((gauss(l - h, s) - gauss(l + h, s)) +
                               (gauss(r + h, s) - gauss(r - h, s)));
    c.beta_dot[i] = -(d / (4.0 * s * s)) * c.beta[i];
  }
  return c;
}

SliverCoefficients coefficients_sliver(const Scene& scene, const DetectorGeometry& geom) {
  scene.validate();
  geom.validate();
  if (!scene.psf.reflection_symmetric()) {
    throw UnsupportedModelError("pix-SLIVER requires a PSF symmetric under x -> -x");
  }
  require_gaussian(scene, "pix-SLIVER");
  const PixelCoefficients pc = coefficients_di(scene, geom);
  const double s = scene.psf.sigma();
  const bool small = scene.d < kSmallSeparation * s;

  SliverCoefficients c;
  const std::size_t n = pc.size();
  c.f_sym.resize(n);
  c.f_asym.resize(n);
  c.f_sym_dot.resize(n);
  c.f_asym_dot.resize(n);
  for (std::size_t p = 0; p < n; ++p) {
    c.f_sym[p] = pc.alpha[p] + pc.gamma[p] + pc.beta[p];
    c.f_sym_dot[p] = pc.direct_dot[p] + pc.beta_dot[p];
    if (small) {
      const auto [f, fdot] = asym_by_quadrature(geom.left(static_cast<int>(p)),
                                                geom.right(static_cast<int>(p)), scene.d, s);
      c.f_asym[p] = f;
      c.f_asym_dot[p] = fdot;
    } else {
      c.f_asym[p] = std::max(0.0, pc.alpha[p] + pc.gamma[p] - pc.beta[p]);
      c.f_asym_dot[p] = pc.direct_dot[p] - pc.beta_dot[p];
    }
  }
  return c;
}

SpadeWeights weights_spade(const Scene& scene, int q_max) {
  scene.validate();
  require_gaussian(scene, "fin-SPADE");
  if (q_max < 0) throw ConfigurationError("fin-SPADE: q_max must be >= 0");
  const double s = scene.psf.sigma();
  SpadeWeights w;
  w.kappa = scene.d * scene.d / (16.0 * s * s);
  w.f.assign(static_cast<std::size_t>(q_max) + 1, 0.0);
  if (w.kappa == 0.0) {
    w.f[0] = 1.0;
  } else if (w.kappa <= kLogSpaceKappa) {
    w.f[0] = std::exp(-w.kappa);
    for (int q = 1; q <= q_max; ++q) {
      w.f[static_cast<std::size_t>(q)] = w.f[static_cast<std::size_t>(q - 1)] * w.kappa / q;
    }
  } else {
    const double log_kappa = std::log(w.kappa);
    for (int q = 0; q <= q_max; ++q) {
      w.f[static_cast<std::size_t>(q)] = std::exp(q * log_kappa - w.kappa - std::lgamma(q + 1.0));
    }
  }
  return w;
}

MomentSet di_moments(const Scene& scene, const DetectorGeometry& geom) {
  const PixelCoefficients c = coefficients_di(scene, geom);
  const double n = scene.n_s;
  const auto k = static_cast<Eigen::Index>(c.size());
  MomentSet m;
  m.mean.resize(k);
  m.mean_dot.resize(k);
  m.cov.resize(k, k);
  for (Eigen::Index p = 0; p < k; ++p) {
    const auto i = static_cast<std::size_t>(p);
    m.mean(p) = n * (c.alpha[i] + c.gamma[i]);
    m.mean_dot(p) = n * c.direct_dot[i];
    m.labels.push_back({Scheme::DirectImaging, "pixels", static_cast<int>(p)});
    for (Eigen::Index q = 0; q <= p; ++q) {
      const auto j = static_cast<std::size_t>(q);
      // E|A|^4 = 2 N_s^2 and E[Re(A+* A-)^2] = N_s^2 / 2.
      const double v = n * n * (c.alpha[i] * c.alpha[j] + c.gamma[i] * c.gamma[j] +
                                0.5 * c.beta[i] * c.beta[j]);
      m.cov(p, q) = v;
      m.cov(q, p) = v;
    }
    m.cov(p, p) += m.mean(p);
  }
  return m;
}

MomentSet spade_moments(const Scene& scene, int q_max) {
  const SpadeWeights w = weights_spade(scene, q_max);
  const double n = scene.n_s;
  const double s = scene.psf.sigma();
  const double slope = n * scene.d / (4.0 * s * s);
  const auto k = static_cast<Eigen::Index>(w.f.size());
  MomentSet m;
  m.mean.resize(k);
  m.mean_dot.resize(k);
  m.cov.setZero(k, k);
  for (Eigen::Index q = 0; q < k; ++q) {
    const double fq = w.f[static_cast<std::size_t>(q)];
    const double prev = q == 0 ? 0.0 : w.f[static_cast<std::size_t>(q - 1)];
    m.mean(q) = 2.0 * n * fq;
    m.mean_dot(q) = slope * (prev - fq);
    m.labels.push_back({Scheme::Spade, q % 2 == 0 ? "even" : "odd", static_cast<int>(q)});
    for (Eigen::Index r = q % 2; r < k; r += 2) {
      m.cov(q, r) = 4.0 * n * n * fq * w.f[static_cast<std::size_t>(r)];
    }
    m.cov(q, q) += 2.0 * n * fq;
  }
  return m;
}

MomentSet sliver_moments(const Scene& scene, const DetectorGeometry& geom) {
  const SliverCoefficients c = coefficients_sliver(scene, geom);
  const double n = scene.n_s;
  const auto p_count = static_cast<Eigen::Index>(c.size());
  MomentSet m;
  m.mean.resize(2 * p_count);
  m.mean_dot.resize(2 * p_count);
  m.cov.setZero(2 * p_count, 2 * p_count);

  auto fill_arm = [&](const std::vector<double>& f, const std::vector<double>& fdot,
                      Eigen::Index offset, const char* block) {
    for (Eigen::Index p = 0; p < p_count; ++p) {
      const auto i = static_cast<std::size_t>(p);
      const double a = f[i] * n;
      m.mean(offset + p) = a / (2.0 + a);
      m.mean_dot(offset + p) = 2.0 * fdot[i] * n / ((2.0 + a) * (2.0 + a));
      m.labels.push_back({Scheme::Sliver, block, static_cast<int>(p)});
      // Same-arm second moments reduce to 2ab / ((2+a)(2+b)(2+a+b)); the
      // variance is mu (1 - mu) = 2a / (2+a)^2.
      m.cov(offset + p, offset + p) = 2.0 * a / ((2.0 + a) * (2.0 + a));
      for (Eigen::Index q = 0; q < p; ++q) {
        const double b = f[static_cast<std::size_t>(q)] * n;
        const double v = 2.0 * a * b / ((2.0 + a) * (2.0 + b) * (2.0 + a + b));
        m.cov(offset + p, offset + q) = v;
        m.cov(offset + q, offset + p) = v;
      }
    }
  };
  fill_arm(c.f_sym, c.f_sym_dot, 0, "sym");
  fill_arm(c.f_asym, c.f_asym_dot, p_count, "asym");
  return m;
}

}  // namespace qlimit
