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
#include <utility>
#include <vector>

#include "qlimit/fisher.hpp"
#include "qlimit/quantum_limit.hpp"

namespace qlimit {

// Pixel array centered on the optical axis: `pixels` equal pixels covering
// [-width/2, width/2] in x, unbounded in y, 100% fill factor.
struct DetectorGeometry {
  double width = 17.0;
  int pixels = 50;

  void validate() const;
  double left(int p) const;
  double right(int p) const;
  std::vector<std::pair<double, double>> edges() const;
};

// Per-pixel integrals for the Gaussian PSF. alpha and gamma are the
// fractions of the two source images (centered at -d/2 and +d/2) falling on
// the pixel; beta = 2 exp(-d^2/8s^2) [Q(l/s) - Q(r/s)] is twice the
// interference integral of the two images.
struct PixelCoefficients {
  std::vector<double> alpha;
  std::vector<double> beta;
  std::vector<double> gamma;
  std::vector<double> direct_dot;  // d(alpha + gamma)/dd
  std::vector<double> beta_dot;    // d beta / dd

  std::size_t size() const { return alpha.size(); }
};

// Poisson weights f_q = kappa^q e^{-kappa} / q!, kappa = d^2 / 16 s^2, for
// q = 0..q_max.
struct SpadeWeights {
  double kappa = 0.0;
  std::vector<double> f;
};

// Click coefficients of the interferometer outputs: the conditional
// integrated intensity on pixel p is |S|^2 f_sym[p] / 4 in the symmetric arm
// and |D|^2 f_asym[p] / 4 in the antisymmetric arm.
struct SliverCoefficients {
  std::vector<double> f_sym;
  std::vector<double> f_asym;
  std::vector<double> f_sym_dot;
  std::vector<double> f_asym_dot;

  std::size_t size() const { return f_sym.size(); }
};

// Gaussian upper tail Q(x) = P(Z > x).
double q_function(double x);

// Q(a) - Q(b) = P(a < Z <= b), evaluated without cancellation in the tails.
double gaussian_interval(double a, double b);

PixelCoefficients coefficients_di(const Scene& scene, const DetectorGeometry& geom);
SliverCoefficients coefficients_sliver(const Scene& scene, const DetectorGeometry& geom);
SpadeWeights weights_spade(const Scene& scene, int q_max);

// Number-resolved direct imaging (one count per pixel).
MomentSet di_moments(const Scene& scene, const DetectorGeometry& geom);

// Photon counts in the Hermite-Gaussian modes TEM_q0, q = 0..q_max. Labels
// split the modes into "even" and "odd" blocks, which are independent.
MomentSet spade_moments(const Scene& scene, int q_max);

// On/off clicks in the two interferometer arms, P pixels each; symmetric arm
// first, labels "sym" and "asym".
MomentSet sliver_moments(const Scene& scene, const DetectorGeometry& geom);

// Conditional (given source amplitudes) rates shared with the simulator.

// Mean pixel count given A = (a_plus, a_minus).
inline double di_conditional_mean(const PixelCoefficients& c, std::size_t p,
                                  std::complex<double> a_plus, std::complex<double> a_minus) {
  const double v = std::norm(a_plus) * c.alpha[p] + std::norm(a_minus) * c.gamma[p] +
                   (std::conj(a_plus) * a_minus).real() * c.beta[p];
  return v > 0.0 ? v : 0.0;
}

// Mean count in mode q: f_q |S|^2 for even q, f_q |D|^2 for odd q.
inline double spade_conditional_mean(const SpadeWeights& w, std::size_t q, std::complex<double> s,
                                     std::complex<double> d) {
  return w.f[q] * std::norm(q % 2 == 0 ? s : d);
}

// Integrated intensity f |X|^2 / 4 on one pixel of an interferometer arm;
// the click probability is 1 - exp(-intensity).
inline double sliver_conditional_intensity(double f, std::complex<double> arm_amplitude) {
  return 0.25 * f * std::norm(arm_amplitude);
}

}  // namespace qlimit
