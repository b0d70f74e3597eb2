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

#include "qlimit/quantum_limit.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "qlimit/errors.hpp"

namespace qlimit {

void Scene::validate() const {
  if (!std::isfinite(n_s) || n_s < 0.0) {
    throw ConfigurationError("scene: n_s must be finite and >= 0");
  }
  if (!std::isfinite(d) || d < 0.0) {
    throw ConfigurationError("scene: d must be finite and >= 0");
  }
}

QfiBreakdown qfi(const Scene& scene) {
  scene.validate();
  const double n = scene.n_s;
  const auto at0 = overlap_derivatives(scene.psf, 0.0);
  const auto at_d = overlap_derivatives(scene.psf, scene.d);
  const double g2 = at_d.gamma * at_d.gamma;
  const double dl = at_d.delta;

  QfiBreakdown out;
  const double denom = (1.0 + n) * (1.0 + n) - dl * dl * n * n;
  out.total = -2.0 * at0.beta * n - 2.0 * g2 * (1.0 + n) * n * n / denom;
  out.sym = (at_d.beta - at0.beta) * n - n * n * g2 / (1.0 + n * (1.0 + dl));
  out.asym = -(at_d.beta + at0.beta) * n - n * n * g2 / (1.0 + n * (1.0 - dl));
  return out;
}

namespace {

// log(1 / F). Each factor is written as 1 + eps with eps formed without
// subtracting 1 from a quantity near 1, so 1 - F stays accurate when the two
// states are close.
double log_inverse_fidelity(const PsfModel& psf, double n_s, double d1, double d2) {
  if (!std::isfinite(n_s) || n_s < 0.0) {
    throw ConfigurationError("fidelity: n_s must be finite and >= 0");
  }
  if (!std::isfinite(d1) || !std::isfinite(d2) || d1 < 0.0 || d2 < 0.0) {
    throw ConfigurationError("fidelity: separations must be finite and >= 0");
  }
  if (d1 == d2 || n_s == 0.0) return 0.0;

  const double delta1 = overlap(psf, d1);
  const double delta2 = overlap(psf, d2);
  const double delta_minus = overlap(psf, 0.5 * (d1 - d2));
  const double delta_plus = overlap(psf, 0.5 * (d1 + d2));
  const double n = n_s;

  // sqrt((1 + a)(1 + b)) - 1 - c for small a, b, c.
  auto eps = [](double a, double b, double c) {
    const double pq_minus_1 = a + b + a * b;
    return pq_minus_1 / (std::sqrt(1.0 + pq_minus_1) + 1.0) - c;
  };
  const double sym = eps(n * (1.0 + delta1), n * (1.0 + delta2), n * std::abs(delta_minus + delta_plus));
  const double asym = eps(n * (1.0 - delta1), n * (1.0 - delta2), n * std::abs(delta_minus - delta_plus));
  return std::max(0.0, std::log1p(sym) + std::log1p(asym));
}

}  // namespace

double fidelity(const PsfModel& psf, double n_s, double d1, double d2) {
  return std::clamp(std::exp(-log_inverse_fidelity(psf, n_s, d1, d2)), 0.0, 1.0);
}

FidelityQfi qfi_from_fidelity(const Scene& scene, double step) {
  scene.validate();
  if (!(step > 0.0) || !std::isfinite(step)) {
    throw ConfigurationError("qfi_from_fidelity: step must be positive");
  }
  const double d1 = std::max(scene.d - 0.5 * step, 0.0);
  const double d2 = d1 + step;
  FidelityQfi out;
  out.roundoff_warning = step < 1e-6 * scene.psf.sigma();
  const double infidelity = -std::expm1(-log_inverse_fidelity(scene.psf, scene.n_s, d1, d2));
  out.value = 8.0 * infidelity / (step * step);
  return out;
}

CramerRaoBound qcrb(const Scene& scene, std::int64_t trials) {
  if (trials < 1) throw ConfigurationError("qcrb: trials must be >= 1");
  const double k = qfi(scene).total;
  if (!(k > 0.0)) return {std::numeric_limits<double>::infinity(), true};
  return {1.0 / (static_cast<double>(trials) * k), false};
}

}  // namespace qlimit
