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

#include "qlimit/psf.hpp"

namespace qlimit {

// Two equal thermal point sources, each with mean photon number n_s reaching
// the image plane, separated by d along x and imaged through psf.
struct Scene {
  double n_s = 0.0;
  double d = 0.0;
  PsfModel psf = PsfModel::gaussian(1.0);

  // Throws ConfigurationError unless n_s >= 0 and d >= 0 (both finite).
  void validate() const;
};

// Quantum Fisher information on d, split into the contributions of the
// inversion-symmetric and antisymmetric field modes.
struct QfiBreakdown {
  double total = 0.0;
  double sym = 0.0;
  double asym = 0.0;
};

QfiBreakdown qfi(const Scene& scene);

// Uhlmann fidelity between the thermal two-source states at separations d1
// and d2 (closed form, product of the symmetric and antisymmetric factors).
// Returns exactly 1 when d1 == d2.
double fidelity(const PsfModel& psf, double n_s, double d1, double d2);

struct FidelityQfi {
  double value = 0.0;
  // Set when step < 1e-6 sigma: 1 - F is O(step^2) and loses most digits.
  bool roundoff_warning = false;
};

// 8 [1 - F(rho_{d-step/2}, rho_{d+step/2})] / step^2. Near d = 0 the stencil
// is shifted to [0, step] since rho_{-d} = rho_d.
FidelityQfi qfi_from_fidelity(const Scene& scene, double step);

struct CramerRaoBound {
  double value = 0.0;  // MSE lower bound, length^2
  bool infinite = false;
};

// 1 / (trials * K_d) for `trials` independent copies of the state.
CramerRaoBound qcrb(const Scene& scene, std::int64_t trials);

}  // namespace qlimit
