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

#include <cmath>
#include <functional>
#include <vector>

namespace qlimit {

// n-point Gauss-Legendre rule on [-1, 1].
struct GaussLegendre {
  std::vector<double> nodes;
  std::vector<double> weights;

  explicit GaussLegendre(int n);

  // Cached rules for the sizes used by the library.
  static const GaussLegendre& rule20();
  static const GaussLegendre& rule64();

  template <class F>
  double integrate(F&& f, double a, double b) const {
    const double half = 0.5 * (b - a);
    const double mid = 0.5 * (a + b);
    double sum = 0.0;
    for (std::size_t i = 0; i < nodes.size(); ++i) {
      sum += weights[i] * f(mid + half * nodes[i]);
    }
    return half * sum;
  }
};

struct AdaptiveResult {
  double value = 0.0;
  int panels = 0;
};

// Adaptive 64-point Gauss-Legendre: a panel is accepted when its estimate
// agrees with the sum over its two halves to `rel_tol` (relative to the
// running total) or `abs_tol`. Throws QuadratureError past `max_depth`
// bisections.
AdaptiveResult integrate_adaptive(const std::function<double(double)>& f, double a, double b,
                                  double rel_tol = 1e-10, double abs_tol = 1e-300,
                                  int max_depth = 30);

// Vector-valued variant: f(x, out) writes n integrand values at x, and a
// panel is accepted only when every component has converged. Used to
// integrate many related integrands on one shared set of nodes.
std::vector<double> integrate_adaptive_vector(const std::function<void(double, double*)>& f,
                                              std::size_t n, double a, double b,
                                              double rel_tol = 1e-10, int max_depth = 30);

}  // namespace qlimit
