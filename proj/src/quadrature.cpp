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

#include "qlimit/quadrature.hpp"

#include <algorithm>
#include <numbers>

#include "qlimit/errors.hpp"

namespace qlimit {

GaussLegendre::GaussLegendre(int n) : nodes(static_cast<std::size_t>(n)), weights(static_cast<std::size_t>(n)) {
  // Newton iteration on P_n from the Chebyshev-like initial guesses.
  for (int i = 0; i < (n + 1) / 2; ++i) {
    double x = std::cos(std::numbers::pi * (i + 0.75) / (n + 0.5));
    double dp = 0.0;
    for (int iter = 0; iter < 100; ++iter) {
      double p0 = 1.0;
      double p1 = x;
      for (int k = 2; k <= n; ++k) {
        const double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
      }
      dp = n * (x * p1 - p0) / (x * x - 1.0);
      const double dx = p1 / dp;
      x -= dx;
      if (std::abs(dx) < 1e-16) break;
    }
    double p0 = 1.0;
    double p1 = x;
    for (int k = 2; k <= n; ++k) {
      const double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
      p0 = p1;
      p1 = p2;
    }
    dp = n * (x * p1 - p0) / (x * x - 1.0);
    const double w = 2.0 / ((1.0 - x * x) * dp * dp);
    nodes[static_cast<std::size_t>(i)] = -x;
    nodes[static_cast<std::size_t>(n - 1 - i)] = x;
    weights[static_cast<std::size_t>(i)] = w;
    weights[static_cast<std::size_t>(n - 1 - i)] = w;
  }
  if (n % 2 == 1) nodes[static_cast<std::size_t>(n / 2)] = 0.0;
}

const GaussLegendre& GaussLegendre::rule20() {
  static const GaussLegendre rule(20);
  return rule;
}

const GaussLegendre& GaussLegendre::rule64() {
  static const GaussLegendre rule(64);
  return rule;
}

namespace {

struct Adaptive {
  const std::function<double(double)>& f;
  double rel_tol;
  double abs_tol;
  int max_depth;
  int panels = 0;

  double run(double a, double b, double whole, int depth) {
    const double mid = 0.5 * (a + b);
    const auto& gl = GaussLegendre::rule64();
    const double left = gl.integrate(f, a, mid);
    const double right = gl.integrate(f, mid, b);
    const double halves = left + right;
    if (std::abs(halves - whole) <= std::max(abs_tol, rel_tol * std::abs(halves))) {
      panels += 2;
      return halves;
    }
    if (depth >= max_depth) {
      throw QuadratureError("adaptive quadrature did not converge");
    }
    return run(a, mid, left, depth + 1) + run(mid, b, right, depth + 1);
  }
};

}  // namespace

AdaptiveResult integrate_adaptive(const std::function<double(double)>& f, double a, double b,
                                  double rel_tol, double abs_tol, int max_depth) {
  const double whole = GaussLegendre::rule64().integrate(f, a, b);
  // Panel errors only matter relative to the whole integral.
  Adaptive state{f, rel_tol, std::max(abs_tol, 1e-2 * rel_tol * std::abs(whole)), max_depth};
  const double value = state.run(a, b, whole, 0);
  return {value, state.panels};
}

namespace {

struct AdaptiveVector {
  const std::function<void(double, double*)>& f;
  std::size_t n;
  double rel_tol;
  int max_depth;
  std::vector<double> floor;  // per-component absolute tolerance
  std::vector<double> scratch;

  std::vector<double> panel(double a, double b) {
    const auto& gl = GaussLegendre::rule64();
    const double half = 0.5 * (b - a);
    const double mid = 0.5 * (a + b);
    std::vector<double> sum(n, 0.0);
    for (std::size_t i = 0; i < gl.nodes.size(); ++i) {
      f(mid + half * gl.nodes[i], scratch.data());
      for (std::size_t k = 0; k < n; ++k) sum[k] += gl.weights[i] * scratch[k];
    }
    for (auto& v : sum) v *= half;
    return sum;
  }

  void run(double a, double b, const std::vector<double>& whole, int depth,
           std::vector<double>& acc) {
    const double mid = 0.5 * (a + b);
    std::vector<double> left = panel(a, mid);
    std::vector<double> right = panel(mid, b);
    bool ok = true;
    for (std::size_t k = 0; k < n && ok; ++k) {
      const double halves = left[k] + right[k];
      ok = std::abs(halves - whole[k]) <= std::max(floor[k], rel_tol * std::abs(halves));
    }
    if (ok) {
      for (std::size_t k = 0; k < n; ++k) acc[k] += left[k] + right[k];
      return;
    }
    if (depth >= max_depth) {
      throw QuadratureError("adaptive quadrature did not converge");
    }
    run(a, mid, left, depth + 1, acc);
    run(mid, b, right, depth + 1, acc);
  }
};

}  // namespace

std::vector<double> integrate_adaptive_vector(const std::function<void(double, double*)>& f,
                                              std::size_t n, double a, double b,
                                              double rel_tol, int max_depth) {
  AdaptiveVector state{f, n, rel_tol, max_depth, std::vector<double>(n), std::vector<double>(n)};
  const std::vector<double> whole = state.panel(a, b);
  for (std::size_t k = 0; k < n; ++k) state.floor[k] = 1e-2 * rel_tol * std::abs(whole[k]);
  std::vector<double> acc(n, 0.0);
  if (n == 0) return acc;
  state.run(a, b, whole, 0, acc);
  return acc;
}

}  // namespace qlimit
