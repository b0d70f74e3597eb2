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

#include <Eigen/Dense>

#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace qlimit {

enum class Scheme { DirectImaging, Spade, Sliver };

std::string_view to_string(Scheme scheme);
// Accepts "di", "spade", "sliver". Throws UsageError otherwise.
Scheme parse_scheme(std::string_view name);

// Tag for one observation coordinate. `block` groups coordinates that are
// independent of every other block (e.g. the two pix-SLIVER arms).
struct ComponentLabel {
  Scheme scheme = Scheme::DirectImaging;
  std::string block;
  int index = 0;

  bool operator==(const ComponentLabel&) const = default;
};

// First two moments of an observation vector and the derivative of its mean
// with respect to the separation.
struct MomentSet {
  Eigen::VectorXd mean;
  Eigen::VectorXd mean_dot;
  Eigen::MatrixXd cov;
  std::vector<ComponentLabel> labels;

  std::size_t size() const { return static_cast<std::size_t>(mean.size()); }

  // Dimensions agree, entries finite, cov symmetric to 1e-12.
  void validate() const;

  // Coordinates `indices`, in that order.
  MomentSet select(const std::vector<std::size_t>& indices) const;
};

struct BlockContribution {
  std::string block;
  double value = 0.0;
  std::size_t support_size = 0;
};

struct BoundResult {
  double value = 0.0;
  std::size_t support_size = 0;
  // One entry per label block when the covariance is exactly block-diagonal
  // across blocks; empty otherwise.
  std::vector<BlockContribution> per_component;

  std::optional<double> block_value(std::string_view block) const;
};

// mu_dot^T C^+ mu_dot, with C^+ the pseudo-inverse on the numerically
// nonzero support.
//
// Coordinates are first rescaled to unit variance (an invertible
// reparameterization that leaves the bound unchanged); exactly
// zero-variance coordinates are dropped. The rescaled covariance is
// eigendecomposed and directions with eigenvalue below 1e-12 of the largest
// are discarded. If the discarded part of the (rescaled) mean derivative
// exceeds 1e-8 of its norm, the bound is unbounded and DegenerateMomentError
// is thrown.
BoundResult fi_lower_bound(const MomentSet& m);

// True iff fi_lower_bound(large) >= fi_lower_bound(small) - 1e-10.
// `small` must be a label subset of `large`, or at least draw on the same
// scheme and blocks (a coarser pixelation of the same detector); otherwise
// LabelMismatchError.
bool bound_monotonicity_check(const MomentSet& small, const MomentSet& large);

}  // namespace qlimit
