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

#include "qlimit/fisher.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <utility>

#include "qlimit/errors.hpp"

namespace qlimit {

namespace {

constexpr double kEigenRelTol = 1e-12;
constexpr double kEigenFloor = 1e-300;
constexpr double kDegenerateRelTol = 1e-8;
constexpr double kSymmetryTol = 1e-12;
constexpr double kPsdRelTol = 1e-10;
constexpr double kMonotonicityTol = 1e-10;

struct Core {
  double value = 0.0;
  std::size_t support = 0;
};

Core bound_core(const Eigen::VectorXd& mean_dot, const Eigen::MatrixXd& cov) {
  const Eigen::Index n = mean_dot.size();
  const double dot_norm = mean_dot.norm();

  const double trace = cov.diagonal().cwiseAbs().sum();
  std::vector<Eigen::Index> keep;
  keep.reserve(static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i) {
    if (cov(i, i) < -kPsdRelTol * trace) {
      throw ConfigurationError("moment bound: covariance is not positive semidefinite");
    }
    if (cov(i, i) > kEigenFloor) {
      keep.push_back(i);
    } else if (std::abs(mean_dot(i)) > kDegenerateRelTol * dot_norm) {
      throw DegenerateMomentError(
          "moment bound diverges: nonzero mean derivative on a zero-variance coordinate");
    }
  }
  if (keep.empty()) return {};

  const auto k = static_cast<Eigen::Index>(keep.size());
  Eigen::VectorXd scale(k);
  Eigen::VectorXd v(k);
  for (Eigen::Index a = 0; a < k; ++a) {
    scale(a) = 1.0 / std::sqrt(cov(keep[a], keep[a]));
    v(a) = mean_dot(keep[a]) * scale(a);
  }
  Eigen::MatrixXd corr(k, k);
  for (Eigen::Index a = 0; a < k; ++a) {
    for (Eigen::Index b = 0; b < k; ++b) {
      corr(a, b) = cov(keep[a], keep[b]) * scale(a) * scale(b);
    }
  }

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(corr);
  if (eig.info() != Eigen::Success) {
    throw Error("moment bound: eigendecomposition failed");
  }
  const Eigen::VectorXd& lambda = eig.eigenvalues();
  if (lambda.minCoeff() < -kPsdRelTol * static_cast<double>(k)) {
    throw ConfigurationError("moment bound: covariance is not positive semidefinite");
  }
  const double cutoff = kEigenRelTol * std::max(lambda.maxCoeff(), kEigenFloor);
  const Eigen::VectorXd proj = eig.eigenvectors().transpose() * v;

  Core out;
  double discarded = 0.0;
  for (Eigen::Index i = 0; i < k; ++i) {
    if (lambda(i) > cutoff) {
      out.value += proj(i) * proj(i) / lambda(i);
      ++out.support;
    } else {
      discarded += proj(i) * proj(i);
    }
  }
  if (std::sqrt(discarded) > kDegenerateRelTol * v.norm()) {
    throw DegenerateMomentError(
        "moment bound diverges: mean derivative has a component outside the range of "
        "the covariance");
  }
  return out;
}

}  // namespace

std::string_view to_string(Scheme scheme) {
  switch (scheme) {
    case Scheme::DirectImaging: return "di";
    case Scheme::Spade: return "spade";
    case Scheme::Sliver: return "sliver";
  }
  return "unknown";
}

Scheme parse_scheme(std::string_view name) {
  if (name == "di") return Scheme::DirectImaging;
  if (name == "spade") return Scheme::Spade;
  if (name == "sliver") return Scheme::Sliver;
  throw UsageError("scheme", "unknown scheme '" + std::string(name) +
                                 "' (expected di, spade or sliver)");
}

void MomentSet::validate() const {
  const auto n = mean.size();
  if (mean_dot.size() != n || cov.rows() != n || cov.cols() != n ||
      labels.size() != static_cast<std::size_t>(n)) {
    throw ConfigurationError("moment set: dimensions of mean, mean_dot, cov, labels differ");
  }
  if (!mean.allFinite() || !mean_dot.allFinite() || !cov.allFinite()) {
    throw ConfigurationError("moment set: non-finite entries");
  }
  const double scale = std::max(1.0, cov.cwiseAbs().maxCoeff());
  if ((cov - cov.transpose()).cwiseAbs().maxCoeff() > kSymmetryTol * scale) {
    throw ConfigurationError("moment set: covariance is not symmetric");
  }
}

MomentSet MomentSet::select(const std::vector<std::size_t>& indices) const {
  const auto k = static_cast<Eigen::Index>(indices.size());
  MomentSet out;
  out.mean.resize(k);
  out.mean_dot.resize(k);
  out.cov.resize(k, k);
  out.labels.reserve(indices.size());
  for (Eigen::Index a = 0; a < k; ++a) {
    const auto i = static_cast<Eigen::Index>(indices[static_cast<std::size_t>(a)]);
    if (i >= mean.size()) throw ConfigurationError("moment set: index out of range");
    out.mean(a) = mean(i);
    out.mean_dot(a) = mean_dot(i);
    out.labels.push_back(labels[static_cast<std::size_t>(i)]);
    for (Eigen::Index b = 0; b < k; ++b) {
      out.cov(a, b) = cov(i, static_cast<Eigen::Index>(indices[static_cast<std::size_t>(b)]));
    }
  }
  return out;
}

std::optional<double> BoundResult::block_value(std::string_view block) const {
  for (const auto& c : per_component) {
    if (c.block == block) return c.value;
  }
  return std::nullopt;
}

BoundResult fi_lower_bound(const MomentSet& m) {
  m.validate();
  BoundResult out;
  const Core all = bound_core(m.mean_dot, m.cov);
  out.value = all.value;
  out.support_size = all.support;

  // Block structure comes from the labels; cross-block entries must be exact
  // zeros for the additive split to apply.
  std::vector<std::string> blocks;
  for (const auto& l : m.labels) {
    if (std::find(blocks.begin(), blocks.end(), l.block) == blocks.end()) {
      blocks.push_back(l.block);
    }
  }
  if (blocks.size() < 2) return out;
  const auto n = static_cast<Eigen::Index>(m.size());
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < n; ++j) {
      if (m.labels[static_cast<std::size_t>(i)].block !=
              m.labels[static_cast<std::size_t>(j)].block &&
          m.cov(i, j) != 0.0) {
        return out;
      }
    }
  }
  for (const auto& b : blocks) {
    std::vector<std::size_t> idx;
    for (std::size_t i = 0; i < m.labels.size(); ++i) {
      if (m.labels[i].block == b) idx.push_back(i);
    }
    const MomentSet sub = m.select(idx);
    const Core c = bound_core(sub.mean_dot, sub.cov);
    out.per_component.push_back({b, c.value, c.support});
  }
  return out;
}

bool bound_monotonicity_check(const MomentSet& small, const MomentSet& large) {
  const bool subset = std::all_of(small.labels.begin(), small.labels.end(), [&](const auto& l) {
    return std::find(large.labels.begin(), large.labels.end(), l) != large.labels.end();
  });
  if (!subset) {
    std::set<std::pair<Scheme, std::string>> large_blocks;
    for (const auto& l : large.labels) large_blocks.emplace(l.scheme, l.block);
    for (const auto& l : small.labels) {
      if (!large_blocks.contains({l.scheme, l.block})) {
        throw LabelMismatchError("monotonicity check: component " + std::string(to_string(l.scheme)) +
                                 ":" + l.block + ":" + std::to_string(l.index) +
                                 " has no counterpart in the larger moment set");
      }
    }
  }
  return fi_lower_bound(large).value >= fi_lower_bound(small).value - kMonotonicityTol;
}

}  // namespace qlimit
