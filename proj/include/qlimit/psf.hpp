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
#include <filesystem>
#include <memory>
#include <vector>

namespace qlimit {

enum class PsfKind { Gaussian, NumericSampled };

// Complex amplitude samples on a grid centered on the origin. Sample (ix, iy)
// sits at x = (ix - (nx - 1) / 2) * dx, y = (iy - (ny - 1) / 2) * dy and is
// stored at values[iy * nx + ix].
struct SampledGrid {
  int nx = 0;
  int ny = 0;
  double dx = 0.0;
  double dy = 0.0;
  std::vector<std::complex<double>> values;

  double x(int ix) const { return (ix - 0.5 * (nx - 1)) * dx; }
  double y(int iy) const { return (iy - 0.5 * (ny - 1)) * dy; }
  const std::complex<double>& at(int ix, int iy) const {
    return values[static_cast<std::size_t>(iy) * nx + ix];
  }
};

// An inversion-symmetric amplitude PSF with unit energy.
//
// The Gaussian kind is psi(x, y) = (2 pi s^2)^{-1/2} exp(-(x^2 + y^2) / 4 s^2)
// and all overlap quantities are closed form. The sampled kind is validated
// at construction (normalization, inversion symmetry, grid extent and
// resolution) and keeps a precomputed x-direction power spectrum from which
// the overlap and its derivatives are evaluated for arbitrary shifts.
//
// PsfModel is an immutable value; copies share the sampled data.
class PsfModel {
 public:
  static PsfModel gaussian(double sigma);
  static PsfModel sampled(SampledGrid grid);

  PsfKind kind() const noexcept { return kind_; }
  bool is_gaussian() const noexcept { return kind_ == PsfKind::Gaussian; }

  // Gaussian half-width for the Gaussian kind; RMS x-width of |psi|^2 for
  // sampled PSFs (used for step sizing).
  double sigma() const noexcept { return sigma_; }

  // psi(-x, y) == psi(x, y). Always true for the Gaussian kind.
  bool reflection_symmetric() const noexcept;

  // Largest |d| for which a sampled overlap can be evaluated. Infinite for
  // the Gaussian kind.
  double max_shift() const noexcept;

  // Nullptr for the Gaussian kind.
  const SampledGrid* grid() const noexcept;

  struct Spectrum;
  const Spectrum* spectrum() const noexcept { return spectrum_.get(); }

 private:
  PsfModel() = default;

  PsfKind kind_ = PsfKind::Gaussian;
  double sigma_ = 1.0;
  std::shared_ptr<const Spectrum> spectrum_;
};

// delta(d) and its first two derivatives in d.
struct OverlapDerivatives {
  double delta = 1.0;
  double gamma = 0.0;
  double beta = 0.0;
};

// Overlap delta(d) = <psi | psi shifted by (d, 0)>. Real for inversion-
// symmetric PSFs; delta(-d) = delta(d).
double overlap(const PsfModel& psf, double d);

// Full complex overlap for sampled PSFs. The imaginary part is the
// quadrature residual and vanishes for inversion-symmetric grids.
std::complex<double> overlap_complex(const PsfModel& psf, double d);

OverlapDerivatives overlap_derivatives(const PsfModel& psf, double d);

// (Delta k_x^2) = integral of |d psi / dx|^2, equal to -beta(0).
double mean_square_bandwidth(const PsfModel& psf);

// Gaussian PSF sampled on a square grid with an odd number of points per
// axis, so that the origin is a sample.
SampledGrid sample_gaussian(double sigma, double half_width, double spacing);

// Grid CSV: first record `nx,ny,dx,dy` (values), then one `ix,iy,re,im` row
// per sample. Non-numeric lines (column-name headers) are skipped.
SampledGrid read_psf_csv(const std::filesystem::path& path);
void write_psf_csv(const std::filesystem::path& path, const SampledGrid& grid);

}  // namespace qlimit
