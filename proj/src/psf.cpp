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

#include "qlimit/psf.hpp"

#include <fftw3.h>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <mutex>
#include <numbers>
#include <sstream>
#include <string>

#include "qlimit/errors.hpp"

namespace qlimit {

// Power spectrum along x, summed over rows, for the band-limited
// interpolant of the sampled amplitude:
//   delta(d) = sum_k weight[k] * exp(-i omega[k] d).
struct PsfModel::Spectrum {
  SampledGrid grid;
  std::vector<double> omega;
  std::vector<double> weight;
  double max_shift = 0.0;
  bool reflection_symmetric = false;
};

namespace {

constexpr double kNormalizationTol = 1e-9;
constexpr double kSymmetryTol = 1e-12;
constexpr double kMinHalfWidthSigmas = 8.0;
// Spectral weight allowed above 0.75 of the Nyquist frequency.
constexpr double kMaxHighBandFraction = 1e-10;

// The FFTW planner is not reentrant.
std::mutex& fftw_planner_mutex() {
  static std::mutex m;
  return m;
}

void require_finite(double d, const char* what) {
  if (!std::isfinite(d)) {
    throw ConfigurationError(std::string(what) + " must be finite");
  }
}

double trapezoid_weight(int i, int n) {
  return (n > 1 && (i == 0 || i == n - 1)) ? 0.5 : 1.0;
}

std::shared_ptr<PsfModel::Spectrum> build_spectrum(SampledGrid grid) {
  const int nx = grid.nx;
  const int ny = grid.ny;
  const int m = 2 * nx;

  std::vector<double> power(static_cast<std::size_t>(m), 0.0);
  fftw_complex* buf = fftw_alloc_complex(static_cast<std::size_t>(m));
  fftw_plan plan;
  {
    std::lock_guard lock(fftw_planner_mutex());
    plan = fftw_plan_dft_1d(m, buf, buf, FFTW_FORWARD, FFTW_ESTIMATE);
  }
  for (int iy = 0; iy < ny; ++iy) {
    for (int i = 0; i < m; ++i) {
      const std::complex<double> v = i < nx ? grid.at(i, iy) : 0.0;
      buf[i][0] = v.real();
      buf[i][1] = v.imag();
    }
    fftw_execute(plan);
    for (int k = 0; k < m; ++k) {
      power[static_cast<std::size_t>(k)] += buf[k][0] * buf[k][0] + buf[k][1] * buf[k][1];
    }
  }
  {
    std::lock_guard lock(fftw_planner_mutex());
    fftw_destroy_plan(plan);
  }
  fftw_free(buf);

  auto spec = std::make_shared<PsfModel::Spectrum>();
  const double scale = grid.dx * grid.dy / m;
  const double dw = 2.0 * std::numbers::pi / (m * grid.dx);
  double total = 0.0;
  double high = 0.0;
  const double nyquist = std::numbers::pi / grid.dx;
  for (int k = 0; k < m; ++k) {
    const double w = scale * power[static_cast<std::size_t>(k)];
    total += w;
    if (2 * k == m) {
      // Nyquist bin: split evenly between +/- omega.
      spec->omega.push_back(nyquist);
      spec->weight.push_back(0.5 * w);
      spec->omega.push_back(-nyquist);
      spec->weight.push_back(0.5 * w);
      high += w;
      continue;
    }
    const int signed_k = 2 * k < m ? k : k - m;
    const double omega = dw * signed_k;
    if (std::abs(omega) > 0.75 * nyquist) high += w;
    spec->omega.push_back(omega);
    spec->weight.push_back(w);
  }
  if (high > kMaxHighBandFraction * total) {
    throw ConfigurationError(
        "sampled PSF: grid too coarse, spectral content near the Nyquist "
        "frequency is not negligible");
  }
  spec->max_shift = nx * grid.dx;
  spec->grid = std::move(grid);
  return spec;
}

}  // namespace

PsfModel PsfModel::gaussian(double sigma) {
  if (!(sigma > 0.0) || !std::isfinite(sigma)) {
    throw ConfigurationError("Gaussian PSF: sigma must be positive and finite");
  }
  PsfModel psf;
  psf.kind_ = PsfKind::Gaussian;
  psf.sigma_ = sigma;
  return psf;
}

PsfModel PsfModel::sampled(SampledGrid grid) {
  if (grid.nx < 3 || grid.ny < 1) {
    throw ConfigurationError("sampled PSF: grid needs nx >= 3 and ny >= 1");
  }
  if (!(grid.dx > 0.0) || !(grid.dy > 0.0) || !std::isfinite(grid.dx) ||
      !std::isfinite(grid.dy)) {
    throw ConfigurationError("sampled PSF: spacings must be positive and finite");
  }
  if (grid.values.size() != static_cast<std::size_t>(grid.nx) * grid.ny) {
    throw ConfigurationError("sampled PSF: value count does not match nx*ny");
  }

  double norm = 0.0;
  double x2 = 0.0;
  double y2 = 0.0;
  bool reflection = true;
  for (int iy = 0; iy < grid.ny; ++iy) {
    for (int ix = 0; ix < grid.nx; ++ix) {
      const auto& v = grid.at(ix, iy);
      if (!std::isfinite(v.real()) || !std::isfinite(v.imag())) {
        throw ConfigurationError("sampled PSF: non-finite sample");
      }
      if (std::abs(v - grid.at(grid.nx - 1 - ix, grid.ny - 1 - iy)) > kSymmetryTol) {
        throw ConfigurationError("sampled PSF: not inversion-symmetric, psi(-r) != psi(r)");
      }
      if (std::abs(v - grid.at(grid.nx - 1 - ix, iy)) > kSymmetryTol) reflection = false;
      const double w = trapezoid_weight(ix, grid.nx) * trapezoid_weight(iy, grid.ny) *
                       grid.dx * grid.dy * std::norm(v);
      norm += w;
      x2 += w * grid.x(ix) * grid.x(ix);
      y2 += w * grid.y(iy) * grid.y(iy);
    }
  }
  if (std::abs(norm - 1.0) > kNormalizationTol) {
    throw ConfigurationError("sampled PSF: not unit-normalized (integral of |psi|^2 = " +
                             std::to_string(norm) + ")");
  }
  const double sigma_x = std::sqrt(x2 / norm);
  const double sigma_y = std::sqrt(y2 / norm);
  const double half_x = 0.5 * (grid.nx - 1) * grid.dx;
  const double half_y = 0.5 * (grid.ny - 1) * grid.dy;
  const double slack = 1.0 - 1e-9;
  if (half_x < kMinHalfWidthSigmas * sigma_x * slack ||
      (grid.ny > 1 && half_y < kMinHalfWidthSigmas * sigma_y * slack)) {
    throw ConfigurationError("sampled PSF: grid half-width must be at least 8 RMS widths");
  }

  PsfModel psf;
  psf.kind_ = PsfKind::NumericSampled;
  psf.sigma_ = sigma_x;
  auto spec = build_spectrum(std::move(grid));
  spec->reflection_symmetric = reflection;
  psf.spectrum_ = std::move(spec);
  return psf;
}

bool PsfModel::reflection_symmetric() const noexcept {
  return spectrum_ ? spectrum_->reflection_symmetric : true;
}

double PsfModel::max_shift() const noexcept {
  return spectrum_ ? spectrum_->max_shift : std::numeric_limits<double>::infinity();
}

const SampledGrid* PsfModel::grid() const noexcept {
  return spectrum_ ? &spectrum_->grid : nullptr;
}

namespace {

const PsfModel::Spectrum& checked_spectrum(const PsfModel& psf, double d) {
  const auto* spec = psf.spectrum();
  if (std::abs(d) > spec->max_shift) {
    throw ConfigurationError("sampled PSF: shift " + std::to_string(d) +
                             " not resolvable on a grid of x-extent " +
                             std::to_string(spec->max_shift));
  }
  return *spec;
}

}  // namespace

std::complex<double> overlap_complex(const PsfModel& psf, double d) {
  require_finite(d, "overlap shift d");
  if (psf.is_gaussian()) return {overlap(psf, d), 0.0};
  const auto& spec = checked_spectrum(psf, d);
  double re = 0.0;
  double im = 0.0;
  for (std::size_t k = 0; k < spec.omega.size(); ++k) {
    re += spec.weight[k] * std::cos(spec.omega[k] * d);
    im -= spec.weight[k] * std::sin(spec.omega[k] * d);
  }
  return {re, im};
}

double overlap(const PsfModel& psf, double d) {
  require_finite(d, "overlap shift d");
  if (psf.is_gaussian()) {
    const double s = psf.sigma();
    return std::exp(-d * d / (8.0 * s * s));
  }
  return overlap_derivatives(psf, d).delta;
}

OverlapDerivatives overlap_derivatives(const PsfModel& psf, double d) {
  require_finite(d, "overlap shift d");
  OverlapDerivatives out;
  if (psf.is_gaussian()) {
    const double s2 = psf.sigma() * psf.sigma();
    out.delta = std::exp(-d * d / (8.0 * s2));
    out.gamma = -(d / (4.0 * s2)) * out.delta;
    out.beta = (d * d / (16.0 * s2 * s2) - 1.0 / (4.0 * s2)) * out.delta;
    return out;
  }
  // Evaluate at |d| and restore the parity: delta, beta even; gamma odd.
  const double a = std::abs(d);
  const auto& spec = checked_spectrum(psf, a);
  out = {0.0, 0.0, 0.0};
  for (std::size_t k = 0; k < spec.omega.size(); ++k) {
    const double w = spec.weight[k];
    const double om = spec.omega[k];
    const double c = std::cos(om * a);
    out.delta += w * c;
    out.gamma -= w * om * std::sin(om * a);
    out.beta -= w * om * om * c;
  }
  if (d < 0.0) out.gamma = -out.gamma;
  return out;
}

double mean_square_bandwidth(const PsfModel& psf) {
  if (psf.is_gaussian()) return 1.0 / (4.0 * psf.sigma() * psf.sigma());
  const auto& spec = *psf.spectrum();
  double sum = 0.0;
  for (std::size_t k = 0; k < spec.omega.size(); ++k) {
    sum += spec.weight[k] * spec.omega[k] * spec.omega[k];
  }
  return sum;
}

SampledGrid sample_gaussian(double sigma, double half_width, double spacing) {
  if (!(sigma > 0.0) || !(half_width > 0.0) || !(spacing > 0.0)) {
    throw ConfigurationError("sample_gaussian: parameters must be positive");
  }
  const int half = static_cast<int>(std::ceil(half_width / spacing - 1e-9));
  SampledGrid grid;
  grid.nx = grid.ny = 2 * half + 1;
  grid.dx = grid.dy = spacing;
  grid.values.resize(static_cast<std::size_t>(grid.nx) * grid.ny);
  const double amp = 1.0 / std::sqrt(2.0 * std::numbers::pi * sigma * sigma);
  for (int iy = 0; iy < grid.ny; ++iy) {
    for (int ix = 0; ix < grid.nx; ++ix) {
      const double r2 = grid.x(ix) * grid.x(ix) + grid.y(iy) * grid.y(iy);
      grid.values[static_cast<std::size_t>(iy) * grid.nx + ix] =
          amp * std::exp(-r2 / (4.0 * sigma * sigma));
    }
  }
  return grid;
}

namespace {

bool parse_fields(const std::string& line, double (&out)[4]) {
  std::size_t pos = 0;
  for (int i = 0; i < 4; ++i) {
    while (pos < line.size() && (line[pos] == ' ' || line[pos] == '\t')) ++pos;
    const char* first = line.data() + pos;
    const char* last = line.data() + line.size();
    auto [ptr, ec] = std::from_chars(first, last, out[i]);
    if (ec != std::errc()) return false;
    pos = static_cast<std::size_t>(ptr - line.data());
    while (pos < line.size() && (line[pos] == ' ' || line[pos] == '\t' || line[pos] == '\r')) ++pos;
    if (i < 3) {
      if (pos >= line.size() || line[pos] != ',') return false;
      ++pos;
    }
  }
  return pos == line.size();
}

}  // namespace

SampledGrid read_psf_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigurationError("cannot open PSF grid file " + path.string());

  SampledGrid grid;
  bool have_header = false;
  std::vector<char> seen;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line[0] == '#') continue;
    double f[4];
    if (!parse_fields(line, f)) continue;  // column-name rows
    if (!have_header) {
      grid.nx = static_cast<int>(f[0]);
      grid.ny = static_cast<int>(f[1]);
      grid.dx = f[2];
      grid.dy = f[3];
      if (grid.nx != f[0] || grid.ny != f[1] || grid.nx < 1 || grid.ny < 1) {
        throw ConfigurationError("PSF grid file: nx and ny must be positive integers");
      }
      grid.values.assign(static_cast<std::size_t>(grid.nx) * grid.ny, 0.0);
      seen.assign(grid.values.size(), 0);
      have_header = true;
      continue;
    }
    const int ix = static_cast<int>(f[0]);
    const int iy = static_cast<int>(f[1]);
    if (ix != f[0] || iy != f[1] || ix < 0 || iy < 0 || ix >= grid.nx || iy >= grid.ny) {
      throw ConfigurationError("PSF grid file: bad sample index on line " +
                               std::to_string(line_no));
    }
    const std::size_t idx = static_cast<std::size_t>(iy) * grid.nx + ix;
    if (seen[idx]) {
      throw ConfigurationError("PSF grid file: duplicate sample on line " +
                               std::to_string(line_no));
    }
    seen[idx] = 1;
    grid.values[idx] = {f[2], f[3]};
  }
  if (!have_header) throw ConfigurationError("PSF grid file: missing nx,ny,dx,dy record");
  if (std::find(seen.begin(), seen.end(), 0) != seen.end()) {
    throw ConfigurationError("PSF grid file: missing samples");
  }
  return grid;
}

void write_psf_csv(const std::filesystem::path& path, const SampledGrid& grid) {
  std::ofstream out(path);
  if (!out) throw ConfigurationError("cannot write PSF grid file " + path.string());
  char buf[128];
  std::snprintf(buf, sizeof buf, "%d,%d,%.17g,%.17g\n", grid.nx, grid.ny, grid.dx, grid.dy);
  out << buf;
  for (int iy = 0; iy < grid.ny; ++iy) {
    for (int ix = 0; ix < grid.nx; ++ix) {
      const auto& v = grid.at(ix, iy);
      std::snprintf(buf, sizeof buf, "%d,%d,%.17g,%.17g\n", ix, iy, v.real(), v.imag());
      out << buf;
    }
  }
}

}  // namespace qlimit
