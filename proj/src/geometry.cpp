#include "tomosar/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numbers>

namespace tomosar {

std::string hash_hex(std::uint64_t h) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

std::uint64_t parse_hash_hex(std::string_view s) {
  if (s.size() != 16) throw ValidationError("malformed hash '" + std::string(s) + "'");
  std::uint64_t h = 0;
  for (char c : s) {
    int d;
    if (c >= '0' && c <= '9') d = c - '0';
    else if (c >= 'a' && c <= 'f') d = c - 'a' + 10;
    else throw ValidationError("malformed hash '" + std::string(s) + "'");
    h = (h << 4) | static_cast<std::uint64_t>(d);
  }
  return h;
}

AcquisitionGeometry AcquisitionGeometry::uniform_array(int num_channels, double baseline_interval,
                                                       double wavelength, double slant_range,
                                                       double look_angle_deg) {
  AcquisitionGeometry g;
  g.wavelength = wavelength;
  g.slant_range = slant_range;
  g.look_angle_deg = look_angle_deg;
  const double centre = 0.5 * (num_channels - 1);
  for (int n = 0; n < num_channels; ++n) g.baselines.push_back((n - centre) * baseline_interval);
  return g;
}

void AcquisitionGeometry::validate() const {
  if (baselines.size() < 2) throw ValidationError("geometry.baselines: need at least 2 channels");
  if (!(wavelength > 0.0) || !std::isfinite(wavelength))
    throw ValidationError("geometry.wavelength must be positive");
  if (!(slant_range > 0.0) || !std::isfinite(slant_range))
    throw ValidationError("geometry.slant_range must be positive");
  if (!std::isfinite(look_angle_deg) || look_angle_deg <= 0.0 || look_angle_deg >= 90.0)
    throw ValidationError("geometry.look_angle_deg must lie in (0, 90)");
  for (double b : baselines)
    if (!std::isfinite(b)) throw ValidationError("geometry.baselines: non-finite baseline");
  auto [lo, hi] = std::minmax_element(baselines.begin(), baselines.end());
  if (*lo == *hi) throw ValidationError("geometry.baselines: need at least two distinct baselines");
}

std::uint64_t AcquisitionGeometry::hash() const {
  Hasher h;
  h.str("geometry").u64(baselines.size());
  for (double b : baselines) h.f64(b);
  h.f64(wavelength).f64(slant_range).f64(look_angle_deg);
  return h.value();
}

ElevationGrid::ElevationGrid(std::vector<double> samples, double spacing)
    : samples_(std::move(samples)), spacing_(spacing) {}

ElevationGrid ElevationGrid::uniform(double start, double spacing, int count) {
  if (count < 2) throw ValidationError("grid: need at least 2 samples");
  if (!(spacing > 0.0) || !std::isfinite(spacing) || !std::isfinite(start))
    throw ValidationError("grid: spacing must be positive and finite");
  std::vector<double> s(static_cast<std::size_t>(count));
  for (int l = 0; l < count; ++l) s[static_cast<std::size_t>(l)] = start + l * spacing;
  return ElevationGrid(std::move(s), spacing);
}

ElevationGrid ElevationGrid::spanning(double lo, double hi, int count) {
  if (count < 2) throw ValidationError("grid: need at least 2 samples");
  if (!(hi > lo)) throw ValidationError("grid: extent must satisfy max > min");
  return uniform(lo, (hi - lo) / (count - 1), count);
}

ElevationGrid ElevationGrid::from_samples(std::vector<double> samples) {
  if (samples.size() < 2) throw ValidationError("grid: need at least 2 samples");
  const double spacing = samples[1] - samples[0];
  if (!(spacing > 0.0)) throw ValidationError("grid: samples must be strictly increasing");
  for (std::size_t l = 0; l + 1 < samples.size(); ++l) {
    const double step = samples[l + 1] - samples[l];
    if (!(step > 0.0)) throw ValidationError("grid: samples must be strictly increasing");
    if (std::abs(step - spacing) >= 1e-9) throw ValidationError("grid: samples must be uniform");
  }
  return ElevationGrid(std::move(samples), spacing);
}

int ElevationGrid::nearest_index(double s) const {
  const double pos = (s - front()) / spacing_;
  int l = static_cast<int>(std::floor(pos));
  if (pos - l > 0.5) ++l;
  return std::clamp(l, 0, size() - 1);
}

std::uint64_t ElevationGrid::hash() const {
  Hasher h;
  h.str("grid").u64(samples_.size());
  for (double s : samples_) h.f64(s);
  return h.value();
}

double spatial_frequency(const AcquisitionGeometry& geometry, int channel_index) {
  if (channel_index < 0 || channel_index >= geometry.num_channels())
    throw ValidationError("spatial_frequency: channel index " + std::to_string(channel_index) +
                          " out of range");
  return 2.0 * geometry.baselines[static_cast<std::size_t>(channel_index)] /
         (geometry.wavelength * geometry.slant_range);
}

double power_iteration_lambda_max(const CMatrix& hermitian, double tolerance, int max_iters) {
  const Eigen::Index n = hermitian.rows();
  CVector v(n);
  for (Eigen::Index i = 0; i < n; ++i) v[i] = Complex(1.0 + 0.37 * i, 0.11 * i);
  v.normalize();
  double lambda = 0.0;
  for (int it = 0; it < max_iters; ++it) {
    const CVector w = hermitian * v;
    lambda = std::real(v.dot(w));
    // eigen-residual bounds the distance to the spectrum
    if ((w - lambda * v).norm() <= tolerance * std::abs(lambda)) break;
    const double norm = w.norm();
    if (norm == 0.0) return 0.0;
    v = w / norm;
  }
  return lambda;
}

SteeringMatrix::SteeringMatrix(CMatrix entries, std::uint64_t hash)
    : entries_(std::move(entries)), hash_(hash) {
  const CMatrix gram = entries_ * entries_.adjoint();
  lambda_max_ = power_iteration_lambda_max(gram);
}

std::uint64_t steering_hash(const AcquisitionGeometry& geometry, const ElevationGrid& grid) {
  return Hasher().str("steering").u64(geometry.hash()).u64(grid.hash()).value();
}

SteeringMatrix build_steering_matrix(const AcquisitionGeometry& geometry, const ElevationGrid& grid) {
  geometry.validate();
  const int n_rows = geometry.num_channels();
  const int n_cols = grid.size();
  CMatrix R(n_rows, n_cols);
  for (int n = 0; n < n_rows; ++n) {
    const double xi = spatial_frequency(geometry, n);
    for (int l = 0; l < n_cols; ++l) {
      const double phase = -2.0 * std::numbers::pi * xi * grid[l];
      R(n, l) = Complex(std::cos(phase), std::sin(phase));
    }
  }
  return SteeringMatrix(std::move(R), steering_hash(geometry, grid));
}

Measurement forward(const SteeringMatrix& R, const Profile& gamma) {
  if (gamma.size() != R.cols())
    throw ValidationError("forward: profile length " + std::to_string(gamma.size()) +
                          " does not match grid size " + std::to_string(R.cols()));
  return R.entries() * gamma;
}

}  // namespace tomosar
