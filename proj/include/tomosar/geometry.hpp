#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "tomosar/types.hpp"

namespace tomosar {

/// Multi-baseline acquisition. Baselines are cross-track positions in
/// meters, one per channel. The carrier frequency is carried for reporting
/// only; the wavelength is always taken as given.
struct AcquisitionGeometry {
  std::vector<double> baselines;
  double wavelength = 0.0;
  double slant_range = 0.0;
  double look_angle_deg = 45.0;
  std::optional<double> carrier_frequency_ghz;

  /// N channels centred on zero with a constant baseline interval.
  static AcquisitionGeometry uniform_array(int num_channels, double baseline_interval,
                                           double wavelength, double slant_range,
                                           double look_angle_deg);

  int num_channels() const { return static_cast<int>(baselines.size()); }

  /// Throws ValidationError when an invariant does not hold.
  void validate() const;

  std::uint64_t hash() const;
};

/// Uniform elevation sampling s_l = start + l * spacing, l = 0..L-1.
class ElevationGrid {
 public:
  static ElevationGrid uniform(double start, double spacing, int count);
  /// Grid of `count` samples covering [lo, hi] inclusive.
  static ElevationGrid spanning(double lo, double hi, int count);
  /// Accepts explicit samples; rejects non-uniform or non-increasing input.
  static ElevationGrid from_samples(std::vector<double> samples);

  int size() const { return static_cast<int>(samples_.size()); }
  double spacing() const { return spacing_; }
  double front() const { return samples_.front(); }
  double back() const { return samples_.back(); }
  double operator[](int l) const { return samples_[static_cast<std::size_t>(l)]; }
  const std::vector<double>& samples() const { return samples_; }

  /// Index of the sample closest to `s` (ties resolve to the lower index).
  int nearest_index(double s) const;
  bool contains(double s) const { return s >= front() - 0.5 * spacing_ && s <= back() + 0.5 * spacing_; }

  std::uint64_t hash() const;

 private:
  ElevationGrid(std::vector<double> samples, double spacing);

  std::vector<double> samples_;
  double spacing_ = 0.0;
};

/// xi_n = 2 b_n / (lambda r), in cycles per meter of elevation.
double spatial_frequency(const AcquisitionGeometry& geometry, int channel_index);

/// N x L sensing operator R_nl = exp(-j 2 pi xi_n s_l).
class SteeringMatrix {
 public:
  SteeringMatrix(CMatrix entries, std::uint64_t hash);

  const CMatrix& entries() const { return entries_; }
  int rows() const { return static_cast<int>(entries_.rows()); }
  int cols() const { return static_cast<int>(entries_.cols()); }
  std::uint64_t hash() const { return hash_; }

  /// Largest eigenvalue of R^H R, by power iteration on the N x N Gram R R^H.
  double lambda_max() const { return lambda_max_; }

 private:
  CMatrix entries_;
  std::uint64_t hash_;
  double lambda_max_;
};

SteeringMatrix build_steering_matrix(const AcquisitionGeometry& geometry, const ElevationGrid& grid);

/// Identifier shared by every steering matrix built from the same geometry and grid.
std::uint64_t steering_hash(const AcquisitionGeometry& geometry, const ElevationGrid& grid);

/// Noiseless measurement y = R gamma.
Measurement forward(const SteeringMatrix& R, const Profile& gamma);

/// Largest eigenvalue of a Hermitian positive semidefinite matrix by power
/// iteration (tolerance 1e-10 relative, at most 1000 iterations).
double power_iteration_lambda_max(const CMatrix& hermitian, double tolerance = 1e-10,
                                  int max_iters = 1000);

}  // namespace tomosar
