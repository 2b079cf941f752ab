#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>
#include <vector>

#include "tomosar/geometry.hpp"
#include "tomosar/types.hpp"

namespace testutil {

using namespace tomosar;

inline AcquisitionGeometry reference_geometry() {
  return AcquisitionGeometry::uniform_array(8, 0.1, 0.003125, 400.0, 45.0);
}

inline CVector random_cvector(std::mt19937_64& rng, Eigen::Index n, double scale = 1.0) {
  std::normal_distribution<double> g(0.0, scale);
  CVector v(n);
  for (Eigen::Index i = 0; i < n; ++i) v[i] = {g(rng), g(rng)};
  return v;
}

inline Complex random_phase(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.0, 2.0 * std::numbers::pi);
  return std::polar(1.0, u(rng));
}

/// Jittered-lattice baselines and a grid spanning a random fraction of the
/// unambiguous window.
struct RandomProblem {
  AcquisitionGeometry geometry;
  ElevationGrid grid = ElevationGrid::uniform(0.0, 1.0, 2);
};

inline RandomProblem random_problem(std::mt19937_64& rng, int n, int L) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  RandomProblem p;
  const double interval = 0.05 + 0.15 * u(rng);
  for (int i = 0; i < n; ++i) p.geometry.baselines.push_back((i - 0.5 * (n - 1) + 0.6 * (u(rng) - 0.5)) * interval);
  p.geometry.wavelength = 0.003125;
  p.geometry.slant_range = 300.0 + 200.0 * u(rng);
  p.geometry.look_angle_deg = 30.0 + 30.0 * u(rng);
  const double xi_step = 2.0 * interval / (p.geometry.wavelength * p.geometry.slant_range);
  const double window = (0.6 + 0.4 * u(rng)) / xi_step;
  p.grid = ElevationGrid::spanning(-0.25 * window, 0.75 * window, L);
  return p;
}

/// Partial-DFT steering matrix: baselines on the lattice rows * b0 and a grid
/// covering one period of the lowest spatial frequency with L samples.
inline SteeringMatrix lattice_steering(const std::vector<int>& rows, int L, double b0 = 0.1) {
  AcquisitionGeometry g;
  for (int r : rows) g.baselines.push_back(r * b0);
  g.wavelength = 0.003125;
  g.slant_range = 400.0;
  const double xi0 = 2.0 * b0 / (g.wavelength * g.slant_range);
  const auto grid = ElevationGrid::uniform(0.0, 1.0 / (L * xi0), L);
  return build_steering_matrix(g, grid);
}

}  // namespace testutil
