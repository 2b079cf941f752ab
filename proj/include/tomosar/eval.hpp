#pragma once

#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

#include "tomosar/alista.hpp"
#include "tomosar/geometry.hpp"
#include "tomosar/scene.hpp"
#include "tomosar/solvers.hpp"
#include "tomosar/types.hpp"

namespace tomosar {

/// Values at or above this are reported for exact reconstructions.
inline constexpr double kNmseCapDb = 300.0;

enum class NmseMode {
  FullProfile,   // error over every grid entry
  TruthSupport,  // error restricted to entries where the truth is nonzero
};
std::string to_string(NmseMode m);
NmseMode nmse_mode_from_string(const std::string& s);

/// NMSE = sum ||est - truth||^2 / sum ||truth||^2, reported as -10 log10(NMSE)
/// so larger is better.
struct NmseReport {
  std::string solver;
  NmseMode mode = NmseMode::FullProfile;
  std::vector<double> numerators;    // per pixel ||est - truth||^2
  std::vector<double> denominators;  // per pixel ||truth||^2
  std::vector<double> per_pixel_db;  // NaN for pixels whose truth is zero
  double aggregate_ratio = 0.0;
  double aggregate_db = 0.0;
  std::size_t count = 0;
};

/// -10 log10(ratio), capped at kNmseCapDb.
double ratio_to_db(double ratio);

NmseReport nmse_db(const std::vector<Profile>& estimates, const std::vector<Profile>& truths,
                   NmseMode mode = NmseMode::FullProfile);

enum class SolverKind { Omp, Iht, Ista, Alista };
std::string to_string(SolverKind k);
SolverKind solver_kind_from_string(const std::string& s);

/// A configured per-pixel reconstruction method.
struct SolverSpec {
  std::string name;
  SolverKind kind = SolverKind::Ista;
  IstaConfig ista;
  GreedyConfig greedy;
  const AlistaModel* model = nullptr;

  /// Iterations (or layers, for ALISTA) the solver is allowed per pixel.
  int iteration_budget() const;
  Profile solve(const Measurement& y, const SteeringMatrix& R) const;
};

/// Runs the solver on every measurement; output order matches input order.
std::vector<Profile> reconstruct_all(const SolverSpec& solver, const std::vector<const Measurement*>& ys,
                                     const SteeringMatrix& R, int workers);

struct BenchReport {
  std::string solver;
  double total_seconds = 0.0;      // median wall time of one full pass
  double lane_seconds = 0.0;       // summed per-pixel times of that pass
  std::size_t pixels = 0;
  double per_pixel_mean = 0.0;     // lane_seconds / pixels
  double per_pixel_median = 0.0;
  int iteration_budget = 0;
  int repetitions = 0;
  int workers = 1;
};

/// One warm-up pass, then `repetitions` timed passes; the pass with the
/// median wall time is reported. Requires repetitions >= 3.
BenchReport benchmark(const SolverSpec& solver, const std::vector<const Measurement*>& ys,
                      const SteeringMatrix& R, int repetitions, int workers = 1);

struct CloudPoint {
  double x;  // azimuth, m
  double y;  // ground range, m
  double z;  // height, m
  double amplitude;
};

struct PointCloud {
  std::vector<CloudPoint> points;
};

struct PixelEstimate {
  PixelCoord coord;
  Profile estimate;
};

/// One point per nonzero entry with |g_l| >= threshold * max|g| over all
/// pixels. Elevation s maps to height s cos(look) and shifts ground range by
/// s sin(look).
PointCloud to_point_cloud(const std::vector<PixelEstimate>& estimates, const ElevationGrid& grid,
                          const AcquisitionGeometry& geometry, double pixel_spacing,
                          double detection_threshold);

void write_xyz(std::ostream& os, const PointCloud& cloud);
void write_ply(std::ostream& os, const PointCloud& cloud);

/// Fixed-width comparison tables for standard output.
void print_nmse_table(std::ostream& os, const std::vector<NmseReport>& reports);
void print_bench_table(std::ostream& os, const std::vector<BenchReport>& reports);
/// "ordering: A > B > C" by aggregate NMSE, best first.
std::string nmse_ordering(const std::vector<NmseReport>& reports);

}  // namespace tomosar
