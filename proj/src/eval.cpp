#include "tomosar/eval.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numbers>
#include <ostream>

#include "tomosar/parallel.hpp"

namespace tomosar {

std::string to_string(NmseMode m) { return m == NmseMode::FullProfile ? "full" : "truth_support"; }

NmseMode nmse_mode_from_string(const std::string& s) {
  if (s == "full") return NmseMode::FullProfile;
  if (s == "truth_support") return NmseMode::TruthSupport;
  throw ValidationError("unknown NMSE mode '" + s + "' (expected full or truth_support)");
}

double ratio_to_db(double ratio) {
  if (ratio <= 0.0) return kNmseCapDb;
  return std::min(kNmseCapDb, -10.0 * std::log10(ratio));
}

NmseReport nmse_db(const std::vector<Profile>& estimates, const std::vector<Profile>& truths, NmseMode mode) {
  if (estimates.size() != truths.size())
    throw ValidationError("nmse: " + std::to_string(estimates.size()) + " estimates vs " +
                          std::to_string(truths.size()) + " truths");
  NmseReport r;
  r.mode = mode;
  r.count = truths.size();
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < truths.size(); ++i) {
    const Profile& e = estimates[i];
    const Profile& t = truths[i];
    if (e.size() != t.size()) throw ValidationError("nmse: profile length mismatch at pixel " + std::to_string(i));
    double n = 0.0;
    if (mode == NmseMode::FullProfile) {
      n = (e - t).squaredNorm();
    } else {
      for (Eigen::Index l = 0; l < t.size(); ++l)
        if (t[l] != Complex(0.0, 0.0)) n += std::norm(e[l] - t[l]);
    }
    const double d = t.squaredNorm();
    r.numerators.push_back(n);
    r.denominators.push_back(d);
    r.per_pixel_db.push_back(d > 0.0 ? ratio_to_db(n / d) : std::numeric_limits<double>::quiet_NaN());
    num += n;
    den += d;
  }
  if (!(den > 0.0)) throw ValidationError("nmse: truth set is all zero");
  r.aggregate_ratio = num / den;
  r.aggregate_db = ratio_to_db(r.aggregate_ratio);
  return r;
}

std::string to_string(SolverKind k) {
  switch (k) {
    case SolverKind::Omp: return "omp";
    case SolverKind::Iht: return "iht";
    case SolverKind::Ista: return "ista";
    case SolverKind::Alista: return "alista";
  }
  return "?";
}

SolverKind solver_kind_from_string(const std::string& s) {
  if (s == "omp") return SolverKind::Omp;
  if (s == "iht") return SolverKind::Iht;
  if (s == "ista") return SolverKind::Ista;
  if (s == "alista") return SolverKind::Alista;
  throw ValidationError("unknown solver '" + s + "' (expected omp, iht, ista or alista)");
}

int SolverSpec::iteration_budget() const {
  switch (kind) {
    case SolverKind::Omp: return std::min(greedy.sparsity, greedy.max_iters);
    case SolverKind::Iht: return greedy.max_iters;
    case SolverKind::Ista: return ista.max_iters;
    case SolverKind::Alista: return model ? model->layers() : 0;
  }
  return 0;
}

Profile SolverSpec::solve(const Measurement& y, const SteeringMatrix& R) const {
  switch (kind) {
    case SolverKind::Omp: return omp_solve(y, R, greedy).estimate;
    case SolverKind::Iht: return iht_solve(y, R, greedy).estimate;
    case SolverKind::Ista: return ista_solve(y, R, ista).estimate;
    case SolverKind::Alista:
      if (!model) throw ValidationError("solver '" + name + "': alista requires a trained model");
      return alista_forward(*model, y, R);
  }
  throw ValidationError("unknown solver kind");
}

std::vector<Profile> reconstruct_all(const SolverSpec& solver, const std::vector<const Measurement*>& ys,
                                     const SteeringMatrix& R, int workers) {
  if (solver.kind == SolverKind::Alista && !solver.model)
    throw ValidationError("solver '" + solver.name + "': alista requires a trained model");
  std::vector<Profile> out(ys.size());
  parallel_for(ys.size(), workers, [&](std::size_t i) { out[i] = solver.solve(*ys[i], R); });
  return out;
}

BenchReport benchmark(const SolverSpec& solver, const std::vector<const Measurement*>& ys,
                      const SteeringMatrix& R, int repetitions, int workers) {
  using clock = std::chrono::steady_clock;
  if (repetitions < 3) throw ValidationError("benchmark: repetitions must be >= 3");
  if (solver.kind == SolverKind::Alista && !solver.model)
    throw ValidationError("solver '" + solver.name + "': alista requires a trained model");

  BenchReport rep;
  rep.solver = solver.name;
  rep.pixels = ys.size();
  rep.iteration_budget = solver.iteration_budget();
  rep.repetitions = repetitions;
  rep.workers = resolve_workers(workers);
  if (ys.empty()) return rep;

  struct Pass {
    double wall;
    std::vector<double> per_pixel;
  };
  auto run_pass = [&] {
    Pass p{0.0, std::vector<double>(ys.size())};
    const auto t0 = clock::now();
    parallel_for(ys.size(), workers, [&](std::size_t i) {
      const auto a = clock::now();
      Profile g = solver.solve(*ys[i], R);
      const auto b = clock::now();
      p.per_pixel[i] = std::chrono::duration<double>(b - a).count();
      if (!g.allFinite()) throw NumericalError("benchmark: solver '" + solver.name + "' produced non-finite output");
    });
    p.wall = std::chrono::duration<double>(clock::now() - t0).count();
    return p;
  };

  run_pass();  // warm-up
  std::vector<Pass> passes;
  for (int r = 0; r < repetitions; ++r) passes.push_back(run_pass());
  std::sort(passes.begin(), passes.end(), [](const Pass& a, const Pass& b) { return a.wall < b.wall; });
  Pass& median = passes[passes.size() / 2];

  rep.total_seconds = median.wall;
  for (double t : median.per_pixel) rep.lane_seconds += t;
  rep.per_pixel_mean = rep.lane_seconds / static_cast<double>(ys.size());
  auto mid = median.per_pixel.begin() + static_cast<std::ptrdiff_t>(median.per_pixel.size() / 2);
  std::nth_element(median.per_pixel.begin(), mid, median.per_pixel.end());
  rep.per_pixel_median = *mid;
  return rep;
}

PointCloud to_point_cloud(const std::vector<PixelEstimate>& estimates, const ElevationGrid& grid,
                          const AcquisitionGeometry& geometry, double pixel_spacing,
                          double detection_threshold) {
  if (detection_threshold < 0.0) throw ValidationError("point cloud: detection threshold must be >= 0");
  if (!(pixel_spacing > 0.0)) throw ValidationError("point cloud: pixel spacing must be positive");
  double peak = 0.0;
  for (const auto& e : estimates) {
    if (e.estimate.size() != grid.size()) throw ValidationError("point cloud: estimate/grid length mismatch");
    if (e.estimate.size() > 0) peak = std::max(peak, e.estimate.cwiseAbs().maxCoeff());
  }
  PointCloud cloud;
  if (peak == 0.0) return cloud;

  const double look = geometry.look_angle_deg * std::numbers::pi / 180.0;
  const double floor = detection_threshold * peak;
  for (const auto& e : estimates) {
    for (int l = 0; l < grid.size(); ++l) {
      const double amp = std::abs(e.estimate[l]);
      if (amp == 0.0 || amp < floor) continue;
      const double s = grid[l];
      cloud.points.push_back({e.coord.azimuth * pixel_spacing, e.coord.range * pixel_spacing + s * std::sin(look),
                              s * std::cos(look), amp});
    }
  }
  return cloud;
}

namespace {

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

}  // namespace

void write_xyz(std::ostream& os, const PointCloud& cloud) {
  for (const auto& p : cloud.points)
    os << fmt("%.9g", p.x) << ' ' << fmt("%.9g", p.y) << ' ' << fmt("%.9g", p.z) << ' ' << fmt("%.9g", p.amplitude)
       << '\n';
}

void write_ply(std::ostream& os, const PointCloud& cloud) {
  os << "ply\nformat ascii 1.0\ncomment tomosar reconstruction\n"
     << "element vertex " << cloud.points.size() << '\n'
     << "property double x\nproperty double y\nproperty double z\nproperty double amplitude\n"
     << "end_header\n";
  write_xyz(os, cloud);
}

void print_nmse_table(std::ostream& os, const std::vector<NmseReport>& reports) {
  char line[160];
  std::snprintf(line, sizeof line, "%-16s %14s %14s %10s\n", "solver", "NMSE (-dB)", "ratio", "pixels");
  os << line;
  for (const auto& r : reports) {
    std::snprintf(line, sizeof line, "%-16s %14.4f %14.6e %10zu\n", r.solver.c_str(), r.aggregate_db,
                  r.aggregate_ratio, r.count);
    os << line;
  }
}

void print_bench_table(std::ostream& os, const std::vector<BenchReport>& reports) {
  char line[200];
  std::snprintf(line, sizeof line, "%-16s %12s %12s %14s %14s %8s %8s\n", "solver", "wall (s)", "lanes (s)",
                "mean/px (s)", "median/px (s)", "budget", "pixels");
  os << line;
  for (const auto& r : reports) {
    std::snprintf(line, sizeof line, "%-16s %12.6f %12.6f %14.6e %14.6e %8d %8zu\n", r.solver.c_str(),
                  r.total_seconds, r.lane_seconds, r.per_pixel_mean, r.per_pixel_median, r.iteration_budget,
                  r.pixels);
    os << line;
  }
}

std::string nmse_ordering(const std::vector<NmseReport>& reports) {
  std::vector<const NmseReport*> sorted;
  for (const auto& r : reports) sorted.push_back(&r);
  std::stable_sort(sorted.begin(), sorted.end(),
                   [](const NmseReport* a, const NmseReport* b) { return a->aggregate_db > b->aggregate_db; });
  std::string out = "ordering:";
  for (std::size_t i = 0; i < sorted.size(); ++i) out += (i ? " > " : " ") + sorted[i]->solver;
  return out;
}

}  // namespace tomosar
