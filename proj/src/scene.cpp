#include "tomosar/scene.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

#include "tomosar/parallel.hpp"
#include "tomosar/solvers.hpp"

namespace tomosar {

namespace {

constexpr double kDeg = std::numbers::pi / 180.0;

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

}  // namespace

std::uint64_t derive_seed(std::uint64_t root, std::string_view stage, std::uint64_t a,
                          std::uint64_t b) {
  const std::uint64_t tag = Hasher().str(stage).value();
  return splitmix64(splitmix64(splitmix64(root ^ tag) ^ a) ^ (b * 0x9e3779b97f4a7c15ULL + 1));
}

double SceneSpec::max_elevation(double look_angle_deg) const {
  return has_building() ? building_height / std::cos(look_angle_deg * kDeg) : 0.0;
}

void SceneSpec::validate() const {
  if (azimuth_extent < 1 || range_extent < 1)
    throw ValidationError("scene: azimuth_extent and range_extent must be >= 1");
  if (!(pixel_spacing > 0.0)) throw ValidationError("scene.pixel_spacing must be positive");
  if (!(building_height > 0.0)) throw ValidationError("scene.building_height must be positive");
  if (!(building_depth > 0.0)) throw ValidationError("scene.building_depth must be positive");
  if (!(facade_amplitude > 0.0) || !(ground_amplitude > 0.0) || !(roof_amplitude > 0.0))
    throw ValidationError("scene: scatterer amplitudes must be positive");
  if (amplitude_jitter < 0.0 || amplitude_jitter >= 1.0)
    throw ValidationError("scene.amplitude_jitter must lie in [0, 1)");
  if (max_scatterers_per_pixel < 1 || max_scatterers_per_pixel > 3)
    throw ValidationError("scene.max_scatterers_per_pixel must lie in [1, 3]");
  if (building_azimuth_start < 0 || building_azimuth_end < building_azimuth_start ||
      building_azimuth_end > azimuth_extent)
    throw ValidationError("scene: building azimuth span outside the scene");
}

std::vector<Scatterer> pixel_scatterers(const SceneSpec& spec, double look_angle_deg, PixelCoord p) {
  const double theta = look_angle_deg * kDeg;
  const double x = p.range * spec.pixel_spacing;
  std::vector<Scatterer> out;

  const bool in_building = spec.has_building() && p.azimuth >= spec.building_azimuth_start &&
                           p.azimuth < spec.building_azimuth_end;
  if (!in_building) {
    out.push_back({SurfaceKind::Ground, 0.0});
    return out;
  }

  // A point at height z and ground range u lies at elevation z / cos(theta)
  // and falls into the pixel at ground range u - z tan(theta).
  const double front = spec.facade_range_pixel * spec.pixel_spacing;
  const double back = front + spec.building_depth;
  const double lay = spec.building_height * std::tan(theta);

  // lattice points that land on an edge up to rounding count as on it
  constexpr double edge = 1e-9;
  std::vector<Scatterer> hits;
  if (x >= front - lay - edge && x < front - edge)
    hits.push_back({SurfaceKind::Facade, (front - x) / std::sin(theta)});
  if (x < front - edge || x >= back - edge) hits.push_back({SurfaceKind::Ground, 0.0});
  if (spec.include_roof && x + lay >= front - edge && x + lay < back - edge)
    hits.push_back({SurfaceKind::Roof, spec.building_height / std::cos(theta)});

  const auto cap = static_cast<std::size_t>(spec.max_scatterers_per_pixel);
  for (SurfaceKind drop : {SurfaceKind::Roof, SurfaceKind::Ground}) {
    if (hits.size() <= cap) break;
    std::erase_if(hits, [drop](const Scatterer& s) { return s.kind == drop; });
  }
  if (hits.size() > cap) hits.resize(cap);
  return hits;
}

Scene generate_scene(const SceneSpec& spec, const ElevationGrid& grid, double look_angle_deg) {
  spec.validate();
  const double top = spec.max_elevation(look_angle_deg);
  if (!grid.contains(top) || !grid.contains(0.0))
    throw ValidationError("scene.building_height: building elevation extent [0, " +
                          std::to_string(top) + "] m exceeds the elevation grid [" +
                          std::to_string(grid.front()) + ", " + std::to_string(grid.back()) + "]");

  Scene scene;
  scene.azimuth_extent = spec.azimuth_extent;
  scene.range_extent = spec.range_extent;
  scene.pixels.reserve(static_cast<std::size_t>(spec.azimuth_extent) * spec.range_extent);

  for (int a = 0; a < spec.azimuth_extent; ++a) {
    for (int r = 0; r < spec.range_extent; ++r) {
      const PixelCoord coord{a, r};
      std::mt19937_64 rng(derive_seed(spec.random_seed, "scene", static_cast<std::uint64_t>(a),
                                      static_cast<std::uint64_t>(r)));
      std::uniform_real_distribution<double> unit(0.0, 1.0);

      Profile profile = Profile::Zero(grid.size());
      for (const Scatterer& s : pixel_scatterers(spec, look_angle_deg, coord)) {
        double amp = s.kind == SurfaceKind::Ground   ? spec.ground_amplitude
                     : s.kind == SurfaceKind::Facade ? spec.facade_amplitude
                                                     : spec.roof_amplitude;
        const double phase = 2.0 * std::numbers::pi * unit(rng);
        const double jitter = unit(rng);
        amp *= 1.0 + spec.amplitude_jitter * (2.0 * jitter - 1.0);
        profile[grid.nearest_index(s.elevation)] += std::polar(amp, phase);
      }
      scene.pixels.push_back({coord, std::move(profile)});
    }
  }
  return scene;
}

Measurement add_noise(const Measurement& y_clean, double snr_db, std::uint64_t seed) {
  if (std::isinf(snr_db) && snr_db > 0) return y_clean;
  if (!std::isfinite(snr_db)) throw ValidationError("add_noise: SNR must be finite or +inf");
  const double energy = y_clean.squaredNorm();
  if (energy == 0.0) throw ValidationError("add_noise: SNR undefined for an all-zero measurement");
  const double n = static_cast<double>(y_clean.size());
  const double variance = energy / (n * std::pow(10.0, snr_db / 10.0));
  const double sigma = std::sqrt(0.5 * variance);

  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  Measurement y = y_clean;
  for (Eigen::Index i = 0; i < y.size(); ++i) {
    const double re = normal(rng);
    const double im = normal(rng);
    y[i] += Complex(sigma * re, sigma * im);
  }
  return y;
}

std::string to_string(Labeling l) {
  return l == Labeling::GroundTruth ? "ground_truth" : "cs_reconstruction";
}

Labeling labeling_from_string(const std::string& s) {
  if (s == "ground_truth") return Labeling::GroundTruth;
  if (s == "cs_reconstruction") return Labeling::CsReconstruction;
  throw ValidationError("unknown labeling '" + s + "' (expected ground_truth or cs_reconstruction)");
}

std::string to_string(Split s) {
  switch (s) {
    case Split::Train: return "train";
    case Split::Validation: return "validation";
    case Split::Test: return "test";
  }
  return "?";
}

std::vector<const PixelSample*> SampleSet::subset(Split s) const {
  std::vector<const PixelSample*> out;
  for (const auto& p : samples)
    if (p.split == s) out.push_back(&p);
  return out;
}

std::size_t SampleSet::count(Split s) const {
  return static_cast<std::size_t>(
      std::count_if(samples.begin(), samples.end(), [s](const PixelSample& p) { return p.split == s; }));
}

bool passes_label_filter(const Profile& estimate, const Measurement& y, const SteeringMatrix& R,
                         const LabelCriteria& criteria) {
  const double y_norm = y.norm();
  if (y_norm == 0.0) return false;
  const double residual = (y - R.entries() * estimate).norm() / y_norm;
  if (!(residual <= criteria.max_residual)) return false;

  double first = 0.0, second = 0.0;
  int nonzeros = 0;
  for (Eigen::Index l = 0; l < estimate.size(); ++l) {
    const double m = std::abs(estimate[l]);
    if (m == 0.0) continue;
    ++nonzeros;
    if (m > first) {
      second = first;
      first = m;
    } else if (m > second) {
      second = m;
    }
  }
  if (nonzeros < 2) return true;
  return first >= criteria.min_peak_ratio * second;
}

std::vector<Reconstruction> select_cs_labels(const std::vector<Reconstruction>& reconstructions,
                                             const SteeringMatrix& R, const LabelCriteria& criteria) {
  std::vector<Reconstruction> kept;
  for (const auto& rec : reconstructions) {
    if (rec.estimate.size() != R.cols() || rec.measurement.size() != R.rows())
      throw ValidationError("select_cs_labels: dimension mismatch");
    if (passes_label_filter(rec.estimate, rec.measurement, R, criteria)) kept.push_back(rec);
  }
  if (kept.empty())
    throw ValidationError("select_cs_labels: no reconstruction passed the label filter "
                          "(criteria too strict)");
  return kept;
}

SampleSet build_sample_set(const Scene& scene, const AcquisitionGeometry& geometry,
                           const ElevationGrid& grid, const SampleSetOptions& options) {
  const SteeringMatrix R = build_steering_matrix(geometry, grid);

  std::vector<const ScenePixel*> active;
  for (const auto& px : scene.pixels) {
    if (px.profile.size() != grid.size()) throw ValidationError("build_sample_set: scene/grid mismatch");
    if (px.profile.squaredNorm() > 0.0) active.push_back(&px);
  }

  std::vector<PixelSample> samples(active.size());
  std::vector<char> keep(active.size(), 1);
  const GreedyConfig iht_cfg{options.label_sparsity, options.label_iterations, 0.0};

  parallel_for(active.size(), options.workers, [&](std::size_t i) {
    const ScenePixel& px = *active[i];
    PixelSample& s = samples[i];
    s.coord = px.coord;
    s.snr_db = options.snr_db;
    s.truth = px.profile;
    s.measurement = add_noise(forward(R, px.profile), options.snr_db,
                              derive_seed(options.seed, "noise", static_cast<std::uint64_t>(px.coord.azimuth),
                                          static_cast<std::uint64_t>(px.coord.range)));
    if (options.labeling == Labeling::GroundTruth) {
      s.label = px.profile;
      s.provenance = Labeling::GroundTruth;
    } else {
      s.label = iht_solve(s.measurement, R, iht_cfg).estimate;
      s.provenance = Labeling::CsReconstruction;
      keep[i] = passes_label_filter(s.label, s.measurement, R, options.criteria) ? 1 : 0;
    }
  });

  SampleSet set;
  set.geometry_hash = geometry.hash();
  set.grid_hash = grid.hash();
  set.labeling = options.labeling;
  set.seed = options.seed;
  for (std::size_t i = 0; i < samples.size(); ++i)
    if (keep[i]) set.samples.push_back(std::move(samples[i]));
  if (set.samples.empty())
    throw ValidationError("build_sample_set: no pixel survived CS label selection");

  // Split by pixel coordinate so that sets built from the same scene and
  // seed agree on which pixels are held out, whatever the labelling.
  for (auto& sample : set.samples) {
    const std::uint64_t h = derive_seed(options.seed, "split", static_cast<std::uint64_t>(sample.coord.azimuth),
                                        static_cast<std::uint64_t>(sample.coord.range));
    const double u = static_cast<double>(h >> 11) * 0x1.0p-53;
    sample.split = u < options.split.test ? Split::Test
                   : u < options.split.test + options.split.validation ? Split::Validation
                                                                       : Split::Train;
  }
  return set;
}

}  // namespace tomosar
