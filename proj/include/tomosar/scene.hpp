#pragma once

#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "tomosar/geometry.hpp"
#include "tomosar/types.hpp"

namespace tomosar {

/// Parametric box building on flat ground, sampled on a square pixel
/// lattice (azimuth x ground range). The radar looks from the near-range
/// side, so the front facade at ground range `facade_range_pixel *
/// pixel_spacing` lays over onto the ground in front of it.
struct SceneSpec {
  int azimuth_extent = 50;
  int range_extent = 50;
  double pixel_spacing = 0.2;  // meters, both axes

  double building_height = 3.4;  // meters
  int building_azimuth_start = 10;
  int building_azimuth_end = 40;  // exclusive; equal to start means no building
  int facade_range_pixel = 20;
  double building_depth = 4.0;  // meters, along ground range
  bool include_roof = true;

  double facade_amplitude = 1.0;
  double ground_amplitude = 1.0;
  double roof_amplitude = 1.0;
  /// Relative amplitude spread: each scatterer amplitude is scaled by
  /// U(1 - jitter, 1 + jitter). Phases are always uniform on [0, 2 pi).
  double amplitude_jitter = 0.0;

  int max_scatterers_per_pixel = 2;
  std::uint64_t random_seed = 1;

  bool has_building() const { return building_azimuth_end > building_azimuth_start; }
  /// Highest elevation any surface reaches: the roof, at height / cos(look).
  double max_elevation(double look_angle_deg) const;
  void validate() const;
};

struct PixelCoord {
  int azimuth = 0;
  int range = 0;
  auto operator<=>(const PixelCoord&) const = default;
};

enum class SurfaceKind { Ground, Facade, Roof };

struct Scatterer {
  SurfaceKind kind;
  double elevation;  // meters along the elevation axis
};

/// Surfaces crossed by the iso-range line of a pixel, before grid snapping,
/// already reduced to the per-pixel cap (roof dropped first, then ground).
std::vector<Scatterer> pixel_scatterers(const SceneSpec& spec, double look_angle_deg, PixelCoord p);

struct ScenePixel {
  PixelCoord coord;
  Profile profile;
};

/// All pixels in raster order (azimuth-major). Pixels that see no surface
/// (roof footprint not covered by roof layover) carry an all-zero profile.
struct Scene {
  int azimuth_extent = 0;
  int range_extent = 0;
  std::vector<ScenePixel> pixels;
};

Scene generate_scene(const SceneSpec& spec, const ElevationGrid& grid, double look_angle_deg);

/// Per-stage, per-pixel seed derivation used throughout the pipeline.
std::uint64_t derive_seed(std::uint64_t root, std::string_view stage, std::uint64_t a = 0,
                          std::uint64_t b = 0);

/// y + eps, eps circular complex Gaussian with per-channel variance
/// ||y||^2 / (N 10^(snr/10)). An infinite SNR returns y unchanged.
Measurement add_noise(const Measurement& y_clean, double snr_db, std::uint64_t seed);

enum class Labeling { GroundTruth, CsReconstruction };
std::string to_string(Labeling l);
Labeling labeling_from_string(const std::string& s);

enum class Split : std::uint8_t { Train = 0, Validation = 1, Test = 2 };
std::string to_string(Split s);

struct PixelSample {
  Measurement measurement;
  Profile label;
  Labeling provenance = Labeling::GroundTruth;
  PixelCoord coord;
  double snr_db = 0.0;
  Split split = Split::Train;
  /// Scene profile the label was derived from. Equal to `label` for
  /// ground-truth labelling; kept for evaluation of CS-labelled sets.
  Profile truth;
};

struct SampleSet {
  std::vector<PixelSample> samples;
  std::uint64_t geometry_hash = 0;
  std::uint64_t grid_hash = 0;
  Labeling labeling = Labeling::GroundTruth;
  std::uint64_t seed = 0;

  std::vector<const PixelSample*> subset(Split s) const;
  std::size_t count(Split s) const;
};

struct LabelCriteria {
  double max_residual = 0.1;
  double min_peak_ratio = 2.0;
};

struct Reconstruction {
  PixelCoord coord;
  Profile estimate;
  Measurement measurement;
};

/// Keeps reconstructions with relative residual <= max_residual and a
/// peak-to-secondary modulus ratio >= min_peak_ratio (ratio check skipped
/// for estimates with fewer than two nonzeros). Throws ValidationError when
/// nothing survives.
std::vector<Reconstruction> select_cs_labels(const std::vector<Reconstruction>& reconstructions,
                                             const SteeringMatrix& R, const LabelCriteria& criteria);

bool passes_label_filter(const Profile& estimate, const Measurement& y, const SteeringMatrix& R,
                         const LabelCriteria& criteria);

/// Split assignment draws u ~ U[0,1) from (seed, pixel coordinate): u < test
/// is Test, u < test + validation is Validation, the rest Train.
struct SplitFractions {
  double validation = 0.1;
  double test = 0.2;
};

struct SampleSetOptions {
  double snr_db = 20.0;
  Labeling labeling = Labeling::GroundTruth;
  std::uint64_t seed = 1;
  SplitFractions split;
  LabelCriteria criteria;
  /// Sparsity used by the IHT labeller for CS-reconstruction labels.
  int label_sparsity = 3;
  int label_iterations = 200;
  int workers = 1;
};

/// Pixels with an all-zero scene profile are skipped (no signal to sense).
SampleSet build_sample_set(const Scene& scene, const AcquisitionGeometry& geometry,
                           const ElevationGrid& grid, const SampleSetOptions& options);

}  // namespace tomosar
