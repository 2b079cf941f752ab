#pragma once

// Run configuration: one JSON document, versioned, with every key known in
// advance. Missing keys take defaults, unknown keys are rejected.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "tomosar/alista.hpp"
#include "tomosar/eval.hpp"
#include "tomosar/geometry.hpp"
#include "tomosar/scene.hpp"
#include "tomosar/solvers.hpp"

namespace tomosar {

inline constexpr int kConfigSchemaVersion = 1;

struct GridConfig {
  int samples = 16;
  std::optional<double> min;  // meters; both unset means automatic extent
  std::optional<double> max;
  /// Automatic extent: (1 + margin) times the scene's highest elevation,
  /// about margin/2 of it below ground, with elevation 0 on a sample.
  double margin = 0.25;
};

struct AlistaConfig {
  int layers = 10;
  TrainConfig train;
  int sweep_first = 1;
  int sweep_last = 15;
};

struct EvalConfig {
  double detection_threshold = 0.1;
  int bench_repetitions = 5;
  NmseMode nmse_mode = NmseMode::FullProfile;
  Split split = Split::Test;
};

struct RunConfig {
  std::uint64_t seed = 1;
  int workers = 0;  // 0 = machine parallelism
  AcquisitionGeometry geometry;
  GridConfig grid;
  SceneSpec scene;
  SampleSetOptions simulation;
  IstaConfig ista;
  GreedyConfig omp;
  GreedyConfig iht;
  AlistaConfig alista;
  EvalConfig eval;
  std::filesystem::path output_dir = "out";

  /// Canonical JSON (every key, defaults filled in).
  std::string canonical_json() const;
  /// Hash of the canonical document without the io section, the worker
  /// count and the labelling mode. Labelling is recorded in each dataset and
  /// model instead, so models trained on either labelling can be scored on
  /// the same held-out pixels.
  std::uint64_t hash() const;

  ElevationGrid elevation_grid() const;

  /// Checks every section; errors name the offending key.
  void validate() const;
};

RunConfig default_config();

/// Parses a JSON config, applying `overrides` ("dotted.key=value", value
/// parsed as JSON when possible, else taken as a string) on top.
RunConfig parse_config(const std::string& text, const std::vector<std::string>& overrides = {});
RunConfig load_config(const std::filesystem::path& path, const std::vector<std::string>& overrides = {});

/// Seeds handed to each stage, all derived from the root seed.
struct StageSeeds {
  std::uint64_t scene;
  std::uint64_t simulation;
  std::uint64_t training;
};
StageSeeds stage_seeds(std::uint64_t root);

}  // namespace tomosar
