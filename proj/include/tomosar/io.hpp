#pragma once

// Binary artifact containers. All integers and floats are little-endian;
// complex values are (re, im) pairs of IEEE-754 doubles, matrices are
// row-major. Every file starts with an 8-byte magic and a u32 format
// version, and records the hash of the run configuration that produced it.
// Layouts are documented in docs/file-formats.md.

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "tomosar/alista.hpp"
#include "tomosar/eval.hpp"
#include "tomosar/geometry.hpp"
#include "tomosar/scene.hpp"

namespace tomosar::io {

inline constexpr std::uint32_t kFormatVersion = 1;

enum class MatrixKind : std::uint32_t { Steering = 0, Weights = 1 };

struct MatrixFile {
  MatrixKind kind = MatrixKind::Steering;
  CMatrix entries;
  std::uint64_t steering_hash = 0;
  std::uint64_t config_hash = 0;
  double objective_value = 0.0;  // weights only
};

void write_matrix(const std::filesystem::path& path, const MatrixFile& m);
MatrixFile read_matrix(const std::filesystem::path& path);

void write_dataset(const std::filesystem::path& path, const SampleSet& set, std::uint64_t config_hash);
SampleSet read_dataset(const std::filesystem::path& path, std::uint64_t* config_hash = nullptr);

/// Stores K, dimensions, hashes, theta/eta, W and a key-value metadata block
/// (constraint, loss, tying, seed, label provenance, loss curves, ...).
void write_model(const std::filesystem::path& path, const AlistaModel& model, std::uint64_t config_hash);
/// Loads a model and checks it against the steering matrix it will run with.
AlistaModel read_model(const std::filesystem::path& path, const SteeringMatrix& R,
                       std::uint64_t* config_hash = nullptr);
std::map<std::string, std::string> read_model_metadata(const std::filesystem::path& path);

struct EstimatesFile {
  std::string solver;
  std::uint64_t config_hash = 0;
  std::uint64_t grid_hash = 0;
  std::vector<PixelEstimate> estimates;
};

void write_estimates(const std::filesystem::path& path, const EstimatesFile& e);
EstimatesFile read_estimates(const std::filesystem::path& path);

/// Writes through a temporary file and renames, so readers never observe a
/// partially written artifact.
void write_text_file(const std::filesystem::path& path, const std::string& content);
std::string read_text_file(const std::filesystem::path& path);

}  // namespace tomosar::io
