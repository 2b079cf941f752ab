#pragma once

// Stage drivers behind the command-line tool. Each stage reads and writes
// artifacts stamped with the config hash and refuses inputs produced under a
// different configuration.

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "tomosar/alista.hpp"
#include "tomosar/config.hpp"
#include "tomosar/eval.hpp"
#include "tomosar/geometry.hpp"
#include "tomosar/scene.hpp"

namespace tomosar::pipeline {

inline constexpr const char* kToolVersion = "1.0.0";

/// Geometry, grid and steering matrix implied by a config.
struct Setup {
  ElevationGrid grid;
  SteeringMatrix R;
};
Setup make_setup(const RunConfig& cfg);

SampleSet simulate(const RunConfig& cfg, const Setup& setup);

/// Default artifact locations inside cfg.output_dir.
struct Layout {
  std::filesystem::path dir;
  std::filesystem::path dataset() const { return dir / "dataset.bin"; }
  std::filesystem::path steering() const { return dir / "steering.bin"; }
  std::filesystem::path weights() const { return dir / "weights.bin"; }
  std::filesystem::path model() const { return dir / "model.bin"; }
  std::filesystem::path loss_curve() const { return dir / "loss_curve.csv"; }
  std::filesystem::path sweep() const { return dir / "sweep.csv"; }
  std::filesystem::path estimates(const std::string& solver) const { return dir / ("estimates_" + solver + ".bin"); }
  std::filesystem::path eval_report() const { return dir / "eval_report.json"; }
  std::filesystem::path bench_report() const { return dir / "bench_report.json"; }
};

/// Display name of a model, "alista-gt" or "alista-iht" by label provenance.
std::string model_name(const AlistaModel& model);

SolverSpec make_solver(const RunConfig& cfg, SolverKind kind, const AlistaModel* model = nullptr);

void cmd_simulate(const RunConfig& cfg, const std::filesystem::path& dataset_out, std::ostream& log);

void cmd_precompute(const RunConfig& cfg, const std::filesystem::path& steering_out,
                    const std::filesystem::path& weights_out, std::ostream& log);

void cmd_train(const RunConfig& cfg, const std::filesystem::path& dataset, const std::filesystem::path& weights,
               const std::filesystem::path& model_out, const std::filesystem::path& curve_out, std::ostream& log);

void cmd_sweep_layers(const RunConfig& cfg, const std::filesystem::path& dataset,
                      const std::filesystem::path& weights, const std::filesystem::path& curve_out,
                      std::ostream& log);

/// Runs one solver on every pixel of the dataset; writes the estimates file
/// and XYZ/PLY point clouds next to it. Returns the estimates path.
std::filesystem::path cmd_reconstruct(const RunConfig& cfg, const std::filesystem::path& dataset,
                                      SolverKind solver, const std::optional<std::filesystem::path>& model,
                                      const std::filesystem::path& out_dir, std::ostream& log);

/// Scores estimates files on the configured split. The token "truth" scores
/// the dataset's own truth profiles.
std::vector<NmseReport> cmd_eval(const RunConfig& cfg, const std::filesystem::path& dataset,
                                 const std::vector<std::string>& estimates,
                                 const std::filesystem::path& report_out, std::ostream& out);

std::vector<BenchReport> cmd_bench(const RunConfig& cfg, const std::filesystem::path& dataset,
                                   const std::vector<SolverKind>& solvers,
                                   const std::vector<std::filesystem::path>& models,
                                   const std::filesystem::path& report_out, std::ostream& out);

}  // namespace tomosar::pipeline
