#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "tomosar/geometry.hpp"
#include "tomosar/scene.hpp"
#include "tomosar/types.hpp"

namespace tomosar {

/// Constraint published with every weight file and model.
inline constexpr const char* kWeightConstraint = "unit_diagonal: w_i^H r_i = 1";

/// Coherence-minimising weight matrix W (N x L). Column i minimises
/// ||R^H w_i||^2 subject to w_i^H r_i = 1.
struct AnalyticWeights {
  CMatrix entries;
  std::uint64_t steering_hash = 0;
  double objective_value = 0.0;  // ||W^H R||_F^2

  /// Largest |w_i^H r_i - 1| over all columns.
  double constraint_violation(const SteeringMatrix& R) const;
};

/// Closed form w_i = G^{-1} r_i / (r_i^H G^{-1} r_i), G = R R^H. Throws
/// NumericalError when cond(G) exceeds 1e12.
AnalyticWeights compute_analytic_weights(const SteeringMatrix& R);

double coherence_objective(const CMatrix& W, const CMatrix& R);

enum class LossKind { ComplexMse, MagnitudeMse };
std::string to_string(LossKind k);
LossKind loss_kind_from_string(const std::string& s);

struct TrainingRecord {
  std::vector<double> train_loss;
  std::vector<double> validation_loss;
  int best_epoch = 0;  // 1-based index into the curves
  std::uint64_t seed = 0;
  Labeling label_provenance = Labeling::GroundTruth;
};

/// K-layer unrolled network. Layer k maps g to
/// soft(g + eta_k W^H (y - R g), theta_k), starting from g = 0.
struct AlistaModel {
  AnalyticWeights weights;
  std::vector<double> theta;
  std::vector<double> eta;
  bool tied = false;
  LossKind loss = LossKind::ComplexMse;
  TrainingRecord record;

  int layers() const { return static_cast<int>(theta.size()); }
  void validate() const;
};

Profile alista_forward(const AlistaModel& model, const Measurement& y, const SteeringMatrix& R);

struct LabeledPair {
  const Measurement* y;
  const Profile* target;
};

struct Gradient {
  std::vector<double> theta;
  std::vector<double> eta;
  double loss = 0.0;
};

/// Batch-mean loss (1/|B|) sum ||g_hat(y) - g||^2 and its gradient with
/// respect to every theta_k and eta_k, by reverse accumulation through the
/// unrolled layers. Entries sitting exactly on a threshold kink contribute
/// the subgradient 0. For tied models the per-layer gradients are summed
/// into slot 0 and the remaining slots are zero.
Gradient alista_gradient(const AlistaModel& model, const std::vector<LabeledPair>& batch,
                         const SteeringMatrix& R);

/// Same quantity by central differences with step 1e-5 relative.
Gradient alista_gradient_fd(const AlistaModel& model, const std::vector<LabeledPair>& batch,
                            const SteeringMatrix& R, double relative_step = 1e-5);

double alista_loss(const AlistaModel& model, const std::vector<LabeledPair>& batch,
                   const SteeringMatrix& R);

enum class GradientMode { Analytic, FiniteDifference };
enum class Optimizer { Sgd, Momentum, Adam };
std::string to_string(Optimizer o);
Optimizer optimizer_from_string(const std::string& s);

struct TrainConfig {
  double learning_rate = 1e-2;
  int epochs = 100;
  int batch_size = 64;
  std::uint64_t seed = 1;
  GradientMode gradient_mode = GradientMode::Analytic;
  /// Used only when the dataset carries no validation split.
  double validation_fraction = 0.1;
  /// Progressive growth: train the first layer_schedule[0] layers, then
  /// extend to layer_schedule[1], ... Each stage runs `epochs` epochs.
  std::vector<int> layer_schedule;
  Optimizer optimizer = Optimizer::Adam;
  double momentum = 0.9;
  bool tied = false;
  LossKind loss = LossKind::ComplexMse;
  int workers = 1;

  void validate() const;
};

/// eta_k = 1 / lambda_max(R^H R), theta_k = 0.1 eta_k median|W^H y| over `ys`.
AlistaModel initial_model(const AnalyticWeights& weights, const SteeringMatrix& R, int layers,
                          const std::vector<const Measurement*>& ys, bool tied);

/// Mini-batch training on the dataset's train split, model selection on its
/// validation split (or a seeded `validation_fraction` of train when the
/// dataset has none). Returns the parameters of the best validation epoch.
AlistaModel train(const SampleSet& dataset, const SteeringMatrix& R, const AnalyticWeights& weights,
                  int layers, const TrainConfig& cfg);

struct SweepPoint {
  int layers;
  double validation_nmse_db;
  double validation_loss;
};

/// Trains one model per depth in [k_first, k_last] with identical seeds and
/// reports validation NMSE for each.
std::vector<SweepPoint> sweep_layers(const SampleSet& dataset, const SteeringMatrix& R,
                                     const AnalyticWeights& weights, int k_first, int k_last,
                                     const TrainConfig& cfg);

}  // namespace tomosar
