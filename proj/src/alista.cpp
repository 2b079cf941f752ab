#include "tomosar/alista.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>

#include "tomosar/eval.hpp"
#include "tomosar/parallel.hpp"
#include "tomosar/solvers.hpp"

namespace tomosar {

double coherence_objective(const CMatrix& W, const CMatrix& R) { return (W.adjoint() * R).squaredNorm(); }

double AnalyticWeights::constraint_violation(const SteeringMatrix& R) const {
  double worst = 0.0;
  for (Eigen::Index i = 0; i < entries.cols(); ++i)
    worst = std::max(worst, std::abs(entries.col(i).dot(R.entries().col(i)) - 1.0));
  return worst;
}

AnalyticWeights compute_analytic_weights(const SteeringMatrix& R) {
  const CMatrix& A = R.entries();
  const CMatrix gram = A * A.adjoint();
  Eigen::SelfAdjointEigenSolver<CMatrix> eig(gram, Eigen::EigenvaluesOnly);
  const double lo = eig.eigenvalues().minCoeff();
  const double hi = eig.eigenvalues().maxCoeff();
  if (!(lo > 0.0) || hi / lo > 1e12)
    throw NumericalError("compute_analytic_weights: R R^H is singular or ill-conditioned (cond = " +
                         std::to_string(lo > 0.0 ? hi / lo : std::numeric_limits<double>::infinity()) +
                         ")");

  const CMatrix X = gram.ldlt().solve(A);  // G^{-1} r_i per column
  AnalyticWeights w;
  w.entries.resize(A.rows(), A.cols());
  for (Eigen::Index i = 0; i < A.cols(); ++i) {
    const double denom = std::real(A.col(i).dot(X.col(i)));  // r_i^H G^{-1} r_i > 0
    w.entries.col(i) = X.col(i) / denom;
  }
  w.steering_hash = R.hash();
  w.objective_value = coherence_objective(w.entries, A);
  return w;
}

std::string to_string(LossKind k) { return k == LossKind::ComplexMse ? "complex_mse" : "magnitude_mse"; }

LossKind loss_kind_from_string(const std::string& s) {
  if (s == "complex_mse") return LossKind::ComplexMse;
  if (s == "magnitude_mse") return LossKind::MagnitudeMse;
  throw ValidationError("unknown loss '" + s + "' (expected complex_mse or magnitude_mse)");
}

std::string to_string(Optimizer o) {
  switch (o) {
    case Optimizer::Sgd: return "sgd";
    case Optimizer::Momentum: return "momentum";
    case Optimizer::Adam: return "adam";
  }
  return "?";
}

Optimizer optimizer_from_string(const std::string& s) {
  if (s == "sgd") return Optimizer::Sgd;
  if (s == "momentum") return Optimizer::Momentum;
  if (s == "adam") return Optimizer::Adam;
  throw ValidationError("unknown optimizer '" + s + "' (expected sgd, momentum or adam)");
}

void AlistaModel::validate() const {
  if (theta.empty()) throw ValidationError("alista model: need at least one layer");
  if (theta.size() != eta.size()) throw ValidationError("alista model: theta/eta length mismatch");
  for (double t : theta)
    if (!(t >= 0.0) || !std::isfinite(t)) throw ValidationError("alista model: theta must be finite and >= 0");
  for (double e : eta)
    if (!std::isfinite(e)) throw ValidationError("alista model: eta must be finite");
}

namespace {

void check_pairing(const AlistaModel& model, const SteeringMatrix& R) {
  if (model.weights.steering_hash != R.hash())
    throw ValidationError("alista: weights were computed for steering matrix " +
                          hash_hex(model.weights.steering_hash) + ", got " + hash_hex(R.hash()));
  if (model.weights.entries.rows() != R.rows() || model.weights.entries.cols() != R.cols())
    throw ValidationError("alista: weight dimensions do not match the steering matrix");
}

struct Tape {
  std::vector<CVector> z;     // pre-activations, one per layer
  std::vector<CVector> corr;  // W^H (y - R g_k), one per layer
  Profile out;
};

/// Forward pass; records the tape when `tape` is non-null.
Profile run_layers(const AlistaModel& model, const CMatrix& Wh, const CMatrix& A, const Measurement& y,
                   Tape* tape) {
  const int K = model.layers();
  Profile g = Profile::Zero(A.cols());
  if (tape) {
    tape->z.resize(static_cast<std::size_t>(K));
    tape->corr.resize(static_cast<std::size_t>(K));
  }
  for (int k = 0; k < K; ++k) {
    CVector corr = Wh * (y - A * g);
    CVector z = g + model.eta[static_cast<std::size_t>(k)] * corr;
    g = z;
    soft_threshold_inplace(g, model.theta[static_cast<std::size_t>(k)]);
    if (tape) {
      tape->z[static_cast<std::size_t>(k)] = std::move(z);
      tape->corr[static_cast<std::size_t>(k)] = std::move(corr);
    }
  }
  if (!g.allFinite()) throw NumericalError("alista: non-finite activation (divergent eta?)");
  return g;
}

double sample_loss(LossKind kind, const Profile& out, const Profile& target) {
  if (kind == LossKind::ComplexMse) return (out - target).squaredNorm();
  return (out.cwiseAbs() - target.cwiseAbs()).squaredNorm();
}

/// d loss / d out, in the convention d loss = Re(G^H d out).
CVector loss_gradient(LossKind kind, const Profile& out, const Profile& target) {
  if (kind == LossKind::ComplexMse) return 2.0 * (out - target);
  CVector g(out.size());
  for (Eigen::Index l = 0; l < out.size(); ++l) {
    const double m = std::abs(out[l]);
    g[l] = m > 0.0 ? 2.0 * (m - std::abs(target[l])) * (out[l] / m) : Complex(0.0, 0.0);
  }
  return g;
}

void per_sample_gradient(const AlistaModel& model, const CMatrix& Wh, const CMatrix& A,
                         const Measurement& y, const Profile& target, std::vector<double>& g_theta,
                         std::vector<double>& g_eta, double& loss) {
  Tape tape;
  const Profile out = run_layers(model, Wh, A, y, &tape);
  loss = sample_loss(model.loss, out, target);
  CVector G = loss_gradient(model.loss, out, target);
  const CMatrix& W = model.weights.entries;

  for (int k = model.layers() - 1; k >= 0; --k) {
    const auto ks = static_cast<std::size_t>(k);
    const CVector& z = tape.z[ks];
    const double theta = model.theta[ks];
    CVector Gz(z.size());
    double d_theta = 0.0;
    for (Eigen::Index l = 0; l < z.size(); ++l) {
      const double m = std::abs(z[l]);
      if (m > theta) {
        const Complex u = z[l] / m;
        const double c = std::real(std::conj(G[l]) * u);
        d_theta -= c;
        Gz[l] = (1.0 - theta / m) * G[l] + (theta / m) * c * u;
      } else {
        Gz[l] = Complex(0.0, 0.0);
      }
    }
    g_theta[ks] = d_theta;
    g_eta[ks] = std::real(Gz.dot(tape.corr[ks]));
    if (k > 0) G = Gz - model.eta[ks] * (A.adjoint() * (W * Gz));
  }
}

void fold_tied(const AlistaModel& model, Gradient& g) {
  if (!model.tied) return;
  const double t = std::accumulate(g.theta.begin(), g.theta.end(), 0.0);
  const double e = std::accumulate(g.eta.begin(), g.eta.end(), 0.0);
  std::fill(g.theta.begin(), g.theta.end(), 0.0);
  std::fill(g.eta.begin(), g.eta.end(), 0.0);
  g.theta[0] = t;
  g.eta[0] = e;
}

Gradient batch_gradient(const AlistaModel& model, const std::vector<LabeledPair>& batch,
                        const SteeringMatrix& R, int workers) {
  if (batch.empty()) throw ValidationError("alista_gradient: empty batch");
  check_pairing(model, R);
  model.validate();
  const CMatrix Wh = model.weights.entries.adjoint();
  const auto K = static_cast<std::size_t>(model.layers());
  std::vector<std::vector<double>> gt(batch.size(), std::vector<double>(K));
  std::vector<std::vector<double>> ge(batch.size(), std::vector<double>(K));
  std::vector<double> losses(batch.size());
  parallel_for(batch.size(), workers, [&](std::size_t i) {
    per_sample_gradient(model, Wh, R.entries(), *batch[i].y, *batch[i].target, gt[i], ge[i], losses[i]);
  });

  // Fixed summation order keeps results independent of the worker count.
  Gradient g;
  g.theta.assign(K, 0.0);
  g.eta.assign(K, 0.0);
  const double scale = 1.0 / static_cast<double>(batch.size());
  for (std::size_t i = 0; i < batch.size(); ++i) {
    for (std::size_t k = 0; k < K; ++k) {
      g.theta[k] += scale * gt[i][k];
      g.eta[k] += scale * ge[i][k];
    }
    g.loss += scale * losses[i];
  }
  fold_tied(model, g);
  for (std::size_t k = 0; k < K; ++k)
    if (!std::isfinite(g.theta[k]) || !std::isfinite(g.eta[k]))
      throw NumericalError("alista_gradient: non-finite gradient (divergent eta?)");
  return g;
}

double batch_loss(const AlistaModel& model, const std::vector<LabeledPair>& batch, const SteeringMatrix& R,
                  int workers) {
  if (batch.empty()) throw ValidationError("alista_loss: empty batch");
  check_pairing(model, R);
  const CMatrix Wh = model.weights.entries.adjoint();
  std::vector<double> losses(batch.size());
  parallel_for(batch.size(), workers, [&](std::size_t i) {
    losses[i] = sample_loss(model.loss, run_layers(model, Wh, R.entries(), *batch[i].y, nullptr),
                            *batch[i].target);
  });
  double sum = 0.0;
  for (double l : losses) sum += l;
  return sum / static_cast<double>(batch.size());
}

void set_param(AlistaModel& m, bool is_theta, std::size_t k, double v) {
  auto& vec = is_theta ? m.theta : m.eta;
  if (m.tied) std::fill(vec.begin(), vec.end(), v);
  else vec[k] = v;
}

}  // namespace

Profile alista_forward(const AlistaModel& model, const Measurement& y, const SteeringMatrix& R) {
  check_pairing(model, R);
  model.validate();
  if (y.size() != R.rows()) throw ValidationError("alista_forward: measurement length mismatch");
  return run_layers(model, model.weights.entries.adjoint(), R.entries(), y, nullptr);
}

Gradient alista_gradient(const AlistaModel& model, const std::vector<LabeledPair>& batch,
                         const SteeringMatrix& R) {
  return batch_gradient(model, batch, R, 1);
}

double alista_loss(const AlistaModel& model, const std::vector<LabeledPair>& batch, const SteeringMatrix& R) {
  return batch_loss(model, batch, R, 1);
}

Gradient alista_gradient_fd(const AlistaModel& model, const std::vector<LabeledPair>& batch,
                            const SteeringMatrix& R, double relative_step) {
  const auto K = static_cast<std::size_t>(model.layers());
  Gradient g;
  g.theta.assign(K, 0.0);
  g.eta.assign(K, 0.0);
  g.loss = batch_loss(model, batch, R, 1);
  const std::size_t n_free = model.tied ? 1 : K;
  for (bool is_theta : {true, false}) {
    for (std::size_t k = 0; k < n_free; ++k) {
      const double p = (is_theta ? model.theta : model.eta)[k];
      const double h = relative_step * (p != 0.0 ? std::abs(p) : 1.0);
      AlistaModel plus = model, minus = model;
      set_param(plus, is_theta, k, p + h);
      set_param(minus, is_theta, k, p - h);
      const double d = (batch_loss(plus, batch, R, 1) - batch_loss(minus, batch, R, 1)) / (2.0 * h);
      (is_theta ? g.theta : g.eta)[k] = d;
    }
  }
  return g;
}

void TrainConfig::validate() const {
  if (!(learning_rate > 0.0)) throw ValidationError("train.learning_rate must be positive");
  if (epochs < 1) throw ValidationError("train.epochs must be >= 1");
  if (batch_size < 1) throw ValidationError("train.batch_size must be >= 1");
  if (!(validation_fraction > 0.0 && validation_fraction < 1.0))
    throw ValidationError("train.validation_fraction must lie in (0, 1)");
  for (std::size_t i = 0; i < layer_schedule.size(); ++i) {
    if (layer_schedule[i] < 1) throw ValidationError("train.layer_schedule entries must be >= 1");
    if (i > 0 && layer_schedule[i] <= layer_schedule[i - 1])
      throw ValidationError("train.layer_schedule must be strictly increasing");
  }
  if (momentum < 0.0 || momentum >= 1.0) throw ValidationError("train.momentum must lie in [0, 1)");
}

AlistaModel initial_model(const AnalyticWeights& weights, const SteeringMatrix& R, int layers,
                          const std::vector<const Measurement*>& ys, bool tied) {
  if (layers < 1) throw ValidationError("alista: layers must be >= 1");
  const double eta = 1.0 / R.lambda_max();
  std::vector<double> mags;
  const CMatrix Wh = weights.entries.adjoint();
  for (const Measurement* y : ys) {
    const CVector c = Wh * *y;
    for (Eigen::Index l = 0; l < c.size(); ++l) mags.push_back(std::abs(c[l]));
  }
  double median = 0.0;
  if (!mags.empty()) {
    auto mid = mags.begin() + static_cast<std::ptrdiff_t>(mags.size() / 2);
    std::nth_element(mags.begin(), mid, mags.end());
    median = *mid;
  }
  AlistaModel m;
  m.weights = weights;
  m.tied = tied;
  m.theta.assign(static_cast<std::size_t>(layers), 0.1 * eta * median);
  m.eta.assign(static_cast<std::size_t>(layers), eta);
  return m;
}

namespace {

struct TrainSplit {
  std::vector<LabeledPair> train;
  std::vector<LabeledPair> validation;
};

TrainSplit split_for_training(const SampleSet& dataset, const TrainConfig& cfg) {
  TrainSplit s;
  for (const auto& p : dataset.samples) {
    if (p.split == Split::Train) s.train.push_back({&p.measurement, &p.label});
    else if (p.split == Split::Validation) s.validation.push_back({&p.measurement, &p.label});
  }
  if (s.validation.empty() && s.train.size() >= 2) {
    std::mt19937_64 rng(derive_seed(cfg.seed, "validation"));
    std::shuffle(s.train.begin(), s.train.end(), rng);
    auto n_val = static_cast<std::size_t>(std::ceil(cfg.validation_fraction * static_cast<double>(s.train.size())));
    n_val = std::clamp<std::size_t>(n_val, 1, s.train.size() - 1);
    s.validation.assign(s.train.end() - static_cast<std::ptrdiff_t>(n_val), s.train.end());
    s.train.resize(s.train.size() - n_val);
  }
  if (s.train.empty()) throw ValidationError("train: dataset has no training samples");
  if (s.validation.empty()) throw ValidationError("train: dataset has no validation samples");
  return s;
}

struct OptimizerState {
  std::vector<double> m, v;
  long step = 0;
};

void apply_update(AlistaModel& model, const Gradient& g, const TrainConfig& cfg, OptimizerState& st_theta,
                  OptimizerState& st_eta) {
  auto update = [&](std::vector<double>& p, const std::vector<double>& grad, OptimizerState& st) {
    const std::size_t n = model.tied ? 1 : p.size();
    if (st.m.size() != p.size()) {
      st.m.resize(p.size(), 0.0);
      st.v.resize(p.size(), 0.0);
    }
    ++st.step;
    for (std::size_t k = 0; k < n; ++k) {
      double delta = 0.0;
      switch (cfg.optimizer) {
        case Optimizer::Sgd:
          delta = cfg.learning_rate * grad[k];
          break;
        case Optimizer::Momentum:
          st.m[k] = cfg.momentum * st.m[k] + grad[k];
          delta = cfg.learning_rate * st.m[k];
          break;
        case Optimizer::Adam: {
          constexpr double b1 = 0.9, b2 = 0.999, eps = 1e-12;
          st.m[k] = b1 * st.m[k] + (1 - b1) * grad[k];
          st.v[k] = b2 * st.v[k] + (1 - b2) * grad[k] * grad[k];
          const double mh = st.m[k] / (1 - std::pow(b1, static_cast<double>(st.step)));
          const double vh = st.v[k] / (1 - std::pow(b2, static_cast<double>(st.step)));
          delta = cfg.learning_rate * mh / (std::sqrt(vh) + eps);
          break;
        }
      }
      p[k] -= delta;
    }
    if (model.tied) std::fill(p.begin() + 1, p.end(), p[0]);
  };
  update(model.theta, g.theta, st_theta);
  update(model.eta, g.eta, st_eta);
  for (double& t : model.theta) t = std::max(t, 0.0);
}

void grow(AlistaModel& m, int layers) {
  const double t = m.theta.back(), e = m.eta.back();
  m.theta.resize(static_cast<std::size_t>(layers), t);
  m.eta.resize(static_cast<std::size_t>(layers), e);
}

}  // namespace

AlistaModel train(const SampleSet& dataset, const SteeringMatrix& R, const AnalyticWeights& weights,
                  int layers, const TrainConfig& cfg) {
  cfg.validate();
  if (layers < 1) throw ValidationError("train: layers must be >= 1");
  if (!cfg.layer_schedule.empty() && cfg.layer_schedule.back() != layers)
    throw ValidationError("train.layer_schedule must end at the requested layer count");
  if (weights.steering_hash != R.hash())
    throw ValidationError("train: weights do not belong to the given steering matrix");
  if (dataset.samples.empty()) throw ValidationError("train: empty dataset");

  TrainSplit split = split_for_training(dataset, cfg);
  std::vector<const Measurement*> ys;
  for (const auto& p : split.train) ys.push_back(p.y);

  const std::vector<int> stages = cfg.layer_schedule.empty() ? std::vector<int>{layers} : cfg.layer_schedule;
  AlistaModel model = initial_model(weights, R, stages.front(), ys, cfg.tied);
  model.loss = cfg.loss;
  model.record.seed = cfg.seed;
  model.record.label_provenance = dataset.labeling;

  AlistaModel best = model;
  double best_val = std::numeric_limits<double>::infinity();
  std::vector<std::size_t> order(split.train.size());
  const auto batch = static_cast<std::size_t>(cfg.batch_size);

  for (std::size_t stage = 0; stage < stages.size(); ++stage) {
    if (stage > 0) grow(model, stages[stage]);
    OptimizerState st_theta, st_eta;
    const bool final_stage = stage + 1 == stages.size();
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
      std::iota(order.begin(), order.end(), 0);
      std::mt19937_64 rng(derive_seed(cfg.seed, "epoch", stage, static_cast<std::uint64_t>(epoch)));
      std::shuffle(order.begin(), order.end(), rng);

      double running = 0.0;
      for (std::size_t start = 0; start < order.size(); start += batch) {
        std::vector<LabeledPair> b;
        for (std::size_t i = start; i < std::min(order.size(), start + batch); ++i) b.push_back(split.train[order[i]]);
        Gradient g = cfg.gradient_mode == GradientMode::Analytic ? batch_gradient(model, b, R, cfg.workers)
                                                                 : alista_gradient_fd(model, b, R);
        running += g.loss * static_cast<double>(b.size());
        apply_update(model, g, cfg, st_theta, st_eta);
      }
      const double val = batch_loss(model, split.validation, R, cfg.workers);
      if (!std::isfinite(val))
        throw NumericalError("train: validation loss became non-finite at epoch " + std::to_string(epoch + 1) +
                             " (learning rate too large?)");
      model.record.train_loss.push_back(running / static_cast<double>(order.size()));
      model.record.validation_loss.push_back(val);
      if (final_stage && val < best_val) {
        best_val = val;
        best = model;
        best.record.best_epoch = static_cast<int>(model.record.validation_loss.size());
      }
    }
  }
  best.record.train_loss = model.record.train_loss;
  best.record.validation_loss = model.record.validation_loss;
  return best;
}

std::vector<SweepPoint> sweep_layers(const SampleSet& dataset, const SteeringMatrix& R,
                                     const AnalyticWeights& weights, int k_first, int k_last,
                                     const TrainConfig& cfg) {
  if (k_first < 1 || k_last < k_first) throw ValidationError("sweep_layers: empty or invalid layer range");
  TrainConfig c = cfg;
  c.layer_schedule.clear();
  const TrainSplit split = split_for_training(dataset, c);
  std::vector<SweepPoint> curve;
  for (int K = k_first; K <= k_last; ++K) {
    const AlistaModel model = train(dataset, R, weights, K, c);
    std::vector<Profile> est, truth;
    for (const auto& p : split.validation) {
      est.push_back(alista_forward(model, *p.y, R));
      truth.push_back(*p.target);
    }
    curve.push_back({K, nmse_db(est, truth).aggregate_db, model.record.validation_loss[static_cast<std::size_t>(model.record.best_epoch - 1)]});
  }
  return curve;
}

}  // namespace tomosar
