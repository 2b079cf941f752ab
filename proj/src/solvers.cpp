#include "tomosar/solvers.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace tomosar {

void soft_threshold_inplace(CVector& x, double theta) {
  for (Eigen::Index i = 0; i < x.size(); ++i) x[i] = soft_threshold(x[i], theta);
}

void hard_threshold_inplace(CVector& x, int k) {
  const auto n = static_cast<int>(x.size());
  if (k >= n) return;
  if (k <= 0) {
    x.setZero();
    return;
  }
  std::vector<int> idx(static_cast<std::size_t>(n));
  std::iota(idx.begin(), idx.end(), 0);
  RVector mag = x.cwiseAbs();
  std::nth_element(idx.begin(), idx.begin() + (k - 1), idx.end(), [&](int a, int b) {
    return mag[a] > mag[b] || (mag[a] == mag[b] && a < b);
  });
  const int pivot = idx[static_cast<std::size_t>(k - 1)];
  for (int i = 0; i < n; ++i) {
    const bool keep = mag[i] > mag[pivot] || (mag[i] == mag[pivot] && i <= pivot);
    if (!keep) x[i] = Complex(0.0, 0.0);
  }
}

double checked_lipschitz(double configured, const SteeringMatrix& R) {
  const double lmax = R.lambda_max();
  if (configured == 0.0) return 1.01 * lmax;
  if (!(configured > lmax))
    throw ValidationError("lipschitz " + std::to_string(configured) +
                          " does not exceed lambda_max(R^H R) = " + std::to_string(lmax));
  return configured;
}

double lasso_objective(const Measurement& y, const SteeringMatrix& R, const Profile& g, double alpha) {
  return 0.5 * (y - R.entries() * g).squaredNorm() + alpha * g.cwiseAbs().sum();
}

namespace {

void check_dims(const Measurement& y, const SteeringMatrix& R, const char* who) {
  if (y.size() != R.rows())
    throw ValidationError(std::string(who) + ": measurement length " + std::to_string(y.size()) +
                          " does not match " + std::to_string(R.rows()) + " channels");
}

}  // namespace

SolveResult ista_solve(const Measurement& y, const SteeringMatrix& R, const IstaConfig& cfg) {
  check_dims(y, R, "ista_solve");
  if (!(cfg.alpha > 0.0)) throw ValidationError("ista: alpha must be positive");
  if (cfg.max_iters < 1) throw ValidationError("ista: max_iters must be >= 1");
  const double lip = checked_lipschitz(cfg.lipschitz, R);
  const double step = 1.0 / lip;
  const double theta = cfg.alpha / lip;
  const CMatrix& A = R.entries();

  SolveResult out;
  Profile g = Profile::Zero(R.cols());
  out.objective_trace.push_back(lasso_objective(y, R, g, cfg.alpha));
  Measurement residual = y;
  for (int k = 0; k < cfg.max_iters; ++k) {
    Profile next = g + step * (A.adjoint() * residual);
    soft_threshold_inplace(next, theta);
    if (!next.allFinite()) throw NumericalError("ista: non-finite iterate");
    const double change = (next - g).norm();
    const double scale = next.norm();
    g = std::move(next);
    residual = y - A * g;
    out.iterations_used = k + 1;
    out.objective_trace.push_back(0.5 * residual.squaredNorm() + cfg.alpha * g.cwiseAbs().sum());
    if (cfg.tolerance > 0.0 && change <= cfg.tolerance * scale) break;
  }
  out.final_residual_norm = residual.norm();
  out.estimate = std::move(g);
  return out;
}

void GreedyConfig::validate(const SteeringMatrix& R, bool full_support_allowed) const {
  const bool full = full_support_allowed && sparsity == R.cols();
  if (!full && (sparsity < 1 || sparsity > std::min(R.rows(), R.cols())))
    throw ValidationError(std::string("greedy: sparsity must lie in [1, min(N, L)]") +
                          (full_support_allowed ? " or equal L" : ""));
  if (max_iters < sparsity) throw ValidationError("greedy: max_iters must be >= sparsity");
  if (residual_tolerance < 0.0) throw ValidationError("greedy: residual_tolerance must be >= 0");
}

SolveResult omp_solve(const Measurement& y, const SteeringMatrix& R, const GreedyConfig& cfg) {
  check_dims(y, R, "omp_solve");
  cfg.validate(R);
  const CMatrix& A = R.entries();
  for (Eigen::Index l = 0; l < A.cols(); ++l)
    if (A.col(l).squaredNorm() == 0.0) throw ValidationError("omp: zero column in sensing matrix");

  SolveResult out;
  out.estimate = Profile::Zero(R.cols());
  std::vector<int> support;
  CVector coef;
  Measurement residual = y;
  std::vector<char> used(static_cast<std::size_t>(A.cols()), 0);

  while (static_cast<int>(support.size()) < cfg.sparsity && out.iterations_used < cfg.max_iters) {
    if (residual.norm() <= cfg.residual_tolerance) break;
    const CVector corr = A.adjoint() * residual;
    int best = -1;
    double best_mag = -1.0;
    for (Eigen::Index l = 0; l < corr.size(); ++l) {
      if (used[static_cast<std::size_t>(l)]) continue;
      const double m = std::abs(corr[l]) / A.col(l).norm();
      if (m > best_mag) {
        best_mag = m;
        best = static_cast<int>(l);
      }
    }
    if (best < 0 || best_mag == 0.0) break;
    support.push_back(best);
    used[static_cast<std::size_t>(best)] = 1;

    CMatrix active(A.rows(), static_cast<Eigen::Index>(support.size()));
    for (std::size_t j = 0; j < support.size(); ++j) active.col(static_cast<Eigen::Index>(j)) = A.col(support[j]);
    Eigen::ColPivHouseholderQR<CMatrix> qr(active);
    qr.setThreshold(1e-10);
    if (qr.rank() < active.cols())
      throw NumericalError("omp: rank-deficient active set (duplicate grid columns?)");
    coef = qr.solve(y);
    residual = y - active * coef;
    ++out.iterations_used;
  }
  for (std::size_t j = 0; j < support.size(); ++j) out.estimate[support[j]] = coef[static_cast<Eigen::Index>(j)];
  out.final_residual_norm = (y - A * out.estimate).norm();
  return out;
}

SolveResult iht_solve(const Measurement& y, const SteeringMatrix& R, const GreedyConfig& cfg) {
  check_dims(y, R, "iht_solve");
  cfg.validate(R, true);
  const double step = 1.0 / checked_lipschitz(cfg.lipschitz, R);
  const CMatrix& A = R.entries();

  SolveResult out;
  Profile g = Profile::Zero(R.cols());
  Measurement residual = y;
  for (int k = 0; k < cfg.max_iters; ++k) {
    if (residual.norm() <= cfg.residual_tolerance) break;
    Profile next = g + step * (A.adjoint() * residual);
    hard_threshold_inplace(next, cfg.sparsity);
    if (!next.allFinite()) throw NumericalError("iht: non-finite iterate");
    out.iterations_used = k + 1;
    const bool fixed_point = next == g;
    g = std::move(next);
    residual = y - A * g;
    if (fixed_point) break;
  }
  out.final_residual_norm = residual.norm();
  out.estimate = std::move(g);
  return out;
}

}  // namespace tomosar
