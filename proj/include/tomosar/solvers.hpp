#pragma once

#include <vector>

#include "tomosar/geometry.hpp"
#include "tomosar/types.hpp"

namespace tomosar {

/// Complex soft threshold: 0 when |x| <= theta, else x (|x| - theta) / |x|.
inline Complex soft_threshold(Complex x, double theta) {
  const double m = std::abs(x);
  if (m <= theta) return Complex(0.0, 0.0);
  return x * ((m - theta) / m);
}

/// Elementwise soft threshold, in place.
void soft_threshold_inplace(CVector& x, double theta);

/// l1 regularised least squares, min 1/2 ||y - R g||^2 + alpha ||g||_1.
struct IstaConfig {
  double alpha = 0.5;
  /// Step is 1 / lipschitz. Must exceed lambda_max(R^H R); 0 selects
  /// 1.01 * lambda_max.
  double lipschitz = 0.0;
  int max_iters = 500;
  /// Stop once ||g_{k+1} - g_k|| <= tolerance ||g_{k+1}||. 0 runs the full budget.
  double tolerance = 1e-6;
};

struct GreedyConfig {
  int sparsity = 2;
  int max_iters = 100;
  double residual_tolerance = 0.0;
  /// IHT only; same convention as IstaConfig::lipschitz.
  double lipschitz = 0.0;

  /// 1 <= sparsity <= min(N, L) and max_iters >= sparsity. IHT may also
  /// run with sparsity = L, which disables truncation.
  void validate(const SteeringMatrix& R, bool full_support_allowed = false) const;
};

struct SolveResult {
  Profile estimate;
  int iterations_used = 0;
  double final_residual_norm = 0.0;
  /// ISTA only: F(g_k) for k = 0 .. iterations_used.
  std::vector<double> objective_trace;
};

/// Resolves a configured Lipschitz constant against R, throwing when it does
/// not exceed lambda_max(R^H R).
double checked_lipschitz(double configured, const SteeringMatrix& R);

double lasso_objective(const Measurement& y, const SteeringMatrix& R, const Profile& g, double alpha);

SolveResult ista_solve(const Measurement& y, const SteeringMatrix& R, const IstaConfig& cfg);
SolveResult omp_solve(const Measurement& y, const SteeringMatrix& R, const GreedyConfig& cfg);
SolveResult iht_solve(const Measurement& y, const SteeringMatrix& R, const GreedyConfig& cfg);

/// Keeps the k largest-modulus entries (lowest index wins ties), zeroing the rest.
void hard_threshold_inplace(CVector& x, int k);

}  // namespace tomosar
