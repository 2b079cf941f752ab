#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <random>
#include <set>

#include "common.hpp"
#include "oracles.hpp"
#include "tomosar/solvers.hpp"

using namespace tomosar;
using testutil::random_cvector;
using testutil::random_phase;

namespace {

SteeringMatrix reference_R(int L = 16) {
  return build_steering_matrix(testutil::reference_geometry(), ElevationGrid::spanning(-0.6, 5.4, L));
}

SteeringMatrix low_coherence_R() {
  static const auto rows = oracle::low_coherence_row_sets(16, 8, 1.0 / 3.0);
  return testutil::lattice_steering(rows.front(), 16);
}

std::set<int> support(const Profile& g) {
  std::set<int> s;
  for (Eigen::Index l = 0; l < g.size(); ++l)
    if (g[l] != Complex(0.0, 0.0)) s.insert(static_cast<int>(l));
  return s;
}

}  // namespace

TEST_SUITE("cs-solvers") {

TEST_CASE("soft threshold examples") {
  CHECK(soft_threshold(Complex(0.0, 0.0), 0.7) == Complex(0.0, 0.0));
  CHECK(soft_threshold(Complex(0.3, -0.4), 0.5) == Complex(0.0, 0.0));
  CHECK(soft_threshold(Complex(0.3, -0.4), 0.6) == Complex(0.0, 0.0));
  // polar form: |x| = 5, angle atan2(4, 3), shrink to 3
  const Complex expect = std::polar(5.0 - 2.0, std::atan2(4.0, 3.0));
  const Complex got = soft_threshold(Complex(3.0, 4.0), 2.0);
  CHECK(std::abs(got - expect) < 1e-15);
  CHECK(std::abs(got - Complex(1.8, 2.4)) < 1e-15);
}

TEST_CASE("soft threshold is nonexpansive and phase equivariant") {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(0.0, 2.0);
  for (int i = 0; i < 10000; ++i) {
    const CVector ab = random_cvector(rng, 2);
    const double t = u(rng);
    CHECK(std::abs(soft_threshold(ab[0], t) - soft_threshold(ab[1], t)) <= std::abs(ab[0] - ab[1]) + 1e-15);
    const Complex c = random_phase(rng);
    CHECK(std::abs(soft_threshold(c * ab[0], t) - c * soft_threshold(ab[0], t)) < 1e-14);
  }
}

TEST_CASE("hard threshold keeps the largest entries, lowest index on ties") {
  CVector x(6);
  x << 1.0, Complex(0.0, 3.0), -3.0, 2.0, 3.0, 0.5;
  CVector k2 = x;
  hard_threshold_inplace(k2, 2);
  CHECK(support(k2) == std::set<int>{1, 2});
  CVector k3 = x;
  hard_threshold_inplace(k3, 3);
  CHECK(support(k3) == std::set<int>{1, 2, 4});
  CVector all = x;
  hard_threshold_inplace(all, 6);
  CHECK(all == x);
}

TEST_CASE("Lipschitz constant is checked against lambda_max") {
  const auto R = reference_R();
  const double lam = oracle::max_eigenvalue(R.entries().adjoint() * R.entries());
  CHECK_THROWS_AS(checked_lipschitz(0.99 * lam, R), ValidationError);
  CHECK(checked_lipschitz(1.5 * lam, R) == 1.5 * lam);
  CHECK(checked_lipschitz(0.0, R) > lam);
  IstaConfig cfg;
  cfg.lipschitz = 0.5 * lam;
  CHECK_THROWS_AS(ista_solve(Measurement::Ones(8), R, cfg), ValidationError);
  GreedyConfig g{2, 10, 0.0, 0.5 * lam};
  CHECK_THROWS_AS(iht_solve(Measurement::Ones(8), R, g), ValidationError);
}

TEST_CASE("ISTA basics") {
  const auto R = reference_R();
  const auto r = ista_solve(Measurement::Zero(8), R, IstaConfig{});
  CHECK(r.estimate.norm() == 0.0);
  CHECK_THROWS_AS(ista_solve(Measurement::Zero(7), R, IstaConfig{}), ValidationError);

  std::mt19937_64 rng(4);
  IstaConfig cfg;
  cfg.alpha = 0.1;
  cfg.tolerance = 0.0;
  cfg.max_iters = 300;
  const auto res = ista_solve(random_cvector(rng, 8), R, cfg);
  CHECK(res.iterations_used == 300);
  CHECK(res.objective_trace.size() == 301u);
}

TEST_CASE("ISTA objective is non-increasing") {
  std::mt19937_64 rng(21);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 30; ++trial) {
    const auto p = testutil::random_problem(rng, 8, 32);
    const auto R = build_steering_matrix(p.geometry, p.grid);
    IstaConfig cfg;
    cfg.alpha = 0.05 + u(rng);
    cfg.lipschitz = (1.0 + u(rng)) * oracle::max_eigenvalue(R.entries() * R.entries().adjoint());
    cfg.max_iters = 200;
    cfg.tolerance = 0.0;
    const auto res = ista_solve(random_cvector(rng, 8), R, cfg);
    for (std::size_t k = 1; k < res.objective_trace.size(); ++k)
      CHECK(res.objective_trace[k] <= res.objective_trace[k - 1] + 1e-10);
  }
}

TEST_CASE("ISTA matches the coordinate-descent LASSO oracle") {
  const auto R = low_coherence_R();
  std::mt19937_64 rng(31);
  for (int trial = 0; trial < 20; ++trial) {
    Profile truth = Profile::Zero(16);
    truth[trial % 16] = random_phase(rng);
    truth[(trial * 7 + 3) % 16] = 0.7 * random_phase(rng);
    const Measurement y = forward(R, truth);
    const double alpha = 0.2;
    const CVector ref = oracle::lasso_coordinate_descent(R.entries(), y, alpha, 100000);
    REQUIRE(oracle::lasso_kkt_violation(R.entries(), y, alpha, ref) < 1e-9);
    IstaConfig cfg;
    cfg.alpha = alpha;
    const auto got = ista_solve(y, R, cfg).estimate;
    const double peak = ref.cwiseAbs().maxCoeff();
    CHECK((got.cwiseAbs() - ref.cwiseAbs()).cwiseAbs().maxCoeff() <= 0.05 * peak);
  }
}

TEST_CASE("solve results report their residual") {
  const auto R = reference_R();
  std::mt19937_64 rng(2);
  const Measurement y = random_cvector(rng, 8);
  GreedyConfig g{2, 20, 0.0};
  for (const auto& res : {ista_solve(y, R, IstaConfig{}), omp_solve(y, R, g), iht_solve(y, R, g)})
    CHECK(std::abs(res.final_residual_norm - (y - R.entries() * res.estimate).norm()) < 1e-10);
}

TEST_CASE("all solvers are phase equivariant") {
  const auto R = reference_R();
  std::mt19937_64 rng(12);
  for (int trial = 0; trial < 20; ++trial) {
    const Measurement y = random_cvector(rng, 8);
    const Complex c = random_phase(rng);
    GreedyConfig g{2, 50, 0.0};
    const auto check = [&](const Profile& a, const Profile& b) { CHECK((a * c - b).norm() < 1e-10); };
    check(ista_solve(y, R, IstaConfig{}).estimate, ista_solve(c * y, R, IstaConfig{}).estimate);
    check(omp_solve(y, R, g).estimate, omp_solve(c * y, R, g).estimate);
    check(iht_solve(y, R, g).estimate, iht_solve(c * y, R, g).estimate);
  }
}

TEST_CASE("greedy config validation") {
  const auto R = reference_R();
  CHECK_THROWS_AS((GreedyConfig{9, 20, 0.0}.validate(R)), ValidationError);
  CHECK_THROWS_AS((GreedyConfig{3, 2, 0.0}.validate(R)), ValidationError);
  CHECK_THROWS_AS((GreedyConfig{0, 2, 0.0}.validate(R)), ValidationError);
  CHECK_THROWS_AS((GreedyConfig{2, 2, -1.0}.validate(R)), ValidationError);
  CHECK_NOTHROW((GreedyConfig{8, 8, 0.0}.validate(R)));
  CHECK_NOTHROW((GreedyConfig{16, 16, 0.0}.validate(R, true)));
  CHECK_THROWS_AS((GreedyConfig{12, 20, 0.0}.validate(R, true)), ValidationError);
}

TEST_CASE("OMP on a single atom") {
  const auto R = reference_R();
  for (int l = 0; l < 16; ++l) {
    const auto res = omp_solve(R.entries().col(l), R, GreedyConfig{1, 1, 0.0});
    CHECK(support(res.estimate) == std::set<int>{l});
    CHECK(std::abs(res.estimate[l] - 1.0) < 1e-10);
  }
}

TEST_CASE("OMP residual is orthogonal to the active set") {
  const auto R = reference_R(24);
  std::mt19937_64 rng(13);
  for (int trial = 0; trial < 50; ++trial) {
    const Measurement y = random_cvector(rng, 8);
    for (int k = 1; k <= 4; ++k) {
      const auto res = omp_solve(y, R, GreedyConfig{k, k, 0.0});
      const CVector r = y - R.entries() * res.estimate;
      for (int l : support(res.estimate)) CHECK(std::abs(R.entries().col(l).dot(r)) < 1e-8);
    }
  }
}

TEST_CASE("OMP recovers every 2-sparse support the exhaustive search recovers") {
  const auto rows = oracle::low_coherence_row_sets(16, 8, 1.0 / 3.0);
  REQUIRE(rows.size() >= 3);
  std::mt19937_64 rng(19);
  std::uniform_real_distribution<double> amp(0.2, 1.0);
  for (std::size_t m = 0; m < 3; ++m) {
    const auto R = testutil::lattice_steering(rows[m * rows.size() / 3], 16);
    CHECK(oracle::mutual_coherence(R.entries()) < 1.0 / 3.0);
    int exhaustive_ok = 0, omp_ok = 0, missed = 0;
    for (int i = 0; i < 16; ++i) {
      for (int j = i + 1; j < 16; ++j) {
        Profile truth = Profile::Zero(16);
        truth[i] = amp(rng) * random_phase(rng);
        truth[j] = amp(rng) * random_phase(rng);
        const Measurement y = forward(R, truth);
        const auto ex = oracle::exhaustive_pair_search(R.entries(), y);
        const bool ex_ok = ex.i == i && ex.j == j && ex.residual < 1e-9 && ex.runner_up > 1e-6;
        const bool o_ok = support(omp_solve(y, R, GreedyConfig{2, 2, 0.0}).estimate) == std::set<int>{i, j};
        exhaustive_ok += ex_ok;
        omp_ok += o_ok;
        missed += ex_ok && !o_ok;
      }
    }
    CHECK(exhaustive_ok == 120);
    CHECK(missed == 0);
    CHECK(omp_ok >= exhaustive_ok);
  }
}

TEST_CASE("IHT recovers a single atom") {
  const auto R = reference_R();
  for (int l = 0; l < 16; ++l) {
    const auto res = iht_solve(R.entries().col(l), R, GreedyConfig{1, 50, 0.0});
    CHECK(support(res.estimate) == std::set<int>{l});
  }
}

TEST_CASE("IHT without truncation descends least squares monotonically") {
  const auto R = reference_R();
  std::mt19937_64 rng(41);
  const Profile g = random_cvector(rng, 16);
  const Measurement y = forward(R, g);
  double prev = y.norm();
  for (int iters = 16; iters <= 200; ++iters) {  // max_iters >= sparsity
    const auto res = iht_solve(y, R, GreedyConfig{16, iters, 0.0});
    CHECK(res.final_residual_norm <= prev + 1e-12);
    prev = res.final_residual_norm;
  }
  // gradient descent on 1/2 ||y - R g||^2 from 0, same step
  const double step = 1.0 / checked_lipschitz(0.0, R);
  CVector ref = CVector::Zero(16);
  for (int k = 0; k < 200; ++k) ref += step * R.entries().adjoint() * (y - R.entries() * ref);
  CHECK((iht_solve(y, R, GreedyConfig{16, 200, 0.0}).estimate - ref).norm() < 1e-10);
  CHECK(prev < 1e-3 * y.norm());
}

TEST_CASE("IHT output is K-sparse") {
  const auto R = reference_R(32);
  std::mt19937_64 rng(43);
  for (int trial = 0; trial < 50; ++trial)
    for (int k = 1; k <= 4; ++k)
      CHECK(support(iht_solve(random_cvector(rng, 8), R, GreedyConfig{k, 100, 0.0}).estimate).size() <=
            static_cast<std::size_t>(k));
}

TEST_CASE("IHT support recovery at 20 dB matches the exhaustive oracle") {
  const auto R = low_coherence_R();
  std::mt19937_64 rng(47);
  std::uniform_int_distribution<int> pick(0, 15);
  int iht_ok = 0, oracle_ok = 0;
  for (int seed = 0; seed < 100; ++seed) {
    std::set<int> s;
    while (s.size() < 3) s.insert(pick(rng));
    Profile truth = Profile::Zero(16);
    for (int l : s) truth[l] = random_phase(rng);
    const Measurement y = add_noise(forward(R, truth), 20.0, derive_seed(3, "iht-mc", seed));
    // exhaustive search over all 3-subsets
    double best = 1e300;
    std::set<int> best_s;
    for (int a = 0; a < 16; ++a)
      for (int b = a + 1; b < 16; ++b)
        for (int c = b + 1; c < 16; ++c) {
          CMatrix S(8, 3);
          S << R.entries().col(a), R.entries().col(b), R.entries().col(c);
          const CVector x = S.colPivHouseholderQr().solve(y);
          const double r = (y - S * x).norm();
          if (r < best) {
            best = r;
            best_s = {a, b, c};
          }
        }
    oracle_ok += best_s == s;
    iht_ok += support(iht_solve(y, R, GreedyConfig{3, 200, 0.0}).estimate) == s;
  }
  MESSAGE("support recovery: IHT " << iht_ok << "/100, exhaustive " << oracle_ok << "/100");
  CHECK(iht_ok >= oracle_ok);
}

}
