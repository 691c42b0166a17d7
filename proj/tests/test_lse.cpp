#include <cmath>
#include <limits>

#include <Eigen/Dense>
#include <gtest/gtest.h>

#include "nlsysid/error.hpp"
#include "nlsysid/lse.hpp"
#include "support.hpp"

namespace nlsysid {
namespace {

using testing::Gen;

Trajectory noisy_pendulum(int horizon, std::uint64_t seed, double k = 2.0) {
  return simulate(pendulum_model(), pendulum_damping_policy(k, NoiseSpec::uniform(1, 1.0)),
                  NoiseSpec::uniform(2, 1.0), horizon, seed);
}

double residual_ss(const Trajectory& tr, const Eigen::MatrixXd& theta) {
  const Eigen::MatrixXd r =
      tr.states.bottomRows(tr.length) - tr.features * theta.transpose();
  return r.squaredNorm();
}

TEST(SolveLse, NoiselessPendulumRecoversExactly) {
  const auto m = pendulum_model();
  Gen g(1);
  const auto tr = testing::noiseless_trajectory(m, 200, [&](const Eigen::VectorXd& x) {
    Eigen::VectorXd u(1);
    u[0] = -2.0 * x[1] + g.uniform(-1.0, 1.0);
    return u;
  });
  const auto res = solve_lse(tr, m);
  EXPECT_FALSE(res.used_pseudo_inverse);
  EXPECT_LE((res.estimate.entries - m.theta.entries).cwiseAbs().maxCoeff(), 1e-8);
}

TEST(SolveLse, ScalarRatioOracle) {
  Gen g(2);
  for (int trial = 0; trial < 20; ++trial) {
    const auto m = linear_scalar_model(0.9);
    const auto tr = simulate(m, ControlPolicy::open_loop(NoiseSpec::uniform(1, 1.0)),
                             NoiseSpec::uniform(1, 1.0), g.integer(5, 2000),
                             static_cast<std::uint64_t>(trial));
    double num = 0.0, den = 0.0;
    for (int t = 0; t < tr.length; ++t) {
      num += tr.states(t, 0) * tr.states(t + 1, 0);
      den += tr.states(t, 0) * tr.states(t, 0);
    }
    const double oracle = num / den;
    const double est = solve_lse(tr, m).estimate.entries(0, 0);
    EXPECT_NEAR(est, oracle, 1e-12 * std::abs(oracle));
  }
}

TEST(SolveLse, KnownEntriesCopiedExactly) {
  const auto m = pendulum_model();
  const auto res = solve_lse(noisy_pendulum(500, 3), m);
  for (int j = 0; j < 2; ++j)
    for (int c = 0; c < 4; ++c)
      if (!m.theta.unknown(j, c)) EXPECT_EQ(res.estimate.entries(j, c), m.theta.entries(j, c));
  EXPECT_EQ(res.estimate.unknown, m.theta.unknown);
}

TEST(SolveLse, FirstOrderOptimality) {
  const auto m = pendulum_model();
  const auto tr = noisy_pendulum(1000, 4);
  const auto res = solve_lse(tr, m);
  const double best = residual_ss(tr, res.estimate.entries);
  Gen g(5);
  for (int k = 0; k < 100; ++k) {
    Eigen::MatrixXd theta = res.estimate.entries;
    theta(1, 2) += g.uniform(-1e-3, 1e-3);
    theta(1, 3) += g.uniform(-1e-3, 1e-3);
    EXPECT_LE(best, residual_ss(tr, theta));
  }
}

TEST(SolveLse, NormalEquationIdentity) {
  const auto m = quadrotor_model();
  const QuadrotorParams p;
  const auto tr = simulate(m, quadrotor_hover_policy({}, p.mass, p.gravity, NoiseSpec::uniform(4, 0.01)),
                           NoiseSpec::uniform(13, 0.01), 800, 6);
  const auto res = solve_lse(tr, m);
  for (int j = 0; j < m.theta.rows(); ++j) {
    const auto unk = m.theta.unknown_columns(j);
    if (unk.empty()) continue;
    // Residual targets with the known part removed, then the reduced system.
    Eigen::VectorXd y = tr.states.col(j).tail(tr.length);
    Eigen::MatrixXd a(tr.length, unk.size());
    for (int c = 0; c < m.theta.cols(); ++c) {
      if (m.theta.unknown(j, c)) continue;
      y -= m.theta.entries(j, c) * tr.features.col(c);
    }
    for (std::size_t k = 0; k < unk.size(); ++k) a.col(k) = tr.features.col(unk[k]);
    const Eigen::VectorXd cross = a.transpose() * y;
    const Eigen::VectorXd th = res.estimate.unknown_values(j);
    EXPECT_LE((a.transpose() * a * th - cross).norm(), 1e-8 * cross.norm()) << "row " << j;
  }
}

TEST(SolveLse, RowDecouplingMatchesJointSolve) {
  const auto m = quadrotor_model();
  const QuadrotorParams p;
  const auto tr = simulate(m, quadrotor_hover_policy({}, p.mass, p.gravity, NoiseSpec::uniform(4, 0.01)),
                           NoiseSpec::uniform(13, 0.01), 600, 7);
  const auto entries = m.theta.unknown_entries();
  const int n = static_cast<int>(entries.size());
  const int T = tr.length;
  // One stacked regression over all unknowns: block j of the response is
  // row j of x_{t+1} minus its known part.
  Eigen::MatrixXd a = Eigen::MatrixXd::Zero(T * m.theta.rows(), n);
  Eigen::VectorXd y(T * m.theta.rows());
  for (int j = 0; j < m.theta.rows(); ++j) {
    Eigen::VectorXd yj = tr.states.col(j).tail(T);
    for (int c = 0; c < m.theta.cols(); ++c)
      if (!m.theta.unknown(j, c)) yj -= m.theta.entries(j, c) * tr.features.col(c);
    y.segment(j * T, T) = yj;
  }
  for (int k = 0; k < n; ++k)
    a.block(entries[k].row * T, k, T, 1) = tr.features.col(entries[k].col);
  const Eigen::VectorXd joint = a.colPivHouseholderQr().solve(y);
  const auto res = solve_lse(tr, m);
  for (int k = 0; k < n; ++k) {
    const double v = res.estimate.entries(entries[k].row, entries[k].col);
    EXPECT_NEAR(v, joint[k], 1e-9 * std::max(1.0, std::abs(joint[k]))) << k;
  }
}

TEST(SolveLse, InsufficientData) {
  EXPECT_THROW(solve_lse(noisy_pendulum(10, 8), pendulum_model(), 1), InsufficientDataError);
}

TEST(SolveLse, NonFiniteData) {
  auto tr = noisy_pendulum(50, 9);
  tr.states(10, 1) = std::numeric_limits<double>::quiet_NaN();
  EXPECT_THROW(solve_lse(tr, pendulum_model()), DataError);
}

TEST(SolveLse, SingularGramFallsBackToMinimumNorm) {
  const auto m = pendulum_model();
  const auto tr = testing::noiseless_trajectory(m, 30, [](const Eigen::VectorXd&) {
    return Eigen::VectorXd::Zero(1);
  });
  const auto res = solve_lse(tr, m);
  EXPECT_TRUE(res.used_pseudo_inverse);
  EXPECT_TRUE(res.row_pseudo_inverse[1]);
  EXPECT_TRUE(std::isinf(res.row_condition[1]));
  EXPECT_EQ(res.estimate.unknown_values(1), Eigen::VectorXd::Zero(2));
}

TEST(EstimationError, Examples) {
  const auto m = pendulum_model();
  const auto exact = estimation_error(m.theta, m);
  EXPECT_EQ(exact.absolute, 0.0);
  EXPECT_EQ(exact.normalized, 0.0);

  ParameterMatrix perturbed = m.theta;
  perturbed.entries(1, 3) += 0.1;
  const auto e = estimation_error(perturbed, m);
  EXPECT_NEAR(e.absolute, 0.1, 1e-14);
  EXPECT_NEAR(e.normalized, 0.1 / spectral_norm(m.theta.entries), 1e-14);
}

TEST(SolveLse, ErrorShrinksFromShortToLongHorizon) {
  const auto m = pendulum_model();
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const auto tr = noisy_pendulum(10000, 100 + seed);
    const double early = *solve_lse(tr, m, 100).normalized_error;
    const double late = *solve_lse(tr, m, 10000).normalized_error;
    EXPECT_LT(late, early) << "seed " << seed;
  }
}

}  // namespace
}  // namespace nlsysid
