#include <cmath>

#include <gtest/gtest.h>

#include "bounds_oracle.hpp"
#include "nlsysid/bmsb.hpp"
#include "nlsysid/bounds.hpp"
#include "nlsysid/error.hpp"
#include "support.hpp"

namespace nlsysid {
namespace {

using testing::Real;

BoundInputs reference() {
  BoundInputs in;
  in.n_x = 2;
  in.n_phi = 4;
  in.sigma_w = 0.577;
  in.delta = 0.05;
  in.epsilon = 0.05;
  in.s_phi = 0.1;
  in.p_phi = 0.5;
  in.b_phi = 5.0;
  in.b_bar_phi = 10.0;
  in.c_w = 0.5;
  in.T = 10000;
  in.m = 2501;
  return in;
}

double rel(double a, const Real& b) {
  return std::abs(a - static_cast<double>(b)) / std::abs(static_cast<double>(b));
}

TEST(BurnIn, ReferenceValue) {
  const BoundInputs in = reference();
  EXPECT_EQ(lse_burn_in(in), 1332);
  EXPECT_EQ(lse_burn_in(in), static_cast<long>(ceil(testing::oracle_burn_in(in))));
}

TEST(BurnIn, LimitAsDeltaApproachesOne) {
  BoundInputs in = reference();
  in.delta = 1.0 - 1e-12;
  in.b_bar_phi = in.s_phi * in.s_phi;
  const double limit = (10.0 / in.p_phi) * 2.0 * in.n_phi * std::log(10.0 / in.p_phi);
  EXPECT_LE(std::abs(lse_burn_in(in) - std::ceil(limit)), 1.0);
}

TEST(BurnIn, IncreasesWithFeatureCount) {
  BoundInputs in = reference();
  const long base = lse_burn_in(in);
  in.n_phi *= 2;
  EXPECT_GT(lse_burn_in(in), base);
}

TEST(LseBound, ReferenceValueAndScaling) {
  BoundInputs in = reference();
  const double v = lse_error_bound(in);
  EXPECT_LT(rel(v, testing::oracle_lse_bound(in)), 1e-12);
  in.T *= 4;
  EXPECT_NEAR(lse_error_bound(in), v / 2.0, 1e-14 * v);
  in.sigma_w = 0.0;
  EXPECT_EQ(lse_error_bound(in), 0.0);
}

TEST(LseBound, BelowBurnInIsRefused) {
  BoundInputs in = reference();
  in.T = 1000;
  EXPECT_THROW(lse_error_bound(in), PreconditionError);
}

TEST(Inputs, Validation) {
  BoundInputs in = reference();
  in.delta = 1.0;
  EXPECT_THROW(lse_burn_in(in), ContractViolation);
  in = reference();
  in.p_phi = 1.0;
  EXPECT_THROW(sme_m_choice(in), ContractViolation);
  in = reference();
  in.T = 0;
  EXPECT_THROW(lse_burn_in(in), ContractViolation);
}

TEST(Inputs, FromBmsbEstimate) {
  BmsbEstimate est;
  est.s_phi = 0.2;
  est.p_phi = 0.4;
  est.b_phi = 3.0;
  est.b_bar_phi = 2.0;
  BoundInputs in;
  in.set_bmsb(est);
  EXPECT_EQ(in.s_phi, 0.2);
  EXPECT_EQ(in.p_phi, 0.4);
  EXPECT_EQ(in.b_phi, 3.0);
  EXPECT_EQ(in.b_bar_phi, 2.0);
}

TEST(FailureProb, ReferenceValue) {
  const BoundInputs in = reference();
  const double p = sme_failure_prob(in, 0.1);
  EXPECT_TRUE(std::isfinite(p));
  EXPECT_GT(p, 0.0);
  EXPECT_LT(rel(p, testing::oracle_failure(in, 0.1)), 1e-9);
}

TEST(FailureProb, CertainBoundaryVisitKillsSecondTerm) {
  BoundInputs in = reference();
  in.c_w = 1e6;  // q_w clamps to 1
  const SmeConstants k = sme_constants(in);
  const double term1 = 544.0 * (double(in.T) / in.m) * std::pow(in.n_phi, 2.5) *
                       std::log(k.a2 * in.n_phi) * std::pow(k.a2, in.n_phi) *
                       std::exp(-k.a3 * in.m);
  EXPECT_NEAR(sme_failure_prob(in, 0.1), term1, 1e-12 * term1);
}

TEST(FailureProb, FirstTermVanishesForLongBlocks) {
  BoundInputs in = reference();
  in.c_w = 1e6;
  double prev = sme_failure_prob(in, 0.1);
  for (long m : {5000L, 8000L, 9999L}) {
    in.m = m;
    const double now = sme_failure_prob(in, 0.1);
    EXPECT_LT(now, prev);
    prev = now;
  }
  in.T = 100000;
  in.m = 99999;
  EXPECT_LT(sme_failure_prob(in, 0.1), 1e-300);
}

// The block-count term decays in T; the first term carries a T/m factor and
// grows linearly, so monotonicity in T holds only once it is negligible.
TEST(FailureProb, HorizonDependence) {
  BoundInputs in = reference();
  in.c_w = 1e6;  // only the first term remains
  in.T = 20000;
  const double p = sme_failure_prob(in, 0.1);
  in.T = 40000;
  EXPECT_NEAR(sme_failure_prob(in, 0.1), 2.0 * p, 1e-12 * p);

  in = reference();
  in.m = 5000;
  double prev = sme_failure_log_prob(in, 0.5);
  for (long T = 10000; T <= 2000000; T = T * 3 / 2) {
    in.T = T;
    const double now = sme_failure_log_prob(in, 0.5);
    EXPECT_LE(now, prev + 1e-12) << T;
    prev = now;
  }
}

TEST(FailureProb, Preconditions) {
  BoundInputs in = reference();
  in.m = in.T;
  EXPECT_THROW(sme_failure_prob(in, 0.1), PreconditionError);
  in.m = 0;
  EXPECT_THROW(sme_failure_prob(in, 0.1), PreconditionError);
}

TEST(FailureProb, HugeValuesStayFiniteInLogSpace) {
  BoundInputs in = reference();
  in.n_x = 13;
  in.n_phi = 27;
  in.s_phi = 0.003;
  in.p_phi = 0.3;
  in.b_phi = 11.0;
  in.m = 100;
  const double lp = sme_failure_log_prob(in, 0.01);
  EXPECT_TRUE(std::isfinite(lp));
  EXPECT_GT(lp, 700.0);
  EXPECT_TRUE(std::isinf(sme_failure_prob(in, 0.01)));
  EXPECT_NEAR(lp, static_cast<double>(log(testing::oracle_failure(in, 0.01))), 1e-9);
}

TEST(MChoice, ReferenceValue) {
  const BoundInputs in = reference();
  EXPECT_EQ(sme_m_choice(in), 2501);
  const SmeConstants k = sme_constants(in);
  EXPECT_DOUBLE_EQ(k.a3, 0.03125);
  EXPECT_NEAR(k.a2, 6.4e5, 1e-6);
}

TEST(MChoice, GrowsLogarithmicallyInHorizon) {
  BoundInputs in = reference();
  const long m1 = sme_m_choice(in);
  in.T *= 10;
  const long m2 = sme_m_choice(in);
  EXPECT_GT(m2, m1);
  // One decade of T adds log(10) / a3.
  EXPECT_LE(std::abs((m2 - m1) - std::log(10.0) / sme_constants(in).a3), 1.0);
}

TEST(MChoice, SmallestAsEpsilonApproachesOne) {
  BoundInputs in = reference();
  long prev = sme_m_choice(in);
  for (double eps : {0.2, 0.5, 0.9, 0.999999}) {
    in.epsilon = eps;
    const long now = sme_m_choice(in);
    EXPECT_LE(now, prev);
    prev = now;
  }
}

TEST(MChoice, DomainError) {
  BoundInputs in = reference();
  in.b_phi = 1e-4;  // a2 n_phi < 1
  EXPECT_THROW(sme_m_choice(in), DomainError);
}

TEST(DiameterBound, ReferenceValueAndScaling) {
  BoundInputs in = reference();
  const double v = sme_diameter_bound(in);
  EXPECT_TRUE(std::isfinite(v));
  EXPECT_GT(v, 0.0);
  EXPECT_LT(rel(v, testing::oracle_diameter(in)), 1e-12);
  in.T *= 2;
  EXPECT_NEAR(sme_diameter_bound(in), v / 2.0, 1e-14 * v);
  in.T /= 2;
  in.c_w *= 2;
  EXPECT_NEAR(sme_diameter_bound(in), v / 2.0, 1e-14 * v);
}

TEST(DiameterBound, Preconditions) {
  BoundInputs in = reference();
  in.m = in.T + 1;
  EXPECT_THROW(sme_diameter_bound(in), PreconditionError);
  in = reference();
  in.c_w = 0.0;
  EXPECT_THROW(sme_diameter_bound(in), ContractViolation);
}

// Random parameter points against the 50-digit oracle.
TEST(Bounds, MatchHighPrecisionOracleOnRandomGrid) {
  testing::Gen g(42);
  for (int k = 0; k < 50; ++k) {
    BoundInputs in;
    in.n_x = g.integer(1, 13);
    in.n_phi = g.integer(1, 27);
    in.sigma_w = g.uniform(0.01, 1.0);
    in.delta = g.uniform(0.01, 0.5);
    in.epsilon = g.uniform(0.01, 0.5);
    in.s_phi = std::pow(10.0, g.uniform(-3.0, 0.0));
    in.p_phi = g.uniform(0.05, 0.95);
    in.b_phi = in.s_phi * std::pow(10.0, g.uniform(0.5, 3.0));
    in.b_bar_phi = in.b_phi * in.b_phi * g.uniform(0.05, 1.0);
    in.c_w = g.uniform(0.01, 2.0);
    in.T = static_cast<long>(std::pow(10.0, g.uniform(2.0, 6.0)));
    in.m = g.integer(1, static_cast<int>(in.T - 1));

    EXPECT_EQ(lse_burn_in(in), static_cast<long>(ceil(testing::oracle_burn_in(in)))) << k;
    BoundInputs lse = in;
    lse.T = std::max(in.T, lse_burn_in(in));
    EXPECT_LT(rel(lse_error_bound(lse), testing::oracle_lse_bound(lse)), 1e-9) << k;
    const double delta = g.uniform(0.01, 1.0);
    const Real fail = testing::oracle_failure(in, delta);
    const double lp = sme_failure_log_prob(in, delta);
    if (fail == 0) {
      EXPECT_TRUE(std::isinf(lp) && lp < 0) << k;
    } else {
      EXPECT_NEAR(lp, static_cast<double>(log(fail)), 1e-9) << k;
    }
    EXPECT_EQ(sme_m_choice(in), static_cast<long>(ceil(testing::oracle_m_choice(in)))) << k;
    EXPECT_LT(rel(sme_diameter_bound(in), testing::oracle_diameter(in)), 1e-9) << k;
  }
}

}  // namespace
}  // namespace nlsysid
