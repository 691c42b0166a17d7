#include <algorithm>
#include <cmath>
#include <vector>

#include <boost/multiprecision/cpp_dec_float.hpp>
#include <gtest/gtest.h>

#include "nlsysid/error.hpp"
#include "nlsysid/noise.hpp"

namespace nlsysid {
namespace {

using Real = boost::multiprecision::cpp_dec_float_50;

double cw_oracle(double sigma, double w_max) {
  const Real s(sigma), w(w_max);
  const Real pi = boost::multiprecision::default_ops::get_constant_pi<Real::backend_type>();
  const Real num = exp(-(w * w) / (2 * s * s));
  const Real gauss = sqrt(2 * Real(pi)) * s;
  const Real den = gauss < 2 * w ? gauss : Real(2 * w);
  return static_cast<double>(num / den);
}

// Two-sample Kolmogorov-Smirnov statistic.
double ks_statistic(std::vector<double> a, std::vector<double> b) {
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  std::size_t i = 0, j = 0;
  double d = 0.0;
  while (i < a.size() && j < b.size()) {
    const double x = std::min(a[i], b[j]);
    while (i < a.size() && a[i] <= x) ++i;
    while (j < b.size() && b[j] <= x) ++j;
    d = std::max(d, std::abs(static_cast<double>(i) / a.size() -
                             static_cast<double>(j) / b.size()));
  }
  return d;
}

TEST(Sample, UniformBoxSupport) {
  SeedStream s(1, "u");
  const auto spec = NoiseSpec::uniform(2, 1.0);
  for (int k = 0; k < 100000; ++k) {
    const Eigen::VectorXd z = sample(spec, s);
    ASSERT_EQ(z.size(), 2);
    ASSERT_LE(z.cwiseAbs().maxCoeff(), 1.0);
  }
}

TEST(Sample, TruncatedGaussianVarianceNarrowTruncation) {
  SeedStream s(2, "tg");
  const auto spec = NoiseSpec::truncated_gaussian(1, 0.1, 1.0);
  double sum = 0.0, sum2 = 0.0;
  const int n = 1'000'000;
  for (int k = 0; k < n; ++k) {
    const double z = sample(spec, s)[0];
    sum += z;
    sum2 += z * z;
  }
  const double mean = sum / n;
  const double var = sum2 / n - mean * mean;
  EXPECT_NEAR(var, 0.01, 0.02 * 0.01);
  EXPECT_NEAR(noise_std(spec), 0.1, 1e-12);
}

TEST(Sample, WideTruncatedGaussianMatchesUniformByKs) {
  SeedStream a(3, "wide"), b(3, "flat");
  const auto wide = NoiseSpec::truncated_gaussian(1, 1e6, 1.0);
  const auto flat = NoiseSpec::uniform(1, 1.0);
  const int n = 100000;
  std::vector<double> xa(n), xb(n);
  for (int k = 0; k < n; ++k) {
    xa[k] = sample(wide, a)[0];
    xb[k] = sample(flat, b)[0];
  }
  // Critical value at alpha = 0.01: 1.628 sqrt((n + m) / (n m)).
  const double critical = 1.628 * std::sqrt(2.0 / n);
  EXPECT_LT(ks_statistic(xa, xb), critical);
}

TEST(Sample, ZeroMeanPerComponent) {
  const int n = 1'000'000;
  for (const auto& spec : {NoiseSpec::uniform(3, 1.0),
                           NoiseSpec::truncated_gaussian(3, 0.5, 1.0),
                           NoiseSpec::truncated_gaussian(3, 2.0, 2.0)}) {
    SeedStream s(4, "mean");
    Eigen::VectorXd sum = Eigen::VectorXd::Zero(3);
    for (int k = 0; k < n; ++k) sum += sample(spec, s);
    const double tol = 5.0 * spec.bound / std::sqrt(static_cast<double>(n));
    EXPECT_LT((sum / n).cwiseAbs().maxCoeff(), tol) << to_string(spec.kind);
  }
}

TEST(Sample, Reproducible) {
  const auto spec = NoiseSpec::truncated_gaussian(4, 0.5, 1.0);
  SeedStream a(99, "trial/3/disturbance"), b(99, "trial/3/disturbance");
  for (int k = 0; k < 1000; ++k) ASSERT_EQ(sample(spec, a), sample(spec, b));
}

TEST(SeedStreams, DistinctLabelsAreUncorrelated) {
  SeedStream a(5, "trial/0"), b(5, "trial/1");
  const int n = 200000;
  double sab = 0.0;
  for (int k = 0; k < n; ++k) sab += a.standard_normal() * b.standard_normal();
  EXPECT_LT(std::abs(sab / n), 5.0 / std::sqrt(static_cast<double>(n)));
  EXPECT_NE(derive_seed(5, "trial/0"), derive_seed(5, "trial/1"));
  EXPECT_EQ(SeedStream(5, "trial").child("0").label(), "trial/0");
}

TEST(Tightness, Examples) {
  EXPECT_DOUBLE_EQ(tightness_coefficient(NoiseSpec::uniform(1, 1.0)), 0.5);
  EXPECT_DOUBLE_EQ(tightness_coefficient(NoiseSpec::uniform(1, 0.5)), 1.0);
  const double cw = tightness_coefficient(NoiseSpec::truncated_gaussian(1, 0.5, 1.0));
  EXPECT_NEAR(cw, cw_oracle(0.5, 1.0), 1e-15);
  EXPECT_NEAR(cw, 0.10798, 5e-6);
}

TEST(Tightness, MatchesHighPrecisionOracle) {
  for (double sigma : {0.05, 0.1, 0.5, 1.0, 2.0, 10.0}) {
    for (double w : {0.1, 0.5, 1.0, 2.0}) {
      const double cw = tightness_coefficient(NoiseSpec::truncated_gaussian(1, sigma, w));
      EXPECT_NEAR(cw, cw_oracle(sigma, w), 1e-13 * cw_oracle(sigma, w))
          << sigma << " " << w;
    }
  }
}

// Boundary-visit frequencies against the lower bound c_w * l. The sigma = 0.1
// spec is excluded: its bound (about 4e-23 * l) is far below what 1e6 draws
// can resolve.
TEST(Tightness, BoundaryVisitFrequency) {
  const int n = 1'000'000;
  for (const auto& spec : {NoiseSpec::uniform(1, 1.0),
                           NoiseSpec::truncated_gaussian(1, 0.5, 1.0),
                           NoiseSpec::truncated_gaussian(1, 1.0, 1.0),
                           NoiseSpec::truncated_gaussian(1, 2.0, 2.0)}) {
    SeedStream s(6, "tight");
    std::vector<double> draws(n);
    for (int k = 0; k < n; ++k) draws[k] = sample(spec, s)[0];
    const double cw = tightness_coefficient(spec);
    for (double frac : {0.05, 0.1, 0.2}) {
      const double ell = frac * spec.bound;
      const auto hits = std::count_if(draws.begin(), draws.end(), [&](double w) {
        return w >= spec.bound - ell;
      });
      EXPECT_GE(static_cast<double>(hits) / n, 0.8 * cw * ell)
          << to_string(spec.kind) << " sigma=" << spec.sigma << " l=" << ell;
    }
  }
}

TEST(TruncatedScalar, WideSigmaStaysInSupport) {
  SeedStream s(7, "fig3");
  for (int k = 0; k < 100000; ++k) {
    const double z = sample_truncated_gaussian_scalar(2.0, 2.0, s);
    ASSERT_LE(std::abs(z), 2.0);
  }
}

TEST(TruncatedScalar, AcceptanceRates) {
  SeedStream s(8, "rate");
  RejectionStats wide;
  for (int k = 0; k < 100000; ++k) sample_truncated_gaussian_scalar(0.1, 1.0, s, &wide);
  EXPECT_GT(wide.acceptance_rate(), 0.9999);

  RejectionStats unit;
  for (int k = 0; k < 1'000'000; ++k) sample_truncated_gaussian_scalar(1.0, 1.0, s, &unit);
  // 2 Phi(1) - 1 from a standard normal table.
  const double expected = 0.682689492137086;
  EXPECT_NEAR(unit.acceptance_rate(), expected, 0.005 * expected);
}

TEST(TruncatedScalar, NarrowTruncationUsesUniformProposal) {
  // bound << sigma: proposals are uniform on the support, so almost all are
  // accepted and the draws are nearly flat.
  SeedStream s(9, "narrow");
  RejectionStats stats;
  double sum2 = 0.0;
  const int n = 200000;
  for (int k = 0; k < n; ++k) {
    const double z = sample_truncated_gaussian_scalar(100.0, 1.0, s, &stats);
    ASSERT_LE(std::abs(z), 1.0);
    sum2 += z * z;
  }
  EXPECT_GT(stats.acceptance_rate(), 0.999);
  EXPECT_NEAR(sum2 / n, 1.0 / 3.0, 0.01);
}

TEST(NoiseSpecContract, RejectsInvalid) {
  EXPECT_THROW(NoiseSpec::uniform(1, 0.0).validate(), ContractViolation);
  EXPECT_THROW(NoiseSpec::uniform(0, 1.0).validate(), ContractViolation);
  EXPECT_THROW(NoiseSpec::truncated_gaussian(1, 0.0, 1.0).validate(), ContractViolation);
  EXPECT_THROW(noise_kind_from_string("laplace"), ContractViolation);
  EXPECT_EQ(noise_kind_from_string(to_string(NoiseKind::kTruncatedGaussian)),
            NoiseKind::kTruncatedGaussian);
}

TEST(NoiseStd, UniformIsBoundOverRootThree) {
  EXPECT_NEAR(noise_std(NoiseSpec::uniform(1, 1.0)), 1.0 / std::sqrt(3.0), 1e-15);
}

}  // namespace
}  // namespace nlsysid
