#include <cmath>

#include <gtest/gtest.h>

#include "nlsysid/error.hpp"
#include "nlsysid/sme.hpp"
#include "support.hpp"

namespace nlsysid {
namespace {

using testing::Gen;

Trajectory pendulum_run(int horizon, std::uint64_t seed, double k = 0.1) {
  return simulate(pendulum_model(),
                  pendulum_damping_policy(k, NoiseSpec::truncated_gaussian(1, 2.0, 2.0)),
                  NoiseSpec::truncated_gaussian(2, 1.0, 1.0), horizon, seed);
}

Trajectory quadrotor_run(int horizon, std::uint64_t seed) {
  const QuadrotorParams p;
  return simulate(quadrotor_model(p),
                  quadrotor_hover_policy({}, p.mass, p.gravity, NoiseSpec::uniform(4, 0.01)),
                  NoiseSpec::uniform(13, 0.01), horizon, seed);
}

std::pair<double, double> interval(const SmeRow& r) {
  const auto v = enumerate_vertices(r.poly);
  double lo = v[0][0], hi = v[0][0];
  for (const auto& p : v) {
    lo = std::min(lo, p[0]);
    hi = std::max(hi, p[0]);
  }
  return {lo, hi};
}

TEST(SmeInit, PendulumPrior) {
  const auto m = pendulum_model();
  const SmeState s = sme_init(m, 1.0);
  ASSERT_EQ(s.rows.size(), 1u);
  EXPECT_EQ(s.rows[0].row, 1);
  EXPECT_EQ(s.rows[0].dimension(), 2);
  EXPECT_EQ(s.find_row(0), nullptr);
  EXPECT_NEAR(sme_diameter(s).value, 200.0 * std::sqrt(2.0), 1e-9);
  EXPECT_TRUE(sme_contains_truth(s, m));
}

TEST(SmeInit, QuadrotorRowDimensions) {
  const SmeState s = sme_init(quadrotor_model(), 0.01);
  int ones = 0, twos = 0;
  for (const auto& r : s.rows) {
    if (r.dimension() == 1) ++ones;
    if (r.dimension() == 2) ++twos;
  }
  EXPECT_EQ(s.rows.size(), 6u);
  EXPECT_EQ(ones, 3);
  EXPECT_EQ(twos, 3);
}

TEST(SmeUpdate, ScalarIntervalArithmetic) {
  const auto m = linear_scalar_model(0.9);
  SmeState s = sme_init(m, 0.1);
  Eigen::VectorXd x(1), next(1);
  x << 1.0;
  next << 0.95;
  sme_update(s, next, x, m);
  auto [lo, hi] = interval(s.rows[0]);
  EXPECT_NEAR(lo, 0.85, 1e-12);
  EXPECT_NEAR(hi, 1.05, 1e-12);

  x << 2.0;
  next << 1.7;
  sme_update(s, next, x, m);
  std::tie(lo, hi) = interval(s.rows[0]);
  EXPECT_NEAR(lo, 0.85, 1e-12);
  EXPECT_NEAR(hi, 0.90, 1e-12);
  EXPECT_NEAR(sme_diameter(s).value, 0.05, 1e-12);
}

TEST(SmeUpdate, ZeroFeatureDatumIsVacuousOrViolation) {
  const auto m = pendulum_model();
  SmeState s = sme_init(m, 1.0);
  const std::size_t before = s.rows[0].poly.size();
  sme_update(s, Eigen::Vector2d(0.0, 0.5), Eigen::VectorXd::Zero(4), m);
  EXPECT_EQ(s.rows[0].poly.size(), before);
  EXPECT_THROW(sme_update(s, Eigen::Vector2d(0.0, 1.5), Eigen::VectorXd::Zero(4), m),
               NoiseBoundViolation);
}

TEST(SmeUpdate, EmptySetRaisesNoiseBoundViolation) {
  const auto m = linear_scalar_model(0.9);
  SmeState s = sme_init(m, 0.1);
  Eigen::VectorXd x(1), next(1);
  x << 1.0;
  next << 0.95;
  sme_update(s, next, x, m);  // [0.85, 1.05]
  next << 0.5;
  EXPECT_THROW(sme_update(s, next, x, m), NoiseBoundViolation);  // [0.4, 0.6]
}

TEST(SmeUpdate, DimensionMismatch) {
  const auto m = pendulum_model();
  SmeState s = sme_init(m, 1.0);
  EXPECT_THROW(sme_update(s, Eigen::VectorXd::Zero(3), Eigen::VectorXd::Zero(4), m),
               ContractViolation);
}

TEST(SmeDiameter, RootSumSquareOverRows) {
  SmeState s;
  for (int j = 0; j < 2; ++j) {
    SmeRow r;
    r.row = j;
    r.columns = {0};
    r.poly = HPolytope::box(Eigen::VectorXd::Zero(1), j == 0 ? 1.5 : 2.0);
    s.rows.push_back(r);
  }
  EXPECT_NEAR(sme_diameter(s).value, 5.0, 1e-12);
  s.rows[0].vertices = enumerate_vertices(s.rows[0].poly);
  EXPECT_NEAR(sme_diameter(s).value, 5.0, 1e-12);
}

TEST(SmeDiameter, PendulumEqualsSingleRowGeometry) {
  const auto m = pendulum_model();
  SmeState s = sme_init(m, 1.0);
  sme_absorb(s, pendulum_run(400, 1), m, 0, 400);
  const double agg = sme_diameter(s).value;
  EXPECT_EQ(agg, diameter(s.rows[0].poly).value);
}

TEST(SmeRun, NestedAndContainsTruthEveryStep) {
  for (std::uint64_t seed = 0; seed < 3; ++seed) {
    const auto m = pendulum_model();
    const auto tr = pendulum_run(3000, seed);
    SmeState s = sme_init(m, 1.0);
    double prev = sme_diameter(s).value;
    for (int t = 0; t < tr.length; ++t) {
      sme_absorb(s, tr, m, t, t + 1);
      const double now = sme_diameter(s).value;
      ASSERT_LE(now, prev + 1e-9) << "t=" << t;
      ASSERT_TRUE(sme_contains_truth(s, m)) << "t=" << t;
      prev = now;
    }
    EXPECT_LT(prev, 1e-2);
  }
}

TEST(SmeRun, QuadrotorContainsTruth) {
  const auto m = quadrotor_model();
  const auto tr = quadrotor_run(2000, 2);
  SmeState s = sme_init(m, 0.01);
  for (int t = 0; t < tr.length; t += 100) {
    sme_absorb(s, tr, m, t, t + 100);
    ASSERT_TRUE(sme_contains_truth(s, m)) << t;
  }
}

TEST(SmeRun, DiameterShrinksFromFiftyToFiveHundred) {
  const auto m = pendulum_model();
  const auto tr = pendulum_run(500, 3);
  SmeState s = sme_init(m, 1.0);
  sme_absorb(s, tr, m, 0, 50);
  const double d50 = sme_diameter(s).value;
  sme_absorb(s, tr, m, 50, 500);
  EXPECT_LT(sme_diameter(s).value, d50);
}

TEST(SmeRun, PruneIntervalIsTransparent) {
  const auto m = pendulum_model();
  const auto tr = pendulum_run(1500, 4);
  SmeState a = sme_init(m, 1.0, 100.0, 1);
  SmeState b = sme_init(m, 1.0, 100.0, 50);
  for (int t = 0; t < tr.length; t += 25) {
    sme_absorb(a, tr, m, t, t + 25);
    sme_absorb(b, tr, m, t, t + 25);
    ASSERT_NEAR(sme_diameter(a).value, sme_diameter(b).value, 1e-9) << t;
  }
}

TEST(SmeRun, OrderInvariant) {
  const auto m = pendulum_model();
  const auto tr = pendulum_run(300, 5);
  SmeState fwd = sme_init(m, 1.0);
  SmeState rev = sme_init(m, 1.0);
  sme_absorb(fwd, tr, m, 0, tr.length);
  for (int t = tr.length - 1; t >= 0; --t) sme_absorb(rev, tr, m, t, t + 1);
  const auto verts = *fwd.rows[0].vertices;
  Eigen::VectorXd lo = verts[0], hi = verts[0];
  for (const auto& v : verts) {
    lo = lo.cwiseMin(v);
    hi = hi.cwiseMax(v);
  }
  const Eigen::VectorXd pad = 0.25 * (hi - lo);
  Gen g(6);
  int inside = 0;
  for (int k = 0; k < 10000; ++k) {
    Eigen::VectorXd x(2);
    for (int i = 0; i < 2; ++i) x[i] = g.uniform(lo[i] - pad[i], hi[i] + pad[i]);
    const bool in = contains(fwd.rows[0].poly, x);
    ASSERT_EQ(in, contains(rev.rows[0].poly, x));
    inside += in;
  }
  EXPECT_GT(inside, 0);
}

TEST(SmeRun, ShrunkNoiseBoundIsCaught) {
  const auto m = pendulum_model();
  const auto tr = simulate(m, pendulum_damping_policy(0.1, NoiseSpec::uniform(1, 1.0)),
                           NoiseSpec::uniform(2, 1.0), 2000, 7);
  SmeState s = sme_init(m, 0.5);
  bool caught = false;
  try {
    for (int t = 0; t < tr.length && !caught; ++t) {
      sme_absorb(s, tr, m, t, t + 1);
      caught = !sme_contains_truth(s, m);
    }
  } catch (const NoiseBoundViolation&) {
    caught = true;
  }
  EXPECT_TRUE(caught);
}

TEST(SmeProjection, PendulumSameRowIsExact) {
  const auto m = pendulum_model();
  SmeState s = sme_init(m, 1.0);
  sme_absorb(s, pendulum_run(200, 8), m, 0, 200);
  const auto proj = sme_project_2d(s, m, 0, 1);
  EXPECT_TRUE(proj.exact);
  EXPECT_TRUE(proj.same_row);
  EXPECT_NEAR(testing::shoelace(proj.vertices), testing::shoelace(vertices_2d(s.rows[0].poly)),
              1e-12);
}

TEST(SmeProjection, CrossRowIsRectangle) {
  const auto m = quadrotor_model();
  SmeState s = sme_init(m, 0.01);
  sme_absorb(s, quadrotor_run(500, 9), m, 0, 500);
  const auto proj = sme_project_2d(s, m, 0, 3);
  EXPECT_FALSE(proj.same_row);
  ASSERT_EQ(proj.vertices.size(), 4u);
  const auto [lo0, hi0] = interval(s.rows[0]);
  const auto* row = s.find_row(quad::kStateOmega);
  const Eigen::VectorXd e = Eigen::Vector2d(1, 0);
  const double w3 = support(row->poly, e) + support(row->poly, -e);
  EXPECT_NEAR(testing::shoelace(proj.vertices), (hi0 - lo0) * w3, 1e-9 * (hi0 - lo0) * w3);
}

TEST(SmeProjection, QuadrotorSameRowAreaMatchesMonteCarlo) {
  const auto m = quadrotor_model();
  SmeState s = sme_init(m, 0.01);
  sme_absorb(s, quadrotor_run(3000, 10), m, 0, 3000);
  // Coordinates 3 and 4: dt/Ixx and dt (Iyy - Izz)/Ixx in the first rate row.
  const auto proj = sme_project_2d(s, m, 3, 4);
  ASSERT_TRUE(proj.exact);
  ASSERT_TRUE(proj.same_row);
  const HPolytope& poly = s.find_row(quad::kStateOmega)->poly;
  Eigen::Vector2d lo = proj.vertices[0], hi = proj.vertices[0];
  for (const auto& v : proj.vertices) {
    lo = lo.cwiseMin(v);
    hi = hi.cwiseMax(v);
  }
  Gen g(11);
  const int n = 1'000'000;
  int inside = 0;
  for (int k = 0; k < n; ++k)
    inside += contains(poly, Eigen::Vector2d(g.uniform(lo.x(), hi.x()), g.uniform(lo.y(), hi.y())));
  const double mc = (hi - lo).prod() * inside / n;
  const double area = testing::shoelace(proj.vertices);
  EXPECT_NEAR(mc, area, 0.02 * area);
}

TEST(SmeProjection, OutOfRange) {
  const auto m = pendulum_model();
  const SmeState s = sme_init(m, 1.0);
  EXPECT_THROW(sme_project_2d(s, m, 0, 2), ContractViolation);
  EXPECT_THROW(sme_project_2d(s, m, 1, 1), ContractViolation);
}

TEST(ConvexHull, DropsInteriorPoints) {
  const auto hull = convex_hull_2d({{0, 0}, {1, 0}, {1, 1}, {0, 1}, {0.5, 0.5}, {0.2, 0.7}});
  EXPECT_EQ(hull.size(), 4u);
  EXPECT_NEAR(testing::shoelace(hull), 1.0, 1e-15);
}

}  // namespace
}  // namespace nlsysid
