#pragma once

// Hand-rolled generators and brute-force oracles shared by the test binaries.

#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <numbers>
#include <random>
#include <vector>

#include <Eigen/Dense>

#include "nlsysid/model.hpp"
#include "nlsysid/polytope.hpp"

namespace nlsysid::testing {

class Gen {
 public:
  explicit Gen(std::uint64_t seed) : rng_(seed) {}
  double uniform(double lo, double hi) {
    return std::uniform_real_distribution<double>(lo, hi)(rng_);
  }
  int integer(int lo, int hi) {
    return std::uniform_int_distribution<int>(lo, hi)(rng_);
  }
  double normal() { return std::normal_distribution<double>()(rng_); }
  Eigen::VectorXd vector(int n, double lo, double hi) {
    Eigen::VectorXd v(n);
    for (int i = 0; i < n; ++i) v[i] = uniform(lo, hi);
    return v;
  }
  Eigen::VectorXd unit(int n) {
    Eigen::VectorXd v(n);
    for (int i = 0; i < n; ++i) v[i] = normal();
    return v / v.norm();
  }
  std::mt19937_64& engine() { return rng_; }

 private:
  std::mt19937_64 rng_;
};

// Bounded 2D polytope with m constraints: normals at jittered angles that
// leave no angular gap of pi or more, offsets in [0.3, 1.5] around a random
// center.
inline HPolytope random_polygon(Gen& g, int m) {
  const Eigen::Vector2d center(g.uniform(-2.0, 2.0), g.uniform(-2.0, 2.0));
  const double base = g.uniform(0.0, 2.0 * std::numbers::pi);
  HPolytope poly(2);
  for (int k = 0; k < m; ++k) {
    const double angle =
        base + 2.0 * std::numbers::pi * (k + g.uniform(-0.2, 0.2)) / m;
    Eigen::Vector2d a(std::cos(angle), std::sin(angle));
    poly.add(a, a.dot(center) + g.uniform(0.3, 1.5));
  }
  return poly;
}

// All feasible pairwise constraint intersections.
inline std::vector<Eigen::Vector2d> brute_vertices(const HPolytope& poly) {
  const auto& cs = poly.constraints();
  std::vector<Eigen::Vector2d> out;
  for (std::size_t i = 0; i < cs.size(); ++i) {
    for (std::size_t j = i + 1; j < cs.size(); ++j) {
      Eigen::Matrix2d m;
      m.row(0) = cs[i].normal.transpose();
      m.row(1) = cs[j].normal.transpose();
      if (std::abs(m.determinant()) < 1e-12) continue;
      const Eigen::Vector2d v = m.inverse() * Eigen::Vector2d(cs[i].offset, cs[j].offset);
      bool ok = true;
      for (const auto& h : cs) ok = ok && h.normal.dot(v) <= h.offset + 1e-9;
      if (ok) out.push_back(v);
    }
  }
  return out;
}

inline double brute_lp_max(const HPolytope& poly, const Eigen::Vector2d& c) {
  double best = -std::numeric_limits<double>::infinity();
  for (const auto& v : brute_vertices(poly)) best = std::max(best, c.dot(v));
  return best;
}

inline double shoelace(const std::vector<Eigen::Vector2d>& ccw) {
  double area = 0.0;
  for (std::size_t i = 0; i < ccw.size(); ++i) {
    const auto& p = ccw[i];
    const auto& q = ccw[(i + 1) % ccw.size()];
    area += p.x() * q.y() - q.x() * p.y();
  }
  return 0.5 * area;
}

// Trajectory with w = 0 and inputs drawn by `input`, filled field by field
// from step().
inline Trajectory noiseless_trajectory(
    const SystemModel& model, int horizon,
    const std::function<Eigen::VectorXd(const Eigen::VectorXd&)>& input) {
  const auto& d = model.dims();
  Trajectory tr;
  tr.length = horizon;
  tr.states = Eigen::MatrixXd::Zero(horizon + 1, d.n_x);
  tr.inputs = Eigen::MatrixXd::Zero(horizon, d.n_u);
  tr.disturbances = Eigen::MatrixXd::Zero(horizon, d.n_x);
  tr.features = Eigen::MatrixXd::Zero(horizon, d.n_phi);
  Eigen::VectorXd x = model.initial_state;
  tr.states.row(0) = x.transpose();
  const Eigen::VectorXd w = Eigen::VectorXd::Zero(d.n_x);
  for (int t = 0; t < horizon; ++t) {
    const Eigen::VectorXd u = input(x);
    tr.inputs.row(t) = u.transpose();
    tr.features.row(t) = eval_features(model.features, x, u).transpose();
    x = step(model, x, u, w);
    tr.states.row(t + 1) = x.transpose();
  }
  return tr;
}

}  // namespace nlsysid::testing
