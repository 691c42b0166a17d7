#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "nlsysid/model.hpp"
#include "nlsysid/noise.hpp"

namespace nlsysid {

/// How a radius is picked from the grid once p(s) is known at every s.
enum class SmallBallRule {
  /// Largest s with p(s) strictly inside (0, 1).
  kLargestFeasible,
  /// Among s with p(s) in (0, 1), the one maximizing s * p(s). This minimizes
  /// the leading 1/(s p) factor shared by the LSE and SME bounds.
  kMaxProduct,
};

std::string to_string(SmallBallRule rule);
SmallBallRule small_ball_rule_from_string(const std::string& name);

struct BmsbOptions {
  int horizon = 50;
  int n_traj = 20;
  int n_dirs = 1000;
  int n_mc = 200;
  /// Ascending small-ball radii; empty selects default_s_grid().
  std::vector<double> s_grid;
  SmallBallRule rule = SmallBallRule::kLargestFeasible;
  /// Visited points beyond this count are subsampled (flagged).
  int max_points = 2000;
  std::uint64_t seed = 0;
};

/// 1e-3 .. 1e1, four points per decade.
std::vector<double> default_s_grid();

struct BmsbProvenance {
  int horizon = 0;
  int n_traj = 0;
  int n_dirs = 0;
  int n_mc = 0;
  std::uint64_t seed = 0;
  int points_visited = 0;
  int points_used = 0;
  bool subsampled = false;
  SmallBallRule rule = SmallBallRule::kLargestFeasible;
  std::string model;
  std::vector<double> s_grid;
  /// p(s) at every grid radius (min over points and directions).
  std::vector<double> p_grid;
};

struct BmsbEstimate {
  double s_phi = 0.0;
  double p_phi = 0.0;
  double b_phi = 0.0;
  double b_bar_phi = 0.0;
  BmsbProvenance provenance;
};

/// Monte-Carlo small-ball constants along simulated trajectories. For every
/// visited point z = (x_t, u_t) and unit direction v, estimates
///   P(|v . phi(theta* phi(z) + w, u')| >= s),  u' = policy(x') + eta
/// with n_mc fresh (w, eta) draws shared across the s grid, and takes the
/// minimum over points and directions. b_phi is the largest |phi(z_t)|_2
/// seen and b_bar_phi the largest per-time mean of |phi(z_t)|_2^2 across
/// trajectories. Throws EstimationFailure when no grid radius has
/// p in (0, 1).
BmsbEstimate estimate_bmsb(const SystemModel& model, const ControlPolicy& policy,
                           const NoiseSpec& disturbance,
                           const BmsbOptions& options);

/// Fraction of n_mc draws with |v . phi(theta* phi(z) + w, u')| >= s, where
/// z = (x, u). Requires |v|_2 = 1 within 1e-12.
double mc_smallball_prob(const SystemModel& model, const ControlPolicy& policy,
                         const NoiseSpec& disturbance, const Eigen::VectorXd& x,
                         const Eigen::VectorXd& u, const Eigen::VectorXd& v,
                         double s, int n_mc, SeedStream& stream);

std::string bmsb_to_json(const BmsbEstimate& estimate);
/// Throws ConfigError naming the first missing or malformed field.
BmsbEstimate bmsb_from_json(const std::string& text);

}  // namespace nlsysid
