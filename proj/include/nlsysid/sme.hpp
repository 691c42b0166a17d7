#pragma once

#include <optional>
#include <vector>

#include <Eigen/Core>

#include "nlsysid/model.hpp"
#include "nlsysid/polytope.hpp"

namespace nlsysid {

/// Uncertainty set of one state row over its unknown entries.
struct SmeRow {
  int row = 0;
  std::vector<int> columns;  // unknown columns, ascending
  HPolytope poly{1};
  /// Vertex cache for d <= 3. Valid whenever set; new constraints that leave
  /// every cached vertex feasible cannot change the set.
  std::optional<std::vector<Eigen::VectorXd>> vertices;

  int dimension() const { return static_cast<int>(columns.size()); }
};

/// Set-membership estimate: a product of per-row polytopes, one for each
/// state row with at least one unknown entry.
struct SmeState {
  std::vector<SmeRow> rows;
  int n_x = 0;
  double w_max = 0.0;
  double prior_half_width = 100.0;
  int prune_interval = 25;
  long steps = 0;

  /// Row record for state row j, or nullptr when row j has no unknowns.
  const SmeRow* find_row(int j) const;
};

inline constexpr double kDefaultPriorHalfWidth = 100.0;
inline constexpr int kDefaultPruneInterval = 25;

/// Prior-only state: the box [-R0, R0]^{d_j} for every row with unknowns.
/// `w_max` is the disturbance bound assumed by the updates; experiments take
/// it from the disturbance NoiseSpec.
SmeState sme_init(const SystemModel& model, double w_max,
                  double prior_half_width = kDefaultPriorHalfWidth,
                  int prune_interval = kDefaultPruneInterval);

/// Absorbs one datum (phi(x_t, u_t), x_{t+1}): for each row with unknowns,
///   |a . theta_U - c| <= w_max,  a = phi_U,  c = x_next^j - theta*_K . phi_K
/// with a normalized to unit length. Rows are pruned every prune_interval
/// updates. Throws NoiseBoundViolation when a row set becomes empty.
void sme_update(SmeState& state, const Eigen::VectorXd& x_next,
                const Eigen::VectorXd& features, const SystemModel& model);

/// Absorbs steps [begin, end) of a trajectory.
void sme_absorb(SmeState& state, const Trajectory& traj,
                const SystemModel& model, int begin, int end);

struct SmeDiameter {
  double value = 0.0;
  std::vector<double> row_values;
  bool certified_exact = true;
};

/// Frobenius diameter sqrt(sum_j diam_j^2); the set is a product over rows.
SmeDiameter sme_diameter(const SmeState& state, int directions = 2000,
                         std::uint64_t seed = 0x5eed);

/// Every row polytope contains the true unknown entries of that row.
bool sme_contains_truth(const SmeState& state, const SystemModel& model);

struct Projection2d {
  std::vector<Eigen::Vector2d> vertices;
  bool exact = true;
  bool same_row = true;
};

/// Shadow of the uncertainty set on two unknown coordinates, indexed in the
/// row-major order of ParameterMatrix::unknown_entries(). Same-row pairs are
/// exact for d_j <= 3 (convex hull of projected vertices); larger rows give an
/// outer approximation from `directions` support-function cuts. Cross-row
/// pairs give the rectangle of the two coordinate intervals.
Projection2d sme_project_2d(const SmeState& state, const SystemModel& model,
                            int coord_a, int coord_b, int directions = 64);

/// Counterclockwise convex hull (Andrew's monotone chain).
std::vector<Eigen::Vector2d> convex_hull_2d(std::vector<Eigen::Vector2d> points);

}  // namespace nlsysid
