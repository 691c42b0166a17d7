#pragma once

#include <optional>
#include <vector>

#include "nlsysid/model.hpp"

namespace nlsysid {

struct LseResult {
  /// Known entries copied from the model, unknown entries estimated.
  ParameterMatrix estimate;
  /// Condition number of each row's reduced normal matrix (0 for rows without
  /// unknowns, +inf when singular).
  std::vector<double> row_condition;
  /// Rows solved by the minimum-norm pseudo-inverse fallback.
  std::vector<bool> row_pseudo_inverse;
  bool used_pseudo_inverse = false;
  std::optional<double> absolute_error;
  std::optional<double> normalized_error;
};

/// Masked least squares over the first `horizon` steps of `traj` (all of it
/// when horizon is nullopt). Each row j regresses
///   y_t = x_{t+1}^j - sum_{known i} theta*_{ji} phi^i(z_t)
/// on the d_j unknown feature columns via Cholesky-factored normal
/// equations, falling back to a minimum-norm solution when the reduced Gram
/// matrix has reciprocal condition below 1e-10. Errors are filled in against
/// the model's theta*.
LseResult solve_lse(const Trajectory& traj, const SystemModel& model,
                    std::optional<int> horizon = std::nullopt);

struct EstimationError {
  double absolute = 0.0;
  double normalized = 0.0;
};

/// Spectral norm |theta_hat - theta*|_2 and its ratio to |theta*|_2.
EstimationError estimation_error(const ParameterMatrix& estimate,
                                 const SystemModel& model);
EstimationError estimation_error(const LseResult& result,
                                 const SystemModel& model);

/// Largest singular value.
double spectral_norm(const Eigen::MatrixXd& m);

inline constexpr double kLseSingularTolerance = 1e-10;

}  // namespace nlsysid
