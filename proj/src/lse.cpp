#include "nlsysid/lse.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <Eigen/Dense>

#include "nlsysid/error.hpp"

namespace nlsysid {

double spectral_norm(const Eigen::MatrixXd& m) {
  if (m.size() == 0) return 0.0;
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(m);
  return svd.singularValues()(0);
}

LseResult solve_lse(const Trajectory& traj, const SystemModel& model,
                    std::optional<int> horizon) {
  const ParameterMatrix& theta = model.theta;
  const int T = horizon.value_or(traj.length);
  if (T < 1 || T > traj.length)
    throw ContractViolation("LSE horizon out of range");
  if (theta.total_unknowns() == 0)
    throw ContractViolation("model has no unknown entries to estimate");

  int max_unknowns = 0;
  for (int j = 0; j < theta.rows(); ++j)
    max_unknowns = std::max(max_unknowns, theta.unknowns_in_row(j));
  if (T < max_unknowns)
    throw InsufficientDataError(
        "LSE needs at least " + std::to_string(max_unknowns) +
        " samples, trajectory prefix has " + std::to_string(T));

  const auto phi = traj.features.topRows(T);
  const auto next = traj.states.middleRows(1, T);
  if (!phi.allFinite() || !next.allFinite())
    throw DataError("trajectory contains non-finite values");

  // Full normal-equation blocks; each row's reduced system is read out of
  // these with the known contributions moved to the right-hand side.
  const Eigen::MatrixXd gram = phi.transpose() * phi;
  const Eigen::MatrixXd cross = phi.transpose() * next;

  LseResult result;
  result.estimate = theta;
  result.row_condition.assign(theta.rows(), 0.0);
  result.row_pseudo_inverse.assign(theta.rows(), false);

  for (int j = 0; j < theta.rows(); ++j) {
    const std::vector<int> unk = theta.unknown_columns(j);
    if (unk.empty()) continue;
    std::vector<int> known;
    for (int c = 0; c < theta.cols(); ++c)
      if (!theta.unknown(j, c)) known.push_back(c);

    const int d = static_cast<int>(unk.size());
    Eigen::MatrixXd g(d, d);
    Eigen::VectorXd rhs(d);
    for (int a = 0; a < d; ++a) {
      for (int b = 0; b < d; ++b) g(a, b) = gram(unk[a], unk[b]);
      double r = cross(unk[a], j);
      for (int k : known) r -= gram(unk[a], k) * theta.entries(j, k);
      rhs[a] = r;
    }

    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(g,
                                                       Eigen::EigenvaluesOnly);
    const double lmax = eig.eigenvalues().maxCoeff();
    const double lmin = eig.eigenvalues().minCoeff();
    const bool singular = !(lmax > 0.0) || lmin <= kLseSingularTolerance * lmax;
    result.row_condition[j] =
        singular ? std::numeric_limits<double>::infinity() : lmax / lmin;

    Eigen::VectorXd sol;
    if (!singular) {
      Eigen::LLT<Eigen::MatrixXd> llt(g);
      if (llt.info() == Eigen::Success) {
        sol = llt.solve(rhs);
      }
    }
    if (sol.size() == 0) {
      sol = Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd>(g).solve(rhs);
      result.row_pseudo_inverse[j] = true;
      result.used_pseudo_inverse = true;
    }
    for (int a = 0; a < d; ++a) result.estimate.entries(j, unk[a]) = sol[a];
  }

  const EstimationError err = estimation_error(result.estimate, model);
  result.absolute_error = err.absolute;
  result.normalized_error = err.normalized;
  return result;
}

EstimationError estimation_error(const ParameterMatrix& estimate,
                                 const SystemModel& model) {
  const Eigen::MatrixXd& truth = model.theta.entries;
  if (estimate.entries.rows() != truth.rows() ||
      estimate.entries.cols() != truth.cols())
    throw ContractViolation("estimate shape does not match theta*");
  EstimationError err;
  err.absolute = spectral_norm(estimate.entries - truth);
  const double scale = spectral_norm(truth);
  err.normalized = scale > 0.0 ? err.absolute / scale : err.absolute;
  return err;
}

EstimationError estimation_error(const LseResult& result,
                                 const SystemModel& model) {
  return estimation_error(result.estimate, model);
}

}  // namespace nlsysid
