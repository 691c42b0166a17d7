#include "nlsysid/bmsb.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include <Eigen/Dense>
#include <json.hpp>

#include "nlsysid/error.hpp"
#include "nlsysid/parallel.hpp"

namespace nlsysid {
namespace {

// n_mc x n_phi matrix of next-step features phi(x', u') from the point (x, u).
Eigen::MatrixXd next_features(const SystemModel& model,
                              const ControlPolicy& policy,
                              const NoiseSpec& disturbance,
                              const Eigen::VectorXd& x, const Eigen::VectorXd& u,
                              int n_mc, SeedStream& stream) {
  const Eigen::VectorXd mean_next =
      model.theta.entries * eval_features(model.features, x, u);
  Eigen::MatrixXd phi(n_mc, model.dims().n_phi);
  for (int k = 0; k < n_mc; ++k) {
    const Eigen::VectorXd x_next = mean_next + sample(disturbance, stream);
    const Eigen::VectorXd u_next = policy.act(x_next, stream);
    phi.row(k) = eval_features(model.features, x_next, u_next).transpose();
  }
  return phi;
}

void check_options(const BmsbOptions& o) {
  if (o.horizon < 1 || o.n_traj < 1 || o.n_dirs < 1 || o.n_mc < 1 ||
      o.max_points < 1)
    throw ContractViolation("BMSB budgets must all be >= 1");
  for (std::size_t i = 0; i < o.s_grid.size(); ++i) {
    if (!(o.s_grid[i] >= 0.0))
      throw ContractViolation("small-ball radii must be >= 0");
    if (i > 0 && !(o.s_grid[i] > o.s_grid[i - 1]))
      throw ContractViolation("small-ball grid must be strictly ascending");
  }
}

}  // namespace

std::string to_string(SmallBallRule rule) {
  switch (rule) {
    case SmallBallRule::kLargestFeasible: return "largest-feasible";
    case SmallBallRule::kMaxProduct: return "max-product";
  }
  return "unknown";
}

SmallBallRule small_ball_rule_from_string(const std::string& name) {
  if (name == "largest-feasible") return SmallBallRule::kLargestFeasible;
  if (name == "max-product") return SmallBallRule::kMaxProduct;
  throw ConfigError("unknown small-ball rule '" + name + "'");
}

std::vector<double> default_s_grid() {
  std::vector<double> grid;
  for (int k = -12; k <= 4; ++k) grid.push_back(std::pow(10.0, k / 4.0));
  return grid;
}

BmsbEstimate estimate_bmsb(const SystemModel& model, const ControlPolicy& policy,
                           const NoiseSpec& disturbance,
                           const BmsbOptions& options) {
  check_options(options);
  const std::vector<double> grid =
      options.s_grid.empty() ? default_s_grid() : options.s_grid;
  const int n_phi = model.dims().n_phi;
  const int T = options.horizon;

  // Trajectories and the feature-magnitude constants.
  std::vector<Trajectory> trajs(options.n_traj);
  for (int i = 0; i < options.n_traj; ++i)
    trajs[i] = simulate(model, policy, disturbance, T,
                        SeedStream(options.seed, "bmsb/traj/" + std::to_string(i)));
  BmsbEstimate est;
  for (int t = 0; t < T; ++t) {
    double mean_sq = 0.0;
    for (const auto& tr : trajs) {
      const double sq = tr.features.row(t).squaredNorm();
      mean_sq += sq;
      est.b_phi = std::max(est.b_phi, std::sqrt(sq));
    }
    est.b_bar_phi = std::max(est.b_bar_phi, mean_sq / options.n_traj);
  }

  // Visited points, subsampled deterministically above the cap.
  const int visited = options.n_traj * T;
  std::vector<int> points(visited);
  std::iota(points.begin(), points.end(), 0);
  const bool subsampled = visited > options.max_points;
  if (subsampled) {
    SeedStream pick(options.seed, "bmsb/subsample");
    std::shuffle(points.begin(), points.end(), pick.engine());
    points.resize(options.max_points);
    std::sort(points.begin(), points.end());
  }

  // Unit directions from normalized Gaussian draws.
  Eigen::MatrixXd dirs(n_phi, options.n_dirs);
  {
    SeedStream ds(options.seed, "bmsb/directions");
    for (int k = 0; k < options.n_dirs; ++k) {
      Eigen::VectorXd v(n_phi);
      do {
        for (int i = 0; i < n_phi; ++i) v[i] = ds.standard_normal();
      } while (v.norm() == 0.0);
      dirs.col(k) = v / v.norm();
    }
  }

  const int G = static_cast<int>(grid.size());
  std::vector<std::vector<int>> point_min(points.size());
  parallel_for(points.size(), [&](std::size_t idx) {
    const int p = points[idx];
    const Trajectory& tr = trajs[p / T];
    const int t = p % T;
    SeedStream stream(options.seed, "bmsb/point/" + std::to_string(p));
    const Eigen::MatrixXd phi =
        next_features(model, policy, disturbance, tr.states.row(t).transpose(),
                      tr.inputs.row(t).transpose(), options.n_mc, stream);
    const Eigen::MatrixXd proj = (phi * dirs).cwiseAbs();
    std::vector<int> best(G, options.n_mc);
    std::vector<int> hist(G + 1);
    for (int c = 0; c < proj.cols(); ++c) {
      std::fill(hist.begin(), hist.end(), 0);
      for (int r = 0; r < proj.rows(); ++r) {
        const double a = proj(r, c);
        hist[std::upper_bound(grid.begin(), grid.end(), a) - grid.begin()]++;
      }
      // Values with bucket index > k are >= grid[k].
      int above = 0;
      for (int k = G - 1; k >= 0; --k) {
        above += hist[k + 1];
        best[k] = std::min(best[k], above);
      }
    }
    point_min[idx] = std::move(best);
  });

  std::vector<double> p_grid(G, 1.0);
  for (int k = 0; k < G; ++k) {
    int m = options.n_mc;
    for (const auto& pm : point_min) m = std::min(m, pm[k]);
    p_grid[k] = static_cast<double>(m) / options.n_mc;
  }

  int chosen = -1;
  for (int k = 0; k < G; ++k) {
    if (!(p_grid[k] > 0.0 && p_grid[k] < 1.0)) continue;
    if (chosen < 0) {
      chosen = k;
      continue;
    }
    switch (options.rule) {
      case SmallBallRule::kLargestFeasible:
        chosen = k;
        break;
      case SmallBallRule::kMaxProduct:
        if (grid[k] * p_grid[k] >= grid[chosen] * p_grid[chosen]) chosen = k;
        break;
    }
  }
  if (chosen < 0)
    throw EstimationFailure(
        "no small-ball radius in the grid gives a probability strictly "
        "inside (0, 1); refine the grid around the transition");

  est.s_phi = grid[chosen];
  est.p_phi = p_grid[chosen];
  BmsbProvenance& pv = est.provenance;
  pv.horizon = T;
  pv.n_traj = options.n_traj;
  pv.n_dirs = options.n_dirs;
  pv.n_mc = options.n_mc;
  pv.seed = options.seed;
  pv.points_visited = visited;
  pv.points_used = static_cast<int>(points.size());
  pv.subsampled = subsampled;
  pv.rule = options.rule;
  pv.model = model.name;
  pv.s_grid = grid;
  pv.p_grid = p_grid;
  return est;
}

double mc_smallball_prob(const SystemModel& model, const ControlPolicy& policy,
                         const NoiseSpec& disturbance, const Eigen::VectorXd& x,
                         const Eigen::VectorXd& u, const Eigen::VectorXd& v,
                         double s, int n_mc, SeedStream& stream) {
  if (n_mc < 1) throw ContractViolation("n_mc must be >= 1");
  if (v.size() != model.dims().n_phi)
    throw ContractViolation("direction dimension must equal n_phi");
  if (std::abs(v.norm() - 1.0) > 1e-12)
    throw ContractViolation("direction must be a unit vector");
  const Eigen::MatrixXd phi =
      next_features(model, policy, disturbance, x, u, n_mc, stream);
  const Eigen::VectorXd proj = (phi * v).cwiseAbs();
  return static_cast<double>((proj.array() >= s).count()) / n_mc;
}

std::string bmsb_to_json(const BmsbEstimate& e) {
  const BmsbProvenance& p = e.provenance;
  nlohmann::ordered_json j;
  j["s_phi"] = e.s_phi;
  j["p_phi"] = e.p_phi;
  j["b_phi"] = e.b_phi;
  j["b_bar_phi"] = e.b_bar_phi;
  j["provenance"] = {
      {"model", p.model},         {"horizon", p.horizon},
      {"n_traj", p.n_traj},       {"n_dirs", p.n_dirs},
      {"n_mc", p.n_mc},           {"seed", p.seed},
      {"points_visited", p.points_visited},
      {"points_used", p.points_used},
      {"subsampled", p.subsampled},
      {"rule", to_string(p.rule)},
      {"s_grid", p.s_grid},       {"p_grid", p.p_grid},
  };
  return j.dump(2);
}

BmsbEstimate bmsb_from_json(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& ex) {
    throw ConfigError(std::string("BMSB estimate is not valid JSON: ") + ex.what());
  }
  auto need = [](const nlohmann::json& obj, const char* key,
                 const std::string& where) -> const nlohmann::json& {
    if (!obj.is_object() || !obj.contains(key))
      throw ConfigError("BMSB estimate is missing field '" + where + key + "'");
    return obj.at(key);
  };
  BmsbEstimate e;
  try {
    e.s_phi = need(j, "s_phi", "").get<double>();
    e.p_phi = need(j, "p_phi", "").get<double>();
    e.b_phi = need(j, "b_phi", "").get<double>();
    e.b_bar_phi = need(j, "b_bar_phi", "").get<double>();
    if (j.contains("provenance")) {
      const auto& pj = j.at("provenance");
      BmsbProvenance& p = e.provenance;
      p.model = pj.value("model", "");
      p.horizon = pj.value("horizon", 0);
      p.n_traj = pj.value("n_traj", 0);
      p.n_dirs = pj.value("n_dirs", 0);
      p.n_mc = pj.value("n_mc", 0);
      p.seed = pj.value("seed", std::uint64_t{0});
      p.points_visited = pj.value("points_visited", 0);
      p.points_used = pj.value("points_used", 0);
      p.subsampled = pj.value("subsampled", false);
      p.rule = small_ball_rule_from_string(pj.value("rule", "largest-feasible"));
      p.s_grid = pj.value("s_grid", std::vector<double>{});
      p.p_grid = pj.value("p_grid", std::vector<double>{});
    }
  } catch (const nlohmann::json::exception& ex) {
    throw ConfigError(std::string("malformed BMSB estimate: ") + ex.what());
  }
  if (!(e.s_phi > 0.0)) throw ConfigError("BMSB field 's_phi' must be > 0");
  if (!(e.p_phi > 0.0 && e.p_phi < 1.0))
    throw ConfigError("BMSB field 'p_phi' must lie in (0, 1)");
  if (!(e.b_phi > 0.0)) throw ConfigError("BMSB field 'b_phi' must be > 0");
  if (!(e.b_bar_phi > 0.0))
    throw ConfigError("BMSB field 'b_bar_phi' must be > 0");
  return e;
}

}  // namespace nlsysid
