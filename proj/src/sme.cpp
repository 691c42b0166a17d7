#include "nlsysid/sme.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "nlsysid/error.hpp"

namespace nlsysid {
namespace {

constexpr int kMaxEnumerationDim = 3;

bool strictly_inside(const std::vector<Eigen::VectorXd>& verts,
                     const Eigen::VectorXd& normal, double offset) {
  for (const auto& v : verts)
    if (normal.dot(v) >= offset - kPruneMargin) return false;
  return true;
}

double vertex_diameter(const std::vector<Eigen::VectorXd>& verts) {
  double best = 0.0;
  for (std::size_t i = 0; i < verts.size(); ++i)
    for (std::size_t j = i + 1; j < verts.size(); ++j)
      best = std::max(best, (verts[i] - verts[j]).norm());
  return best;
}

void refresh_vertices(SmeRow& r, long step) {
  if (r.dimension() > kMaxEnumerationDim) {
    if (!is_feasible(r.poly))
      throw NoiseBoundViolation("set-membership row " + std::to_string(r.row) +
                                " became empty at step " +
                                std::to_string(step));
    return;
  }
  auto verts = enumerate_vertices(r.poly);
  if (verts.empty())
    throw NoiseBoundViolation("set-membership row " + std::to_string(r.row) +
                              " became empty at step " + std::to_string(step));
  r.vertices = std::move(verts);
}

// Interval of coordinate `k` of row polytope r.
std::pair<double, double> coordinate_range(const SmeRow& r, int k) {
  if (r.vertices) {
    double lo = std::numeric_limits<double>::infinity();
    double hi = -lo;
    for (const auto& v : *r.vertices) {
      lo = std::min(lo, v[k]);
      hi = std::max(hi, v[k]);
    }
    return {lo, hi};
  }
  const Eigen::VectorXd e = Eigen::VectorXd::Unit(r.dimension(), k);
  return {-support(r.poly, -e), support(r.poly, e)};
}

}  // namespace

const SmeRow* SmeState::find_row(int j) const {
  for (const auto& r : rows)
    if (r.row == j) return &r;
  return nullptr;
}

SmeState sme_init(const SystemModel& model, double w_max,
                  double prior_half_width, int prune_interval) {
  if (!(w_max > 0.0)) throw ContractViolation("w_max must be > 0");
  if (!(prior_half_width > 0.0))
    throw ContractViolation("prior half-width must be > 0");
  if (prune_interval < 1) throw ContractViolation("prune interval must be >= 1");
  SmeState state;
  state.n_x = model.theta.rows();
  state.w_max = w_max;
  state.prior_half_width = prior_half_width;
  state.prune_interval = prune_interval;
  for (int j = 0; j < model.theta.rows(); ++j) {
    std::vector<int> cols = model.theta.unknown_columns(j);
    if (cols.empty()) continue;
    const int d = static_cast<int>(cols.size());
    SmeRow r{j, std::move(cols),
             HPolytope::box(Eigen::VectorXd::Zero(d), prior_half_width),
             std::nullopt};
    refresh_vertices(r, 0);
    state.rows.push_back(std::move(r));
  }
  if (state.rows.empty())
    throw ContractViolation("model has no unknown entries to estimate");
  return state;
}

void sme_update(SmeState& state, const Eigen::VectorXd& x_next,
                const Eigen::VectorXd& features, const SystemModel& model) {
  const ParameterMatrix& theta = model.theta;
  if (x_next.size() != theta.rows() || features.size() != theta.cols())
    throw ContractViolation("datum dimensions do not match the model");
  const long step = state.steps;
  for (SmeRow& r : state.rows) {
    const int d = r.dimension();
    Eigen::VectorXd a(d);
    for (int k = 0; k < d; ++k) a[k] = features[r.columns[k]];
    double c = x_next[r.row];
    for (int col = 0; col < theta.cols(); ++col)
      if (!theta.unknown(r.row, col)) c -= theta.entries(r.row, col) * features[col];

    const double n = a.norm();
    if (!std::isfinite(n) || !std::isfinite(c))
      throw DataError("non-finite datum at step " + std::to_string(step));
    if (n == 0.0) {
      if (std::abs(c) > state.w_max + kFeasibilityTol)
        throw NoiseBoundViolation(
            "datum at step " + std::to_string(step) + " violates |w| <= " +
            std::to_string(state.w_max) + " in row " + std::to_string(r.row));
      continue;
    }
    const Eigen::VectorXd unit = a / n;
    const double upper = (c + state.w_max) / n;
    const double lower = (state.w_max - c) / n;
    if (r.vertices && strictly_inside(*r.vertices, unit, upper) &&
        strictly_inside(*r.vertices, -unit, lower))
      continue;  // both half-spaces redundant
    r.poly.add(unit, upper);
    r.poly.add(-unit, lower);
    refresh_vertices(r, step);
  }
  ++state.steps;
  if (state.steps % state.prune_interval == 0) {
    for (SmeRow& r : state.rows) {
      r.poly = prune(r.poly);
      r.poly.set_pruned_at(state.steps);
    }
  }
}

void sme_absorb(SmeState& state, const Trajectory& traj,
                const SystemModel& model, int begin, int end) {
  if (begin < 0 || end > traj.length || begin > end)
    throw ContractViolation("absorb range out of bounds");
  for (int t = begin; t < end; ++t)
    sme_update(state, traj.states.row(t + 1).transpose(),
               traj.features.row(t).transpose(), model);
}

SmeDiameter sme_diameter(const SmeState& state, int directions,
                         std::uint64_t seed) {
  SmeDiameter out;
  double sum = 0.0;
  for (const SmeRow& r : state.rows) {
    double value;
    if (r.vertices) {
      value = vertex_diameter(*r.vertices);
    } else {
      const DiameterResult dr = diameter(r.poly, directions, seed);
      value = dr.value;
      out.certified_exact = out.certified_exact && dr.certified_exact;
    }
    out.row_values.push_back(value);
    sum += value * value;
  }
  out.value = std::sqrt(sum);
  return out;
}

bool sme_contains_truth(const SmeState& state, const SystemModel& model) {
  for (const SmeRow& r : state.rows) {
    Eigen::VectorXd truth(r.dimension());
    for (int k = 0; k < r.dimension(); ++k)
      truth[k] = model.theta.entries(r.row, r.columns[k]);
    if (!contains(r.poly, truth)) return false;
  }
  return true;
}

std::vector<Eigen::Vector2d> convex_hull_2d(std::vector<Eigen::Vector2d> pts) {
  std::sort(pts.begin(), pts.end(),
            [](const Eigen::Vector2d& a, const Eigen::Vector2d& b) {
              return a.x() < b.x() || (a.x() == b.x() && a.y() < b.y());
            });
  pts.erase(std::unique(pts.begin(), pts.end(),
                        [](const Eigen::Vector2d& a, const Eigen::Vector2d& b) {
                          return (a - b).norm() <= kDedupRadius;
                        }),
            pts.end());
  if (pts.size() < 3) return pts;
  auto cross = [](const Eigen::Vector2d& o, const Eigen::Vector2d& a,
                  const Eigen::Vector2d& b) {
    return (a.x() - o.x()) * (b.y() - o.y()) - (a.y() - o.y()) * (b.x() - o.x());
  };
  std::vector<Eigen::Vector2d> hull(2 * pts.size());
  std::size_t k = 0;
  for (std::size_t i = 0; i < pts.size(); ++i) {
    while (k >= 2 && cross(hull[k - 2], hull[k - 1], pts[i]) <= 0) --k;
    hull[k++] = pts[i];
  }
  for (std::size_t i = pts.size() - 1, lo = k + 1; i-- > 0;) {
    while (k >= lo && cross(hull[k - 2], hull[k - 1], pts[i]) <= 0) --k;
    hull[k++] = pts[i];
  }
  hull.resize(k - 1);
  return hull;
}

Projection2d sme_project_2d(const SmeState& state, const SystemModel& model,
                            int coord_a, int coord_b, int directions) {
  const std::vector<UnknownEntry> entries = model.theta.unknown_entries();
  const int total = static_cast<int>(entries.size());
  if (coord_a < 0 || coord_a >= total || coord_b < 0 || coord_b >= total ||
      coord_a == coord_b)
    throw ContractViolation("projection coordinates out of range (" +
                            std::to_string(total) + " unknowns)");
  auto locate = [&](int coord) -> std::pair<const SmeRow*, int> {
    const UnknownEntry& e = entries[coord];
    const SmeRow* r = state.find_row(e.row);
    if (r == nullptr) throw ContractViolation("state does not match the model");
    const auto it = std::find(r->columns.begin(), r->columns.end(), e.col);
    return {r, static_cast<int>(it - r->columns.begin())};
  };
  const auto [ra, ka] = locate(coord_a);
  const auto [rb, kb] = locate(coord_b);

  Projection2d out;
  if (ra != rb) {
    out.same_row = false;
    const auto [xa, xb] = coordinate_range(*ra, ka);
    const auto [ya, yb] = coordinate_range(*rb, kb);
    out.vertices = convex_hull_2d({{xa, ya}, {xb, ya}, {xb, yb}, {xa, yb}});
    return out;
  }
  if (ra->vertices) {
    std::vector<Eigen::Vector2d> pts;
    for (const auto& v : *ra->vertices) pts.emplace_back(v[ka], v[kb]);
    out.vertices = convex_hull_2d(std::move(pts));
    return out;
  }
  out.exact = false;
  HPolytope shadow(2);
  for (int i = 0; i < directions; ++i) {
    const double ang = 2.0 * std::numbers::pi * i / directions;
    Eigen::VectorXd dir = Eigen::VectorXd::Zero(ra->dimension());
    dir[ka] = std::cos(ang);
    dir[kb] = std::sin(ang);
    shadow.add(Eigen::Vector2d(std::cos(ang), std::sin(ang)),
               support(ra->poly, dir));
  }
  out.vertices = vertices_2d(shadow);
  return out;
}

}  // namespace nlsysid
