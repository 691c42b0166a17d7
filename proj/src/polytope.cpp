#include "nlsysid/polytope.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <functional>
#include <numeric>

#include <Eigen/Dense>
#include <json.hpp>

#include "nlsysid/error.hpp"
#include "nlsysid/noise.hpp"

namespace nlsysid {

HPolytope::HPolytope(int dimension) : dimension_(dimension) {
  if (dimension < 1) throw ContractViolation("polytope dimension must be >= 1");
}

HPolytope HPolytope::box(const Eigen::VectorXd& center, double half_width) {
  if (!(half_width > 0.0)) throw ContractViolation("box half-width must be > 0");
  const Eigen::VectorXd hw = Eigen::VectorXd::Constant(center.size(), half_width);
  return box(Eigen::VectorXd(center - hw), Eigen::VectorXd(center + hw));
}

HPolytope HPolytope::box(const Eigen::VectorXd& lower,
                         const Eigen::VectorXd& upper) {
  const int d = static_cast<int>(lower.size());
  if (upper.size() != d) throw ContractViolation("box bounds differ in length");
  HPolytope p(d);
  for (int i = 0; i < d; ++i) {
    const Eigen::VectorXd e = Eigen::VectorXd::Unit(d, i);
    p.add(e, upper[i]);
    p.add(-e, -lower[i]);
  }
  p.mark_bounded(true);
  return p;
}

void HPolytope::add(const Eigen::VectorXd& normal, double offset) {
  if (normal.size() != dimension_)
    throw ContractViolation("half-space normal has wrong dimension");
  if (!(normal.norm() > 0.0) || !normal.allFinite() || !std::isfinite(offset))
    throw ContractViolation("half-space normal must be finite and nonzero");
  constraints_.push_back({normal, offset});
}

Eigen::MatrixXd HPolytope::normals() const {
  Eigen::MatrixXd a(static_cast<Eigen::Index>(constraints_.size()), dimension_);
  for (std::size_t i = 0; i < constraints_.size(); ++i)
    a.row(static_cast<Eigen::Index>(i)) = constraints_[i].normal.transpose();
  return a;
}

Eigen::VectorXd HPolytope::offsets() const {
  Eigen::VectorXd b(static_cast<Eigen::Index>(constraints_.size()));
  for (std::size_t i = 0; i < constraints_.size(); ++i)
    b[static_cast<Eigen::Index>(i)] = constraints_[i].offset;
  return b;
}

std::string to_string(LpStatus status) {
  switch (status) {
    case LpStatus::kOptimal: return "optimal";
    case LpStatus::kUnbounded: return "unbounded";
    case LpStatus::kInfeasible: return "infeasible";
  }
  return "unknown";
}

// ---------------------------------------------------------------------------
// Simplex on  min g.y  s.t.  M y = h, y >= 0  with M = A^T (d x m).

namespace {

constexpr double kPivotEps = 1e-11;
constexpr double kCostEps = 1e-12;

enum class DualOutcome { kOptimal, kUnbounded, kInfeasible };

struct DualSolve {
  DualOutcome outcome = DualOutcome::kInfeasible;
  Eigen::VectorXd multipliers;  // primal x when optimal
  long iterations = 0;
};

class DualTableau {
 public:
  // A: m x d constraint normals, b: offsets, c: primal objective.
  DualTableau(const Eigen::MatrixXd& a, const Eigen::VectorXd& b,
              const Eigen::VectorXd& c)
      : m_(static_cast<int>(a.rows())),
        d_(static_cast<int>(a.cols())),
        b_(b),
        sign_(d_),
        tab_(Eigen::MatrixXd::Zero(d_ + 1, m_ + d_ + 1)),
        basis_(d_) {
    for (int k = 0; k < d_; ++k) {
      sign_[k] = c[k] < 0.0 ? -1.0 : 1.0;
      tab_.row(k).head(m_) = sign_[k] * a.col(k).transpose();
      tab_(k, m_ + k) = 1.0;
      tab_(k, rhs()) = sign_[k] * c[k];
      basis_[k] = m_ + k;
    }
  }

  DualSolve run() {
    DualSolve out;
    // Phase 1: minimize the sum of artificials.
    tab_.row(d_).setZero();
    for (int k = 0; k < d_; ++k) {
      tab_.row(d_).head(m_) -= tab_.row(k).head(m_);
      tab_(d_, rhs()) -= tab_(k, rhs());
    }
    const double scale = 1.0 + tab_.col(rhs()).head(d_).cwiseAbs().sum();
    iterate(out.iterations, true);
    if (-tab_(d_, rhs()) > kFeasibilityTol * scale) {
      out.outcome = DualOutcome::kInfeasible;
      return out;
    }
    drive_out_artificials(out.iterations);

    // Phase 2 objective row: reduced costs for g = b on real columns.
    tab_.row(d_).setZero();
    tab_.row(d_).head(m_) = b_.transpose();
    for (int k = 0; k < d_; ++k) {
      const double cb = basis_[k] < m_ ? b_[basis_[k]] : 0.0;
      if (cb != 0.0) tab_.row(d_) -= cb * tab_.row(k);
    }
    if (!iterate(out.iterations, false)) {
      out.outcome = DualOutcome::kUnbounded;
      return out;
    }
    out.outcome = DualOutcome::kOptimal;
    out.multipliers.resize(d_);
    for (int k = 0; k < d_; ++k)
      out.multipliers[k] = -sign_[k] * tab_(d_, m_ + k);
    return out;
  }

 private:
  int rhs() const { return m_ + d_; }

  void pivot(int row, int col) {
    tab_.row(row) /= tab_(row, col);
    for (int r = 0; r <= d_; ++r) {
      if (r == row) continue;
      const double f = tab_(r, col);
      if (f != 0.0) tab_.row(r) -= f * tab_.row(row);
    }
    basis_[row] = col;
  }

  // Bland's rule. Returns false when the objective is unbounded below. Phase 1
  // is bounded below by zero, so an unbounded ray there is roundoff in the
  // reduced cost; that column is excluded and the search continues.
  bool iterate(long& iterations, bool phase1) {
    const double cost_scale = 1.0 + tab_.row(d_).head(m_).cwiseAbs().maxCoeff();
    std::vector<char> excluded(phase1 ? m_ : 0, 0);
    for (;;) {
      if (++iterations > kMaxSimplexIterations)
        throw SolverError("simplex exceeded " +
                          std::to_string(kMaxSimplexIterations) +
                          " pivots (m=" + std::to_string(m_) +
                          ", d=" + std::to_string(d_) + ")");
      const int ncols = m_;  // artificials never re-enter
      int enter = -1;
      for (int j = 0; j < ncols; ++j) {
        if (phase1 && excluded[j]) continue;
        if (tab_(d_, j) < -kCostEps * cost_scale) {
          enter = j;
          break;
        }
      }
      if (enter < 0) return true;
      int leave = -1;
      double best = std::numeric_limits<double>::infinity();
      for (int r = 0; r < d_; ++r) {
        const double e = tab_(r, enter);
        if (e <= kPivotEps) continue;
        const double ratio = tab_(r, rhs()) / e;
        if (ratio < best - 1e-15 ||
            (std::abs(ratio - best) <= 1e-15 && leave >= 0 &&
             basis_[r] < basis_[leave])) {
          best = ratio;
          leave = r;
        }
      }
      if (leave < 0) {
        if (!phase1) return false;
        excluded[enter] = 1;
        continue;
      }
      pivot(leave, enter);
    }
  }

  void drive_out_artificials(long& iterations) {
    for (int r = 0; r < d_; ++r) {
      if (basis_[r] < m_) continue;
      int col = -1;
      double best = kPivotEps;
      for (int j = 0; j < m_; ++j) {
        if (std::abs(tab_(r, j)) > best) {
          best = std::abs(tab_(r, j));
          col = j;
        }
      }
      // No nonzero real entry: the row is a redundant equality and its
      // artificial stays basic at zero. Phase 2 never lets it re-enter.
      if (col >= 0) {
        ++iterations;
        pivot(r, col);
      }
    }
  }

  int m_;
  int d_;
  Eigen::VectorXd b_;
  Eigen::VectorXd sign_;
  Eigen::MatrixXd tab_;
  std::vector<int> basis_;
};

DualSolve solve_dual(const Eigen::MatrixXd& a, const Eigen::VectorXd& b,
                     const Eigen::VectorXd& c) {
  DualTableau tab(a, b, c);
  return tab.run();
}

}  // namespace

LpResult lp_maximize(const Eigen::VectorXd& c, const Eigen::MatrixXd& a,
                     const Eigen::VectorXd& b) {
  if (a.rows() == 0) throw ContractViolation("LP needs at least one constraint");
  if (a.cols() < 1 || c.size() != a.cols() || b.size() != a.rows())
    throw ContractViolation("LP dimension mismatch");
  LpResult res;
  DualSolve dual = solve_dual(a, b, c);
  res.iterations = dual.iterations;
  switch (dual.outcome) {
    case DualOutcome::kOptimal:
      res.status = LpStatus::kOptimal;
      res.point = dual.multipliers;
      res.value = c.dot(res.point);
      return res;
    case DualOutcome::kUnbounded:
      res.status = LpStatus::kInfeasible;
      return res;
    case DualOutcome::kInfeasible: {
      // Dual infeasible: primal is unbounded or infeasible. A zero objective
      // separates the two.
      DualSolve feas = solve_dual(a, b, Eigen::VectorXd::Zero(a.cols()));
      res.iterations += feas.iterations;
      res.status = feas.outcome == DualOutcome::kOptimal ? LpStatus::kUnbounded
                                                         : LpStatus::kInfeasible;
      return res;
    }
  }
  return res;
}

LpResult lp_maximize(const Eigen::VectorXd& c, const HPolytope& poly) {
  if (poly.empty()) throw ContractViolation("LP needs at least one constraint");
  if (c.size() != poly.dimension())
    throw ContractViolation("objective dimension mismatch");
  return lp_maximize(c, poly.normals(), poly.offsets());
}

bool is_feasible(const HPolytope& poly) {
  if (poly.empty()) return true;
  DualSolve feas = solve_dual(poly.normals(), poly.offsets(),
                              Eigen::VectorXd::Zero(poly.dimension()));
  return feas.outcome == DualOutcome::kOptimal;
}

bool contains(const HPolytope& poly, const Eigen::VectorXd& x) {
  if (x.size() != poly.dimension())
    throw ContractViolation("point dimension mismatch");
  for (const auto& h : poly.constraints())
    if (h.normal.dot(x) > h.offset + kFeasibilityTol) return false;
  return true;
}

HPolytope prune(const HPolytope& poly) {
  const auto& cons = poly.constraints();
  const int d = poly.dimension();
  std::vector<bool> keep(cons.size(), true);
  std::size_t alive = cons.size();
  for (std::size_t i = 0; i < cons.size(); ++i) {
    if (alive <= 1) break;
    Eigen::MatrixXd a(static_cast<Eigen::Index>(alive - 1), d);
    Eigen::VectorXd b(static_cast<Eigen::Index>(alive - 1));
    Eigen::Index r = 0;
    for (std::size_t k = 0; k < cons.size(); ++k) {
      if (k == i || !keep[k]) continue;
      a.row(r) = cons[k].normal.transpose();
      b[r] = cons[k].offset;
      ++r;
    }
    const LpResult lp = lp_maximize(cons[i].normal, a, b);
    if (lp.status == LpStatus::kOptimal &&
        lp.value < cons[i].offset - kPruneMargin) {
      keep[i] = false;
      --alive;
    }
  }
  HPolytope out(d);
  for (std::size_t i = 0; i < cons.size(); ++i)
    if (keep[i]) out.add(cons[i]);
  out.mark_bounded(poly.bounded());
  out.set_pruned_at(poly.pruned_at());
  return out;
}

double support(const HPolytope& poly, const Eigen::VectorXd& direction) {
  const LpResult lp = lp_maximize(direction, poly);
  if (lp.status == LpStatus::kUnbounded)
    return std::numeric_limits<double>::infinity();
  if (lp.status == LpStatus::kInfeasible)
    return -std::numeric_limits<double>::infinity();
  return lp.value;
}

bool check_bounded(HPolytope& poly) {
  if (poly.empty()) return false;
  for (int i = 0; i < poly.dimension(); ++i) {
    for (double s : {1.0, -1.0}) {
      const LpResult lp =
          lp_maximize(Eigen::VectorXd(s * Eigen::VectorXd::Unit(poly.dimension(), i)),
                      poly);
      if (lp.status != LpStatus::kOptimal) return false;
    }
  }
  poly.mark_bounded(true);
  return true;
}

namespace {

enum class Boundedness { kBounded, kUnbounded, kEmpty };

Boundedness classify(const HPolytope& poly) {
  if (poly.empty()) return Boundedness::kUnbounded;
  if (!is_feasible(poly)) return Boundedness::kEmpty;
  if (poly.bounded()) return Boundedness::kBounded;
  HPolytope copy = poly;
  return check_bounded(copy) ? Boundedness::kBounded : Boundedness::kUnbounded;
}

bool feasible_point(const std::vector<Halfspace>& cons, const Eigen::VectorXd& x) {
  for (const auto& h : cons)
    if (h.normal.dot(x) > h.offset + kFeasibilityTol) return false;
  return true;
}

void add_unique(std::vector<Eigen::VectorXd>& pts, const Eigen::VectorXd& x) {
  for (const auto& p : pts)
    if ((p - x).norm() <= kDedupRadius) return;
  pts.push_back(x);
}

std::vector<Eigen::VectorXd> vertices_1d(const HPolytope& poly) {
  double lo = -std::numeric_limits<double>::infinity();
  double hi = std::numeric_limits<double>::infinity();
  for (const auto& h : poly.constraints()) {
    const double a = h.normal[0];
    if (a > 0.0) hi = std::min(hi, h.offset / a);
    else lo = std::max(lo, h.offset / a);
  }
  std::vector<Eigen::VectorXd> pts;
  if (lo > hi + kFeasibilityTol) return pts;
  add_unique(pts, Eigen::VectorXd::Constant(1, lo));
  add_unique(pts, Eigen::VectorXd::Constant(1, hi));
  return pts;
}

std::vector<Eigen::VectorXd> vertices_nd(const HPolytope& poly) {
  const auto& cons = poly.constraints();
  const int d = poly.dimension();
  const int m = static_cast<int>(cons.size());
  std::vector<Eigen::VectorXd> pts;
  std::vector<int> idx(d);
  // Enumerate d-subsets in lexicographic order.
  std::function<void(int, int)> rec = [&](int start, int depth) {
    if (depth == d) {
      Eigen::MatrixXd a(d, d);
      Eigen::VectorXd b(d);
      double scale = 1.0;
      for (int k = 0; k < d; ++k) {
        a.row(k) = cons[idx[k]].normal.transpose();
        b[k] = cons[idx[k]].offset;
        scale *= cons[idx[k]].normal.norm();
      }
      const double det = a.determinant();
      if (std::abs(det) <= 1e-12 * scale) return;
      const Eigen::VectorXd x = a.partialPivLu().solve(b);
      if (x.allFinite() && feasible_point(cons, x)) add_unique(pts, x);
      return;
    }
    for (int i = start; i <= m - (d - depth); ++i) {
      idx[depth] = i;
      rec(i + 1, depth + 1);
    }
  };
  rec(0, 0);
  return pts;
}

}  // namespace

std::vector<Eigen::VectorXd> enumerate_vertices(const HPolytope& poly) {
  if (poly.dimension() > 3)
    throw ContractViolation("vertex enumeration is limited to d <= 3");
  switch (classify(poly)) {
    case Boundedness::kEmpty: return {};
    case Boundedness::kUnbounded:
      throw ContractViolation("vertex enumeration requires a bounded polytope");
    case Boundedness::kBounded: break;
  }
  if (poly.dimension() == 1) return vertices_1d(poly);
  return vertices_nd(poly);
}

std::vector<Eigen::Vector2d> vertices_2d(const HPolytope& poly) {
  if (poly.dimension() != 2)
    throw ContractViolation("vertices_2d requires a 2D polytope");
  const auto raw = enumerate_vertices(poly);
  std::vector<Eigen::Vector2d> pts;
  pts.reserve(raw.size());
  for (const auto& v : raw) pts.emplace_back(v[0], v[1]);
  if (pts.size() < 2) return pts;
  Eigen::Vector2d centroid = Eigen::Vector2d::Zero();
  for (const auto& p : pts) centroid += p;
  centroid /= static_cast<double>(pts.size());
  std::sort(pts.begin(), pts.end(),
            [&](const Eigen::Vector2d& a, const Eigen::Vector2d& b) {
              return std::atan2(a.y() - centroid.y(), a.x() - centroid.x()) <
                     std::atan2(b.y() - centroid.y(), b.x() - centroid.x());
            });
  return pts;
}

double sampled_diameter(const HPolytope& poly, int directions,
                        std::uint64_t seed) {
  const int d = poly.dimension();
  SeedStream stream(seed, "diameter-directions");
  double best = 0.0;
  auto width = [&](const Eigen::VectorXd& v) {
    const LpResult hi = lp_maximize(v, poly);
    const LpResult lo = lp_maximize(Eigen::VectorXd(-v), poly);
    if (hi.status == LpStatus::kUnbounded || lo.status == LpStatus::kUnbounded)
      throw ContractViolation("diameter requires a bounded polytope");
    if (hi.status != LpStatus::kOptimal || lo.status != LpStatus::kOptimal)
      return 0.0;
    return hi.value + lo.value;
  };
  // h(e) + h(-e) covers both signed axes.
  for (int i = 0; i < d; ++i)
    best = std::max(best, width(Eigen::VectorXd::Unit(d, i)));
  for (int k = 0; k < directions; ++k) {
    Eigen::VectorXd v(d);
    for (int i = 0; i < d; ++i) v[i] = stream.standard_normal();
    const double n = v.norm();
    if (n == 0.0) continue;
    best = std::max(best, width(v / n));
  }
  return best;
}

DiameterResult diameter(const HPolytope& poly, int directions,
                        std::uint64_t seed) {
  DiameterResult out;
  if (poly.dimension() <= 3) {
    const auto verts = enumerate_vertices(poly);
    double best = 0.0;
    for (std::size_t i = 0; i < verts.size(); ++i)
      for (std::size_t j = i + 1; j < verts.size(); ++j)
        best = std::max(best, (verts[i] - verts[j]).norm());
    out.value = best;
    out.certified_exact = true;
    return out;
  }
  switch (classify(poly)) {
    case Boundedness::kEmpty: return out;
    case Boundedness::kUnbounded:
      throw ContractViolation("diameter requires a bounded polytope");
    case Boundedness::kBounded: break;
  }
  out.value = sampled_diameter(poly, directions, seed);
  out.certified_exact = false;
  return out;
}

std::string vertices_json(const std::vector<Eigen::Vector2d>& vertices) {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& v : vertices) arr.push_back({v.x(), v.y()});
  return arr.dump();
}

}  // namespace nlsysid
