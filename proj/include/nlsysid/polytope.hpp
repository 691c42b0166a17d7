#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Core>

namespace nlsysid {

// Geometry tolerances; every polytope routine reads them from here.
inline constexpr double kFeasibilityTol = 1e-9;
inline constexpr double kDedupRadius = 1e-8;
inline constexpr double kPruneMargin = 1e-9;

/// a . x <= b
struct Halfspace {
  Eigen::VectorXd normal;
  double offset = 0.0;
};

/// Finite intersection of half-spaces in R^d.
class HPolytope {
 public:
  explicit HPolytope(int dimension);

  /// Axis-aligned box center +/- half_width in every coordinate.
  static HPolytope box(const Eigen::VectorXd& center, double half_width);
  static HPolytope box(const Eigen::VectorXd& lower,
                       const Eigen::VectorXd& upper);

  int dimension() const { return dimension_; }
  std::size_t size() const { return constraints_.size(); }
  bool empty() const { return constraints_.empty(); }
  const std::vector<Halfspace>& constraints() const { return constraints_; }

  /// Throws ContractViolation for a zero or wrong-length normal.
  void add(const Eigen::VectorXd& normal, double offset);
  void add(const Halfspace& h) { add(h.normal, h.offset); }

  /// Set when the polytope is known to be bounded (a box was among its
  /// constraints at construction, or check_bounded succeeded). Adding
  /// constraints preserves it; it is never set speculatively.
  bool bounded() const { return bounded_; }
  void mark_bounded(bool b) { bounded_ = b; }

  /// Step index of the last redundancy sweep, -1 if never pruned.
  long pruned_at() const { return pruned_at_; }
  void set_pruned_at(long step) { pruned_at_ = step; }

  /// Stacked normals (m x d) and offsets (m).
  Eigen::MatrixXd normals() const;
  Eigen::VectorXd offsets() const;

 private:
  int dimension_;
  std::vector<Halfspace> constraints_;
  bool bounded_ = false;
  long pruned_at_ = -1;
};

enum class LpStatus { kOptimal, kUnbounded, kInfeasible };

std::string to_string(LpStatus status);

struct LpResult {
  LpStatus status = LpStatus::kInfeasible;
  double value = 0.0;
  Eigen::VectorXd point;  // set when optimal
  long iterations = 0;
};

inline constexpr long kMaxSimplexIterations = 1'000'000;

/// max c . x subject to the constraints of `poly`. Dense two-phase simplex
/// with Bland's rule, run on the dual standard form
///   min b . y  s.t.  A^T y = c, y >= 0
/// whose tableau has only d rows. The primal optimizer is read off the
/// simplex multipliers. Throws SolverError after kMaxSimplexIterations pivots
/// and ContractViolation for an empty constraint list.
LpResult lp_maximize(const Eigen::VectorXd& c, const HPolytope& poly);

/// Same, over an explicit constraint system A x <= b.
LpResult lp_maximize(const Eigen::VectorXd& c, const Eigen::MatrixXd& a,
                     const Eigen::VectorXd& b);

/// True iff the constraint system admits a point (within solver tolerance).
bool is_feasible(const HPolytope& poly);

/// a . x <= b + kFeasibilityTol for every constraint.
bool contains(const HPolytope& poly, const Eigen::VectorXd& x);

/// Drops constraint i when max a_i . x over the remaining constraints is
/// below b_i - kPruneMargin. Constraints are visited in order against the
/// current survivor set, so the result describes the same set.
HPolytope prune(const HPolytope& poly);

/// Solves the 2d coordinate-direction LPs; sets the flag on success.
/// Returns false for unbounded or empty polytopes.
bool check_bounded(HPolytope& poly);

/// Vertices of a bounded 2D polytope: feasible pairwise intersections,
/// merged within kDedupRadius, counterclockwise around their centroid.
/// Empty for an infeasible polytope; throws ContractViolation when unbounded
/// or d != 2.
std::vector<Eigen::Vector2d> vertices_2d(const HPolytope& poly);

/// Vertex enumeration for d <= 3 (intervals, polygons, polyhedra).
std::vector<Eigen::VectorXd> enumerate_vertices(const HPolytope& poly);

struct DiameterResult {
  double value = 0.0;
  bool certified_exact = false;
};

/// Euclidean diameter of a bounded polytope. For d <= 3 the maximum
/// pairwise vertex distance (exact). For d > 3 the maximum width
/// h(v) + h(-v) over `directions` random unit directions and the 2d signed
/// axes, h being the LP support function (a lower bound).
DiameterResult diameter(const HPolytope& poly, int directions = 2000,
                        std::uint64_t seed = 0x5eed);

/// Sampled width bound for any dimension; used by diameter() when d > 3.
double sampled_diameter(const HPolytope& poly, int directions,
                        std::uint64_t seed);

/// Support function h(v) = max v . x.
double support(const HPolytope& poly, const Eigen::VectorXd& direction);

/// JSON array of [x, y] pairs.
std::string vertices_json(const std::vector<Eigen::Vector2d>& vertices);

}  // namespace nlsysid
