#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "nlsysid/noise.hpp"

namespace nlsysid {

struct Dimensions {
  int n_x = 0;
  int n_u = 0;
  int n_phi = 0;

  void validate() const;
};

/// Known feature/basis functions phi(x, u) of a linearly parameterized system.
struct FeatureMap {
  using Fn = std::function<Eigen::VectorXd(const Eigen::VectorXd&,
                                           const Eigen::VectorXd&)>;
  Dimensions dims;
  Fn fn;
  std::vector<std::string> labels;
};

/// Evaluates phi(x, u); throws ContractViolation on dimension mismatch.
Eigen::VectorXd eval_features(const FeatureMap& map, const Eigen::VectorXd& x,
                              const Eigen::VectorXd& u);

struct UnknownEntry {
  int row = 0;
  int col = 0;
};

/// theta* with a mask of entries that estimators must recover. Known entries
/// keep their true values and are treated as given.
struct ParameterMatrix {
  Eigen::MatrixXd entries;
  Eigen::Matrix<bool, Eigen::Dynamic, Eigen::Dynamic> unknown;

  int rows() const { return static_cast<int>(entries.rows()); }
  int cols() const { return static_cast<int>(entries.cols()); }
  /// d_j, the number of unknown entries in row j.
  int unknowns_in_row(int row) const;
  int total_unknowns() const;
  std::vector<int> unknown_columns(int row) const;
  /// Unknown entries in row-major order; this is the global coordinate order
  /// used by SME projections and physical-parameter extraction.
  std::vector<UnknownEntry> unknown_entries() const;
  /// Values of the unknown entries of `row` in column order.
  Eigen::VectorXd unknown_values(int row) const;
};

struct SystemModel {
  std::string name;
  FeatureMap features;
  ParameterMatrix theta;
  Eigen::VectorXd initial_state;
  std::vector<std::string> state_labels;
  std::vector<std::string> input_labels;
  /// Maps a (full) parameter matrix to the physical parameters it encodes.
  std::function<Eigen::VectorXd(const Eigen::MatrixXd&)> physical_parameters;
  std::vector<std::string> physical_labels;
  double guard_radius = 100.0;

  const Dimensions& dims() const { return features.dims; }
};

/// theta* phi(x, u) + w.
Eigen::VectorXd step(const SystemModel& model, const Eigen::VectorXd& x,
                     const Eigen::VectorXd& u, const Eigen::VectorXd& w);

enum class PolicyKind { kOpenLoopNoise, kFeedbackPlusNoise };

/// u_t = feedback(x_t) + eta_t with eta_t drawn i.i.d. from `noise`.
struct ControlPolicy {
  PolicyKind kind = PolicyKind::kOpenLoopNoise;
  std::function<Eigen::VectorXd(const Eigen::VectorXd&)> feedback;
  NoiseSpec noise;

  static ControlPolicy open_loop(const NoiseSpec& noise);
  static ControlPolicy feedback_plus_noise(
      std::function<Eigen::VectorXd(const Eigen::VectorXd&)> feedback,
      const NoiseSpec& noise);

  /// feedback(x), or zeros of the noise dimension for open-loop policies.
  Eigen::VectorXd nominal(const Eigen::VectorXd& x) const;
  Eigen::VectorXd act(const Eigen::VectorXd& x, SeedStream& input_stream) const;
};

struct Trajectory {
  int length = 0;
  Eigen::MatrixXd states;        // (T+1) x n_x
  Eigen::MatrixXd inputs;        // T x n_u
  Eigen::MatrixXd disturbances;  // T x n_x
  Eigen::MatrixXd features;      // T x n_phi, phi(x_t, u_t)
  bool guard_tripped = false;

  /// First `horizon` steps, with guard_tripped recomputed for the prefix.
  Trajectory prefix(int horizon, double guard_radius) const;
};

struct SimulationOptions {
  /// LISS monitor radius on |x_t|_2; nullopt uses the model's guard radius.
  std::optional<double> guard_radius;
  double hard_ceiling = 1e6;
  /// Overrides the model's initial state.
  std::optional<Eigen::VectorXd> initial_state;
};

/// Forward simulation x_{t+1} = theta* phi(x_t, u_t) + w_t. Disturbances are
/// drawn from streams.child("disturbance") and input noise from
/// streams.child("input-noise"). Throws DivergenceError naming the first t
/// with |x_t|_2 above the hard ceiling or non-finite.
Trajectory simulate(const SystemModel& model, const ControlPolicy& policy,
                    const NoiseSpec& disturbance, int horizon,
                    const SeedStream& streams,
                    const SimulationOptions& options = {});

Trajectory simulate(const SystemModel& model, const ControlPolicy& policy,
                    const NoiseSpec& disturbance, int horizon,
                    std::uint64_t seed, const SimulationOptions& options = {});

/// Smallest eigenvalue of the Gram matrix of column-normalized feature
/// samples at `points` uniform points of [-box, box]^(n_x + n_u).
double feature_independence_margin(const FeatureMap& map, int points,
                                   SeedStream& stream, double box = 1.0);

// ---------------------------------------------------------------------------
// Built-in models.

inline constexpr double kStandardGravity = 9.81;

struct PendulumParams {
  double mass = 0.1;
  double length = 0.5;
  double dt = 0.01;
  double gravity = kStandardGravity;
};

/// Euler-discretized pendulum. State (alpha, alpha_dot), input torque u,
/// features (alpha, alpha_dot, sin alpha, u):
///   theta* = [[1, dt, 0,          0           ],
///             [0, 1,  -g dt / l,  dt / (m l^2)]]
/// with the two second-row entries unknown. Physical parameters are
/// (1/l, 1/(m l^2)).
SystemModel pendulum_model(const PendulumParams& params = {});

/// u = -k alpha_dot + eta.
ControlPolicy pendulum_damping_policy(double k, const NoiseSpec& noise);

struct QuadrotorParams {
  double mass = 0.468;
  double ixx = 4.856e-3;
  double iyy = 4.856e-3;
  double izz = 8.801e-3;
  double dt = 0.01;
  double gravity = kStandardGravity;
};

/// Layout of the quadrotor feature vector.
namespace quad {
inline constexpr int kPos = 0;       // p (3)
inline constexpr int kVel = 3;       // v (3)
inline constexpr int kGravity = 6;   // constant -g
inline constexpr int kThrust = 7;    // R(q) e_z f_u (3)
inline constexpr int kQuat = 10;     // normalized q (4)
inline constexpr int kQuatRate = 14; // Omega(omega) q (4)
inline constexpr int kOmega = 18;    // omega (3)
inline constexpr int kTorque = 21;   // tau (3)
inline constexpr int kW23 = 24;      // omega_2 omega_3
inline constexpr int kW13 = 25;      // omega_1 omega_3
inline constexpr int kW12 = 26;      // omega_1 omega_2
inline constexpr int kNumFeatures = 27;

// State layout: p(0..2), v(3..5), q(6..9), omega(10..12).
inline constexpr int kStateVel = 3;
inline constexpr int kStateQuat = 6;
inline constexpr int kStateOmega = 10;
inline constexpr int kNumStates = 13;
inline constexpr int kNumInputs = 4;  // f_u, tau_1..3
}  // namespace quad

/// Euler-discretized rigid-body quadrotor with quaternion attitude. Unknown
/// entries: dt/m on each thrust feature of the velocity rows, and
/// dt/I_xx, dt (I_yy - I_zz)/I_xx, dt/I_yy, dt (I_zz - I_xx)/I_yy, dt/I_zz,
/// dt (I_xx - I_yy)/I_zz on the angular-rate rows. The quaternion feature is
/// renormalized on evaluation. Initial state is hover at the origin.
SystemModel quadrotor_model(const QuadrotorParams& params = {});

/// Physical parameters theta_1..theta_7 of a quadrotor.
Eigen::VectorXd quadrotor_physical_parameters(const QuadrotorParams& params);

struct QuadrotorGains {
  double kp_z = 0.75;
  double kd_z = 1.25;
  Eigen::Vector3d kp_attitude{0.03, 0.03, 0.03};
  Eigen::Vector3d kd_attitude{0.00875, 0.00875, 0.00875};
};

/// Roll, pitch, yaw (ZYX) of a unit quaternion (q0, q1, q2, q3).
Eigen::Vector3d euler_angles(const Eigen::Vector4d& q);

/// PD hover controller: f_u = m (g + kp_z (0 - z) + kd_z (0 - z_dot)) and
/// tau_i = kp_i (0 - angle_i) - kd_i omega_i, plus input noise.
ControlPolicy quadrotor_hover_policy(const QuadrotorGains& gains,
                                     double nominal_mass, double gravity,
                                     const NoiseSpec& noise);

/// x_{t+1} = a x_t + w_t with feature phi = (x) and a dummy scalar input.
SystemModel linear_scalar_model(double a = 0.9);

}  // namespace nlsysid
