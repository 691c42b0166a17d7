#include "nlsysid/model.hpp"

#include <algorithm>
#include <cmath>

#include <Eigen/Dense>

#include "nlsysid/error.hpp"

namespace nlsysid {
namespace {

void require_positive(double value, const char* what) {
  if (!(value > 0.0) || !std::isfinite(value))
    throw ContractViolation(std::string(what) + " must be positive");
}

void require_size(const Eigen::VectorXd& v, int n, const char* what) {
  if (v.size() != n)
    throw ContractViolation(std::string(what) + " has length " +
                            std::to_string(v.size()) + ", expected " +
                            std::to_string(n));
}

}  // namespace

void Dimensions::validate() const {
  if (n_x <= 0 || n_u <= 0 || n_phi <= 0)
    throw ContractViolation("dimensions must be strictly positive");
}

Eigen::VectorXd eval_features(const FeatureMap& map, const Eigen::VectorXd& x,
                              const Eigen::VectorXd& u) {
  require_size(x, map.dims.n_x, "state");
  require_size(u, map.dims.n_u, "input");
  Eigen::VectorXd phi = map.fn(x, u);
  if (phi.size() != map.dims.n_phi)
    throw ContractViolation("feature map returned wrong length");
  return phi;
}

int ParameterMatrix::unknowns_in_row(int row) const {
  return static_cast<int>(unknown.row(row).count());
}

int ParameterMatrix::total_unknowns() const {
  return static_cast<int>(unknown.count());
}

std::vector<int> ParameterMatrix::unknown_columns(int row) const {
  std::vector<int> cols;
  for (int c = 0; c < this->cols(); ++c)
    if (unknown(row, c)) cols.push_back(c);
  return cols;
}

std::vector<UnknownEntry> ParameterMatrix::unknown_entries() const {
  std::vector<UnknownEntry> out;
  for (int r = 0; r < rows(); ++r)
    for (int c = 0; c < cols(); ++c)
      if (unknown(r, c)) out.push_back({r, c});
  return out;
}

Eigen::VectorXd ParameterMatrix::unknown_values(int row) const {
  const auto cols = unknown_columns(row);
  Eigen::VectorXd v(static_cast<Eigen::Index>(cols.size()));
  for (std::size_t k = 0; k < cols.size(); ++k) v[k] = entries(row, cols[k]);
  return v;
}

Eigen::VectorXd step(const SystemModel& model, const Eigen::VectorXd& x,
                     const Eigen::VectorXd& u, const Eigen::VectorXd& w) {
  require_size(w, model.dims().n_x, "disturbance");
  return model.theta.entries * eval_features(model.features, x, u) + w;
}

ControlPolicy ControlPolicy::open_loop(const NoiseSpec& noise) {
  noise.validate();
  ControlPolicy p;
  p.kind = PolicyKind::kOpenLoopNoise;
  p.noise = noise;
  return p;
}

ControlPolicy ControlPolicy::feedback_plus_noise(
    std::function<Eigen::VectorXd(const Eigen::VectorXd&)> feedback,
    const NoiseSpec& noise) {
  noise.validate();
  ControlPolicy p;
  p.kind = PolicyKind::kFeedbackPlusNoise;
  p.feedback = std::move(feedback);
  p.noise = noise;
  return p;
}

Eigen::VectorXd ControlPolicy::nominal(const Eigen::VectorXd& x) const {
  if (kind == PolicyKind::kOpenLoopNoise || !feedback)
    return Eigen::VectorXd::Zero(noise.dimension);
  return feedback(x);
}

Eigen::VectorXd ControlPolicy::act(const Eigen::VectorXd& x,
                                   SeedStream& input_stream) const {
  Eigen::VectorXd u = nominal(x);
  u += sample(noise, input_stream);
  return u;
}

Trajectory Trajectory::prefix(int horizon, double guard_radius) const {
  if (horizon < 1 || horizon > length)
    throw ContractViolation("prefix horizon out of range");
  Trajectory out;
  out.length = horizon;
  out.states = states.topRows(horizon + 1);
  out.inputs = inputs.topRows(horizon);
  out.disturbances = disturbances.topRows(horizon);
  out.features = features.topRows(horizon);
  out.guard_tripped = false;
  for (int t = 0; t <= horizon; ++t)
    if (out.states.row(t).norm() > guard_radius) out.guard_tripped = true;
  return out;
}

Trajectory simulate(const SystemModel& model, const ControlPolicy& policy,
                    const NoiseSpec& disturbance, int horizon,
                    const SeedStream& streams,
                    const SimulationOptions& options) {
  const Dimensions& d = model.dims();
  d.validate();
  if (horizon < 1) throw ContractViolation("simulation horizon must be >= 1");
  if (disturbance.dimension != d.n_x)
    throw ContractViolation("disturbance dimension must equal n_x");
  if (policy.noise.dimension != d.n_u)
    throw ContractViolation("input noise dimension must equal n_u");
  disturbance.validate();

  const double guard = options.guard_radius.value_or(model.guard_radius);
  SeedStream w_stream = streams.child("disturbance");
  SeedStream eta_stream = streams.child("input-noise");

  Trajectory traj;
  traj.length = horizon;
  traj.states.resize(horizon + 1, d.n_x);
  traj.inputs.resize(horizon, d.n_u);
  traj.disturbances.resize(horizon, d.n_x);
  traj.features.resize(horizon, d.n_phi);

  Eigen::VectorXd x = options.initial_state.value_or(model.initial_state);
  if (x.size() == 0) x = Eigen::VectorXd::Zero(d.n_x);
  require_size(x, d.n_x, "initial state");
  traj.states.row(0) = x.transpose();

  auto check = [&](int t, const Eigen::VectorXd& state) {
    const double norm = state.norm();
    if (!std::isfinite(norm) || norm > options.hard_ceiling)
      throw DivergenceError(static_cast<std::size_t>(t), norm);
    if (norm > guard) traj.guard_tripped = true;
  };
  check(0, x);

  for (int t = 0; t < horizon; ++t) {
    const Eigen::VectorXd w = sample(disturbance, w_stream);
    const Eigen::VectorXd u = policy.act(x, eta_stream);
    const Eigen::VectorXd phi = eval_features(model.features, x, u);
    x = model.theta.entries * phi + w;
    traj.inputs.row(t) = u.transpose();
    traj.disturbances.row(t) = w.transpose();
    traj.features.row(t) = phi.transpose();
    traj.states.row(t + 1) = x.transpose();
    check(t + 1, x);
  }
  return traj;
}

Trajectory simulate(const SystemModel& model, const ControlPolicy& policy,
                    const NoiseSpec& disturbance, int horizon,
                    std::uint64_t seed, const SimulationOptions& options) {
  return simulate(model, policy, disturbance, horizon, SeedStream(seed),
                  options);
}

double feature_independence_margin(const FeatureMap& map, int points,
                                   SeedStream& stream, double box) {
  const Dimensions& d = map.dims;
  Eigen::MatrixXd samples(points, d.n_phi);
  for (int i = 0; i < points; ++i) {
    Eigen::VectorXd x(d.n_x), u(d.n_u);
    for (int k = 0; k < d.n_x; ++k) x[k] = stream.uniform(-box, box);
    for (int k = 0; k < d.n_u; ++k) u[k] = stream.uniform(-box, box);
    samples.row(i) = eval_features(map, x, u).transpose();
  }
  for (int c = 0; c < d.n_phi; ++c) {
    const double n = samples.col(c).norm();
    if (n == 0.0) return 0.0;
    samples.col(c) /= n;
  }
  const Eigen::MatrixXd gram = samples.transpose() * samples;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(gram,
                                                     Eigen::EigenvaluesOnly);
  return eig.eigenvalues().minCoeff();
}

// --- pendulum --------------------------------------------------------------

SystemModel pendulum_model(const PendulumParams& p) {
  require_positive(p.mass, "pendulum mass");
  require_positive(p.length, "pendulum length");
  require_positive(p.dt, "time step");
  require_positive(p.gravity, "gravity");

  SystemModel model;
  model.name = "pendulum";
  model.features.dims = {2, 1, 4};
  model.features.labels = {"alpha", "alpha_dot", "sin(alpha)", "u"};
  model.features.fn = [](const Eigen::VectorXd& x, const Eigen::VectorXd& u) {
    Eigen::VectorXd phi(4);
    phi << x[0], x[1], std::sin(x[0]), u[0];
    return phi;
  };

  model.theta.entries.resize(2, 4);
  model.theta.entries << 1.0, p.dt, 0.0, 0.0,
      0.0, 1.0, -p.gravity * p.dt / p.length,
      p.dt / (p.mass * p.length * p.length);
  model.theta.unknown.setConstant(2, 4, false);
  model.theta.unknown(1, 2) = true;
  model.theta.unknown(1, 3) = true;

  model.initial_state = Eigen::VectorXd::Zero(2);
  model.state_labels = {"alpha", "alpha_dot"};
  model.input_labels = {"u"};
  const double g_dt = p.gravity * p.dt;
  const double dt = p.dt;
  model.physical_parameters = [g_dt, dt](const Eigen::MatrixXd& theta) {
    Eigen::VectorXd out(2);
    out << -theta(1, 2) / g_dt, theta(1, 3) / dt;
    return out;
  };
  model.physical_labels = {"theta1=1/l", "theta2=1/(m l^2)"};
  model.guard_radius = 100.0;
  return model;
}

ControlPolicy pendulum_damping_policy(double k, const NoiseSpec& noise) {
  return ControlPolicy::feedback_plus_noise(
      [k](const Eigen::VectorXd& x) {
        Eigen::VectorXd u(1);
        u[0] = -k * x[1];
        return u;
      },
      noise);
}

// --- quadrotor -------------------------------------------------------------

namespace {

Eigen::Vector4d unit_quaternion(const Eigen::VectorXd& x) {
  Eigen::Vector4d q = x.segment<4>(quad::kStateQuat);
  const double n = q.norm();
  if (!(n > 1e-12)) return Eigen::Vector4d(1.0, 0.0, 0.0, 0.0);
  return q / n;
}

// Third column of the body-to-inertial rotation matrix of q.
Eigen::Vector3d thrust_direction(const Eigen::Vector4d& q) {
  const double q0 = q[0], q1 = q[1], q2 = q[2], q3 = q[3];
  return {2.0 * (q1 * q3 + q0 * q2), 2.0 * (q2 * q3 - q0 * q1),
          q0 * q0 - q1 * q1 - q2 * q2 + q3 * q3};
}

// Omega(omega) q, the quaternion kinematics q_dot = Omega q / 2.
Eigen::Vector4d quaternion_rate(const Eigen::Vector3d& w,
                                const Eigen::Vector4d& q) {
  Eigen::Matrix4d omega;
  omega << 0.0, -w[0], -w[1], -w[2],
      w[0], 0.0, w[2], -w[1],
      w[1], -w[2], 0.0, w[0],
      w[2], w[1], -w[0], 0.0;
  return omega * q;
}

}  // namespace

Eigen::Vector3d euler_angles(const Eigen::Vector4d& q) {
  const double q0 = q[0], q1 = q[1], q2 = q[2], q3 = q[3];
  const double roll =
      std::atan2(2.0 * (q0 * q1 + q2 * q3), 1.0 - 2.0 * (q1 * q1 + q2 * q2));
  const double sin_pitch = std::clamp(2.0 * (q0 * q2 - q3 * q1), -1.0, 1.0);
  const double yaw =
      std::atan2(2.0 * (q0 * q3 + q1 * q2), 1.0 - 2.0 * (q2 * q2 + q3 * q3));
  return {roll, std::asin(sin_pitch), yaw};
}

Eigen::VectorXd quadrotor_physical_parameters(const QuadrotorParams& p) {
  Eigen::VectorXd out(7);
  out << 1.0 / p.mass, 1.0 / p.ixx, (p.iyy - p.izz) / p.ixx, 1.0 / p.iyy,
      (p.izz - p.ixx) / p.iyy, 1.0 / p.izz, (p.ixx - p.iyy) / p.izz;
  return out;
}

SystemModel quadrotor_model(const QuadrotorParams& p) {
  require_positive(p.mass, "quadrotor mass");
  require_positive(p.ixx, "I_xx");
  require_positive(p.iyy, "I_yy");
  require_positive(p.izz, "I_zz");
  require_positive(p.dt, "time step");
  require_positive(p.gravity, "gravity");

  using namespace quad;
  SystemModel model;
  model.name = "quadrotor";
  model.features.dims = {kNumStates, kNumInputs, kNumFeatures};
  model.features.labels = {
      "px", "py", "pz", "vx", "vy", "vz", "-g",
      "R13*f", "R23*f", "R33*f",
      "q0", "q1", "q2", "q3",
      "(Wq)0", "(Wq)1", "(Wq)2", "(Wq)3",
      "w1", "w2", "w3", "tau1", "tau2", "tau3",
      "w2*w3", "w1*w3", "w1*w2"};
  const double g = p.gravity;
  model.features.fn = [g](const Eigen::VectorXd& x, const Eigen::VectorXd& u) {
    Eigen::VectorXd phi(kNumFeatures);
    const Eigen::Vector4d q = unit_quaternion(x);
    const Eigen::Vector3d w = x.segment<3>(kStateOmega);
    phi.segment<3>(kPos) = x.segment<3>(0);
    phi.segment<3>(kVel) = x.segment<3>(kStateVel);
    phi[kGravity] = -g;
    phi.segment<3>(kThrust) = thrust_direction(q) * u[0];
    phi.segment<4>(kQuat) = q;
    phi.segment<4>(kQuatRate) = quaternion_rate(w, q);
    phi.segment<3>(kOmega) = w;
    phi.segment<3>(kTorque) = u.segment<3>(1);
    phi[kW23] = w[1] * w[2];
    phi[kW13] = w[0] * w[2];
    phi[kW12] = w[0] * w[1];
    return phi;
  };

  const double dt = p.dt;
  Eigen::MatrixXd th = Eigen::MatrixXd::Zero(kNumStates, kNumFeatures);
  auto& mask = model.theta.unknown;
  mask.setConstant(kNumStates, kNumFeatures, false);
  for (int i = 0; i < 3; ++i) {
    th(i, kPos + i) = 1.0;
    th(i, kVel + i) = dt;
    th(kStateVel + i, kVel + i) = 1.0;
    th(kStateVel + i, kThrust + i) = dt / p.mass;
    mask(kStateVel + i, kThrust + i) = true;
    th(kStateOmega + i, kOmega + i) = 1.0;
  }
  th(kStateVel + 2, kGravity) = dt;
  for (int i = 0; i < 4; ++i) {
    th(kStateQuat + i, kQuat + i) = 1.0;
    th(kStateQuat + i, kQuatRate + i) = 0.5 * dt;
  }
  const Eigen::VectorXd phys = quadrotor_physical_parameters(p);
  const int w1 = kStateOmega, w2 = kStateOmega + 1, w3 = kStateOmega + 2;
  th(w1, kTorque + 0) = dt * phys[1];
  th(w1, kW23) = dt * phys[2];
  th(w2, kTorque + 1) = dt * phys[3];
  th(w2, kW13) = dt * phys[4];
  th(w3, kTorque + 2) = dt * phys[5];
  th(w3, kW12) = dt * phys[6];
  for (int c : {kTorque + 0, kW23}) mask(w1, c) = true;
  for (int c : {kTorque + 1, kW13}) mask(w2, c) = true;
  for (int c : {kTorque + 2, kW12}) mask(w3, c) = true;
  model.theta.entries = th;

  model.initial_state = Eigen::VectorXd::Zero(kNumStates);
  model.initial_state[kStateQuat] = 1.0;
  model.state_labels = {"px", "py", "pz", "vx", "vy", "vz", "q0",
                        "q1", "q2", "q3", "w1", "w2", "w3"};
  model.input_labels = {"f", "tau1", "tau2", "tau3"};
  model.physical_parameters = [dt](const Eigen::MatrixXd& theta) {
    Eigen::VectorXd out(7);
    out << theta(kStateVel + 2, kThrust + 2) / dt,
        theta(kStateOmega, kTorque) / dt, theta(kStateOmega, kW23) / dt,
        theta(kStateOmega + 1, kTorque + 1) / dt,
        theta(kStateOmega + 1, kW13) / dt,
        theta(kStateOmega + 2, kTorque + 2) / dt,
        theta(kStateOmega + 2, kW12) / dt;
    return out;
  };
  model.physical_labels = {"theta1=1/m",          "theta2=1/Ixx",
                           "theta3=(Iyy-Izz)/Ixx", "theta4=1/Iyy",
                           "theta5=(Izz-Ixx)/Iyy", "theta6=1/Izz",
                           "theta7=(Ixx-Iyy)/Izz"};
  model.guard_radius = 100.0;
  return model;
}

ControlPolicy quadrotor_hover_policy(const QuadrotorGains& gains,
                                     double nominal_mass, double gravity,
                                     const NoiseSpec& noise) {
  require_positive(nominal_mass, "nominal mass");
  return ControlPolicy::feedback_plus_noise(
      [gains, nominal_mass, gravity](const Eigen::VectorXd& x) {
        using namespace quad;
        Eigen::VectorXd u(kNumInputs);
        const double z = x[2];
        const double z_dot = x[kStateVel + 2];
        u[0] = nominal_mass *
               (gravity + gains.kp_z * (0.0 - z) + gains.kd_z * (0.0 - z_dot));
        const Eigen::Vector3d angles = euler_angles(unit_quaternion(x));
        const Eigen::Vector3d rates = x.segment<3>(kStateOmega);
        for (int i = 0; i < 3; ++i)
          u[1 + i] = gains.kp_attitude[i] * (0.0 - angles[i]) -
                     gains.kd_attitude[i] * rates[i];
        return u;
      },
      noise);
}

// --- linear scalar ---------------------------------------------------------

SystemModel linear_scalar_model(double a) {
  SystemModel model;
  model.name = "linear-scalar";
  model.features.dims = {1, 1, 1};
  model.features.labels = {"x"};
  model.features.fn = [](const Eigen::VectorXd& x, const Eigen::VectorXd&) {
    return Eigen::VectorXd(x);
  };
  model.theta.entries = Eigen::MatrixXd::Constant(1, 1, a);
  model.theta.unknown.setConstant(1, 1, true);
  model.initial_state = Eigen::VectorXd::Zero(1);
  model.state_labels = {"x"};
  model.input_labels = {"u"};
  model.physical_parameters = [](const Eigen::MatrixXd& theta) {
    return Eigen::VectorXd::Constant(1, theta(0, 0));
  };
  model.physical_labels = {"a"};
  model.guard_radius = 100.0;
  return model;
}

}  // namespace nlsysid
