#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "nlsysid/error.hpp"
#include "nlsysid/experiment.hpp"

namespace nlsysid {
namespace {

using nlohmann::json;

// Field reader that names the full path of a bad or missing key.
class Reader {
 public:
  Reader(const json& obj, std::string path) : obj_(obj), path_(std::move(path)) {
    if (!obj_.is_object()) throw ConfigError("'" + path_ + "' must be an object");
  }

  bool has(const char* key) const { return obj_.contains(key); }

  const json& at(const char* key) const {
    if (!obj_.contains(key))
      throw ConfigError("missing field '" + child(key) + "'");
    used_.insert(key);
    return obj_.at(key);
  }

  template <typename T>
  T get(const char* key) const {
    try {
      return at(key).get<T>();
    } catch (const json::exception&) {
      throw ConfigError("field '" + child(key) + "' has the wrong type");
    }
  }

  template <typename T>
  T get_or(const char* key, T fallback) const {
    return has(key) ? get<T>(key) : fallback;
  }

  Reader object(const char* key) const { return Reader(at(key), child(key)); }

  std::string child(const char* key) const {
    return path_.empty() ? key : path_ + "." + key;
  }

  /// Rejects keys that were never read, which catches typos.
  void finish() const {
    for (auto it = obj_.begin(); it != obj_.end(); ++it)
      if (!used_.count(it.key()))
        throw ConfigError("unknown field '" + child(it.key().c_str()) + "'");
  }

 private:
  const json& obj_;
  std::string path_;
  mutable std::set<std::string> used_;
};

NoiseSpec read_noise(const Reader& r, int default_dim) {
  NoiseSpec spec;
  const std::string kind = r.get<std::string>("kind");
  try {
    spec.kind = noise_kind_from_string(kind);
  } catch (const Error&) {
    throw ConfigError("field '" + r.child("kind") + "' has unknown noise kind '" +
                      kind + "'");
  }
  spec.bound = r.get<double>("bound");
  spec.dimension = r.get_or<int>("dimension", default_dim);
  if (spec.kind == NoiseKind::kTruncatedGaussian)
    spec.sigma = r.get<double>("sigma");
  r.finish();
  return spec;
}

json noise_to_json(const NoiseSpec& spec) {
  nlohmann::ordered_json j;
  j["kind"] = to_string(spec.kind);
  j["bound"] = spec.bound;
  if (spec.kind == NoiseKind::kTruncatedGaussian) j["sigma"] = spec.sigma;
  j["dimension"] = spec.dimension;
  return j;
}

Eigen::Vector3d read_vec3(const Reader& r, const char* key,
                          const Eigen::Vector3d& fallback) {
  if (!r.has(key)) return fallback;
  const json& v = r.at(key);
  if (v.is_number()) return Eigen::Vector3d::Constant(v.get<double>());
  if (v.is_array() && v.size() == 3)
    return {v[0].get<double>(), v[1].get<double>(), v[2].get<double>()};
  throw ConfigError("field '" + r.child(key) + "' must be a number or 3-array");
}

Dimensions model_dims(const ModelConfig& m) {
  if (m.name == "pendulum") return {2, 1, 4};
  if (m.name == "quadrotor")
    return {quad::kNumStates, quad::kNumInputs, quad::kNumFeatures};
  if (m.name == "linear-scalar") return {1, 1, 1};
  throw ConfigError("unknown model '" + m.name + "'");
}

}  // namespace

void ExperimentConfig::validate() const {
  const Dimensions dims = model_dims(model);
  if (T_grid.empty()) throw ConfigError("T_grid must be nonempty");
  for (std::size_t i = 0; i < T_grid.size(); ++i) {
    if (T_grid[i] < 1) throw ConfigError("T_grid entries must be >= 1");
    if (i > 0 && T_grid[i] <= T_grid[i - 1])
      throw ConfigError("T_grid must be strictly increasing");
  }
  if (trials < 1) throw ConfigError("trials must be >= 1");
  if (!run_lse && !run_sme) throw ConfigError("estimators must be nonempty");
  if (!(noise_scale > 0.0)) throw ConfigError("noise_scale must be > 0");
  if (input_noise.dimension != dims.n_u)
    throw ConfigError("input_noise.dimension must equal n_u = " +
                      std::to_string(dims.n_u));
  if (disturbance.dimension != dims.n_x)
    throw ConfigError("disturbance.dimension must equal n_x = " +
                      std::to_string(dims.n_x));
  try {
    input_noise.validate();
    disturbance.validate();
  } catch (const ContractViolation& e) {
    throw ConfigError(std::string("invalid noise spec: ") + e.what());
  }
  if (!(sme.prior_half_width > 0.0)) throw ConfigError("sme.R0 must be > 0");
  if (sme.prune_interval < 1) throw ConfigError("sme.K must be >= 1");
  if (!(bounds.delta > 0.0 && bounds.delta < 1.0))
    throw ConfigError("bounds.delta must lie in (0, 1)");
  if (!(bounds.epsilon > 0.0 && bounds.epsilon < 1.0))
    throw ConfigError("bounds.epsilon must lie in (0, 1)");
  if (guard_radius && !(*guard_radius > 0.0))
    throw ConfigError("guard_radius must be > 0");
  if (model.name == "linear-scalar" && policy.kind != PolicyKind::kOpenLoopNoise)
    throw ConfigError("linear-scalar supports only the open-loop-noise policy");
}

NoiseSpec ExperimentConfig::effective_input_noise() const {
  NoiseSpec s = input_noise;
  s.bound *= noise_scale;
  s.sigma *= noise_scale;
  return s;
}

NoiseSpec ExperimentConfig::effective_disturbance() const {
  NoiseSpec s = disturbance;
  s.bound *= noise_scale;
  s.sigma *= noise_scale;
  return s;
}

ExperimentConfig config_from_json(const json& j) {
  Reader root(j, "");
  const int version = root.get<int>("version");
  if (version != kConfigVersion)
    throw ConfigError("unsupported config version " + std::to_string(version));
  ExperimentConfig c;
  c.name = root.get_or<std::string>("name", c.name);

  {
    Reader m = root.object("model");
    c.model.name = m.get<std::string>("name");
    if (c.model.name == "pendulum") {
      auto& p = c.model.pendulum;
      p.mass = m.get_or("mass", p.mass);
      p.length = m.get_or("length", p.length);
      p.dt = m.get_or("dt", p.dt);
      p.gravity = m.get_or("gravity", p.gravity);
    } else if (c.model.name == "quadrotor") {
      auto& p = c.model.quadrotor;
      p.mass = m.get_or("mass", p.mass);
      p.ixx = m.get_or("ixx", p.ixx);
      p.iyy = m.get_or("iyy", p.iyy);
      p.izz = m.get_or("izz", p.izz);
      p.dt = m.get_or("dt", p.dt);
      p.gravity = m.get_or("gravity", p.gravity);
    } else if (c.model.name == "linear-scalar") {
      c.model.scalar_a = m.get_or("a", c.model.scalar_a);
    } else {
      throw ConfigError("field 'model.name' has unknown model '" + c.model.name + "'");
    }
    m.finish();
  }
  const Dimensions dims = model_dims(c.model);

  {
    Reader p = root.object("policy");
    const std::string kind = p.get<std::string>("kind");
    if (kind == "open-loop-noise") {
      c.policy.kind = PolicyKind::kOpenLoopNoise;
    } else if (kind == "feedback-plus-noise") {
      c.policy.kind = PolicyKind::kFeedbackPlusNoise;
    } else {
      throw ConfigError("field 'policy.kind' has unknown policy '" + kind + "'");
    }
    c.policy.k = p.get_or("k", c.policy.k);
    auto& g = c.policy.quad_gains;
    g.kp_z = p.get_or("kp_z", g.kp_z);
    g.kd_z = p.get_or("kd_z", g.kd_z);
    g.kp_attitude = read_vec3(p, "kp_att", g.kp_attitude);
    g.kd_attitude = read_vec3(p, "kd_att", g.kd_attitude);
    p.finish();
  }

  c.input_noise = read_noise(root.object("input_noise"), dims.n_u);
  c.disturbance = read_noise(root.object("disturbance"), dims.n_x);
  c.noise_scale = root.get_or("noise_scale", c.noise_scale);

  {
    const json& g = root.at("T_grid");
    if (g.is_array()) {
      try {
        c.T_grid = g.get<std::vector<int>>();
      } catch (const json::exception&) {
        throw ConfigError("field 'T_grid' must be a list of integers");
      }
    } else {
      Reader lg(g, "T_grid");
      const auto spec = lg.get<std::vector<int>>("log");
      if (spec.size() != 3)
        throw ConfigError("field 'T_grid.log' must be [lo, hi, count]");
      lg.finish();
      c.T_grid = log_grid(spec[0], spec[1], spec[2]);
    }
  }
  c.trials = root.get_or("trials", c.trials);
  c.seed = root.get_or<std::uint64_t>("seed", c.seed);
  if (root.has("guard_radius")) c.guard_radius = root.get<double>("guard_radius");

  const auto estimators =
      root.get_or<std::vector<std::string>>("estimators", {"lse"});
  c.run_lse = c.run_sme = false;
  for (const auto& e : estimators) {
    if (e == "lse") c.run_lse = true;
    else if (e == "sme") c.run_sme = true;
    else throw ConfigError("field 'estimators' has unknown estimator '" + e + "'");
  }

  if (root.has("sme")) {
    Reader s = root.object("sme");
    c.sme.prior_half_width = s.get_or("R0", c.sme.prior_half_width);
    c.sme.prune_interval = s.get_or("K", c.sme.prune_interval);
    c.sme.audit_every_step = s.get_or("audit_every_step", c.sme.audit_every_step);
    if (s.has("projections")) {
      for (const auto& pair : s.get<std::vector<std::vector<int>>>("projections")) {
        if (pair.size() != 2)
          throw ConfigError("field 'sme.projections' entries must be pairs");
        c.sme.projections.emplace_back(pair[0], pair[1]);
      }
    }
    s.finish();
  }

  if (root.has("bmsb")) {
    Reader b = root.object("bmsb");
    auto& o = c.bmsb;
    o.horizon = b.get_or("horizon", o.horizon);
    o.n_traj = b.get_or("n_traj", o.n_traj);
    o.n_dirs = b.get_or("n_dirs", o.n_dirs);
    o.n_mc = b.get_or("n_mc", o.n_mc);
    o.max_points = b.get_or("max_points", o.max_points);
    o.s_grid = b.get_or("s_grid", o.s_grid);
    if (b.has("rule")) {
      o.rule = small_ball_rule_from_string(b.get<std::string>("rule"));
    }
    if (b.has("file")) c.bmsb_file = b.get<std::string>("file");
    b.finish();
  }

  if (root.has("bounds")) {
    Reader b = root.object("bounds");
    c.theory = b.get_or("enabled", c.theory);
    c.bounds.delta = b.get_or("delta", c.bounds.delta);
    c.bounds.epsilon = b.get_or("epsilon", c.bounds.epsilon);
    b.finish();
  }
  root.finish();
  c.validate();
  return c;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path + "'");
  std::stringstream buf;
  buf << in.rdbuf();
  json j;
  try {
    j = json::parse(buf.str());
  } catch (const json::exception& e) {
    throw ConfigError("config '" + path + "' is not valid JSON: " + e.what());
  }
  return config_from_json(j);
}

nlohmann::ordered_json config_to_json(const ExperimentConfig& c) {
  nlohmann::ordered_json j;
  j["version"] = kConfigVersion;
  j["name"] = c.name;
  nlohmann::ordered_json m;
  m["name"] = c.model.name;
  if (c.model.name == "pendulum") {
    const auto& p = c.model.pendulum;
    m["mass"] = p.mass;
    m["length"] = p.length;
    m["dt"] = p.dt;
    m["gravity"] = p.gravity;
  } else if (c.model.name == "quadrotor") {
    const auto& p = c.model.quadrotor;
    m["mass"] = p.mass;
    m["ixx"] = p.ixx;
    m["iyy"] = p.iyy;
    m["izz"] = p.izz;
    m["dt"] = p.dt;
    m["gravity"] = p.gravity;
  } else {
    m["a"] = c.model.scalar_a;
  }
  j["model"] = m;

  nlohmann::ordered_json p;
  p["kind"] = c.policy.kind == PolicyKind::kOpenLoopNoise ? "open-loop-noise"
                                                           : "feedback-plus-noise";
  if (c.model.name == "pendulum") p["k"] = c.policy.k;
  if (c.model.name == "quadrotor") {
    const auto& g = c.policy.quad_gains;
    p["kp_z"] = g.kp_z;
    p["kd_z"] = g.kd_z;
    p["kp_att"] = {g.kp_attitude[0], g.kp_attitude[1], g.kp_attitude[2]};
    p["kd_att"] = {g.kd_attitude[0], g.kd_attitude[1], g.kd_attitude[2]};
  }
  j["policy"] = p;
  j["input_noise"] = noise_to_json(c.input_noise);
  j["disturbance"] = noise_to_json(c.disturbance);
  j["noise_scale"] = c.noise_scale;
  j["T_grid"] = c.T_grid;
  j["trials"] = c.trials;
  j["seed"] = c.seed;
  if (c.guard_radius) j["guard_radius"] = *c.guard_radius;
  std::vector<std::string> est;
  if (c.run_lse) est.push_back("lse");
  if (c.run_sme) est.push_back("sme");
  j["estimators"] = est;

  nlohmann::ordered_json s;
  s["R0"] = c.sme.prior_half_width;
  s["K"] = c.sme.prune_interval;
  s["audit_every_step"] = c.sme.audit_every_step;
  auto pairs = nlohmann::ordered_json::array();
  for (const auto& [a, b] : c.sme.projections) pairs.push_back({a, b});
  s["projections"] = pairs;
  j["sme"] = s;

  nlohmann::ordered_json b;
  b["horizon"] = c.bmsb.horizon;
  b["n_traj"] = c.bmsb.n_traj;
  b["n_dirs"] = c.bmsb.n_dirs;
  b["n_mc"] = c.bmsb.n_mc;
  b["max_points"] = c.bmsb.max_points;
  b["s_grid"] = c.bmsb.s_grid;
  b["rule"] = to_string(c.bmsb.rule);
  if (c.bmsb_file) b["file"] = *c.bmsb_file;
  j["bmsb"] = b;

  nlohmann::ordered_json bd;
  bd["enabled"] = c.theory;
  bd["delta"] = c.bounds.delta;
  bd["epsilon"] = c.bounds.epsilon;
  j["bounds"] = bd;
  return j;
}

std::string config_hash(const ExperimentConfig& config) {
  const std::string text = config_to_json(config).dump();
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : text) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

SystemModel build_model(const ModelConfig& config) {
  if (config.name == "pendulum") return pendulum_model(config.pendulum);
  if (config.name == "quadrotor") return quadrotor_model(config.quadrotor);
  if (config.name == "linear-scalar") return linear_scalar_model(config.scalar_a);
  throw ConfigError("unknown model '" + config.name + "'");
}

ControlPolicy build_policy(const ExperimentConfig& config,
                           const SystemModel& model) {
  const NoiseSpec noise = config.effective_input_noise();
  if (config.policy.kind == PolicyKind::kOpenLoopNoise)
    return ControlPolicy::open_loop(noise);
  if (model.name == "pendulum")
    return pendulum_damping_policy(config.policy.k, noise);
  if (model.name == "quadrotor")
    return quadrotor_hover_policy(config.policy.quad_gains,
                                  config.model.quadrotor.mass,
                                  config.model.quadrotor.gravity, noise);
  throw ConfigError("model '" + model.name + "' has no feedback policy");
}

std::vector<int> log_grid(int lo, int hi, int count) {
  if (lo < 1 || hi < lo || count < 1)
    throw ConfigError("log grid needs 1 <= lo <= hi and count >= 1");
  if (count == 1) return {lo};
  std::vector<int> grid;
  const double ratio = static_cast<double>(hi) / lo;
  for (int i = 0; i < count; ++i) {
    int v = static_cast<int>(std::lround(lo * std::pow(ratio, i / (count - 1.0))));
    if (!grid.empty() && v <= grid.back()) v = grid.back() + 1;
    grid.push_back(v);
  }
  if (grid.back() > hi) throw ConfigError("log grid too dense for its range");
  return grid;
}

std::vector<std::string> canned_ids() {
  return {"fig1a", "fig1b", "fig1c", "fig1d", "fig2a", "fig2b",
          "fig2c", "fig2d", "fig3b", "fig3c", "fig4"};
}

ExperimentConfig canned_config(const std::string& id) {
  ExperimentConfig c;
  c.name = id;
  c.T_grid = log_grid(100, 10000, 10);
  c.bmsb.rule = SmallBallRule::kMaxProduct;

  const bool pendulum = id == "fig1a" || id == "fig1b" || id == "fig2a" ||
                        id == "fig2b" || id == "fig3b" || id == "fig3c";
  const bool quadrotor = id == "fig1c" || id == "fig1d" || id == "fig2c" ||
                         id == "fig2d" || id == "fig4";
  if (!pendulum && !quadrotor)
    throw ConfigError("unknown figure id '" + id + "'");

  const bool lse_fig = id.rfind("fig1", 0) == 0;
  const bool uniform = id == "fig1a" || id == "fig1c" || id == "fig2a" ||
                       id == "fig2c";
  // Truncated-Gaussian sigma: 0.1 for the LSE ids, 0.5 for the SME ids.
  const double tg_sigma = lse_fig ? 0.1 : 0.5;

  int n_x, n_u;
  if (pendulum) {
    c.model.name = "pendulum";
    c.policy.kind = PolicyKind::kFeedbackPlusNoise;
    c.policy.k = lse_fig ? 2.0 : 0.1;
    n_x = 2;
    n_u = 1;
  } else {
    c.model.name = "quadrotor";
    c.policy.kind = PolicyKind::kFeedbackPlusNoise;
    // Nominal noise magnitudes are read as rates and integrated over one
    // step; unscaled unit noise every 10 ms drives the hover loop unstable.
    c.noise_scale = c.model.quadrotor.dt;
    n_x = quad::kNumStates;
    n_u = quad::kNumInputs;
  }
  if (uniform) {
    c.input_noise = NoiseSpec::uniform(n_u, 1.0);
    c.disturbance = NoiseSpec::uniform(n_x, 1.0);
  } else {
    c.input_noise = NoiseSpec::truncated_gaussian(n_u, tg_sigma, 1.0);
    c.disturbance = NoiseSpec::truncated_gaussian(n_x, tg_sigma, 1.0);
  }

  if (lse_fig) {
    c.trials = 20;
    c.run_lse = true;
    c.run_sme = false;
  } else {
    c.trials = 10;
    c.run_lse = false;
    c.run_sme = true;
    c.sme.audit_every_step = true;
  }

  if (id == "fig3b" || id == "fig3c") {
    c.input_noise = NoiseSpec::truncated_gaussian(1, 2.0, 2.0);
    c.disturbance = NoiseSpec::truncated_gaussian(2, 1.0, 1.0);
    c.trials = 1;
    c.T_grid = id == "fig3b" ? log_grid(10, 500, 12)
                             : std::vector<int>{50, 200, 250, 400, 500};
    if (id == "fig3c") c.sme.projections = {{0, 1}};
  }
  if (id == "fig4") {
    c.trials = 1;
    c.T_grid = {100, 1000, 10000};
    // Unknown order: dt/m on the three velocity rows, then the (torque,
    // cross-rate) pairs of the three angular-rate rows.
    c.sme.projections = {{0, 3}, {3, 4}, {5, 6}, {7, 8}};
  }
  c.validate();
  return c;
}

}  // namespace nlsysid
