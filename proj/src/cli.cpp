#include "nlsysid/cli.hpp"

#include <filesystem>
#include <fstream>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <type_traits>

#include <CLI11.hpp>

#include "nlsysid/bmsb.hpp"
#include "nlsysid/error.hpp"
#include "nlsysid/experiment.hpp"
#include "nlsysid/lse.hpp"

namespace nlsysid {
namespace {

namespace fs = std::filesystem;

struct CommonArgs {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::string out_dir = ".";
  std::string format = "csv";
};

void add_common(CLI::App* cmd, CommonArgs& args, bool config_required) {
  auto* opt = cmd->add_option("--config", args.config_path, "experiment config (JSON, schema v1)");
  if (config_required) opt->required();
  cmd->add_option("--seed", args.seed, "root seed, overrides the config");
  cmd->add_option("--out", args.out_dir, "output directory")->capture_default_str();
  cmd->add_option("--format", args.format, "output format")
      ->check(CLI::IsMember({"csv", "json"}))
      ->capture_default_str();
}

ExperimentConfig resolve(const CommonArgs& args) {
  ExperimentConfig c = load_config(args.config_path);
  if (args.seed) c.seed = *args.seed;
  return c;
}

void write_file(const fs::path& path, const std::string& text) {
  fs::create_directories(path.parent_path().empty() ? fs::path(".") : path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write '" + path.string() + "'");
  out << text;
}

int report_sweep(const SweepResult& r, const CommonArgs& args, std::ostream& out,
                 std::ostream& err) {
  for (const auto& f : write_sweep(r, args.out_dir, args.format))
    out << "wrote " << (fs::path(args.out_dir) / f).string() << "\n";
  if (r.lse_slope) out << "lse log-log slope " << format_double(*r.lse_slope) << "\n";
  if (r.sme_slope) out << "sme log-log slope " << format_double(*r.sme_slope) << "\n";
  if (r.failed_trials > 0)
    err << r.failed_trials << " of " << r.config.trials << " trials failed\n";
  return r.failed() ? kExitRuntime : kExitOk;
}

int cmd_simulate(const CommonArgs& args, std::optional<int> horizon,
                 std::ostream& out) {
  const ExperimentConfig c = resolve(args);
  const SystemModel model = build_model(c.model);
  const ControlPolicy policy = build_policy(c, model);
  const int T = horizon.value_or(c.T_grid.back());
  if (T < 1) throw ConfigError("--horizon must be >= 1");
  SimulationOptions opts;
  opts.guard_radius = c.guard_radius;
  const Trajectory traj = simulate(model, policy, c.effective_disturbance(), T,
                                   SeedStream(c.seed, "trial/0"), opts);
  const std::string hash = config_hash(c);
  const fs::path dir(args.out_dir);
  fs::path path;
  const auto& d = model.dims();
  if (args.format == "csv") {
    std::ostringstream os;
    os << "# config_hash=" << hash << " seed=" << c.seed
       << " guard_tripped=" << (traj.guard_tripped ? "true" : "false") << "\n";
    os << "t";
    for (const auto& l : model.state_labels) os << ',' << l;
    for (const auto& l : model.input_labels) os << ",u_" << l;
    for (const auto& l : model.state_labels) os << ",w_" << l;
    os << "\n";
    for (int t = 0; t <= T; ++t) {
      os << t;
      for (int i = 0; i < d.n_x; ++i) os << ',' << format_double(traj.states(t, i));
      for (int i = 0; i < d.n_u; ++i)
        os << ',' << (t < T ? format_double(traj.inputs(t, i)) : "");
      for (int i = 0; i < d.n_x; ++i)
        os << ',' << (t < T ? format_double(traj.disturbances(t, i)) : "");
      os << "\n";
    }
    path = dir / (c.name + ".trajectory.csv");
    write_file(path, os.str());
  } else {
    nlohmann::ordered_json j;
    j["config_hash"] = hash;
    j["seed"] = c.seed;
    j["model"] = model.name;
    j["length"] = T;
    j["guard_tripped"] = traj.guard_tripped;
    auto rows = [](const Eigen::MatrixXd& m) {
      auto a = nlohmann::ordered_json::array();
      for (int r = 0; r < m.rows(); ++r) {
        auto row = nlohmann::ordered_json::array();
        for (int k = 0; k < m.cols(); ++k) row.push_back(m(r, k));
        a.push_back(row);
      }
      return a;
    };
    j["states"] = rows(traj.states);
    j["inputs"] = rows(traj.inputs);
    j["disturbances"] = rows(traj.disturbances);
    path = dir / (c.name + ".trajectory.json");
    write_file(path, j.dump() + "\n");
  }
  out << "wrote " << path.string() << "\n";
  if (traj.guard_tripped) out << "state-norm guard tripped\n";
  return kExitOk;
}

int cmd_sweep(const CommonArgs& args, bool lse, std::ostream& out,
              std::ostream& err) {
  ExperimentConfig c = resolve(args);
  c.run_lse = lse;
  c.run_sme = !lse;
  return report_sweep(run_sweep(c), args, out, err);
}

int cmd_bmsb(const CommonArgs& args, std::ostream& out) {
  const ExperimentConfig c = resolve(args);
  const SystemModel model = build_model(c.model);
  const ControlPolicy policy = build_policy(c, model);
  BmsbOptions opts = c.bmsb;
  opts.seed = derive_seed(c.seed, "bmsb");
  const BmsbEstimate est =
      estimate_bmsb(model, policy, c.effective_disturbance(), opts);
  const fs::path dir(args.out_dir);
  const fs::path json_path = dir / (c.name + ".bmsb.json");
  write_file(json_path, bmsb_to_json(est) + "\n");
  out << "wrote " << json_path.string() << "\n";
  if (args.format == "csv") {
    std::ostringstream os;
    os << "# config_hash=" << config_hash(c) << " s_phi=" << format_double(est.s_phi)
       << " p_phi=" << format_double(est.p_phi) << " b_phi=" << format_double(est.b_phi)
       << " b_bar_phi=" << format_double(est.b_bar_phi) << "\n";
    os << "s,p\n";
    for (std::size_t k = 0; k < est.provenance.s_grid.size(); ++k)
      os << format_double(est.provenance.s_grid[k]) << ','
         << format_double(est.provenance.p_grid[k]) << "\n";
    const fs::path csv_path = dir / (c.name + ".bmsb.csv");
    write_file(csv_path, os.str());
    out << "wrote " << csv_path.string() << "\n";
  }
  out << "s_phi " << format_double(est.s_phi) << " p_phi "
      << format_double(est.p_phi) << "\n";
  return kExitOk;
}

int cmd_bounds(const CommonArgs& args, std::ostream& out) {
  const ExperimentConfig c = resolve(args);
  if (!c.bmsb_file)
    throw ConfigError("missing field 'bmsb.file' (path to a saved BMSB estimate)");
  std::ifstream in(*c.bmsb_file);
  if (!in)
    throw ConfigError("field 'bmsb.file' names a missing file '" + *c.bmsb_file + "'");
  std::stringstream buf;
  buf << in.rdbuf();
  const BmsbEstimate est = bmsb_from_json(buf.str());
  const SystemModel model = build_model(c.model);
  long burn_in = 0;
  const auto curves = bound_curves(c, model, est, &burn_in);
  const double norm = spectral_norm(model.theta.entries);
  const std::string hash = config_hash(c);
  const fs::path dir(args.out_dir);
  fs::path path;
  auto cell = [](const auto& v) {
    if constexpr (std::is_same_v<std::decay_t<decltype(v)>, std::optional<long>>)
      return v ? std::to_string(*v) : std::string();
    else
      return v ? format_double(*v) : std::string();
  };
  if (args.format == "csv") {
    std::ostringstream os;
    os << "# config_hash=" << hash << " s_phi=" << format_double(est.s_phi)
       << " p_phi=" << format_double(est.p_phi) << " b_phi=" << format_double(est.b_phi)
       << " b_bar_phi=" << format_double(est.b_bar_phi)
       << " delta=" << format_double(c.bounds.delta)
       << " epsilon=" << format_double(c.bounds.epsilon)
       << " lse_burn_in=" << burn_in << " theta_norm_2=" << format_double(norm) << "\n";
    os << "T,lse_bound,theo_lse,sme_m,sme_bound,theo_sme,sme_log_failure\n";
    for (const auto& p : curves) {
      std::optional<double> tl, ts;
      if (p.lse_bound) tl = *p.lse_bound / norm;
      if (p.sme_bound) ts = *p.sme_bound / norm;
      os << p.T << ',' << cell(p.lse_bound) << ',' << cell(tl) << ',' << cell(p.m)
         << ',' << cell(p.sme_bound) << ',' << cell(ts) << ','
         << cell(p.sme_log_failure) << "\n";
    }
    path = dir / (c.name + ".bounds.csv");
    write_file(path, os.str());
  } else {
    nlohmann::ordered_json j;
    j["config_hash"] = hash;
    j["bmsb"] = nlohmann::ordered_json::parse(bmsb_to_json(est));
    j["delta"] = c.bounds.delta;
    j["epsilon"] = c.bounds.epsilon;
    j["lse_burn_in"] = burn_in;
    j["theta_norm_2"] = norm;
    auto arr = nlohmann::ordered_json::array();
    for (const auto& p : curves) {
      nlohmann::ordered_json e;
      e["T"] = p.T;
      e["lse_bound"] = p.lse_bound ? nlohmann::ordered_json(*p.lse_bound) : nullptr;
      e["sme_m"] = p.m ? nlohmann::ordered_json(*p.m) : nullptr;
      e["sme_bound"] = p.sme_bound ? nlohmann::ordered_json(*p.sme_bound) : nullptr;
      e["sme_log_failure"] =
          p.sme_log_failure ? nlohmann::ordered_json(*p.sme_log_failure) : nullptr;
      arr.push_back(e);
    }
    j["curves"] = arr;
    path = dir / (c.name + ".bounds.json");
    write_file(path, j.dump(2) + "\n");
  }
  out << "wrote " << path.string() << "\n";
  return kExitOk;
}

int cmd_reproduce(const std::string& id, const CommonArgs& args,
                  bool dump_config, std::ostream& out, std::ostream& err) {
  ExperimentConfig c = canned_config(id);
  if (args.seed) c.seed = *args.seed;
  if (dump_config) {
    out << config_to_json(c).dump(2) << "\n";
    return kExitOk;
  }
  return report_sweep(run_sweep(c), args, out, err);
}

}  // namespace

int cli_main(int argc, const char* const* argv, std::ostream& out,
             std::ostream& err) {
  CLI::App app{"System identification toolkit: LSE and set-membership "
               "estimation for linearly parameterized nonlinear systems",
               "nlsysid"};
  app.require_subcommand(1);

  CommonArgs sim_args, lse_args, sme_args, bmsb_args, bounds_args, repro_args;
  std::optional<int> horizon;
  std::string figure;
  bool dump_config = false;

  auto* sim = app.add_subcommand("simulate", "simulate one trajectory and dump it");
  add_common(sim, sim_args, true);
  sim->add_option("--horizon", horizon, "trajectory length (default: last T_grid entry)");

  auto* lse = app.add_subcommand("lse-sweep", "least-squares convergence sweep");
  add_common(lse, lse_args, true);
  auto* sme = app.add_subcommand("sme-sweep", "set-membership convergence sweep");
  add_common(sme, sme_args, true);
  auto* bmsb = app.add_subcommand("bmsb-estimate", "Monte-Carlo small-ball constants");
  add_common(bmsb, bmsb_args, true);
  auto* bounds = app.add_subcommand("bounds", "theoretical curves from a saved BMSB estimate");
  add_common(bounds, bounds_args, true);

  auto* repro = app.add_subcommand("reproduce", "run a canned figure configuration");
  add_common(repro, repro_args, false);
  std::string ids;
  for (const auto& id : canned_ids()) ids += (ids.empty() ? "" : ", ") + id;
  repro->add_option("figure", figure, "figure id: " + ids)
      ->required()
      ->check(CLI::IsMember(canned_ids()));
  repro->add_flag("--dump-config", dump_config, "print the canned config and exit");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (*sim) return cmd_simulate(sim_args, horizon, out);
    if (*lse) return cmd_sweep(lse_args, true, out, err);
    if (*sme) return cmd_sweep(sme_args, false, out, err);
    if (*bmsb) return cmd_bmsb(bmsb_args, out);
    if (*bounds) return cmd_bounds(bounds_args, out);
    if (*repro) {
      if (!repro_args.config_path.empty())
        throw ConfigError("reproduce takes a figure id, not --config");
      return cmd_reproduce(figure, repro_args, dump_config, out, err);
    }
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
  return kExitUsage;
}

}  // namespace nlsysid
