#include "nlsysid/experiment.hpp"

#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>

#include "nlsysid/bounds.hpp"
#include "nlsysid/error.hpp"
#include "nlsysid/lse.hpp"
#include "nlsysid/parallel.hpp"
#include "nlsysid/sme.hpp"

namespace nlsysid {

std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

bool SweepResult::failed() const {
  return failed_trials * 10 > config.trials;
}

double fit_loglog_slope(const std::vector<double>& horizons,
                        const std::vector<double>& values) {
  if (horizons.size() != values.size())
    throw ContractViolation("slope fit needs equally many horizons and values");
  if (horizons.size() < 3)
    throw ContractViolation("slope fit needs at least 3 points");
  const std::size_t n = horizons.size();
  double mx = 0.0, my = 0.0;
  std::vector<double> lx(n), ly(n);
  for (std::size_t i = 0; i < n; ++i) {
    if (!(values[i] > 0.0) || !(horizons[i] > 0.0))
      throw DomainError("slope fit needs positive horizons and values");
    lx[i] = std::log(horizons[i]);
    ly[i] = std::log(values[i]);
    mx += lx[i];
    my += ly[i];
  }
  mx /= n;
  my /= n;
  double sxy = 0.0, sxx = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    sxy += (lx[i] - mx) * (ly[i] - my);
    sxx += (lx[i] - mx) * (lx[i] - mx);
  }
  if (sxx == 0.0) throw DomainError("slope fit needs distinct horizons");
  return sxy / sxx;
}

std::vector<BoundCurvePoint> bound_curves(const ExperimentConfig& config,
                                          const SystemModel& model,
                                          const BmsbEstimate& bmsb,
                                          long* burn_in) {
  const NoiseSpec w = config.effective_disturbance();
  BoundInputs in;
  in.n_x = model.dims().n_x;
  in.n_phi = model.dims().n_phi;
  in.sigma_w = noise_std(w);
  in.delta = config.bounds.delta;
  in.epsilon = config.bounds.epsilon;
  in.c_w = tightness_coefficient(w);
  in.set_bmsb(bmsb);
  const long b = lse_burn_in(in);
  if (burn_in) *burn_in = b;

  std::vector<BoundCurvePoint> out;
  for (int T : config.T_grid) {
    BoundCurvePoint pt;
    pt.T = T;
    in.T = T;
    if (T >= b) pt.lse_bound = lse_error_bound(in);
    try {
      const long m = sme_m_choice(in);
      pt.m = m;
      if (T > m) {
        in.m = m;
        pt.sme_bound = sme_diameter_bound(in);
        pt.sme_log_failure = sme_failure_log_prob(in, *pt.sme_bound);
      }
    } catch (const DomainError&) {
    }
    out.push_back(pt);
  }
  return out;
}

namespace {

struct TrialOutput {
  std::vector<SweepRecord> records;  // one per grid T
  std::vector<ProjectionRecord> projections;
  TrialAudit audit;
  std::string error;
};

Eigen::Vector2d truth_pair(const SystemModel& model, int a, int b) {
  const auto entries = model.theta.unknown_entries();
  return {model.theta.entries(entries[a].row, entries[a].col),
          model.theta.entries(entries[b].row, entries[b].col)};
}

TrialOutput run_trial(const ExperimentConfig& config, const SystemModel& model,
                      const ControlPolicy& policy, const NoiseSpec& disturbance,
                      double theta_norm, int trial) {
  TrialOutput out;
  const auto& grid = config.T_grid;
  for (int T : grid) out.records.push_back({T, trial, {}, {}, {}, false, ""});
  try {
    SimulationOptions opts;
    opts.guard_radius = config.guard_radius;
    const SeedStream streams(config.seed, "trial/" + std::to_string(trial));
    const Trajectory traj =
        simulate(model, policy, disturbance, grid.back(), streams, opts);

    const double radius = config.guard_radius.value_or(model.guard_radius);
    int first_trip = std::numeric_limits<int>::max();
    for (int t = 0; t <= traj.length; ++t) {
      if (traj.states.row(t).norm() > radius) {
        first_trip = t;
        break;
      }
    }
    for (auto& r : out.records) r.guard = first_trip <= r.T;

    if (config.run_lse) {
      for (auto& r : out.records)
        r.lse_err_norm = solve_lse(traj, model, r.T).normalized_error;
    }

    if (config.run_sme) {
      SmeState state = sme_init(model, disturbance.bound,
                                config.sme.prior_half_width,
                                config.sme.prune_interval);
      double prev = sme_diameter(state).value;
      std::size_t next = 0;
      for (int t = 0; t < grid.back(); ++t) {
        sme_update(state, traj.states.row(t + 1).transpose(),
                   traj.features.row(t).transpose(), model);
        const bool at_grid = t + 1 == grid[next];
        if (config.sme.audit_every_step || at_grid) {
          const double d = sme_diameter(state).value;
          TrialAudit& a = out.audit;
          ++a.nesting_checks;
          if (d > prev + 1e-9) ++a.nesting_failures;
          a.max_diameter_increase = std::max(a.max_diameter_increase, d - prev);
          prev = d;
          ++a.truth_checks;
          const bool member = sme_contains_truth(state, model);
          if (!member) ++a.truth_failures;
          if (at_grid) {
            SweepRecord& r = out.records[next];
            r.sme_diam_norm = d / theta_norm;
            r.truth_member = member;
            if (trial == 0) {
              for (const auto& [ca, cb] : config.sme.projections) {
                const Projection2d p = sme_project_2d(state, model, ca, cb);
                out.projections.push_back({r.T, trial, ca, cb, p.exact,
                                            p.same_row, p.vertices,
                                            truth_pair(model, ca, cb)});
              }
            }
            ++next;
          }
        }
      }
    }
  } catch (const std::exception& e) {
    out.error = e.what();
    for (auto& r : out.records) {
      r.lse_err_norm.reset();
      r.sme_diam_norm.reset();
      r.truth_member.reset();
      r.error = out.error;
    }
    out.projections.clear();
  }
  return out;
}

void mean_std(const std::vector<double>& v, std::optional<double>& mean,
              std::optional<double>& stdev) {
  if (v.empty()) return;
  double m = 0.0;
  for (double x : v) m += x;
  m /= static_cast<double>(v.size());
  double ss = 0.0;
  for (double x : v) ss += (x - m) * (x - m);
  mean = m;
  stdev = v.size() > 1 ? std::sqrt(ss / static_cast<double>(v.size() - 1)) : 0.0;
}

}  // namespace

SweepResult run_sweep(const ExperimentConfig& config,
                      const std::optional<BmsbEstimate>& bmsb) {
  config.validate();
  SweepResult res;
  res.config = config;
  res.hash = config_hash(config);
  const SystemModel model = build_model(config.model);
  const ControlPolicy policy = build_policy(config, model);
  const NoiseSpec disturbance = config.effective_disturbance();
  res.theta_norm = spectral_norm(model.theta.entries);
  res.sigma_w = noise_std(disturbance);
  res.c_w = tightness_coefficient(disturbance);

  std::vector<TrialOutput> trials(config.trials);
  parallel_for(trials.size(), [&](std::size_t i) {
    trials[i] = run_trial(config, model, policy, disturbance, res.theta_norm,
                          static_cast<int>(i));
  });

  const std::size_t G = config.T_grid.size();
  for (std::size_t g = 0; g < G; ++g)
    for (const auto& tr : trials) res.records.push_back(tr.records[g]);
  for (auto& tr : trials) {
    if (!tr.error.empty()) ++res.failed_trials;
    res.audits.push_back(tr.audit);
    for (auto& p : tr.projections) res.projections.push_back(std::move(p));
  }

  if (config.theory) {
    if (bmsb) {
      res.bmsb = bmsb;
    } else if (config.bmsb_file) {
      std::ifstream in(*config.bmsb_file);
      if (!in)
        throw ConfigError("cannot open BMSB estimate '" + *config.bmsb_file + "'");
      std::stringstream buf;
      buf << in.rdbuf();
      res.bmsb = bmsb_from_json(buf.str());
    } else {
      BmsbOptions opts = config.bmsb;
      opts.seed = derive_seed(config.seed, "bmsb");
      res.bmsb = estimate_bmsb(model, policy, disturbance, opts);
    }
  }
  std::vector<BoundCurvePoint> curves;
  if (res.bmsb) curves = bound_curves(config, model, *res.bmsb, &res.burn_in);

  std::vector<double> ts, lse_means, sme_means;
  for (std::size_t g = 0; g < G; ++g) {
    Aggregate a;
    a.T = config.T_grid[g];
    std::vector<double> lse, sme;
    for (const auto& tr : trials) {
      const SweepRecord& r = tr.records[g];
      if (!r.error.empty()) continue;
      ++a.count;
      if (r.lse_err_norm) lse.push_back(*r.lse_err_norm);
      if (r.sme_diam_norm) sme.push_back(*r.sme_diam_norm);
    }
    mean_std(lse, a.lse_mean, a.lse_std);
    mean_std(sme, a.sme_mean, a.sme_std);
    if (!curves.empty()) {
      const BoundCurvePoint& c = curves[g];
      if (c.lse_bound) a.theo_lse = *c.lse_bound / res.theta_norm;
      if (c.sme_bound) a.theo_sme = *c.sme_bound / res.theta_norm;
      a.sme_m = c.m;
    }
    res.aggregates.push_back(a);
  }

  auto slope_of = [&](auto member) -> std::optional<double> {
    std::vector<double> t, v;
    for (const auto& a : res.aggregates) {
      const auto& m = a.*member;
      if (m && *m > 0.0) {
        t.push_back(a.T);
        v.push_back(*m);
      }
    }
    if (t.size() < 3) return std::nullopt;
    return fit_loglog_slope(t, v);
  };
  if (config.run_lse) res.lse_slope = slope_of(&Aggregate::lse_mean);
  if (config.run_sme) res.sme_slope = slope_of(&Aggregate::sme_mean);
  return res;
}

// ---------------------------------------------------------------------------
// Output.

namespace {

std::string opt_cell(const std::optional<double>& v) {
  return v ? format_double(*v) : "";
}

nlohmann::ordered_json opt_json(const std::optional<double>& v) {
  return v ? nlohmann::ordered_json(*v) : nlohmann::ordered_json(nullptr);
}

std::string coord_label(const SystemModel& model, int coord) {
  const auto e = model.theta.unknown_entries().at(coord);
  return "theta[" + model.state_labels.at(e.row) + "][" +
         model.features.labels.at(e.col) + "]";
}

std::string projection_name(const SweepResult& r, const ProjectionRecord& p) {
  return r.config.name + ".proj_" + std::to_string(p.coord_a) + "_" +
         std::to_string(p.coord_b) + "_T" + std::to_string(p.T) + ".json";
}

nlohmann::ordered_json projection_json(const SweepResult& r,
                                       const SystemModel& model,
                                       const ProjectionRecord& p) {
  nlohmann::ordered_json j;
  j["config_hash"] = r.hash;
  j["T"] = p.T;
  j["trial"] = p.trial;
  j["coords"] = {p.coord_a, p.coord_b};
  j["labels"] = {coord_label(model, p.coord_a), coord_label(model, p.coord_b)};
  j["exact"] = p.exact;
  j["same_row"] = p.same_row;
  j["truth"] = {p.truth.x(), p.truth.y()};
  auto verts = nlohmann::ordered_json::array();
  for (const auto& v : p.vertices) verts.push_back({v.x(), v.y()});
  j["vertices"] = verts;
  return j;
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write '" + path.string() + "'");
  out << text;
  if (!out) throw Error("failed writing '" + path.string() + "'");
}

}  // namespace

std::string sweep_csv(const SweepResult& r) {
  std::ostringstream os;
  os << "# config_hash=" << r.hash << " seed=" << r.config.seed
     << " theta_norm_2=" << format_double(r.theta_norm) << "\n";
  os << "T,trial,lse_err_norm,sme_diam_norm,truth_member,guard,theo_lse,theo_sme\n";
  const int n = r.config.trials;
  for (std::size_t g = 0; g < r.aggregates.size(); ++g) {
    const Aggregate& a = r.aggregates[g];
    bool all_member = true, any_member = false, any_guard = false;
    for (int i = 0; i < n; ++i) {
      const SweepRecord& rec = r.records[g * n + i];
      os << rec.T << ',' << rec.trial << ',' << opt_cell(rec.lse_err_norm) << ','
         << opt_cell(rec.sme_diam_norm) << ','
         << (rec.truth_member ? (*rec.truth_member ? "true" : "false") : "") << ','
         << (rec.guard ? "true" : "false") << ",,\n";
      if (rec.truth_member) {
        any_member = true;
        all_member = all_member && *rec.truth_member;
      }
      any_guard = any_guard || rec.guard;
    }
    os << a.T << ",mean," << opt_cell(a.lse_mean) << ',' << opt_cell(a.sme_mean)
       << ',' << (any_member ? (all_member ? "true" : "false") : "") << ','
       << (any_guard ? "true" : "false") << ',' << opt_cell(a.theo_lse) << ','
       << opt_cell(a.theo_sme) << '\n';
  }
  return os.str();
}

nlohmann::ordered_json sweep_meta(const SweepResult& r) {
  nlohmann::ordered_json j;
  j["config_hash"] = r.hash;
  j["seed"] = r.config.seed;
  j["config"] = config_to_json(r.config);
  j["normalization"] = {{"theta_norm_2", r.theta_norm}};
  nlohmann::ordered_json noise;
  const NoiseSpec u = r.config.effective_input_noise();
  const NoiseSpec w = r.config.effective_disturbance();
  noise["input_noise"] = {{"kind", to_string(u.kind)}, {"bound", u.bound},
                          {"sigma", u.sigma}, {"dimension", u.dimension}};
  noise["disturbance"] = {{"kind", to_string(w.kind)}, {"bound", w.bound},
                          {"sigma", w.sigma}, {"dimension", w.dimension}};
  j["effective_noise"] = noise;

  nlohmann::ordered_json theory;
  if (r.bmsb) {
    theory["bmsb"] = nlohmann::ordered_json::parse(bmsb_to_json(*r.bmsb));
    theory["sigma_w"] = r.sigma_w;
    theory["c_w"] = r.c_w;
    theory["delta"] = r.config.bounds.delta;
    theory["epsilon"] = r.config.bounds.epsilon;
    theory["lse_burn_in"] = r.burn_in;
    auto ms = nlohmann::ordered_json::array();
    for (const auto& a : r.aggregates)
      ms.push_back(a.sme_m ? nlohmann::ordered_json(*a.sme_m) : nullptr);
    theory["sme_m"] = ms;
    theory["sme_normalization"] = "theta_norm_2";
  }
  j["theory"] = theory;

  auto aggs = nlohmann::ordered_json::array();
  for (const auto& a : r.aggregates) {
    nlohmann::ordered_json e;
    e["T"] = a.T;
    e["count"] = a.count;
    e["lse_mean"] = opt_json(a.lse_mean);
    e["lse_std"] = opt_json(a.lse_std);
    e["sme_mean"] = opt_json(a.sme_mean);
    e["sme_std"] = opt_json(a.sme_std);
    e["theo_lse"] = opt_json(a.theo_lse);
    e["theo_sme"] = opt_json(a.theo_sme);
    aggs.push_back(e);
  }
  j["aggregates"] = aggs;
  j["slopes"] = {{"lse", opt_json(r.lse_slope)}, {"sme", opt_json(r.sme_slope)}};

  nlohmann::ordered_json audit;
  long tc = 0, tf = 0, nc = 0, nf = 0;
  double inc = 0.0;
  for (const auto& a : r.audits) {
    tc += a.truth_checks;
    tf += a.truth_failures;
    nc += a.nesting_checks;
    nf += a.nesting_failures;
    inc = std::max(inc, a.max_diameter_increase);
  }
  audit["truth_checks"] = tc;
  audit["truth_failures"] = tf;
  audit["nesting_checks"] = nc;
  audit["nesting_failures"] = nf;
  audit["max_diameter_increase"] = inc;
  j["sme_audit"] = audit;

  auto failures = nlohmann::ordered_json::array();
  const int n = r.config.trials;
  for (int i = 0; i < n; ++i) {
    const SweepRecord& rec = r.records[i];
    if (!rec.error.empty()) failures.push_back({{"trial", i}, {"error", rec.error}});
  }
  j["failed_trials"] = r.failed_trials;
  j["failures"] = failures;
  return j;
}

std::vector<std::string> write_sweep(const SweepResult& r, const std::string& dir,
                                     const std::string& format) {
  namespace fs = std::filesystem;
  fs::create_directories(dir);
  std::vector<std::string> written;
  const std::string& name = r.config.name;
  if (format == "csv") {
    write_text(fs::path(dir) / (name + ".csv"), sweep_csv(r));
    write_text(fs::path(dir) / (name + ".meta.json"), sweep_meta(r).dump(2) + "\n");
    written.push_back(name + ".csv");
    written.push_back(name + ".meta.json");
  } else if (format == "json") {
    nlohmann::ordered_json j = sweep_meta(r);
    auto recs = nlohmann::ordered_json::array();
    for (const auto& rec : r.records) {
      nlohmann::ordered_json e;
      e["T"] = rec.T;
      e["trial"] = rec.trial;
      e["lse_err_norm"] = opt_json(rec.lse_err_norm);
      e["sme_diam_norm"] = opt_json(rec.sme_diam_norm);
      e["truth_member"] = rec.truth_member ? nlohmann::ordered_json(*rec.truth_member)
                                           : nlohmann::ordered_json(nullptr);
      e["guard"] = rec.guard;
      if (!rec.error.empty()) e["error"] = rec.error;
      recs.push_back(e);
    }
    j["records"] = recs;
    write_text(fs::path(dir) / (name + ".json"), j.dump(2) + "\n");
    written.push_back(name + ".json");
  } else {
    throw ConfigError("unknown output format '" + format + "'");
  }
  if (!r.projections.empty()) {
    const SystemModel model = build_model(r.config.model);
    for (const auto& p : r.projections) {
      const std::string file = projection_name(r, p);
      write_text(fs::path(dir) / file, projection_json(r, model, p).dump(2) + "\n");
      written.push_back(file);
    }
  }
  return written;
}

}  // namespace nlsysid
