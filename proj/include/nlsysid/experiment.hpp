#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "nlsysid/bmsb.hpp"
#include "nlsysid/model.hpp"
#include "nlsysid/noise.hpp"

namespace nlsysid {

inline constexpr int kConfigVersion = 1;

struct ModelConfig {
  std::string name = "pendulum";  // pendulum | quadrotor | linear-scalar
  PendulumParams pendulum;
  QuadrotorParams quadrotor;
  double scalar_a = 0.9;
};

struct PolicyConfig {
  PolicyKind kind = PolicyKind::kFeedbackPlusNoise;
  double k = 2.0;  // pendulum damping gain
  QuadrotorGains quad_gains;
};

struct SmeConfig {
  double prior_half_width = 100.0;
  int prune_interval = 25;
  /// Pairs of unknown-coordinate indices (row-major unknown order).
  std::vector<std::pair<int, int>> projections;
  /// Diameter and truth audit after every absorbed datum instead of only at
  /// grid horizons.
  bool audit_every_step = false;
};

struct BoundsConfig {
  double delta = 0.05;
  double epsilon = 0.05;
};

struct ExperimentConfig {
  std::string name = "experiment";
  ModelConfig model;
  PolicyConfig policy;
  NoiseSpec input_noise = NoiseSpec::uniform(1, 1.0);
  NoiseSpec disturbance = NoiseSpec::uniform(2, 1.0);
  /// Multiplies bound and sigma of both noise specs before use.
  double noise_scale = 1.0;
  std::vector<int> T_grid;
  int trials = 1;
  std::uint64_t seed = 0;
  bool run_lse = true;
  bool run_sme = false;
  std::optional<double> guard_radius;
  SmeConfig sme;
  BmsbOptions bmsb;
  /// Load the small-ball estimate from this file instead of estimating it.
  std::optional<std::string> bmsb_file;
  /// Skip theoretical curves entirely.
  bool theory = true;
  BoundsConfig bounds;

  /// Throws ConfigError on any invalid field.
  void validate() const;
  NoiseSpec effective_input_noise() const;
  NoiseSpec effective_disturbance() const;
};

/// Parses schema v1; throws ConfigError naming the offending field.
ExperimentConfig config_from_json(const nlohmann::json& j);
ExperimentConfig load_config(const std::string& path);
nlohmann::ordered_json config_to_json(const ExperimentConfig& config);
/// FNV-1a 64 of the canonical JSON dump, as 16 hex digits.
std::string config_hash(const ExperimentConfig& config);

SystemModel build_model(const ModelConfig& config);
ControlPolicy build_policy(const ExperimentConfig& config,
                           const SystemModel& model);

/// `count` log-spaced integers over [lo, hi], strictly increasing.
std::vector<int> log_grid(int lo, int hi, int count);

/// Canned configurations: fig1a..fig1d (LSE), fig2a..fig2d (SME), fig3b,
/// fig3c (pendulum SME set evolution), fig4 (quadrotor SME projections).
std::vector<std::string> canned_ids();
ExperimentConfig canned_config(const std::string& id);

struct SweepRecord {
  int T = 0;
  int trial = 0;
  std::optional<double> lse_err_norm;
  std::optional<double> sme_diam_norm;
  std::optional<bool> truth_member;
  bool guard = false;
  std::string error;  // nonempty when the trial failed
};

struct Aggregate {
  int T = 0;
  int count = 0;  // successful trials
  std::optional<double> lse_mean, lse_std;
  std::optional<double> sme_mean, sme_std;
  std::optional<double> theo_lse;
  std::optional<double> theo_sme;
  std::optional<long> sme_m;
};

struct ProjectionRecord {
  int T = 0;
  int trial = 0;
  int coord_a = 0;
  int coord_b = 0;
  bool exact = true;
  bool same_row = true;
  std::vector<Eigen::Vector2d> vertices;
  Eigen::Vector2d truth = Eigen::Vector2d::Zero();
};

struct TrialAudit {
  long truth_checks = 0;
  long truth_failures = 0;
  long nesting_checks = 0;
  long nesting_failures = 0;
  double max_diameter_increase = 0.0;
};

struct SweepResult {
  ExperimentConfig config;
  std::string hash;
  double theta_norm = 0.0;  // |theta*|_2, the normalization divisor
  std::vector<SweepRecord> records;  // T-major, then trial
  std::vector<Aggregate> aggregates;
  std::vector<ProjectionRecord> projections;
  std::vector<TrialAudit> audits;  // per trial
  std::optional<BmsbEstimate> bmsb;
  std::optional<double> lse_slope;
  std::optional<double> sme_slope;
  int failed_trials = 0;
  long burn_in = 0;
  double sigma_w = 0.0;
  double c_w = 0.0;

  /// More than 10% of trials failed.
  bool failed() const;
};

/// Simulates each trial once at the largest horizon and evaluates the
/// selected estimators on every prefix in the grid. Trials run concurrently;
/// results are stored by index so the output is schedule independent. Trial
/// errors are recorded, not thrown. `bmsb` overrides the configured source.
SweepResult run_sweep(const ExperimentConfig& config,
                      const std::optional<BmsbEstimate>& bmsb = std::nullopt);

/// OLS slope of log(values) against log(horizons). Throws DomainError on a
/// nonpositive value and ContractViolation with fewer than 3 points.
double fit_loglog_slope(const std::vector<double>& horizons,
                        const std::vector<double>& values);

/// Writers return the paths they created, relative names under `dir`.
std::vector<std::string> write_sweep(const SweepResult& result,
                                     const std::string& dir,
                                     const std::string& format);
std::string sweep_csv(const SweepResult& result);
nlohmann::ordered_json sweep_meta(const SweepResult& result);

/// Theoretical curves at each grid horizon from a small-ball estimate.
struct BoundCurvePoint {
  int T = 0;
  std::optional<double> lse_bound;
  std::optional<long> m;
  std::optional<double> sme_bound;
  std::optional<double> sme_log_failure;
};

std::vector<BoundCurvePoint> bound_curves(const ExperimentConfig& config,
                                          const SystemModel& model,
                                          const BmsbEstimate& bmsb,
                                          long* burn_in = nullptr);

/// Shortest round-trip decimal text of a double.
std::string format_double(double v);

}  // namespace nlsysid
