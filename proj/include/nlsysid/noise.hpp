#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <string_view>

#include <Eigen/Core>

namespace nlsysid {

/// Reproducible random stream identified by a root seed and a label path such
/// as "trial/3/disturbance". The engine seed is a hash of (root, label), so
/// streams with distinct labels are independent and need no coordination.
class SeedStream {
 public:
  explicit SeedStream(std::uint64_t root, std::string label = "");

  /// Stream for `label() + "/" + sublabel` under the same root.
  SeedStream child(std::string_view sublabel) const;

  std::uint64_t root() const { return root_; }
  const std::string& label() const { return label_; }

  double uniform(double lo, double hi);
  double standard_normal();
  std::mt19937_64& engine() { return engine_; }

 private:
  std::uint64_t root_;
  std::string label_;
  std::mt19937_64 engine_;
};

/// Seed derived for (root, label); exposed for provenance records.
std::uint64_t derive_seed(std::uint64_t root, std::string_view label);

enum class NoiseKind { kUniformBox, kTruncatedGaussian };

/// Zero-mean bounded noise with independent components:
///   uniform-box         w^j ~ U[-bound, bound]
///   truncated-gaussian  w^j ~ N(0, sigma^2) conditioned on |w^j| <= bound
struct NoiseSpec {
  NoiseKind kind = NoiseKind::kUniformBox;
  int dimension = 1;
  double bound = 1.0;
  double sigma = 0.0;  // truncated-gaussian only

  static NoiseSpec uniform(int dimension, double bound);
  static NoiseSpec truncated_gaussian(int dimension, double sigma,
                                      double bound);

  /// Throws ContractViolation unless bound > 0, dimension > 0, and sigma > 0
  /// for the truncated kind.
  void validate() const;

  /// Same distribution with a different dimension.
  NoiseSpec with_dimension(int dim) const;
};

std::string to_string(NoiseKind kind);
NoiseKind noise_kind_from_string(std::string_view name);

/// One i.i.d. draw of dimension spec.dimension.
Eigen::VectorXd sample(const NoiseSpec& spec, SeedStream& stream);

/// Per-component standard deviation of the distribution.
double noise_std(const NoiseSpec& spec);

/// c_w with P(w^j + w_max <= l) >= c_w * l:
///   uniform            1 / (2 w_max)
///   truncated-gaussian exp(-w_max^2 / (2 sigma^2)) / min(sqrt(2 pi) sigma, 2 w_max)
double tightness_coefficient(const NoiseSpec& spec);

struct RejectionStats {
  std::uint64_t proposals = 0;
  std::uint64_t accepted = 0;
  double acceptance_rate() const {
    return proposals == 0 ? 0.0
                          : static_cast<double>(accepted) /
                                static_cast<double>(proposals);
  }
};

inline constexpr std::uint64_t kMaxRejectionIterations = 10'000'000;

/// Exact truncated-Gaussian draw by rejection: propose N(0, sigma^2) and
/// reject outside [-bound, bound]. When the truncation is so narrow that
/// Gaussian proposals are mostly wasted (bound < sigma / 2) the proposal
/// switches to U[-bound, bound] accepted with probability
/// exp(-x^2 / (2 sigma^2)), which targets the same density. Throws SolverError
/// after kMaxRejectionIterations proposals.
double sample_truncated_gaussian_scalar(double sigma, double bound,
                                        SeedStream& stream,
                                        RejectionStats* stats = nullptr);

}  // namespace nlsysid
