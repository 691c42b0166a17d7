#include "nlsysid/noise.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "nlsysid/error.hpp"

namespace nlsysid {
namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::uint64_t fnv1a(std::string_view text) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

// Below this bound/sigma ratio the uniform proposal accepts more often than
// the Gaussian one by a wide margin.
constexpr double kUniformProposalRatio = 0.5;

}  // namespace

std::uint64_t derive_seed(std::uint64_t root, std::string_view label) {
  return splitmix64(splitmix64(root) ^ fnv1a(label));
}

SeedStream::SeedStream(std::uint64_t root, std::string label)
    : root_(root), label_(std::move(label)), engine_(derive_seed(root_, label_)) {}

SeedStream SeedStream::child(std::string_view sublabel) const {
  std::string full = label_;
  if (!full.empty()) full += '/';
  full += sublabel;
  return SeedStream(root_, std::move(full));
}

double SeedStream::uniform(double lo, double hi) {
  std::uniform_real_distribution<double> dist(lo, hi);
  return dist(engine_);
}

double SeedStream::standard_normal() {
  std::normal_distribution<double> dist(0.0, 1.0);
  return dist(engine_);
}

NoiseSpec NoiseSpec::uniform(int dimension, double bound) {
  NoiseSpec s;
  s.kind = NoiseKind::kUniformBox;
  s.dimension = dimension;
  s.bound = bound;
  s.validate();
  return s;
}

NoiseSpec NoiseSpec::truncated_gaussian(int dimension, double sigma,
                                        double bound) {
  NoiseSpec s;
  s.kind = NoiseKind::kTruncatedGaussian;
  s.dimension = dimension;
  s.sigma = sigma;
  s.bound = bound;
  s.validate();
  return s;
}

void NoiseSpec::validate() const {
  if (dimension <= 0) throw ContractViolation("noise dimension must be positive");
  if (!(bound > 0.0) || !std::isfinite(bound))
    throw ContractViolation("noise bound must be positive and finite");
  if (kind == NoiseKind::kTruncatedGaussian && !(sigma > 0.0))
    throw ContractViolation("truncated-gaussian sigma must be positive");
}

NoiseSpec NoiseSpec::with_dimension(int dim) const {
  NoiseSpec s = *this;
  s.dimension = dim;
  s.validate();
  return s;
}

std::string to_string(NoiseKind kind) {
  return kind == NoiseKind::kUniformBox ? "uniform-box" : "truncated-gaussian";
}

NoiseKind noise_kind_from_string(std::string_view name) {
  if (name == "uniform-box" || name == "uniform") return NoiseKind::kUniformBox;
  if (name == "truncated-gaussian") return NoiseKind::kTruncatedGaussian;
  throw ContractViolation("unknown noise kind '" + std::string(name) + "'");
}

double sample_truncated_gaussian_scalar(double sigma, double bound,
                                        SeedStream& stream,
                                        RejectionStats* stats) {
  if (!(sigma > 0.0) || !(bound > 0.0))
    throw ContractViolation("truncated gaussian needs sigma > 0 and bound > 0");
  const bool uniform_proposal = bound < kUniformProposalRatio * sigma;
  const double inv_two_var = 1.0 / (2.0 * sigma * sigma);
  for (std::uint64_t i = 0; i < kMaxRejectionIterations; ++i) {
    double x;
    bool accept;
    if (uniform_proposal) {
      x = stream.uniform(-bound, bound);
      accept = stream.uniform(0.0, 1.0) < std::exp(-x * x * inv_two_var);
    } else {
      x = sigma * stream.standard_normal();
      accept = std::abs(x) <= bound;
    }
    if (stats) ++stats->proposals;
    if (accept) {
      if (stats) ++stats->accepted;
      return x;
    }
  }
  throw SolverError("truncated gaussian rejection sampler exceeded " +
                    std::to_string(kMaxRejectionIterations) +
                    " proposals (sigma=" + std::to_string(sigma) +
                    ", bound=" + std::to_string(bound) + ")");
}

Eigen::VectorXd sample(const NoiseSpec& spec, SeedStream& stream) {
  Eigen::VectorXd out(spec.dimension);
  for (int j = 0; j < spec.dimension; ++j) {
    if (spec.kind == NoiseKind::kUniformBox) {
      out[j] = stream.uniform(-spec.bound, spec.bound);
    } else {
      out[j] = sample_truncated_gaussian_scalar(spec.sigma, spec.bound, stream);
    }
  }
  return out;
}

double noise_std(const NoiseSpec& spec) {
  if (spec.kind == NoiseKind::kUniformBox) return spec.bound / std::sqrt(3.0);
  // Variance of N(0, s^2) truncated to [-b, b]:
  //   s^2 (1 - 2 a pdf(a) / (2 Phi(a) - 1)),  a = b / s.
  const double a = spec.bound / spec.sigma;
  const double pdf = std::exp(-0.5 * a * a) / std::sqrt(2.0 * std::numbers::pi);
  const double mass = std::erf(a / std::numbers::sqrt2);
  double ratio = 1.0 - 2.0 * a * pdf / mass;
  if (a < 1e-3) ratio = a * a / 3.0;  // series limit, avoids cancellation
  return spec.sigma * std::sqrt(std::max(ratio, 0.0));
}

double tightness_coefficient(const NoiseSpec& spec) {
  spec.validate();
  if (spec.kind == NoiseKind::kUniformBox) return 1.0 / (2.0 * spec.bound);
  const double s = spec.sigma;
  const double w = spec.bound;
  return std::exp(-w * w / (2.0 * s * s)) /
         std::min(std::sqrt(2.0 * std::numbers::pi) * s, 2.0 * w);
}

}  // namespace nlsysid
