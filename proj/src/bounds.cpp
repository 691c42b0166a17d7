#include "nlsysid/bounds.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "nlsysid/bmsb.hpp"
#include "nlsysid/error.hpp"

namespace nlsysid {
namespace {

const double kLog544 = std::log(544.0);

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

// A real number as (sign, log|value|); sign 0 means the value is zero.
struct Signed {
  double sign = 0.0;
  double log_abs = kNegInf;
};

// exp(log_coeff) * log(x), where log(x) may be negative.
Signed times_log(double log_coeff, double x) {
  const double lx = std::log(x);
  if (lx == 0.0) return {};
  return {lx > 0.0 ? 1.0 : -1.0, log_coeff + std::log(std::abs(lx))};
}

// log(max(0, a + b)).
double log_positive_sum(Signed a, Signed b) {
  if (a.sign == 0.0 && b.sign == 0.0) return kNegInf;
  if (a.sign == 0.0) return b.sign > 0.0 ? b.log_abs : kNegInf;
  if (b.sign == 0.0) return a.sign > 0.0 ? a.log_abs : kNegInf;
  const double hi = std::max(a.log_abs, b.log_abs);
  const double total =
      a.sign * std::exp(a.log_abs - hi) + b.sign * std::exp(b.log_abs - hi);
  if (!(total > 0.0)) return kNegInf;
  return hi + std::log(total);
}

}  // namespace

void BoundInputs::set_bmsb(const BmsbEstimate& est) {
  s_phi = est.s_phi;
  p_phi = est.p_phi;
  b_phi = est.b_phi;
  b_bar_phi = est.b_bar_phi;
}

void BoundInputs::validate() const {
  if (n_x < 1 || n_phi < 1) throw ContractViolation("n_x and n_phi must be >= 1");
  if (!(delta > 0.0 && delta < 1.0))
    throw ContractViolation("delta must lie in (0, 1)");
  if (!(epsilon > 0.0 && epsilon < 1.0))
    throw ContractViolation("epsilon must lie in (0, 1)");
  if (!(s_phi > 0.0)) throw ContractViolation("s_phi must be > 0");
  if (!(p_phi > 0.0 && p_phi < 1.0))
    throw ContractViolation("p_phi must lie in (0, 1)");
  if (!(sigma_w >= 0.0)) throw ContractViolation("sigma_w must be >= 0");
  if (T < 1) throw ContractViolation("T must be >= 1");
}

SmeConstants sme_constants(const BoundInputs& in) {
  const double sp = in.s_phi * in.p_phi;
  SmeConstants k;
  k.a1 = sp / 4.0;
  k.a2 = 64.0 * in.b_phi * in.b_phi / (sp * sp);
  k.a3 = in.p_phi * in.p_phi / 8.0;
  k.a4 = 16.0 * in.b_phi * std::sqrt(static_cast<double>(in.n_x)) / sp;
  return k;
}

namespace {

double lse_log_sum(const BoundInputs& in) {
  const double p = in.p_phi;
  const double s2 = in.s_phi * in.s_phi;
  return std::log(1.0 / in.delta) + in.n_phi * std::log(10.0 / p) +
         in.n_phi * std::log(in.b_bar_phi / (in.delta * s2));
}

}  // namespace

long lse_burn_in(const BoundInputs& in) {
  in.validate();
  if (!(in.b_bar_phi > 0.0)) throw ContractViolation("b_bar_phi must be > 0");
  const double p = in.p_phi;
  const double value = (10.0 / p) * (lse_log_sum(in) + in.n_phi * std::log(10.0 / p));
  return static_cast<long>(std::ceil(value));
}

double lse_error_bound(const BoundInputs& in) {
  const long burn_in = lse_burn_in(in);
  if (in.T < burn_in)
    throw PreconditionError("LSE bound requires T >= " + std::to_string(burn_in) +
                            ", got T = " + std::to_string(in.T));
  const double s2 = in.s_phi * in.s_phi;
  const double inner = (in.n_x + lse_log_sum(in)) / (static_cast<double>(in.T) * s2);
  return 90.0 * in.sigma_w / in.p_phi * std::sqrt(inner);
}

double sme_failure_log_prob(const BoundInputs& in, double diameter_threshold) {
  in.validate();
  if (!(in.b_phi > 0.0)) throw ContractViolation("b_phi must be > 0");
  if (!(in.c_w > 0.0)) throw ContractViolation("c_w must be > 0");
  if (!(diameter_threshold > 0.0))
    throw ContractViolation("diameter threshold must be > 0");
  if (in.m < 1 || in.T <= in.m)
    throw PreconditionError("SME failure bound requires T > m >= 1 (T = " +
                            std::to_string(in.T) + ", m = " +
                            std::to_string(in.m) + ")");
  const SmeConstants k = sme_constants(in);
  const double nphi = in.n_phi;
  const double nxnphi = static_cast<double>(in.n_x) * in.n_phi;
  const double T = static_cast<double>(in.T);
  const double m = static_cast<double>(in.m);

  const double log_c1 = kLog544 + std::log(T / m) + 2.5 * std::log(nphi) +
                        nphi * std::log(k.a2) - k.a3 * m;
  const Signed term1 = times_log(log_c1, k.a2 * nphi);

  const double q = std::min(
      in.c_w * k.a1 * diameter_threshold / (4.0 * std::sqrt(static_cast<double>(in.n_x))),
      1.0);
  Signed term2;
  if (q < 1.0) {
    const double blocks = std::ceil(T / m);
    const double log_c2 = kLog544 + 2.5 * std::log(static_cast<double>(in.n_x)) +
                          2.5 * std::log(nphi) + nxnphi * std::log(k.a4) +
                          blocks * std::log1p(-q);
    term2 = times_log(log_c2, k.a4 * nxnphi);
  }
  return log_positive_sum(term1, term2);
}

double sme_failure_prob(const BoundInputs& in, double diameter_threshold) {
  return std::exp(sme_failure_log_prob(in, diameter_threshold));
}

long sme_m_choice(const BoundInputs& in) {
  in.validate();
  if (!(in.b_phi > 0.0)) throw ContractViolation("b_phi must be > 0");
  const SmeConstants k = sme_constants(in);
  const double nphi = in.n_phi;
  if (!(k.a2 * nphi > 1.0))
    throw DomainError("m-choice needs a2 * n_phi > 1 (got " +
                      std::to_string(k.a2 * nphi) + ")");
  const double value =
      (std::log(static_cast<double>(in.T) / in.epsilon) + nphi * std::log(k.a2) +
       2.5 * std::log(nphi) + std::log(std::log(k.a2 * nphi)) + kLog544) /
      k.a3;
  return static_cast<long>(std::ceil(value));
}

double sme_diameter_bound(const BoundInputs& in) {
  in.validate();
  if (!(in.b_phi > 0.0)) throw ContractViolation("b_phi must be > 0");
  if (!(in.c_w > 0.0)) throw ContractViolation("c_w must be > 0");
  if (in.m < 1 || in.T <= in.m)
    throw PreconditionError("SME diameter bound requires T > m >= 1 (T = " +
                            std::to_string(in.T) + ", m = " +
                            std::to_string(in.m) + ")");
  const SmeConstants k = sme_constants(in);
  const double nxnphi = static_cast<double>(in.n_x) * in.n_phi;
  if (!(k.a4 * nxnphi > 1.0))
    throw DomainError("diameter bound needs a4 * n_x * n_phi > 1 (got " +
                      std::to_string(k.a4 * nxnphi) + ")");
  const double logs = std::log(1.0 / in.epsilon) + nxnphi * std::log(k.a4) +
                      2.5 * std::log(nxnphi) + std::log(std::log(k.a4 * nxnphi)) +
                      kLog544;
  return 4.0 * std::sqrt(static_cast<double>(in.n_x)) * static_cast<double>(in.m) /
         (in.c_w * k.a1 * static_cast<double>(in.T)) * logs;
}

}  // namespace nlsysid
