#pragma once

namespace nlsysid {

struct BmsbEstimate;

/// Inputs shared by the LSE and SME guarantees. Logarithms are natural.
struct BoundInputs {
  int n_x = 1;
  int n_phi = 1;
  double sigma_w = 0.0;  // per-component disturbance standard deviation
  double delta = 0.05;   // LSE confidence parameter
  double epsilon = 0.05; // SME confidence parameter
  double s_phi = 0.0;
  double p_phi = 0.0;
  double b_phi = 0.0;
  double b_bar_phi = 0.0;
  double c_w = 0.0;
  long T = 1;
  long m = 1;  // SME block length

  void set_bmsb(const BmsbEstimate& est);
  /// Throws ContractViolation on out-of-range fields.
  void validate() const;
};

struct SmeConstants {
  double a1 = 0.0;  // s p / 4
  double a2 = 0.0;  // 64 b^2 / (s^2 p^2)
  double a3 = 0.0;  // p^2 / 8
  double a4 = 0.0;  // 16 b sqrt(n_x) / (s p)
};

SmeConstants sme_constants(const BoundInputs& in);

/// ceil((10/p)(log(1/delta) + 2 n_phi log(10/p) + n_phi log(b_bar/(delta s^2))))
long lse_burn_in(const BoundInputs& in);

/// (90 sigma_w / p) sqrt((n_x + log(1/delta) + n_phi log(10/p)
///                        + n_phi log(b_bar/(delta s^2))) / (T s^2)).
/// Throws PreconditionError when T is below the burn-in.
double lse_error_bound(const BoundInputs& in);

/// Natural log of the positive part of the SME failure bound
///   544 (T/m) n_phi^2.5 log(a2 n_phi) a2^n_phi exp(-a3 m)
/// + 544 n_x^2.5 n_phi^2.5 log(a4 n_x n_phi) a4^(n_x n_phi)
///       (1 - q_w(a1 delta / (4 sqrt(n_x))))^ceil(T/m)
/// with q_w(l) = min(c_w l, 1); -inf when the bound is zero. Throws
/// PreconditionError unless T > m >= 1.
double sme_failure_log_prob(const BoundInputs& in, double diameter_threshold);

/// exp(sme_failure_log_prob); may overflow to +inf where the bound is
/// vacuous by hundreds of orders of magnitude.
double sme_failure_prob(const BoundInputs& in, double diameter_threshold);

/// ceil((1/a3)(log(T/eps) + n_phi log a2 + 2.5 log n_phi + log log(a2 n_phi)
///             + log 544)). Throws DomainError when a2 n_phi <= 1.
long sme_m_choice(const BoundInputs& in);

/// (4 sqrt(n_x) m)/(c_w a1 T) (log(1/eps) + n_x n_phi log a4
///   + 2.5 log(n_x n_phi) + log log(a4 n_x n_phi) + log 544), using in.m.
/// Throws PreconditionError unless T > m, DomainError when a4 n_x n_phi <= 1.
double sme_diameter_bound(const BoundInputs& in);

}  // namespace nlsysid
