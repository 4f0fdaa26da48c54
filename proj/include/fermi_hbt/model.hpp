#pragma once

#include <array>

namespace fermi_hbt::model {

/// hbar in neV * ns.
inline constexpr double kHbarNeVNs = 658.2119569;

/// Error function, clamped to +-1 for |x| >= 6. Backed by std::erf.
double erf(double x);

/// Test hook: adds `eps` to every erf() result (0 disables). Used by the
/// self-test fault injection; never set in normal operation.
void set_erf_perturbation(double eps);
double erf_perturbation();

/// Gaussian dip 1 - c(t) = alpha exp(-beta t^2), beta = 1 / (2 tau_c^2), seen
/// through a Gaussian timing kernel sqrt(W/pi) exp(-W t^2), W = 1 / tau_t^2,
/// and a start-stop window of length delta.
struct BroadenedModel {
  double alpha = 1.0;
  double tau_c_ns = 120.0;
  double tau_t_ns = 140.0;  // 0 means no broadening
  double delta_ns = 400.0;
  double baseline = 1.0;

  double beta() const { return 1.0 / (2.0 * tau_c_ns * tau_c_ns); }
  /// W = 1 / tau_t^2; +inf for tau_t = 0.
  double kernel_w() const;
  /// 1/gamma = 1/beta + 1/W.
  double gamma() const { return 1.0 / (2.0 * tau_c_ns * tau_c_ns + tau_t_ns * tau_t_ns); }

  /// Throws std::domain_error on non-finite or out-of-range parameters.
  void validate() const;
};

/// Closed form
///   b - alpha / (2 delta) sqrt(pi / beta) [erf(sqrt(gamma)(t + delta)) - erf(sqrt(gamma) t)]
/// for t >= 0.
double c_exp_closed(double t_ns, const BroadenedModel& m);

/// d c_exp_closed / d(alpha, tau_c, baseline).
std::array<double, 3> c_exp_gradient(double t_ns, const BroadenedModel& m);

struct QuadratureValue {
  double value = 0.0;
  double error = 0.0;  // accumulated error estimate
};

/// Independent evaluation of the windowed, broadened coincidence rate:
/// (1/delta) int_t^{t+delta} dt' int W(s) c(t' - s) ds, with the kernel
/// integral truncated to |s| <= 8 tau_t, both levels by adaptive
/// Gauss-Kronrod. Throws NumericalError when the error estimate exceeds tol.
QuadratureValue c_exp_quadrature(double t_ns, const BroadenedModel& m, double tol);

/// Dip at zero lag: b - c_exp_closed(0).
double dip_depth(const BroadenedModel& m);

/// rms energy spread hbar / tau_c in neV. Throws std::domain_error for tau_c <= 0.
double coherence_to_energy(double tau_c_ns);

}  // namespace fermi_hbt::model
