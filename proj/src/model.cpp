#include "fermi_hbt/model.hpp"

#include <algorithm>
#include <atomic>
#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>
#include <stdexcept>
#include <vector>

#include "fermi_hbt/error.hpp"

namespace fermi_hbt::model {

namespace {

std::atomic<double> g_erf_perturbation{0.0};

constexpr double kKernelSpan = 8.0;  // kernel truncated at +-8 tau_t
constexpr double kDipSpan = 9.0;     // dip support breakpoints at +-9 tau_c

using Rule = boost::math::quadrature::gauss_kronrod<double, 61>;
constexpr unsigned kMaxDepth = 20;
constexpr double kEps = std::numeric_limits<double>::epsilon();

// Adaptive integral over consecutive breakpoints to absolute accuracy
// `abs_tol`, shared between pieces by length; accumulates error estimates.
// Interior breakpoints closer than `min_gap` to a kept one are dropped: a
// sliver piece with a near-zero integral would recurse to full depth.
template <typename F>
double integrate_pieces(F f, std::vector<double> breaks, double min_gap, double abs_tol,
                        double& error) {
  std::sort(breaks.begin(), breaks.end());
  const double lo = breaks.front(), hi = breaks.back();
  std::vector<double> kept{lo};
  for (double b : breaks) {
    if (b - kept.back() >= min_gap && hi - b >= min_gap) kept.push_back(b);
  }
  kept.push_back(hi);
  breaks.swap(kept);
  double sum = 0.0;
  for (std::size_t i = 0; i + 1 < breaks.size(); ++i) {
    const double a = breaks[i], b = breaks[i + 1];
    // boost takes a relative tolerance; convert using a one-panel estimate
    const double scale = std::abs(Rule::integrate(f, a, b, 0));
    const double target = abs_tol * (b - a) / (hi - lo);
    const double rel = scale > 0.0 ? std::max(target / scale, 4 * kEps) : 1.0;
    double piece_error = 0.0;
    sum += Rule::integrate(f, a, b, kMaxDepth, rel, &piece_error);
    error += piece_error;
  }
  return sum;
}

}  // namespace

double erf(double x) {
  double v;
  if (x >= 6.0) {
    v = 1.0;
  } else if (x <= -6.0) {
    v = -1.0;
  } else {
    v = std::erf(x);
  }
  return v + g_erf_perturbation.load(std::memory_order_relaxed);
}

void set_erf_perturbation(double eps) { g_erf_perturbation.store(eps); }
double erf_perturbation() { return g_erf_perturbation.load(); }

double BroadenedModel::kernel_w() const {
  return tau_t_ns == 0.0 ? std::numeric_limits<double>::infinity()
                         : 1.0 / (tau_t_ns * tau_t_ns);
}

void BroadenedModel::validate() const {
  const bool finite = std::isfinite(alpha) && std::isfinite(tau_c_ns) &&
                      std::isfinite(tau_t_ns) && std::isfinite(delta_ns) &&
                      std::isfinite(baseline);
  if (!finite) throw std::domain_error("broadened model: non-finite parameter");
  if (!(tau_c_ns > 0.0)) throw std::domain_error("broadened model: tau_c must be > 0");
  if (!(tau_t_ns >= 0.0)) throw std::domain_error("broadened model: tau_t must be >= 0");
  if (!(delta_ns > 0.0)) throw std::domain_error("broadened model: delta must be > 0");
}

double c_exp_closed(double t, const BroadenedModel& m) {
  m.validate();
  if (!std::isfinite(t)) throw std::domain_error("c_exp_closed: non-finite lag");
  if (t < 0.0) throw std::domain_error("c_exp_closed: lag must be >= 0");
  const double root_gamma = std::sqrt(m.gamma());
  const double prefactor = m.alpha / (2.0 * m.delta_ns) * std::sqrt(std::numbers::pi / m.beta());
  return m.baseline -
         prefactor * (erf(root_gamma * (t + m.delta_ns)) - erf(root_gamma * t));
}

std::array<double, 3> c_exp_gradient(double t, const BroadenedModel& m) {
  m.validate();
  const double gamma = m.gamma();
  const double root_gamma = std::sqrt(gamma);
  const double hi = t + m.delta_ns;
  const double bracket = erf(root_gamma * hi) - erf(root_gamma * t);
  // prefactor = alpha sqrt(2 pi) tau_c / (2 delta)
  const double shape = std::sqrt(2.0 * std::numbers::pi) / (2.0 * m.delta_ns);
  const double d_bracket_d_root_gamma =
      2.0 / std::sqrt(std::numbers::pi) *
      (hi * std::exp(-gamma * hi * hi) - t * std::exp(-gamma * t * t));
  const double d_root_gamma_d_tau = -2.0 * m.tau_c_ns * gamma * root_gamma;

  const double d_alpha = -shape * m.tau_c_ns * bracket;
  const double d_tau = -m.alpha * shape *
                       (bracket + m.tau_c_ns * d_bracket_d_root_gamma * d_root_gamma_d_tau);
  return {d_alpha, d_tau, 1.0};
}

QuadratureValue c_exp_quadrature(double t, const BroadenedModel& m, double tol) {
  m.validate();
  if (!(tol > 0.0)) throw std::domain_error("c_exp_quadrature: tol must be > 0");
  const double beta = m.beta();
  // Only the dip 1 - c is integrated; the kernel has unit weight, so the
  // baseline passes through exactly.
  auto dip = [&](double u) { return std::exp(-beta * u * u); };

  const double inner_tol = 0.01 * tol;
  const double min_gap =
      0.25 * (m.tau_t_ns > 0.0 ? std::min(m.tau_c_ns, m.tau_t_ns) : m.tau_c_ns);
  double max_inner_error = 0.0;

  auto broadened = [&](double tp) {
    if (m.tau_t_ns == 0.0) return dip(tp);
    const double half = kKernelSpan * m.tau_t_ns;
    const double norm = 1.0 / (std::sqrt(std::numbers::pi) * m.tau_t_ns);
    auto integrand = [&](double s) {
      const double x = s / m.tau_t_ns;
      return norm * std::exp(-x * x) * dip(tp - s);
    };
    std::vector<double> breaks{-half, 0.0, half};
    for (double k : {-kDipSpan, -1.0, 0.0, 1.0, kDipSpan}) {
      const double b = tp + k * m.tau_c_ns;
      if (b > -half && b < half) breaks.push_back(b);
    }
    double inner_error = 0.0;
    const double v = integrate_pieces(integrand, breaks, min_gap, inner_tol, inner_error);
    max_inner_error = std::max(max_inner_error, inner_error);
    return v;
  };

  std::vector<double> outer{t, t + m.delta_ns};
  // Without broadening the integrand is the bare dip; split near its support.
  for (double k : {1.0, kDipSpan}) {
    const double b = k * m.tau_c_ns;
    if (b > t && b < t + m.delta_ns) outer.push_back(b);
  }
  double outer_error = 0.0;
  const double integral = integrate_pieces(broadened, outer, min_gap, inner_tol * m.delta_ns, outer_error);
  const double value = m.baseline - m.alpha * integral / m.delta_ns;
  // the box average of the inner errors is bounded by their maximum
  const double total_error = std::abs(m.alpha) * (outer_error / m.delta_ns + max_inner_error);
  if (!std::isfinite(value) || total_error > tol) {
    std::ostringstream msg;
    msg << "c_exp_quadrature: error estimate " << total_error << " exceeds tol " << tol
        << " at t = " << t;
    throw NumericalError(msg.str());
  }
  return {value, total_error};
}

double dip_depth(const BroadenedModel& m) {
  return m.baseline - c_exp_closed(0.0, m);
}

double coherence_to_energy(double tau_c_ns) {
  if (!(tau_c_ns > 0.0)) throw std::domain_error("coherence_to_energy: tau_c must be > 0");
  return kHbarNeVNs / tau_c_ns;
}

}  // namespace fermi_hbt::model
