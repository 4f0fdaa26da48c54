#include "fermi_hbt/selftest.hpp"

#include <algorithm>
#include <boost/math/distributions/chi_squared.hpp>
#include <chrono>
#include <cmath>
#include <numbers>
#include <sstream>

#include "fermi_hbt/beam.hpp"
#include "fermi_hbt/kernels.hpp"
#include "fermi_hbt/model.hpp"

namespace fermi_hbt::selftest {

namespace {

using Clock = std::chrono::steady_clock;

double since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

}  // namespace

long double erf_series(long double x) {
  if (x < 0) return -erf_series(-x);
  const long double two_over_sqrt_pi = 2.0L / std::sqrt(std::numbers::pi_v<long double>);
  if (x <= 1.5L) {
    long double sum = 0, term = x;  // term = (-1)^n x^(2n+1) / n!
    for (int n = 0; n < 200; ++n) {
      const long double add = term / (2 * n + 1);
      sum += add;
      if (std::fabs(add) < 1e-24L) break;
      term *= -x * x / (n + 1);
    }
    return two_over_sqrt_pi * sum;
  }
  long double sum = 0, term = x;  // term = 2^n x^(2n+1) / (2n+1)!!
  for (int n = 0; n < 2000; ++n) {
    sum += term;
    if (term < 1e-24L * sum) break;
    term *= 2 * x * x / (2 * n + 3);
  }
  return two_over_sqrt_pi * std::exp(-x * x) * sum;
}

std::vector<SuiteResult> oracle_grid(const Options& o) {
  const auto t0 = Clock::now();
  std::vector<GridPoint> points;
  const double t_step = o.quick ? 100.0 : 25.0;
  for (double alpha : {0.0, 0.5, 1.0}) {
    for (double tau_c : {1.0, 30.0, 120.0, 1000.0}) {
      for (double tau_t : {70.0, 140.0}) {
        for (double delta : {100.0, 400.0}) {
          for (double t = 0.0; t <= 1000.0; t += t_step) {
            points.push_back({{alpha, tau_c, tau_t, delta, 1.0}, t});
          }
        }
      }
    }
  }
  SuiteResult r{"oracle-grid", false, "", 0.0};
  try {
    const auto quad = parallel::quadrature_grid(points, 0.1 * o.tol, o.threads);
    double worst = 0.0;
    std::size_t at = 0;
    for (std::size_t i = 0; i < points.size(); ++i) {
      const double d = std::abs(model::c_exp_closed(points[i].t_ns, points[i].model) - quad[i]);
      if (d > worst) {
        worst = d;
        at = i;
      }
    }
    r.passed = worst <= o.tol;
    std::ostringstream s;
    s << points.size() << " points, max |closed - quadrature| = " << worst << " (tol " << o.tol
      << ")";
    if (!r.passed) {
      const auto& p = points[at];
      s << " at alpha=" << p.model.alpha << " tau_c=" << p.model.tau_c_ns
        << " tau_t=" << p.model.tau_t_ns << " delta=" << p.model.delta_ns << " t=" << p.t_ns;
    }
    r.detail = s.str();
  } catch (const std::exception& e) {
    r.detail = e.what();
  }
  r.seconds = since(t0);
  return {r};
}

std::vector<SuiteResult> erf_suite(const Options&) {
  const auto t0 = Clock::now();
  constexpr int kPoints = 10000;
  double worst = 0.0, worst_odd = 0.0;
  for (int i = 0; i < kPoints; ++i) {
    const double x = -6.0 + 12.0 * i / (kPoints - 1);
    const double ref = static_cast<double>(erf_series(x));
    worst = std::max(worst, std::abs(model::erf(x) - ref));
    worst_odd = std::max(worst_odd, std::abs(model::erf(-x) + model::erf(x)));
  }
  double limits = std::max({std::abs(model::erf(0.0)), std::abs(model::erf(10.0) - 1.0),
                            std::abs(model::erf(-10.0) + 1.0)});
  SuiteResult acc{"erf-accuracy", worst <= 1e-12 && limits <= 1e-12, "", 0.0};
  std::ostringstream s;
  s << kPoints << " points on [-6, 6], max abs error " << worst << ", limits " << limits;
  acc.detail = s.str();
  SuiteResult odd{"erf-oddness", worst_odd <= 1e-15, "", 0.0};
  std::ostringstream s2;
  s2 << "max |erf(-x) + erf(x)| = " << worst_odd;
  odd.detail = s2.str();
  acc.seconds = odd.seconds = since(t0);
  return {acc, odd};
}

std::vector<SuiteResult> generator_suite(const Options& o) {
  const auto t0 = Clock::now();
  beam::BeamConfig cfg;
  cfg.rate_hz = 1e4;
  cfg.duration_s = o.quick ? 20.0 : 100.0;
  cfg.model = {1.0, 120.0};
  cfg.seed = 20240611;
  SuiteResult r{"generator-g2", false, "", 0.0};
  try {
    const auto times = beam::generate_stream(cfg);
    const auto bins = beam::empirical_g2(times, 25.0, 600.0);
    double chi2 = 0.0;
    for (const auto& b : bins) {
      const double mu = b.expected * beam::g2_bin_average(b.lag_lo_ns, b.lag_hi_ns, cfg.model);
      chi2 += (static_cast<double>(b.pairs) - mu) * (static_cast<double>(b.pairs) - mu) / mu;
    }
    const auto dof = static_cast<double>(bins.size());
    const double p = boost::math::cdf(boost::math::complement(boost::math::chi_squared(dof), chi2));
    const double rate = static_cast<double>(times.size()) / cfg.duration_s;
    const bool rate_ok = std::abs(rate / cfg.rate_hz - 1.0) < 0.01;
    r.passed = p > 1e-3 && p < 1.0 - 1e-3 && rate_ok;
    std::ostringstream s;
    s << times.size() << " events, chi2/dof = " << chi2 / dof << " (p = " << p
      << "), realized rate " << rate << " /s";
    r.detail = s.str();
  } catch (const std::exception& e) {
    r.detail = e.what();
  }
  r.seconds = since(t0);
  return {r};
}

std::vector<SuiteResult> run_all(const Options& o) {
  std::vector<SuiteResult> all;
  for (auto* suite : {&erf_suite, &oracle_grid, &generator_suite}) {
    auto part = suite(o);
    all.insert(all.end(), part.begin(), part.end());
  }
  return all;
}

}  // namespace fermi_hbt::selftest
