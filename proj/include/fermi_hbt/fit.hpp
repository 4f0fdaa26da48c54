#pragma once

#include <array>
#include <cstddef>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "fermi_hbt/coincidence.hpp"
#include "fermi_hbt/model.hpp"

namespace fermi_hbt::fit {

struct FitData {
  std::vector<double> t_ns;
  std::vector<double> value;
  std::vector<double> sigma;
};

/// Normalized curve of a histogram restricted to [t_min, t_max].
FitData from_histogram(const coincidence::DelayHistogram& hist, double t_min_ns = 0.0,
                       double t_max_ns = std::numeric_limits<double>::infinity());

/// Every `step`-th point starting at the first.
FitData decimate(const FitData& data, std::size_t step);

struct Fixed {
  double tau_t_ns = 140.0;
  double delta_ns = 400.0;
};

struct Initial {
  double alpha = 0.5;
  double tau_c_ns = 100.0;
  double baseline = 1.0;
};

struct Options {
  int max_iterations = 200;
  double tolerance = 1e-8;
  bool simplex_fallback = true;
  /// Fit only every decimation-th point (Delta / bin_width removes the box
  /// correlation). The primary result uses it when `decimate` is set; the
  /// other variant is always reported alongside.
  bool decimate = false;
  std::size_t decimation = 1;
  double alpha_min = 0.0, alpha_max = 2.0;
  double tau_c_min_ns = 1.0, tau_c_max_ns = 1e4;
};

enum Param : std::size_t { kAlpha = 0, kTauC = 1, kBaseline = 2 };

struct Estimate {
  std::array<double, 3> value{};
  std::array<double, 3> sigma{};  // +inf when the direction is not identified
  std::array<std::array<double, 3>, 3> covariance{};
  double chi2 = 0.0;
  std::size_t points = 0;
  std::size_t dof = 0;
  bool converged = false;
  bool at_bound = false;
  int iterations = 0;
  std::string method;

  double alpha() const { return value[kAlpha]; }
  double tau_c_ns() const { return value[kTauC]; }
  double baseline() const { return value[kBaseline]; }
  double sigma_alpha() const { return sigma[kAlpha]; }
  double sigma_tau_c_ns() const { return sigma[kTauC]; }
  double sigma_baseline() const { return sigma[kBaseline]; }
};

struct FitResult : Estimate {
  std::optional<Estimate> alternate;  // all-points or decimated counterpart
  bool alternate_is_decimated = false;
  Fixed fixed;
};

/// chi2 of the closed-form model for parameters (alpha, tau_c, baseline).
double chi2(const FitData& data, const Fixed& fixed, const std::array<double, 3>& p);

/// Bounded damped least squares (Levenberg-Marquardt, analytic Jacobian,
/// clamped steps) with an optional Nelder-Mead fallback. Converged means the
/// projected gradient and the parameter step are both below tolerance for two
/// successive iterations. Non-convergence is reported, never thrown.
/// Throws ValidationError for < 10 points, non-positive sigma or negative lags.
Estimate fit_points(const FitData& data, const Fixed& fixed, const Initial& init,
                    const Options& options);

/// fit_points on the chosen variant plus the alternate.
FitResult fit(const FitData& data, const Fixed& fixed, const Initial& init,
              const Options& options);

}  // namespace fermi_hbt::fit
