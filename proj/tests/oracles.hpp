#pragma once

// Independent reference implementations used only by the tests.

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/multiprecision/cpp_bin_float.hpp>
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <vector>

namespace oracle {

using big = boost::multiprecision::cpp_bin_float_50;

inline double erf50(double x) { return static_cast<double>(boost::multiprecision::erf(big(x))); }

// Kolmogorov distribution tail P(K > x), alternating series.
inline double kolmogorov_q(double x) {
  if (x < 0.2) return 1.0;
  double sum = 0.0;
  for (int k = 1; k < 200; ++k) {
    const double term = std::exp(-2.0 * k * k * x * x);
    sum += (k % 2 ? 2.0 : -2.0) * term;
    if (term < 1e-18) break;
  }
  return std::min(1.0, std::max(0.0, sum));
}

// One-sample KS p-value of `sample` against an exponential with `mean`.
inline double ks_exponential_p(std::vector<double> sample, double mean) {
  std::sort(sample.begin(), sample.end());
  const double n = static_cast<double>(sample.size());
  double d = 0.0;
  for (std::size_t i = 0; i < sample.size(); ++i) {
    const double f = 1.0 - std::exp(-sample[i] / mean);
    d = std::max({d, f - static_cast<double>(i) / n, static_cast<double>(i + 1) / n - f});
  }
  const double sn = std::sqrt(n);
  return kolmogorov_q((sn + 0.12 + 0.11 / sn) * d);
}

// All ordered start-stop pairs with 0 <= t2 - t1 < nbins * bin, O(n1 n2).
inline std::vector<std::uint64_t> brute_histogram(const std::vector<std::uint64_t>& d1,
                                                  const std::vector<std::uint64_t>& d2,
                                                  std::uint64_t bin, std::size_t nbins) {
  std::vector<std::uint64_t> h(nbins, 0);
  for (auto a : d1) {
    for (auto b : d2) {
      if (b < a) continue;
      const std::uint64_t k = (b - a) / bin;
      if (k < nbins) ++h[k];
    }
  }
  return h;
}

// Unbroadened box average b - (alpha/delta) int_t^{t+delta} exp(-beta s^2) ds by 1D quadrature.
inline double box_average(double t, double alpha, double tau_c, double delta, double b) {
  const double beta = 1.0 / (2.0 * tau_c * tau_c);
  auto f = [&](double s) { return std::exp(-beta * s * s); };
  using Rule = boost::math::quadrature::gauss_kronrod<double, 61>;
  double integral = 0.0;
  std::vector<double> cuts{t, t + delta};
  for (double k : {1.0, 4.0, 9.0}) {
    if (k * tau_c > t && k * tau_c < t + delta) cuts.push_back(k * tau_c);
  }
  std::sort(cuts.begin(), cuts.end());
  for (std::size_t i = 0; i + 1 < cuts.size(); ++i) {
    integral += Rule::integrate(f, cuts[i], cuts[i + 1], 15, 1e-13);
  }
  return b - alpha * integral / delta;
}

}  // namespace oracle
