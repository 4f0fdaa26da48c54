#pragma once

#include <string>
#include <vector>

namespace fermi_hbt::selftest {

/// erf reference by series summation in long double: alternating Maclaurin
/// series for |x| <= 1.5, the all-positive series
/// (2/sqrt(pi)) e^{-x^2} sum 2^n x^{2n+1} / (1*3*...*(2n+1)) beyond.
long double erf_series(long double x);

struct Options {
  bool quick = false;
  double tol = 1e-8;  // oracle-grid agreement bound
  int threads = 0;
};

struct SuiteResult {
  std::string name;
  bool passed = false;
  std::string detail;
  double seconds = 0.0;
};

std::vector<SuiteResult> oracle_grid(const Options& o);
std::vector<SuiteResult> erf_suite(const Options& o);
std::vector<SuiteResult> generator_suite(const Options& o);

/// All suites in order.
std::vector<SuiteResult> run_all(const Options& o);

}  // namespace fermi_hbt::selftest
