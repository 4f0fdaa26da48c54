#pragma once

#include <cstdint>
#include <span>
#include <vector>

namespace fermi_hbt::beam {

/// Phenomenological pair correlation g2(t) = 1 - alpha * exp(-beta t^2),
/// beta = 1 / (2 tau_c^2). alpha > 0 antibunching, alpha < 0 bunching.
struct CorrelationModel {
  double alpha = 1.0;
  double tau_c_ns = 120.0;

  double beta() const { return 1.0 / (2.0 * tau_c_ns * tau_c_ns); }
  void validate() const;
};

struct BeamConfig {
  double rate_hz = 3000.0;
  double duration_s = 1000.0;
  CorrelationModel model;
  std::uint64_t seed = 1;
  /// Generation block length; blocks are independent substreams seeded by
  /// derive_seed(seed, stage::beam, block). Defaults to one DAQ cycle period.
  double block_length_s = 10.01;

  void validate() const;
  std::size_t block_count() const;
};

/// Upper bound on rate * tau_c for the renewal-thinning generator.
inline constexpr double kMaxRateTimesTauC = 1e-2;

double g2_target(double t_ns, const CorrelationModel& model);

/// Mean of g2_target over [lo, hi), in closed form.
double g2_bin_average(double lo_ns, double hi_ns, const CorrelationModel& model);

/// Mean waiting time (ns) between accepted events for a candidate hazard
/// `lambda_per_ns` thinned by g2 relative to the previous accepted event.
double mean_accepted_interval(double lambda_per_ns, const CorrelationModel& model);

/// Candidate hazard (per ns) whose thinned output has mean rate cfg.rate_hz.
/// Solved by fixed-point iteration on mean_accepted_interval.
double compensated_rate(const BeamConfig& cfg);

/// Arrival times (ns, strictly increasing) of one generation block.
std::vector<double> generate_block(const BeamConfig& cfg, std::size_t block,
                                   double lambda_per_ns);

/// Whole stream, blocks generated in order. The OpenMP variant lives in
/// kernels.hpp and produces identical output.
std::vector<double> generate_stream(const BeamConfig& cfg);

struct G2Bin {
  double lag_lo_ns = 0;
  double lag_hi_ns = 0;
  std::uint64_t pairs = 0;
  double expected = 0;  // pairs expected for a Poisson stream of the same realized rate
  double value = 0;     // pairs / expected
  double error = 0;     // sqrt(pairs) / expected
};

/// Brute-force pair-lag histogram normalized to the Poisson expectation.
/// Counts ordered pairs i < j with t_j - t_i in [0, max_lag).
std::vector<G2Bin> empirical_g2(std::span<const double> times, double bin_width_ns,
                                double max_lag_ns);

}  // namespace fermi_hbt::beam
