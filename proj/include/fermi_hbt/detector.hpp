#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "fermi_hbt/rng.hpp"
#include "fermi_hbt/timetag.hpp"

namespace fermi_hbt::detector {

// 8x8 multi-anode PMT, row-major pixel index = row * 8 + col.
inline constexpr int kGridRows = 8;
inline constexpr int kGridCols = 8;
inline constexpr std::uint16_t kPixelCount = kGridRows * kGridCols;
inline constexpr double kPixelPitchMm = 5.8;

constexpr std::uint16_t pixel_at(int row, int col) {
  return static_cast<std::uint16_t>(row * kGridCols + col);
}

/// Edge-sharing neighbors, in ascending index order.
std::vector<std::uint16_t> neighbors(std::uint16_t pixel);

/// Parses a pixel set. Comma-separated items, each one of
///   all        every pixel
///   27         one index
///   8-15       index range, inclusive
///   r1-6:c1    rectangle rows 1..6, column 1 (either side may be a single value)
/// Result is sorted and unique. Throws ValidationError on malformed input.
std::vector<std::uint16_t> parse_pixel_set(const std::string& text);

/// Inverse of parse_pixel_set for echoing configs (indices and a-b runs).
std::string format_pixel_set(std::span<const std::uint16_t> pixels);

/// Timing response of the scintillator. All-zero delay fields select the
/// zero-width mode (no delay at all).
struct ScintillatorModel {
  double decay_time_ns = 250.0;
  double mean_capture_ns = 100.0;
  double max_travel_ns = 300.0;
  double rms_total_ns = 140.0;

  bool zero_width() const { return mean_capture_ns == 0.0 && rms_total_ns == 0.0; }
  void validate() const;
};

/// Per-event delay = capture + decay.
///  capture: exponential depth profile truncated at max_travel, scale solved
///           so the mean equals mean_capture.
///  decay:   exponential truncated at 4 * decay_time, scale solved so the
///           total standard deviation equals rms_total.
class DelaySampler {
 public:
  explicit DelaySampler(const ScintillatorModel& model);

  double capture(Rng& rng) const;
  double decay(Rng& rng) const;
  double sample(Rng& rng) const { return capture(rng) + decay(rng); }

  double capture_scale_ns() const { return capture_scale_; }
  double decay_scale_ns() const { return decay_scale_; }
  double max_delay_ns() const { return capture_cut_ + decay_cut_; }
  double mean_ns() const;
  double stddev_ns() const;

 private:
  bool zero_ = false;
  double capture_scale_ = 0, capture_cut_ = 0;
  double decay_scale_ = 0, decay_cut_ = 0;
};

inline constexpr double kDecayCutoffFactor = 4.0;

struct TruncatedExpMoments {
  double mean;
  double variance;
};
/// Moments of an exponential with `scale` truncated to [0, cut].
TruncatedExpMoments truncated_exp_moments(double scale, double cut);

struct CrosstalkModel {
  double probability = 0.0;
  double jitter_window_ns = 150.0;

  void validate() const;
};

struct DetectorConfig {
  std::array<double, kPixelCount> illumination{};  // relative weights
  ScintillatorModel scintillator;
  CrosstalkModel crosstalk;
  double dark_rate_hz = 0.0;  // per pixel
  ClockConfig clock;
  std::uint64_t cycle_length_ns = 10'000'000'000ULL;
  std::uint64_t dead_time_ns = 10'000'000;

  DetectorConfig() { illumination.fill(1.0); }
  void validate() const;
};

/// Delays, pixel assignment and quantization of continuous arrivals.
/// Output is sorted; every event carries EventFlag::real.
EventStream apply_response(std::span<const double> times_ns, const DetectorConfig& cfg,
                           std::uint64_t seed);

/// Each event spawns, with the model probability, one flagged duplicate on a
/// uniformly chosen neighbor, offset by floor(U[0, jitter] / tick) ticks.
EventStream inject_crosstalk(std::span<const Event> events, const CrosstalkModel& model,
                             const ClockConfig& clock, std::uint64_t seed);

/// Adds an independent Poisson stream per pixel on [begin_tick, end_tick).
EventStream inject_background(std::span<const Event> events, double dark_rate_hz,
                              std::uint16_t pixel_count, std::uint64_t begin_tick,
                              std::uint64_t end_tick, const ClockConfig& clock,
                              std::uint64_t seed);

/// Drops events in the half-open dead windows
/// [k (cycle + dead) + cycle, (k + 1)(cycle + dead)).
EventStream apply_duty_cycle(std::span<const Event> events, std::uint64_t cycle_length_ns,
                             std::uint64_t dead_time_ns, const ClockConfig& clock);

/// Equivalent Gaussian broadening parameter for the pair-lag analysis.
///
/// Simulates `samples` pairs of simultaneous arrivals through the delay
/// sampler and clock quantization, histograms their tick lags on the
/// analysis bin grid, box-averages over `delta_ns`, and returns the tau_t for
/// which the Gaussian kernel sqrt(W/pi) exp(-W t^2), W = 1 / tau_t^2, gives
/// the least-squares closest box averages on lags [0, max_lag).
double effective_tau_t(const ScintillatorModel& model, const ClockConfig& clock,
                       double delta_ns, double bin_width_ns, double max_lag_ns,
                       std::size_t samples, std::uint64_t seed);

}  // namespace fermi_hbt::detector
