#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "fermi_hbt/timetag.hpp"

namespace fermi_hbt::coincidence {

struct AnalysisConfig {
  std::vector<std::uint16_t> group1;  // D1 (start)
  std::vector<std::uint16_t> group2;  // D2 (stop); ignored in single-group mode
  double delta_ns = 400.0;            // coincidence window
  double delta_s_ns = 150.0;          // spurious-coincidence window
  double bin_width_ns = 25.0;
  double max_lag_ns = 1000.0;
  double norm_lo_ns = 500.0;
  double norm_hi_ns = 700.0;
  bool single_group_mode = false;
  bool suppress_spurious = true;  // veto + dedup of clean_events

  /// Checks the config against a clock and pixel count. Throws ValidationError.
  void validate(const ClockConfig& clock, std::uint16_t pixel_count) const;

  std::uint64_t bin_ticks(const ClockConfig& clock) const;
  std::size_t window_bins() const;  // delta / bin_width
  std::size_t lag_bins() const;     // max_lag / bin_width
};

struct CleanedEvents {
  EventStream group1;
  EventStream group2;
};

/// Spurious-coincidence suppression. Reads only tick and pixel.
///  veto:  a group event within delta_s (inclusive, either side) of any event
///         on a pixel outside group1 and group2 is dropped;
///  dedup: (two-group mode only) chained clusters inside one group, each event
///         within delta_s of the previous one, collapse to their earliest event.
/// With suppress_spurious = false the groups are only split out.
CleanedEvents clean_events(std::span<const Event> events, const AnalysisConfig& cfg,
                           const ClockConfig& clock);

std::vector<std::uint64_t> ticks_of(std::span<const Event> events);

/// Raw start-stop lag counts: bin floor((t2 - t1) / bin) for 0 <= t2 - t1 < nbins * bin.
std::vector<std::uint64_t> delay_histogram(std::span<const std::uint64_t> d1,
                                           std::span<const std::uint64_t> d2,
                                           std::uint64_t bin_ticks, std::size_t nbins,
                                           int threads = 0);

/// Same binning over pairs i < j of one group restricted to distinct pixels.
std::vector<std::uint64_t> single_group_pairs(std::span<const Event> group,
                                              std::uint64_t bin_ticks, std::size_t nbins,
                                              int threads = 0);

struct WindowedCurve {
  std::vector<double> value;  // box sum / window_bins
  std::vector<double> error;  // sqrt(box sum) / window_bins
};

/// value[k] = sum(raw[k .. k + window_bins)) / window_bins for k < out_bins.
WindowedCurve windowed_rate(std::span<const std::uint64_t> raw, std::size_t window_bins,
                            std::size_t out_bins);

/// Overload checking that delta is a whole number of bins (ValidationError otherwise).
WindowedCurve windowed_rate(std::span<const std::uint64_t> raw, double delta_ns,
                            double bin_width_ns, std::size_t out_bins);

struct DelayHistogram {
  std::vector<double> bin_edges_ns;     // lag_bins + 1 edges
  std::vector<std::uint64_t> counts;    // raw lag counts per bin
  std::vector<double> windowed;         // box-averaged counts
  std::vector<double> normalized;       // c_exp estimate
  std::vector<double> errors;           // Poisson error of `normalized`
  double norm_level = 0.0;              // mean of `windowed` over the norm region
  AnalysisConfig config;
  RunMetadata run;

  std::size_t size() const { return counts.size(); }
  double lag_ns(std::size_t k) const { return bin_edges_ns[k]; }
};

/// Divides by the mean over bins with lower edge in [norm_lo, norm_hi].
/// Needs at least three nonzero bins there; throws ValidationError otherwise.
void normalize(DelayHistogram& hist);

/// Whole analysis chain for one run: clean, histogram, box sum, normalize.
/// When `allow_empty` is set an unnormalizable histogram is returned with
/// zero normalized values instead of throwing.
DelayHistogram analyze(std::span<const Event> events, const AnalysisConfig& cfg,
                       const RunMetadata& run, int threads = 0, bool allow_empty = false);

struct Flatness {
  double chi2 = 0.0;
  std::size_t bins = 0;
  double max_abs_pull = 0.0;
};
/// Deviation of the normalized curve from 1 in units of its errors.
Flatness flatness(const DelayHistogram& hist);

}  // namespace fermi_hbt::coincidence
