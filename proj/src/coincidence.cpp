#include "fermi_hbt/coincidence.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "fermi_hbt/error.hpp"
#include "fermi_hbt/kernels.hpp"

namespace fermi_hbt::coincidence {

namespace {

// x / unit when that is (to rounding) a positive whole number, else 0.
std::size_t whole_multiple(double x, double unit) {
  const double r = x / unit;
  const double n = std::round(r);
  if (n < 1.0 || std::abs(r - n) > 1e-9 * n) return 0;
  return static_cast<std::size_t>(n);
}

enum Membership : unsigned char { kOutside = 0, kGroup1 = 1, kGroup2 = 2 };

}  // namespace

void AnalysisConfig::validate(const ClockConfig& clock, std::uint16_t pixel_count) const {
  if (group1.empty()) throw ValidationError("analysis.group1 is empty");
  if (!single_group_mode && group2.empty()) throw ValidationError("analysis.group2 is empty");
  auto check_range = [&](const std::vector<std::uint16_t>& g, const char* name) {
    for (auto p : g) {
      if (p >= pixel_count) {
        throw ValidationError(std::string("analysis.") + name + ": pixel " + std::to_string(p) +
                              " outside pixel_count " + std::to_string(pixel_count));
      }
    }
  };
  check_range(group1, "group1");
  if (!single_group_mode) {
    check_range(group2, "group2");
    for (auto p : group1) {
      if (std::find(group2.begin(), group2.end(), p) != group2.end()) {
        throw ValidationError("analysis: groups overlap at pixel " + std::to_string(p) +
                              " (set single_group = true for one-group analysis)");
      }
    }
  }
  if (!(delta_ns > 0.0)) throw ValidationError("analysis.delta_ns must be > 0");
  if (!(delta_s_ns > 0.0)) throw ValidationError("analysis.delta_s_ns must be > 0");
  if (!(bin_width_ns > 0.0)) throw ValidationError("analysis.bin_width_ns must be > 0");
  if (whole_multiple(bin_width_ns, clock.tick_period_ns()) == 0) {
    throw ValidationError("analysis.bin_width_ns must be a multiple of the clock tick");
  }
  if (whole_multiple(delta_ns, bin_width_ns) == 0) {
    throw ValidationError("analysis.delta_ns must be a whole number of bins");
  }
  if (whole_multiple(max_lag_ns, bin_width_ns) < 2) {
    throw ValidationError("analysis.max_lag_ns must be a whole number (>= 2) of bins");
  }
  if (!(norm_lo_ns >= 0.0 && norm_lo_ns <= norm_hi_ns && norm_hi_ns < max_lag_ns)) {
    throw ValidationError("analysis: need 0 <= norm_lo_ns <= norm_hi_ns < max_lag_ns");
  }
}

std::uint64_t AnalysisConfig::bin_ticks(const ClockConfig& clock) const {
  return whole_multiple(bin_width_ns, clock.tick_period_ns());
}

std::size_t AnalysisConfig::window_bins() const { return whole_multiple(delta_ns, bin_width_ns); }

std::size_t AnalysisConfig::lag_bins() const { return whole_multiple(max_lag_ns, bin_width_ns); }

CleanedEvents clean_events(std::span<const Event> events, const AnalysisConfig& cfg,
                           const ClockConfig& clock) {
  std::vector<unsigned char> member(65536, kOutside);
  for (auto p : cfg.group1) member[p] = kGroup1;
  if (!cfg.single_group_mode) {
    for (auto p : cfg.group2) member[p] = kGroup2;
  }

  CleanedEvents out;
  if (!cfg.suppress_spurious) {
    for (const Event& e : events) {
      if (member[e.pixel] == kGroup1) out.group1.push_back(e);
      if (member[e.pixel] == kGroup2) out.group2.push_back(e);
    }
    return out;
  }

  const std::uint64_t window = ns_to_ticks(cfg.delta_s_ns, clock);
  std::vector<std::uint64_t> outside;
  for (const Event& e : events) {
    if (member[e.pixel] == kOutside) outside.push_back(e.tick);
  }

  // veto, then chain dedup against the previous surviving event of the group
  std::size_t next_out = 0;  // first outside tick not below t - window
  bool have_prev[3] = {false, false, false};
  std::uint64_t prev[3] = {0, 0, 0};
  for (const Event& e : events) {
    const unsigned char g = member[e.pixel];
    if (g == kOutside) continue;
    const std::uint64_t lo = e.tick >= window ? e.tick - window : 0;
    while (next_out < outside.size() && outside[next_out] < lo) ++next_out;
    if (next_out < outside.size() && outside[next_out] <= e.tick + window) continue;

    const bool duplicate = !cfg.single_group_mode && have_prev[g] && e.tick - prev[g] <= window;
    have_prev[g] = true;
    prev[g] = e.tick;
    if (duplicate) continue;
    (g == kGroup1 ? out.group1 : out.group2).push_back(e);
  }
  return out;
}

std::vector<std::uint64_t> ticks_of(std::span<const Event> events) {
  std::vector<std::uint64_t> out(events.size());
  for (std::size_t i = 0; i < events.size(); ++i) out[i] = events[i].tick;
  return out;
}

std::vector<std::uint64_t> delay_histogram(std::span<const std::uint64_t> d1,
                                           std::span<const std::uint64_t> d2,
                                           std::uint64_t bin_ticks, std::size_t nbins,
                                           int threads) {
  if (bin_ticks == 0) throw ValidationError("delay_histogram: bin width of zero ticks");
  if (threads == 1) return serial::delay_histogram(d1, d2, bin_ticks, nbins);
  return parallel::delay_histogram(d1, d2, bin_ticks, nbins, threads);
}

std::vector<std::uint64_t> single_group_pairs(std::span<const Event> group,
                                              std::uint64_t bin_ticks, std::size_t nbins,
                                              int threads) {
  if (bin_ticks == 0) throw ValidationError("single_group_pairs: bin width of zero ticks");
  if (threads == 1) return serial::single_group_pairs(group, bin_ticks, nbins);
  return parallel::single_group_pairs(group, bin_ticks, nbins, threads);
}

WindowedCurve windowed_rate(std::span<const std::uint64_t> raw, std::size_t window_bins,
                            std::size_t out_bins) {
  if (window_bins == 0) throw ValidationError("windowed_rate: empty window");
  if (raw.size() + 1 < out_bins + window_bins) {
    throw ValidationError("windowed_rate: raw histogram too short for the window");
  }
  WindowedCurve c;
  c.value.resize(out_bins);
  c.error.resize(out_bins);
  const double w = static_cast<double>(window_bins);
  std::uint64_t sum = 0;
  for (std::size_t j = 0; j + 1 < window_bins && j < raw.size(); ++j) sum += raw[j];
  for (std::size_t k = 0; k < out_bins; ++k) {
    sum += raw[k + window_bins - 1];
    c.value[k] = static_cast<double>(sum) / w;
    c.error[k] = std::sqrt(static_cast<double>(sum)) / w;
    sum -= raw[k];
  }
  return c;
}

WindowedCurve windowed_rate(std::span<const std::uint64_t> raw, double delta_ns,
                            double bin_width_ns, std::size_t out_bins) {
  const std::size_t w = whole_multiple(delta_ns, bin_width_ns);
  if (w == 0) {
    throw ValidationError("windowed_rate: delta " + std::to_string(delta_ns) +
                          " ns is not a multiple of the bin width " +
                          std::to_string(bin_width_ns) + " ns");
  }
  return windowed_rate(raw, w, out_bins);
}

namespace {

// Indices of bins whose lower edge lies in [lo, hi] and the count of those
// with a nonzero windowed value.
std::pair<std::vector<std::size_t>, std::size_t> norm_bins(const DelayHistogram& h) {
  std::vector<std::size_t> idx;
  std::size_t nonzero = 0;
  const double eps = 1e-9 * h.config.bin_width_ns;
  for (std::size_t k = 0; k < h.size(); ++k) {
    const double edge = h.bin_edges_ns[k];
    if (edge + eps >= h.config.norm_lo_ns && edge - eps <= h.config.norm_hi_ns) {
      idx.push_back(k);
      if (h.windowed[k] > 0.0) ++nonzero;
    }
  }
  return {idx, nonzero};
}

}  // namespace

void normalize(DelayHistogram& hist) {
  const auto [idx, nonzero] = norm_bins(hist);
  if (nonzero < 3) {
    throw ValidationError("normalize: region [" + std::to_string(hist.config.norm_lo_ns) + ", " +
                          std::to_string(hist.config.norm_hi_ns) + "] ns has " +
                          std::to_string(nonzero) + " nonzero bins, need 3");
  }
  double sum = 0.0;
  for (auto k : idx) sum += hist.windowed[k];
  const double m = sum / static_cast<double>(idx.size());
  const double w = static_cast<double>(hist.config.window_bins());
  hist.norm_level = m;
  hist.normalized.resize(hist.size());
  hist.errors.resize(hist.size());
  for (std::size_t k = 0; k < hist.size(); ++k) {
    hist.normalized[k] = hist.windowed[k] / m;
    hist.errors[k] = std::sqrt(hist.windowed[k] * w) / w / m;
  }
}

DelayHistogram analyze(std::span<const Event> events, const AnalysisConfig& cfg,
                       const RunMetadata& run, int threads, bool allow_empty) {
  cfg.validate(run.clock, run.pixel_count);
  const std::size_t bad = first_unsorted(events);
  if (bad != events.size()) {
    throw ValidationError("analyze: events not sorted at index " + std::to_string(bad));
  }

  DelayHistogram h;
  h.config = cfg;
  h.run = run;
  const std::size_t n = cfg.lag_bins();
  const std::size_t w = cfg.window_bins();
  const std::uint64_t bt = cfg.bin_ticks(run.clock);
  h.bin_edges_ns.resize(n + 1);
  for (std::size_t k = 0; k <= n; ++k) h.bin_edges_ns[k] = static_cast<double>(k) * cfg.bin_width_ns;

  const CleanedEvents clean = clean_events(events, cfg, run.clock);
  std::vector<std::uint64_t> raw;
  if (cfg.single_group_mode) {
    raw = single_group_pairs(clean.group1, bt, n + w - 1, threads);
  } else {
    const auto t1 = ticks_of(clean.group1);
    const auto t2 = ticks_of(clean.group2);
    raw = delay_histogram(t1, t2, bt, n + w - 1, threads);
  }
  const WindowedCurve curve = windowed_rate(raw, w, n);
  h.counts.assign(raw.begin(), raw.begin() + static_cast<std::ptrdiff_t>(n));
  h.windowed = curve.value;

  if (allow_empty && norm_bins(h).second < 3) {
    h.normalized.assign(n, 0.0);
    h.errors.assign(n, 0.0);
    return h;
  }
  normalize(h);
  return h;
}

Flatness flatness(const DelayHistogram& hist) {
  Flatness f;
  for (std::size_t k = 0; k < hist.normalized.size(); ++k) {
    const double err = hist.errors[k];
    if (!(err > 0.0)) continue;
    const double pull = (hist.normalized[k] - 1.0) / err;
    f.chi2 += pull * pull;
    f.max_abs_pull = std::max(f.max_abs_pull, std::abs(pull));
    ++f.bins;
  }
  return f;
}

}  // namespace fermi_hbt::coincidence
