#include "fermi_hbt/detector.hpp"

#include <algorithm>
#include <boost/math/tools/minima.hpp>
#include <boost/math/tools/roots.hpp>
#include <cmath>
#include <numeric>
#include <sstream>

#include "fermi_hbt/error.hpp"

namespace fermi_hbt::detector {

namespace {

int parse_int(const std::string& s, const std::string& context) {
  std::size_t used = 0;
  int v = 0;
  try {
    v = std::stoi(s, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used != s.size() || s.empty()) {
    throw ValidationError("pixel set: cannot parse '" + s + "' in '" + context + "'");
  }
  return v;
}

std::pair<int, int> parse_range(const std::string& s, const std::string& context) {
  const auto dash = s.find('-');
  if (dash == std::string::npos) {
    const int v = parse_int(s, context);
    return {v, v};
  }
  return {parse_int(s.substr(0, dash), context), parse_int(s.substr(dash + 1), context)};
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t");
  return s.substr(b, e - b + 1);
}

// Solve f(x) = 0 on [lo, hi] for increasing f.
template <typename F>
double solve_increasing(F f, double lo, double hi) {
  boost::uintmax_t iters = 200;
  auto [a, b] = boost::math::tools::toms748_solve(
      f, lo, hi, boost::math::tools::eps_tolerance<double>(50), iters);
  return 0.5 * (a + b);
}

double sample_truncated_exp(Rng& rng, double scale, double cut) {
  if (cut <= 0.0) return 0.0;
  const double mass = -std::expm1(-cut / scale);
  return -scale * std::log1p(-rng.uniform() * mass);
}

}  // namespace

std::vector<std::uint16_t> neighbors(std::uint16_t pixel) {
  const int row = pixel / kGridCols;
  const int col = pixel % kGridCols;
  std::vector<std::uint16_t> out;
  if (row > 0) out.push_back(pixel_at(row - 1, col));
  if (col > 0) out.push_back(pixel_at(row, col - 1));
  if (col + 1 < kGridCols) out.push_back(pixel_at(row, col + 1));
  if (row + 1 < kGridRows) out.push_back(pixel_at(row + 1, col));
  return out;
}

std::vector<std::uint16_t> parse_pixel_set(const std::string& text) {
  std::vector<std::uint16_t> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (item.empty()) continue;
    if (item == "all") {
      for (std::uint16_t p = 0; p < kPixelCount; ++p) out.push_back(p);
      continue;
    }
    if (item[0] == 'r') {
      const auto colon = item.find(":c");
      if (colon == std::string::npos) {
        throw ValidationError("pixel set: rectangle '" + item + "' needs rA-B:cC-D");
      }
      const auto [r0, r1] = parse_range(item.substr(1, colon - 1), text);
      const auto [c0, c1] = parse_range(item.substr(colon + 2), text);
      if (r0 < 0 || r1 >= kGridRows || r0 > r1 || c0 < 0 || c1 >= kGridCols || c0 > c1) {
        throw ValidationError("pixel set: rectangle '" + item + "' outside the 8x8 grid");
      }
      for (int r = r0; r <= r1; ++r) {
        for (int c = c0; c <= c1; ++c) out.push_back(pixel_at(r, c));
      }
      continue;
    }
    const auto [a, b] = parse_range(item, text);
    if (a < 0 || b >= kPixelCount || a > b) {
      throw ValidationError("pixel set: '" + item + "' outside 0-63");
    }
    for (int p = a; p <= b; ++p) out.push_back(static_cast<std::uint16_t>(p));
  }
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

std::string format_pixel_set(std::span<const std::uint16_t> pixels) {
  std::string out;
  for (std::size_t i = 0; i < pixels.size();) {
    std::size_t j = i;
    while (j + 1 < pixels.size() && pixels[j + 1] == pixels[j] + 1) ++j;
    if (!out.empty()) out += ',';
    out += std::to_string(pixels[i]);
    if (j > i) out += '-' + std::to_string(pixels[j]);
    i = j + 1;
  }
  return out;
}

void ScintillatorModel::validate() const {
  if (zero_width()) return;
  if (!(decay_time_ns > 0.0)) throw ValidationError("detector.decay_time_ns must be > 0");
  if (!(rms_total_ns > 0.0)) throw ValidationError("detector.rms_total_ns must be > 0");
  if (!(mean_capture_ns > 0.0 && mean_capture_ns < max_travel_ns)) {
    throw ValidationError("detector: need 0 < mean_capture_ns < max_travel_ns");
  }
  if (!(mean_capture_ns < 0.5 * max_travel_ns)) {
    throw ValidationError(
        "detector: an attenuating depth profile needs mean_capture_ns < max_travel_ns / 2");
  }
  // Feasibility of the rms target is checked when the sampler is built.
  DelaySampler probe(*this);
  (void)probe;
}

TruncatedExpMoments truncated_exp_moments(double scale, double cut) {
  const double a = cut / scale;
  const double tail = std::exp(-a) / -std::expm1(-a);  // e^-a / (1 - e^-a)
  const double mean = scale - cut * tail;
  const double second = 2.0 * scale * scale - (cut * cut + 2.0 * cut * scale) * tail;
  return {mean, second - mean * mean};
}

DelaySampler::DelaySampler(const ScintillatorModel& m) {
  if (m.zero_width()) {
    zero_ = true;
    return;
  }
  capture_cut_ = m.max_travel_ns;
  capture_scale_ = solve_increasing(
      [&](double s) { return truncated_exp_moments(s, capture_cut_).mean - m.mean_capture_ns; },
      1e-3 * capture_cut_, 1e4 * capture_cut_);

  const double capture_var = truncated_exp_moments(capture_scale_, capture_cut_).variance;
  const double decay_var = m.rms_total_ns * m.rms_total_ns - capture_var;
  decay_cut_ = kDecayCutoffFactor * m.decay_time_ns;
  const double max_var = decay_cut_ * decay_cut_ / 12.0;  // uniform limit
  if (!(decay_var > 0.0) || !(decay_var < 0.999 * max_var)) {
    throw ValidationError("detector: rms_total_ns = " + std::to_string(m.rms_total_ns) +
                          " is not reachable with the capture profile and decay_time_ns");
  }
  decay_scale_ = solve_increasing(
      [&](double s) { return truncated_exp_moments(s, decay_cut_).variance - decay_var; },
      1e-4 * decay_cut_, 1e4 * decay_cut_);
}

double DelaySampler::capture(Rng& rng) const {
  return zero_ ? 0.0 : sample_truncated_exp(rng, capture_scale_, capture_cut_);
}

double DelaySampler::decay(Rng& rng) const {
  return zero_ ? 0.0 : sample_truncated_exp(rng, decay_scale_, decay_cut_);
}

double DelaySampler::mean_ns() const {
  if (zero_) return 0.0;
  return truncated_exp_moments(capture_scale_, capture_cut_).mean +
         truncated_exp_moments(decay_scale_, decay_cut_).mean;
}

double DelaySampler::stddev_ns() const {
  if (zero_) return 0.0;
  return std::sqrt(truncated_exp_moments(capture_scale_, capture_cut_).variance +
                   truncated_exp_moments(decay_scale_, decay_cut_).variance);
}

void CrosstalkModel::validate() const {
  if (!(probability >= 0.0 && probability <= 1.0)) {
    throw ValidationError("detector.crosstalk_probability must lie in [0, 1]");
  }
  if (!(jitter_window_ns > 0.0)) {
    throw ValidationError("detector.crosstalk_jitter_ns must be > 0");
  }
}

void DetectorConfig::validate() const {
  double sum = 0.0;
  for (double w : illumination) {
    if (!(w >= 0.0) || !std::isfinite(w)) {
      throw ValidationError("detector: illumination weights must be finite and >= 0");
    }
    sum += w;
  }
  if (!(sum > 0.0)) throw ValidationError("detector: illumination weights sum to zero");
  scintillator.validate();
  crosstalk.validate();
  if (!(dark_rate_hz >= 0.0)) throw ValidationError("detector.dark_rate_hz must be >= 0");
  clock.validate();
  if (cycle_length_ns == 0) throw ValidationError("detector.cycle_length_s must be > 0");
}

EventStream apply_response(std::span<const double> times, const DetectorConfig& cfg,
                           std::uint64_t seed) {
  const DelaySampler sampler(cfg.scintillator);
  std::array<double, kPixelCount> cumulative{};
  std::partial_sum(cfg.illumination.begin(), cfg.illumination.end(), cumulative.begin());
  const double total = cumulative.back();

  Rng rng(seed);
  EventStream out;
  out.reserve(times.size());
  for (double t : times) {
    const double delay = sampler.sample(rng);
    const double u = rng.uniform() * total;
    auto it = std::upper_bound(cumulative.begin(), cumulative.end(), u);
    if (it == cumulative.end()) --it;
    const auto pixel = static_cast<std::uint16_t>(it - cumulative.begin());
    out.push_back({ns_to_ticks(t + delay, cfg.clock), pixel, EventFlag::real});
  }
  sort_stream(out);
  return out;
}

EventStream inject_crosstalk(std::span<const Event> events, const CrosstalkModel& model,
                             const ClockConfig& clock, std::uint64_t seed) {
  EventStream out(events.begin(), events.end());
  if (model.probability <= 0.0) return out;
  Rng rng(seed);
  for (const Event& e : events) {
    if (rng.uniform() >= model.probability) continue;
    const auto near = neighbors(e.pixel);
    const auto target = near[rng.below(near.size())];
    const double offset = rng.uniform() * model.jitter_window_ns;
    out.push_back({e.tick + ns_to_ticks(offset, clock), target, EventFlag::crosstalk});
  }
  sort_stream(out);
  return out;
}

EventStream inject_background(std::span<const Event> events, double dark_rate_hz,
                              std::uint16_t pixel_count, std::uint64_t begin_tick,
                              std::uint64_t end_tick, const ClockConfig& clock,
                              std::uint64_t seed) {
  if (!(dark_rate_hz >= 0.0)) throw ValidationError("dark_rate must be >= 0");
  if (dark_rate_hz == 0.0 || end_tick <= begin_tick) {
    return EventStream(events.begin(), events.end());
  }
  std::vector<EventStream> streams;
  streams.reserve(pixel_count + 1u);
  streams.emplace_back(events.begin(), events.end());
  const double begin_ns = ticks_to_ns(begin_tick, clock);
  const double end_ns = ticks_to_ns(end_tick, clock);
  const double mean_gap = 1e9 / dark_rate_hz;
  for (std::uint16_t p = 0; p < pixel_count; ++p) {
    Rng rng(derive_seed(seed, stage::background, p));
    EventStream stream;
    for (double t = begin_ns + rng.exponential(mean_gap); t < end_ns;
         t += rng.exponential(mean_gap)) {
      stream.push_back({ns_to_ticks(t, clock), p, EventFlag::background});
    }
    streams.push_back(std::move(stream));
  }
  return merge_streams(streams);
}

EventStream apply_duty_cycle(std::span<const Event> events, std::uint64_t cycle_length_ns,
                             std::uint64_t dead_time_ns, const ClockConfig& clock) {
  if (dead_time_ns == 0) return EventStream(events.begin(), events.end());
  // Compare in units of ns * period_den to stay exact.
  using u128 = unsigned __int128;
  const u128 den = clock.period_den();
  const u128 num = clock.period_num();
  const u128 period = (static_cast<u128>(cycle_length_ns) + dead_time_ns) * den;
  const u128 live = static_cast<u128>(cycle_length_ns) * den;
  EventStream out;
  out.reserve(events.size());
  for (const Event& e : events) {
    if ((static_cast<u128>(e.tick) * num) % period < live) out.push_back(e);
  }
  return out;
}

double effective_tau_t(const ScintillatorModel& model, const ClockConfig& clock,
                       double delta_ns, double bin_width_ns, double max_lag_ns,
                       std::size_t samples, std::uint64_t seed) {
  const DelaySampler sampler(model);
  const double tick = clock.tick_period_ns();
  const auto width = static_cast<std::size_t>(std::llround(delta_ns / bin_width_ns));
  const auto grid = static_cast<std::size_t>(std::llround(max_lag_ns / bin_width_ns));
  std::vector<double> hist(grid + width, 0.0);

  Rng rng(seed);
  for (std::size_t i = 0; i < samples; ++i) {
    const double phase = rng.uniform() * tick;
    const double a = phase + sampler.sample(rng);
    const double b = phase + sampler.sample(rng);
    const auto lag_ticks = static_cast<std::int64_t>(std::floor(b / tick)) -
                           static_cast<std::int64_t>(std::floor(a / tick));
    if (lag_ticks < 0) continue;
    const auto bin =
        static_cast<std::size_t>(static_cast<double>(lag_ticks) * tick / bin_width_ns);
    if (bin < hist.size()) hist[bin] += 1.0;
  }

  std::vector<double> box(grid);
  double running = std::accumulate(hist.begin(), hist.begin() + static_cast<long>(width), 0.0);
  for (std::size_t k = 0; k < grid; ++k) {
    box[k] = running / (static_cast<double>(samples) * delta_ns);
    running += hist[k + width] - hist[k];
  }

  auto mismatch = [&](double tau_t) {
    double sum = 0.0;
    for (std::size_t k = 0; k < grid; ++k) {
      const double t = static_cast<double>(k) * bin_width_ns;
      const double g = 0.5 * (std::erf((t + delta_ns) / tau_t) - std::erf(t / tau_t)) / delta_ns;
      sum += (g - box[k]) * (g - box[k]);
    }
    return sum;
  };
  const auto best = boost::math::tools::brent_find_minima(mismatch, 1.0, 5.0 * max_lag_ns, 40);
  return best.first;
}

}  // namespace fermi_hbt::detector
