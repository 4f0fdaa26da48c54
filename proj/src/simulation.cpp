#include "fermi_hbt/simulation.hpp"

#include <algorithm>
#include <cmath>

#include "fermi_hbt/error.hpp"
#include "fermi_hbt/rng.hpp"

namespace fermi_hbt {

void SimulationConfig::validate() const {
  beam.validate();
  detector.validate();
}

EventStream simulate_block(const SimulationConfig& cfg, std::size_t block,
                           double lambda_per_ns) {
  const auto& det = cfg.detector;
  const std::uint64_t seed = cfg.beam.seed;
  const auto times = beam::generate_block(cfg.beam, block, lambda_per_ns);

  EventStream events =
      detector::apply_response(times, det, derive_seed(seed, stage::response, block));
  events = detector::inject_crosstalk(events, det.crosstalk, det.clock,
                                      derive_seed(seed, stage::crosstalk, block));
  if (det.dark_rate_hz > 0.0) {
    const double length = cfg.beam.block_length_s * 1e9;
    const double start = static_cast<double>(block) * length;
    const double end = std::min(start + length, cfg.beam.duration_s * 1e9);
    events = detector::inject_background(
        events, det.dark_rate_hz, detector::kPixelCount, ns_to_ticks(start, det.clock),
        ns_to_ticks(end, det.clock), det.clock, derive_seed(seed, stage::background, block));
  }
  return detector::apply_duty_cycle(events, det.cycle_length_ns, det.dead_time_ns, det.clock);
}

SimulationSummary summarize(const SimulationConfig& cfg, const EventStream& events) {
  SimulationSummary s;
  s.events = events.size();
  for (const Event& e : events) {
    switch (e.flags) {
      case EventFlag::real: ++s.real; break;
      case EventFlag::crosstalk: ++s.crosstalk; break;
      case EventFlag::background: ++s.background; break;
    }
  }
  s.duration_s = cfg.beam.duration_s;
  const double cycle = static_cast<double>(cfg.detector.cycle_length_ns) * 1e-9;
  const double period = cycle + static_cast<double>(cfg.detector.dead_time_ns) * 1e-9;
  const double full = std::floor(s.duration_s / period);
  const double remainder = s.duration_s - full * period;
  s.live_time_s = full * cycle + std::min(remainder, cycle);
  s.live_fraction = s.duration_s > 0.0 ? s.live_time_s / s.duration_s : 0.0;
  s.realized_rate_hz =
      s.live_time_s > 0.0 ? static_cast<double>(s.real) / s.live_time_s : 0.0;
  return s;
}

}  // namespace fermi_hbt
