#pragma once

#include <cstdint>

#include "fermi_hbt/beam.hpp"
#include "fermi_hbt/detector.hpp"
#include "fermi_hbt/timetag.hpp"

namespace fermi_hbt {

/// Beam plus detector chain. One generation block per DAQ cycle period.
struct SimulationConfig {
  beam::BeamConfig beam;
  detector::DetectorConfig detector;

  void validate() const;
};

/// Events of one block after response -> crosstalk -> background -> duty
/// cycle, sorted. Seeds derive from (beam.seed, stage, block).
EventStream simulate_block(const SimulationConfig& cfg, std::size_t block,
                           double lambda_per_ns);

struct SimulationSummary {
  std::size_t events = 0;
  std::size_t real = 0;
  std::size_t crosstalk = 0;
  std::size_t background = 0;
  double duration_s = 0.0;
  double live_time_s = 0.0;
  double realized_rate_hz = 0.0;  // real events per live second
  double live_fraction = 0.0;
};

SimulationSummary summarize(const SimulationConfig& cfg, const EventStream& events);

}  // namespace fermi_hbt
