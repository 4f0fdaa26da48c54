#pragma once

#include <filesystem>
#include <limits>
#include <optional>
#include <string>

#include "fermi_hbt/coincidence.hpp"
#include "fermi_hbt/fit.hpp"
#include "fermi_hbt/simulation.hpp"

namespace fermi_hbt {

struct FitSettings {
  std::optional<double> tau_t_ns;  // nullopt = auto (calibrated from the detector model)
  fit::Initial init;
  fit::Options options;
  double t_min_ns = 0.0;
  double t_max_ns = std::numeric_limits<double>::infinity();
  std::size_t calibration_samples = 2'000'000;
};

/// Everything a command needs. Times in ns unless the key says otherwise.
struct RunConfig {
  SimulationConfig sim;
  std::string source_label;
  coincidence::AnalysisConfig analysis;
  FitSettings fit;

  /// Runs every module's validation; throws ValidationError.
  void validate() const;
  RunMetadata metadata() const;
};

/// Built-in beamline presets: "in10" (tau_c = 120 ns) and "t13c" (0.03 ns).
/// Throws ValidationError for unknown names.
RunConfig preset(const std::string& name);

/// Parses `key = value` lines under [beam], [detector], [analysis], [fit].
/// A top-level `preset = NAME` line selects the base values. `#` and `;`
/// start comments. Errors carry `origin:line`.
RunConfig parse_config(const std::string& text, const std::string& origin = "<config>");
RunConfig parse_config(const std::string& text, RunConfig base,
                       const std::string& origin = "<config>");
RunConfig load_config(const std::filesystem::path& path);
RunConfig load_config(const std::filesystem::path& path, RunConfig base);

/// Canonical text form; parse_config(to_text(c)) reproduces c.
std::string to_text(const RunConfig& cfg);

}  // namespace fermi_hbt
