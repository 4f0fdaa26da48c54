#pragma once

#include <filesystem>
#include <string>

#include "fermi_hbt/coincidence.hpp"
#include "fermi_hbt/config.hpp"
#include "fermi_hbt/fit.hpp"
#include "fermi_hbt/simulation.hpp"

namespace fermi_hbt::pipeline {

/// 64-bit FNV-1a of the canonical config text, as 16 hex digits.
std::string run_id(const RunConfig& cfg);

/// Fixed broadening for the fit: the configured value, or the detector-model
/// calibration when tau_t_ns = auto.
double resolve_tau_t(const RunConfig& cfg);

/// Writes `t_ns,counts,c_norm,err` with `#` header lines carrying the config
/// echo, run id and seed.
void write_histogram_csv(const std::filesystem::path& path, const coincidence::DelayHistogram& h,
                         const RunConfig& cfg);

/// Reads the columns back. Edges come from t_ns; the windowed column is left empty.
coincidence::DelayHistogram read_histogram_csv(const std::filesystem::path& path);

/// JSON fit report (nlohmann::json dump); infinite sigmas are written as null.
std::string fit_report(const fit::FitResult& r, const RunConfig& cfg, double tau_t_ns,
                       bool tau_t_calibrated);

/// `t_ns,c_model` on [0, max_lag) with the analysis bin step.
void write_model_csv(const std::filesystem::path& path, const model::BroadenedModel& m,
                     const RunConfig& cfg);

void write_text(const std::filesystem::path& path, const std::string& text);

}  // namespace fermi_hbt::pipeline
