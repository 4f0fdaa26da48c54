#include "fermi_hbt/pipeline.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <json.hpp>
#include <sstream>

#include "fermi_hbt/detector.hpp"
#include "fermi_hbt/error.hpp"
#include "fermi_hbt/rng.hpp"

namespace fermi_hbt::pipeline {

namespace {

constexpr std::uint64_t kCalibrationStage = 0x63616c;

std::string num(double x) {
  char buf[64];
  auto r = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, r.ptr);
}

std::string commented(const std::string& text) {
  std::ostringstream o;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) o << "# " << line << "\n";
  return o.str();
}

std::ofstream open_out(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  return out;
}

void finish(std::ofstream& out, const std::filesystem::path& path) {
  out.flush();
  if (!out) throw IoError("write failed for " + path.string());
}

nlohmann::json sigma_json(double s) {
  return std::isfinite(s) ? nlohmann::json(s) : nlohmann::json(nullptr);
}

nlohmann::json estimate_json(const fit::Estimate& e) {
  nlohmann::json j;
  const char* names[] = {"alpha", "tau_c_ns", "baseline"};
  for (std::size_t i = 0; i < 3; ++i) {
    j["parameters"][names[i]] = {{"value", e.value[i]}, {"sigma", sigma_json(e.sigma[i])}};
  }
  nlohmann::json cov = nlohmann::json::array();
  for (const auto& row : e.covariance) {
    nlohmann::json r = nlohmann::json::array();
    for (double v : row) r.push_back(sigma_json(v));
    cov.push_back(r);
  }
  j["covariance"] = cov;
  j["chi2"] = e.chi2;
  j["points"] = e.points;
  j["dof"] = e.dof;
  j["chi2_per_dof"] = e.dof ? e.chi2 / static_cast<double>(e.dof) : 0.0;
  j["converged"] = e.converged;
  j["at_bound"] = e.at_bound;
  j["iterations"] = e.iterations;
  j["method"] = e.method;
  return j;
}

}  // namespace

std::string run_id(const RunConfig& cfg) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : to_text(cfg)) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

double resolve_tau_t(const RunConfig& cfg) {
  if (cfg.fit.tau_t_ns) return *cfg.fit.tau_t_ns;
  const auto& a = cfg.analysis;
  return detector::effective_tau_t(cfg.sim.detector.scintillator, cfg.sim.detector.clock,
                                   a.delta_ns, a.bin_width_ns, a.max_lag_ns,
                                   cfg.fit.calibration_samples,
                                   derive_seed(cfg.sim.beam.seed, kCalibrationStage, 0));
}

void write_histogram_csv(const std::filesystem::path& path, const coincidence::DelayHistogram& h,
                         const RunConfig& cfg) {
  auto out = open_out(path);
  out << "# fermi-hbt delay histogram\n"
      << "# run_id = " << run_id(cfg) << "\n"
      << "# seed = " << h.run.seed << "\n"
      << "# source_label = " << h.run.source_label << "\n"
      << "# norm_level = " << num(h.norm_level) << "\n";
  if (h.norm_level > 0.0) {
    const auto f = coincidence::flatness(h);
    out << "# flatness_chi2 = " << num(f.chi2) << " over " << f.bins
        << " bins, max |pull| = " << num(f.max_abs_pull) << "\n";
  }
  out << "# config:\n" << commented(to_text(cfg));
  out << "t_ns,counts,c_norm,err\n";
  for (std::size_t k = 0; k < h.size(); ++k) {
    out << num(h.lag_ns(k)) << ',' << h.counts[k] << ',' << num(h.normalized[k]) << ','
        << num(h.errors[k]) << '\n';
  }
  finish(out, path);
}

coincidence::DelayHistogram read_histogram_csv(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open histogram " + path.string());
  coincidence::DelayHistogram h;
  std::string line;
  bool header = false;
  std::size_t lineno = 0;
  auto bad = [&](const std::string& why) {
    return IoError(path.string() + ":" + std::to_string(lineno) + ": " + why);
  };
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    if (!header) {
      if (line != "t_ns,counts,c_norm,err") throw bad("expected header t_ns,counts,c_norm,err");
      header = true;
      continue;
    }
    std::istringstream row(line);
    std::string f[4];
    for (auto& cell : f) {
      if (!std::getline(row, cell, ',')) throw bad("expected 4 columns");
    }
    try {
      std::size_t used = 0;
      const double t = std::stod(f[0], &used);
      const auto counts = static_cast<std::uint64_t>(std::stoull(f[1]));
      const double c = std::stod(f[2]);
      const double e = std::stod(f[3]);
      if (used != f[0].size()) throw std::invalid_argument("t_ns");
      h.bin_edges_ns.push_back(t);
      h.counts.push_back(counts);
      h.normalized.push_back(c);
      h.errors.push_back(e);
    } catch (const std::exception&) {
      throw bad("malformed row '" + line + "'");
    }
  }
  if (!header) throw IoError(path.string() + ": no histogram header");
  const std::size_t n = h.counts.size();
  for (std::size_t k = 1; k < n; ++k) {
    if (!(h.bin_edges_ns[k] > h.bin_edges_ns[k - 1])) {
      throw IoError(path.string() + ": t_ns not increasing");
    }
  }
  const double width = n >= 2 ? h.bin_edges_ns[1] - h.bin_edges_ns[0] : 1.0;
  if (n) h.bin_edges_ns.push_back(h.bin_edges_ns.back() + width);
  h.config.bin_width_ns = width;
  return h;
}

std::string fit_report(const fit::FitResult& r, const RunConfig& cfg, double tau_t_ns,
                       bool tau_t_calibrated) {
  nlohmann::json j = estimate_json(r);
  j["fixed"] = {{"tau_t_ns", tau_t_ns},
                {"tau_t_source", tau_t_calibrated ? "calibrated" : "config"},
                {"delta_ns", r.fixed.delta_ns}};
  if (r.tau_c_ns() > 0.0) j["energy_spread_neV"] = model::coherence_to_energy(r.tau_c_ns());
  j["weighting"] = cfg.fit.options.decimate ? "decimated" : "all-points";
  if (r.alternate) {
    auto alt = estimate_json(*r.alternate);
    alt["weighting"] = r.alternate_is_decimated ? "decimated" : "all-points";
    j["alternate"] = alt;
  } else {
    j["alternate"] = nullptr;
  }
  j["run_id"] = run_id(cfg);
  j["seed"] = cfg.sim.beam.seed;
  j["config"] = to_text(cfg);
  return j.dump(2) + "\n";
}

void write_model_csv(const std::filesystem::path& path, const model::BroadenedModel& m,
                     const RunConfig& cfg) {
  auto out = open_out(path);
  out << "# fermi-hbt model curve\n"
      << "# alpha = " << num(m.alpha) << ", tau_c_ns = " << num(m.tau_c_ns)
      << ", tau_t_ns = " << num(m.tau_t_ns) << ", delta_ns = " << num(m.delta_ns)
      << ", baseline = " << num(m.baseline) << "\n"
      << "# run_id = " << run_id(cfg) << "\n"
      << "# config:\n"
      << commented(to_text(cfg)) << "t_ns,c_model\n";
  const std::size_t n = cfg.analysis.lag_bins();
  for (std::size_t k = 0; k < n; ++k) {
    const double t = static_cast<double>(k) * cfg.analysis.bin_width_ns;
    out << num(t) << ',' << num(model::c_exp_closed(t, m)) << '\n';
  }
  finish(out, path);
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  auto out = open_out(path);
  out << text;
  finish(out, path);
}

}  // namespace fermi_hbt::pipeline
