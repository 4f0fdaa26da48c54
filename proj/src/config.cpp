#include "fermi_hbt/config.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <vector>

#include "fermi_hbt/error.hpp"

namespace fermi_hbt {

namespace {

std::string trim(std::string s) {
  auto ws = [](unsigned char c) { return std::isspace(c) != 0; };
  while (!s.empty() && ws(s.back())) s.pop_back();
  std::size_t i = 0;
  while (i < s.size() && ws(s[i])) ++i;
  return s.substr(i);
}

std::string lower(std::string s) {
  for (char& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return s;
}

std::string fmt(double x) {
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  char buf[64];
  auto r = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, r.ptr);
}

double to_double(const std::string& v) {
  const std::string l = lower(v);
  if (l == "inf" || l == "+inf") return std::numeric_limits<double>::infinity();
  double x = 0;
  const char* end = v.data() + v.size();
  auto r = std::from_chars(v.data(), end, x);
  if (r.ec != std::errc() || r.ptr != end || !std::isfinite(x)) {
    throw ValidationError("expected a number, got '" + v + "'");
  }
  return x;
}

std::uint64_t to_u64(const std::string& v) {
  std::uint64_t x = 0;
  const char* end = v.data() + v.size();
  auto r = std::from_chars(v.data(), end, x);
  if (r.ec != std::errc() || r.ptr != end) {
    throw ValidationError("expected a non-negative integer, got '" + v + "'");
  }
  return x;
}

bool to_bool(const std::string& v) {
  const std::string l = lower(v);
  if (l == "true" || l == "yes" || l == "1" || l == "on") return true;
  if (l == "false" || l == "no" || l == "0" || l == "off") return false;
  throw ValidationError("expected true/false, got '" + v + "'");
}

std::uint64_t seconds_to_ns(double s) {
  if (!(s >= 0.0) || s > 1.8e10) throw ValidationError("time out of range");
  return static_cast<std::uint64_t>(std::llround(s * 1e9));
}

std::vector<std::uint16_t> illuminated_set(const detector::DetectorConfig& d) {
  std::vector<std::uint16_t> out;
  for (std::uint16_t p = 0; p < detector::kPixelCount; ++p) {
    if (d.illumination[p] > 0.0) out.push_back(p);
  }
  return out;
}

bool binary_map(const detector::DetectorConfig& d) {
  return std::all_of(d.illumination.begin(), d.illumination.end(),
                     [](double w) { return w == 0.0 || w == 1.0; });
}

using Setter = std::function<void(RunConfig&, const std::string&)>;

const std::map<std::string, Setter>& setters() {
  static const std::map<std::string, Setter> table = {
      {"beam.rate_hz", [](RunConfig& c, const std::string& v) { c.sim.beam.rate_hz = to_double(v); }},
      {"beam.alpha", [](RunConfig& c, const std::string& v) { c.sim.beam.model.alpha = to_double(v); }},
      {"beam.tau_c_ns", [](RunConfig& c, const std::string& v) { c.sim.beam.model.tau_c_ns = to_double(v); }},
      {"beam.duration_s", [](RunConfig& c, const std::string& v) { c.sim.beam.duration_s = to_double(v); }},
      {"beam.seed", [](RunConfig& c, const std::string& v) { c.sim.beam.seed = to_u64(v); }},
      {"beam.source_label", [](RunConfig& c, const std::string& v) { c.source_label = v; }},

      {"detector.illuminated",
       [](RunConfig& c, const std::string& v) {
         const auto set = detector::parse_pixel_set(v);
         c.sim.detector.illumination.fill(0.0);
         for (auto p : set) c.sim.detector.illumination[p] = 1.0;
       }},
      {"detector.illumination_map",
       [](RunConfig& c, const std::string& v) {
         std::vector<double> w;
         std::stringstream ss(v);
         std::string item;
         while (std::getline(ss, item, ',')) w.push_back(to_double(trim(item)));
         if (w.size() != detector::kPixelCount) {
           throw ValidationError("illumination_map needs 64 comma-separated weights, got " +
                                 std::to_string(w.size()));
         }
         std::copy(w.begin(), w.end(), c.sim.detector.illumination.begin());
       }},
      {"detector.decay_time_ns", [](RunConfig& c, const std::string& v) { c.sim.detector.scintillator.decay_time_ns = to_double(v); }},
      {"detector.mean_capture_ns", [](RunConfig& c, const std::string& v) { c.sim.detector.scintillator.mean_capture_ns = to_double(v); }},
      {"detector.max_travel_ns", [](RunConfig& c, const std::string& v) { c.sim.detector.scintillator.max_travel_ns = to_double(v); }},
      {"detector.rms_total_ns", [](RunConfig& c, const std::string& v) { c.sim.detector.scintillator.rms_total_ns = to_double(v); }},
      {"detector.crosstalk_probability", [](RunConfig& c, const std::string& v) { c.sim.detector.crosstalk.probability = to_double(v); }},
      {"detector.crosstalk_jitter_ns", [](RunConfig& c, const std::string& v) { c.sim.detector.crosstalk.jitter_window_ns = to_double(v); }},
      {"detector.dark_rate_hz", [](RunConfig& c, const std::string& v) { c.sim.detector.dark_rate_hz = to_double(v); }},
      {"detector.clock_hz", [](RunConfig& c, const std::string& v) { c.sim.detector.clock.frequency_hz = to_u64(v); }},
      {"detector.cycle_length_s", [](RunConfig& c, const std::string& v) { c.sim.detector.cycle_length_ns = seconds_to_ns(to_double(v)); }},
      {"detector.dead_time_ms", [](RunConfig& c, const std::string& v) { c.sim.detector.dead_time_ns = seconds_to_ns(to_double(v) * 1e-3); }},

      {"analysis.group1", [](RunConfig& c, const std::string& v) { c.analysis.group1 = detector::parse_pixel_set(v); }},
      {"analysis.group2", [](RunConfig& c, const std::string& v) { c.analysis.group2 = v.empty() ? std::vector<std::uint16_t>{} : detector::parse_pixel_set(v); }},
      {"analysis.delta_ns", [](RunConfig& c, const std::string& v) { c.analysis.delta_ns = to_double(v); }},
      {"analysis.delta_s_ns", [](RunConfig& c, const std::string& v) { c.analysis.delta_s_ns = to_double(v); }},
      {"analysis.bin_width_ns", [](RunConfig& c, const std::string& v) { c.analysis.bin_width_ns = to_double(v); }},
      {"analysis.max_lag_ns", [](RunConfig& c, const std::string& v) { c.analysis.max_lag_ns = to_double(v); }},
      {"analysis.norm_lo_ns", [](RunConfig& c, const std::string& v) { c.analysis.norm_lo_ns = to_double(v); }},
      {"analysis.norm_hi_ns", [](RunConfig& c, const std::string& v) { c.analysis.norm_hi_ns = to_double(v); }},
      {"analysis.single_group", [](RunConfig& c, const std::string& v) { c.analysis.single_group_mode = to_bool(v); }},
      {"analysis.suppress_spurious", [](RunConfig& c, const std::string& v) { c.analysis.suppress_spurious = to_bool(v); }},

      {"fit.tau_t_ns",
       [](RunConfig& c, const std::string& v) {
         if (lower(v) == "auto") {
           c.fit.tau_t_ns.reset();
         } else {
           c.fit.tau_t_ns = to_double(v);
         }
       }},
      {"fit.alpha_init", [](RunConfig& c, const std::string& v) { c.fit.init.alpha = to_double(v); }},
      {"fit.tau_c_init_ns", [](RunConfig& c, const std::string& v) { c.fit.init.tau_c_ns = to_double(v); }},
      {"fit.baseline_init", [](RunConfig& c, const std::string& v) { c.fit.init.baseline = to_double(v); }},
      {"fit.t_min_ns", [](RunConfig& c, const std::string& v) { c.fit.t_min_ns = to_double(v); }},
      {"fit.t_max_ns", [](RunConfig& c, const std::string& v) { c.fit.t_max_ns = to_double(v); }},
      {"fit.max_iterations", [](RunConfig& c, const std::string& v) { c.fit.options.max_iterations = static_cast<int>(to_u64(v)); }},
      {"fit.tolerance", [](RunConfig& c, const std::string& v) { c.fit.options.tolerance = to_double(v); }},
      {"fit.decimate", [](RunConfig& c, const std::string& v) { c.fit.options.decimate = to_bool(v); }},
      {"fit.simplex_fallback", [](RunConfig& c, const std::string& v) { c.fit.options.simplex_fallback = to_bool(v); }},
      {"fit.calibration_samples", [](RunConfig& c, const std::string& v) { c.fit.calibration_samples = to_u64(v); }},
  };
  return table;
}

}  // namespace

void RunConfig::validate() const {
  sim.validate();
  metadata().validate();
  analysis.validate(sim.detector.clock, detector::kPixelCount);
  const auto& o = fit.options;
  if (fit.tau_t_ns && !(*fit.tau_t_ns >= 0.0)) throw ValidationError("fit.tau_t_ns must be >= 0 or auto");
  if (o.max_iterations < 1) throw ValidationError("fit.max_iterations must be >= 1");
  if (!(o.tolerance > 0.0)) throw ValidationError("fit.tolerance must be > 0");
  if (!(fit.t_min_ns >= 0.0 && fit.t_min_ns < fit.t_max_ns)) {
    throw ValidationError("fit: need 0 <= t_min_ns < t_max_ns");
  }
  if (!(fit.init.tau_c_ns > 0.0)) throw ValidationError("fit.tau_c_init_ns must be > 0");
  if (!fit.tau_t_ns && fit.calibration_samples < 1000) {
    throw ValidationError("fit.calibration_samples must be >= 1000");
  }
}

RunMetadata RunConfig::metadata() const {
  RunMetadata m;
  m.clock = sim.detector.clock;
  m.pixel_count = detector::kPixelCount;
  m.cycle_length_ns = sim.detector.cycle_length_ns;
  m.dead_time_ns = static_cast<std::uint32_t>(
      std::min<std::uint64_t>(sim.detector.dead_time_ns, 0xffffffffULL));
  m.seed = sim.beam.seed;
  m.source_label = source_label;
  return m;
}

RunConfig preset(const std::string& name) {
  RunConfig c;
  c.sim.beam.rate_hz = 3000.0;
  c.sim.beam.duration_s = 1000.0;
  c.sim.beam.model.alpha = 1.0;
  c.sim.beam.seed = 1;
  c.analysis.group1 = detector::parse_pixel_set("r1-6:c1");
  c.analysis.group2 = detector::parse_pixel_set("r1-6:c6");
  if (name == "in10") {
    c.sim.beam.model.tau_c_ns = 120.0;
    c.source_label = "IN10 backscattering, coherent";
  } else if (name == "t13c") {
    c.sim.beam.model.tau_c_ns = 0.03;
    c.source_label = "T13C broad resolution, incoherent";
  } else {
    throw ValidationError("unknown preset '" + name + "' (known: in10, t13c)");
  }
  return c;
}

RunConfig parse_config(const std::string& text, const std::string& origin) {
  return parse_config(text, RunConfig{}, origin);
}

RunConfig parse_config(const std::string& text, RunConfig base, const std::string& origin) {
  RunConfig cfg = std::move(base);
  std::istringstream in(text);
  std::string line;
  std::string section;
  int lineno = 0;
  auto fail = [&](const std::string& msg) -> void {
    throw ValidationError(origin + ":" + std::to_string(lineno) + ": " + msg);
  };
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find_first_of("#;");
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']') fail("malformed section header '" + line + "'");
      section = lower(trim(line.substr(1, line.size() - 2)));
      if (section != "beam" && section != "detector" && section != "analysis" && section != "fit") {
        fail("unknown section [" + section + "]");
      }
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) fail("expected key = value");
    const std::string key = lower(trim(line.substr(0, eq)));
    const std::string value = trim(line.substr(eq + 1));
    if (section.empty()) {
      if (key != "preset") fail("key '" + key + "' outside a section");
      try {
        cfg = preset(value);
      } catch (const ValidationError& e) {
        fail(e.what());
      }
      continue;
    }
    const auto& table = setters();
    const auto it = table.find(section + "." + key);
    if (it == table.end()) fail("unknown key '" + key + "' in [" + section + "]");
    try {
      it->second(cfg, value);
    } catch (const ValidationError& e) {
      fail(section + "." + key + ": " + e.what());
    }
  }
  try {
    cfg.validate();
  } catch (const ValidationError& e) {
    throw ValidationError(origin + ": " + e.what());
  }
  return cfg;
}

namespace {

std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open config " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

RunConfig load_config(const std::filesystem::path& path) {
  return parse_config(read_text(path), path.string());
}

RunConfig load_config(const std::filesystem::path& path, RunConfig base) {
  return parse_config(read_text(path), std::move(base), path.string());
}

std::string to_text(const RunConfig& c) {
  std::ostringstream o;
  const auto& b = c.sim.beam;
  const auto& d = c.sim.detector;
  const auto& a = c.analysis;
  o << "[beam]\n"
    << "rate_hz = " << fmt(b.rate_hz) << "\n"
    << "alpha = " << fmt(b.model.alpha) << "\n"
    << "tau_c_ns = " << fmt(b.model.tau_c_ns) << "\n"
    << "duration_s = " << fmt(b.duration_s) << "\n"
    << "seed = " << b.seed << "\n"
    << "source_label = " << c.source_label << "\n";
  o << "[detector]\n";
  if (binary_map(d)) {
    o << "illuminated = " << detector::format_pixel_set(illuminated_set(d)) << "\n";
  } else {
    o << "illumination_map = ";
    for (std::size_t p = 0; p < d.illumination.size(); ++p) {
      o << (p ? "," : "") << fmt(d.illumination[p]);
    }
    o << "\n";
  }
  o << "decay_time_ns = " << fmt(d.scintillator.decay_time_ns) << "\n"
    << "mean_capture_ns = " << fmt(d.scintillator.mean_capture_ns) << "\n"
    << "max_travel_ns = " << fmt(d.scintillator.max_travel_ns) << "\n"
    << "rms_total_ns = " << fmt(d.scintillator.rms_total_ns) << "\n"
    << "crosstalk_probability = " << fmt(d.crosstalk.probability) << "\n"
    << "crosstalk_jitter_ns = " << fmt(d.crosstalk.jitter_window_ns) << "\n"
    << "dark_rate_hz = " << fmt(d.dark_rate_hz) << "\n"
    << "clock_hz = " << d.clock.frequency_hz << "\n"
    << "cycle_length_s = " << fmt(static_cast<double>(d.cycle_length_ns) * 1e-9) << "\n"
    << "dead_time_ms = " << fmt(static_cast<double>(d.dead_time_ns) * 1e-6) << "\n";
  o << "[analysis]\n"
    << "group1 = " << detector::format_pixel_set(a.group1) << "\n"
    << "group2 = " << detector::format_pixel_set(a.group2) << "\n"
    << "delta_ns = " << fmt(a.delta_ns) << "\n"
    << "delta_s_ns = " << fmt(a.delta_s_ns) << "\n"
    << "bin_width_ns = " << fmt(a.bin_width_ns) << "\n"
    << "max_lag_ns = " << fmt(a.max_lag_ns) << "\n"
    << "norm_lo_ns = " << fmt(a.norm_lo_ns) << "\n"
    << "norm_hi_ns = " << fmt(a.norm_hi_ns) << "\n"
    << "single_group = " << (a.single_group_mode ? "true" : "false") << "\n"
    << "suppress_spurious = " << (a.suppress_spurious ? "true" : "false") << "\n";
  const auto& f = c.fit;
  o << "[fit]\n"
    << "tau_t_ns = " << (f.tau_t_ns ? fmt(*f.tau_t_ns) : std::string("auto")) << "\n"
    << "alpha_init = " << fmt(f.init.alpha) << "\n"
    << "tau_c_init_ns = " << fmt(f.init.tau_c_ns) << "\n"
    << "baseline_init = " << fmt(f.init.baseline) << "\n"
    << "t_min_ns = " << fmt(f.t_min_ns) << "\n"
    << "t_max_ns = " << fmt(f.t_max_ns) << "\n"
    << "max_iterations = " << f.options.max_iterations << "\n"
    << "tolerance = " << fmt(f.options.tolerance) << "\n"
    << "decimate = " << (f.options.decimate ? "true" : "false") << "\n"
    << "simplex_fallback = " << (f.options.simplex_fallback ? "true" : "false") << "\n"
    << "calibration_samples = " << f.calibration_samples << "\n";
  return o.str();
}

}  // namespace fermi_hbt
