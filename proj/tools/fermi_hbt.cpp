// fermi-hbt: simulate | analyze | fit | model | selftest

#include <CLI11.hpp>
#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <numeric>
#include <optional>
#include <string>

#include "fermi_hbt/beam.hpp"
#include "fermi_hbt/coincidence.hpp"
#include "fermi_hbt/config.hpp"
#include "fermi_hbt/error.hpp"
#include "fermi_hbt/fit.hpp"
#include "fermi_hbt/kernels.hpp"
#include "fermi_hbt/model.hpp"
#include "fermi_hbt/ntt1.hpp"
#include "fermi_hbt/pipeline.hpp"
#include "fermi_hbt/selftest.hpp"

namespace fh = fermi_hbt;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitValidation = 1;
constexpr int kExitIo = 2;
constexpr int kExitNumerical = 3;

struct Common {
  std::string config;
  std::string preset;
  int threads = 0;
};

int effective_threads(int flag) {
  if (const char* env = std::getenv("FERMI_HBT_THREADS"); env && *env) {
    char* end = nullptr;
    const long v = std::strtol(env, &end, 10);
    if (*end != '\0' || v < 0) throw fh::ValidationError("FERMI_HBT_THREADS must be an integer >= 0");
    return static_cast<int>(v);
  }
  return flag;
}

fh::RunConfig load(const Common& c) {
  if (c.config.empty() && c.preset.empty()) {
    throw fh::ValidationError("need -c CONFIG or --preset NAME");
  }
  fh::RunConfig base = c.preset.empty() ? fh::RunConfig{} : fh::preset(c.preset);
  if (c.config.empty()) {
    base.validate();
    return base;
  }
  return fh::load_config(c.config, base);
}

void add_common(CLI::App* cmd, Common& c) {
  cmd->add_option("-c,--config", c.config, "run config file");
  cmd->add_option("--preset", c.preset, "built-in preset (in10, t13c); a config file overrides it");
  cmd->add_option("--threads", c.threads, "worker threads, 0 = all cores (FERMI_HBT_THREADS wins)")
      ->check(CLI::NonNegativeNumber);
}

int cmd_simulate(const Common& c, const std::string& out, const std::string& dump) {
  const auto cfg = load(c);
  const int threads = effective_threads(c.threads);
  const auto events = fh::parallel::simulate(cfg.sim, threads);
  fh::ntt1::write_file(out, cfg.metadata(), events);
  if (!dump.empty()) {
    const auto times = fh::beam::generate_stream(cfg.sim.beam);
    std::ofstream f(dump, std::ios::trunc);
    if (!f) throw fh::IoError("cannot write " + dump);
    f << "t_ns\n";
    char buf[32];
    for (double t : times) {
      std::snprintf(buf, sizeof buf, "%.3f\n", t);
      f << buf;
    }
    if (!f) throw fh::IoError("write failed for " + dump);
  }
  const auto s = fh::summarize(cfg.sim, events);
  const double dead = 1.0 - s.live_fraction;
  std::printf("run_id          %s\n", fh::pipeline::run_id(cfg).c_str());
  std::printf("events          %zu (real %zu, crosstalk %zu, background %zu)\n", s.events,
              s.real, s.crosstalk, s.background);
  std::printf("realized rate   %.2f /s (requested %.2f /s)\n", s.realized_rate_hz,
              cfg.sim.beam.rate_hz);
  std::printf("duty cycle      live %.3f s of %.3f s, dead fraction %.6f, ~%.0f events lost\n",
              s.live_time_s, s.duration_s, dead,
              s.live_fraction > 0.0 ? static_cast<double>(s.events) * dead / s.live_fraction : 0.0);
  std::printf("output          %s\n", out.c_str());
  return kExitOk;
}

int cmd_analyze(const Common& c, const std::string& in, const std::string& out) {
  const auto cfg = load(c);
  auto run = fh::ntt1::read_file(in);
  run.meta.source_label = cfg.source_label;
  if (run.events.empty()) std::fprintf(stderr, "warning: %s holds no events\n", in.c_str());
  const auto h = fh::coincidence::analyze(run.events, cfg.analysis, run.meta,
                                          effective_threads(c.threads), true);
  if (h.norm_level == 0.0) {
    std::fprintf(stderr, "warning: normalization region is empty; c_norm and err written as 0\n");
  }
  fh::pipeline::write_histogram_csv(out, h, cfg);
  std::printf("events          %zu\n", run.events.size());
  std::printf("pairs in range  %llu\n",
              static_cast<unsigned long long>(std::accumulate(h.counts.begin(), h.counts.end(), 0ULL)));
  if (h.norm_level > 0.0) {
    const auto f = fh::coincidence::flatness(h);
    const auto lowest = std::min_element(h.normalized.begin(), h.normalized.end()) - h.normalized.begin();
    std::printf("norm level      %.6g\n", h.norm_level);
    std::printf("minimum         c_norm %.4f at t = %.0f ns\n", h.normalized[lowest],
                h.lag_ns(static_cast<std::size_t>(lowest)));
    std::printf("flatness        chi2 %.2f over %zu bins, max |pull| %.2f\n", f.chi2, f.bins,
                f.max_abs_pull);
  }
  std::printf("output          %s\n", out.c_str());
  return kExitOk;
}

int cmd_fit(const Common& c, const std::string& in, const std::string& out,
            const std::string& curve) {
  const auto cfg = load(c);
  const auto hist = fh::pipeline::read_histogram_csv(in);
  const auto data = fh::fit::from_histogram(hist, cfg.fit.t_min_ns, cfg.fit.t_max_ns);
  const double tau_t = fh::pipeline::resolve_tau_t(cfg);
  fh::fit::Options opt = cfg.fit.options;
  opt.decimation = cfg.analysis.window_bins();
  const fh::fit::Fixed fixed{tau_t, cfg.analysis.delta_ns};
  const auto r = fh::fit::fit(data, fixed, cfg.fit.init, opt);
  fh::pipeline::write_text(out, fh::pipeline::fit_report(r, cfg, tau_t, !cfg.fit.tau_t_ns));
  if (!curve.empty()) {
    fh::model::BroadenedModel m{r.alpha(), r.tau_c_ns(), tau_t, cfg.analysis.delta_ns, r.baseline()};
    fh::pipeline::write_model_csv(curve, m, cfg);
  }
  std::printf("alpha           %.4f +- %.4f\n", r.alpha(), r.sigma_alpha());
  std::printf("tau_c           %.2f +- %.2f ns\n", r.tau_c_ns(), r.sigma_tau_c_ns());
  std::printf("baseline        %.5f +- %.5f\n", r.baseline(), r.sigma_baseline());
  std::printf("chi2/dof        %.2f / %zu\n", r.chi2, r.dof);
  std::printf("tau_t (fixed)   %.2f ns (%s)\n", tau_t, cfg.fit.tau_t_ns ? "config" : "calibrated");
  std::printf("converged       %s%s\n", r.converged ? "yes" : "no", r.at_bound ? " (at bound)" : "");
  if (!r.converged) {
    std::fprintf(stderr, "error: fit did not converge after %d iterations; report written\n",
                 r.iterations);
    return kExitNumerical;
  }
  return kExitOk;
}

int cmd_model(const Common& c, const std::string& out) {
  const auto cfg = load(c);
  const double tau_t = fh::pipeline::resolve_tau_t(cfg);
  fh::model::BroadenedModel m{cfg.sim.beam.model.alpha, cfg.sim.beam.model.tau_c_ns, tau_t,
                              cfg.analysis.delta_ns, 1.0};
  m.validate();
  fh::pipeline::write_model_csv(out, m, cfg);
  std::printf("dip depth       %.6f (tau_t %.2f ns)\n", fh::model::dip_depth(m), tau_t);
  return kExitOk;
}

int cmd_selftest(bool quick, double tol, double perturb, int threads) {
  fh::selftest::Options o;
  o.quick = quick;
  o.tol = tol;
  o.threads = effective_threads(threads);
  if (perturb != 0.0) fh::model::set_erf_perturbation(perturb);
  bool ok = true;
  for (const auto& r : fh::selftest::run_all(o)) {
    std::printf("%-14s %s  %6.1fs  %s\n", r.name.c_str(), r.passed ? "PASS" : "FAIL", r.seconds,
                r.detail.c_str());
    ok = ok && r.passed;
  }
  fh::model::set_erf_perturbation(0.0);
  return ok ? kExitOk : kExitNumerical;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Fermion HBT coincidence simulator and analysis"};
  app.require_subcommand(1);

  Common common;
  std::string in, out, curve, dump;
  bool quick = false;
  double tol = 1e-8, perturb = 0.0;

  auto* sim = app.add_subcommand("simulate", "simulate a run into an NTT1 file");
  add_common(sim, common);
  sim->add_option("-o,--output", out, "output NTT1 file")->required();
  sim->add_option("--dump-times", dump, "also write the continuous arrival times (CSV t_ns)");

  auto* ana = app.add_subcommand("analyze", "delay histogram of an NTT1 file");
  add_common(ana, common);
  ana->add_option("-i,--input", in, "input NTT1 file")->required();
  ana->add_option("-o,--output", out, "output histogram CSV")->required();

  auto* fit = app.add_subcommand("fit", "fit the broadened model to a histogram CSV");
  add_common(fit, common);
  fit->add_option("-i,--input", in, "input histogram CSV")->required();
  fit->add_option("-o,--output", out, "output JSON report")->required();
  fit->add_option("--curve", curve, "fitted model curve CSV");

  auto* mdl = app.add_subcommand("model", "evaluate the closed-form model curve");
  add_common(mdl, common);
  mdl->add_option("-o,--output", out, "output curve CSV")->required();

  auto* st = app.add_subcommand("selftest", "oracle, erf and generator self-checks");
  st->add_flag("--quick", quick, "reduced grid and generator size");
  st->add_option("--tol", tol, "oracle grid tolerance")->check(CLI::PositiveNumber);
  st->add_option("--threads", common.threads, "worker threads")->check(CLI::NonNegativeNumber);
  st->add_option("--perturb-erf", perturb, "fault injection")->group("");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitValidation;
  }

  try {
    if (*sim) return cmd_simulate(common, out, dump);
    if (*ana) return cmd_analyze(common, in, out);
    if (*fit) return cmd_fit(common, in, out, curve);
    if (*mdl) return cmd_model(common, out);
    if (*st) return cmd_selftest(quick, tol, perturb, common.threads);
  } catch (const fh::ValidationError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitValidation;
  } catch (const fh::IoError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitIo;
  } catch (const fh::NumericalError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitNumerical;
  } catch (const std::domain_error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitValidation;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitNumerical;
  }
  return kExitValidation;
}
