#include "fermi_hbt/beam.hpp"

#include <algorithm>
#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <cmath>
#include <numbers>
#include <string>

#include "fermi_hbt/error.hpp"
#include "fermi_hbt/rng.hpp"

namespace fermi_hbt::beam {

namespace {

constexpr double kNsPerSecond = 1e9;

// beta t^2 beyond this underflows exp() to zero
constexpr double kExpCutoff = 745.0;

// integral_0^t exp(-beta s^2) ds
double dip_integral(double t, const CorrelationModel& m) {
  const double s = std::sqrt(2.0) * m.tau_c_ns;
  return m.tau_c_ns * std::sqrt(std::numbers::pi / 2.0) * std::erf(t / s);
}

}  // namespace

void CorrelationModel::validate() const {
  if (!(alpha >= -1.0 && alpha <= 1.0)) {
    throw ValidationError("beam.alpha must lie in [-1, 1]");
  }
  if (!(tau_c_ns > 0.0) || !std::isfinite(tau_c_ns)) {
    throw ValidationError("beam.tau_c_ns must be > 0");
  }
}

void BeamConfig::validate() const {
  model.validate();
  if (!(rate_hz > 0.0) || !std::isfinite(rate_hz)) {
    throw ValidationError("beam.rate_hz must be > 0");
  }
  if (!(duration_s >= 0.0) || !std::isfinite(duration_s)) {
    throw ValidationError("beam.duration_s must be >= 0");
  }
  if (!(block_length_s > 0.0)) {
    throw ValidationError("beam block length must be > 0");
  }
  const double product = rate_hz * model.tau_c_ns / kNsPerSecond;
  if (product > kMaxRateTimesTauC) {
    throw ValidationError(
        "beam: rate * tau_c = " + std::to_string(product) +
        " exceeds 1e-2; the renewal-thinning generator needs rate * tau_c << 1");
  }
}

std::size_t BeamConfig::block_count() const {
  return static_cast<std::size_t>(std::ceil(duration_s / block_length_s));
}

double g2_target(double t_ns, const CorrelationModel& model) {
  return 1.0 - model.alpha * std::exp(-model.beta() * t_ns * t_ns);
}

double g2_bin_average(double lo_ns, double hi_ns, const CorrelationModel& model) {
  const double width = hi_ns - lo_ns;
  if (width <= 0.0) return g2_target(lo_ns, model);
  auto signed_integral = [&](double t) {
    return t < 0 ? -dip_integral(-t, model) : dip_integral(t, model);
  };
  return 1.0 - model.alpha * (signed_integral(hi_ns) - signed_integral(lo_ns)) / width;
}

double mean_accepted_interval(double lambda, const CorrelationModel& model) {
  // Survival after an accepted event is exp(-lambda (t - alpha I(t))); I(t)
  // saturates once beta t^2 passes the exp cutoff.
  const double horizon = std::sqrt(kExpCutoff / model.beta());
  const double saturated = model.tau_c_ns * std::sqrt(std::numbers::pi / 2.0);
  auto survival = [&](double t) {
    return std::exp(-lambda * (t - model.alpha * dip_integral(t, model)));
  };
  const double head = boost::math::quadrature::gauss_kronrod<double, 61>::integrate(
      survival, 0.0, horizon, 15, 1e-14);
  const double tail =
      std::exp(-lambda * (horizon - model.alpha * saturated)) / lambda;
  return head + tail;
}

double compensated_rate(const BeamConfig& cfg) {
  const double target = cfg.rate_hz / kNsPerSecond;
  double lambda = target;
  for (int i = 0; i < 100; ++i) {
    const double next = target * lambda * mean_accepted_interval(lambda, cfg.model);
    if (std::abs(next - lambda) <= 1e-15 * lambda) return next;
    lambda = next;
  }
  throw NumericalError("beam: candidate-rate fixed point did not converge");
}

std::vector<double> generate_block(const BeamConfig& cfg, std::size_t block,
                                   double lambda) {
  const double start = static_cast<double>(block) * cfg.block_length_s * kNsPerSecond;
  const double end =
      std::min(static_cast<double>(block + 1) * cfg.block_length_s, cfg.duration_s) *
      kNsPerSecond;
  std::vector<double> out;
  if (!(end > start)) return out;
  out.reserve(static_cast<std::size_t>((end - start) * lambda * 1.05) + 16);

  const CorrelationModel& m = cfg.model;
  const double ceiling = 1.0 + std::max(0.0, -m.alpha);
  const double candidate_mean = 1.0 / (ceiling * lambda);
  const double beta = m.beta();
  const double saturation_lag = std::sqrt(kExpCutoff / beta);

  Rng rng(derive_seed(cfg.seed, stage::beam, block));
  double t = start;
  bool have_prev = false;
  double prev = 0.0;
  for (;;) {
    t += rng.exponential(candidate_mean);
    if (t >= end) break;
    double g = 1.0;
    if (have_prev) {
      const double dt = t - prev;
      if (dt < saturation_lag) g = 1.0 - m.alpha * std::exp(-beta * dt * dt);
    }
    if (ceiling == 1.0 && g == 1.0) {
      // certain acceptance, no draw needed
    } else if (rng.uniform() * ceiling >= g) {
      continue;
    }
    out.push_back(t);
    prev = t;
    have_prev = true;
  }
  return out;
}

std::vector<double> generate_stream(const BeamConfig& cfg) {
  cfg.validate();
  const double lambda = compensated_rate(cfg);
  std::vector<double> out;
  for (std::size_t b = 0; b < cfg.block_count(); ++b) {
    auto part = generate_block(cfg, b, lambda);
    out.insert(out.end(), part.begin(), part.end());
  }
  return out;
}

std::vector<G2Bin> empirical_g2(std::span<const double> times, double bin_width,
                                double max_lag) {
  if (times.empty()) throw ValidationError("empirical_g2: empty input");
  if (!(bin_width > 0.0)) throw ValidationError("empirical_g2: bin_width must be > 0");
  if (!(max_lag > bin_width)) {
    throw ValidationError("empirical_g2: max_lag must exceed bin_width");
  }
  if (!std::is_sorted(times.begin(), times.end())) {
    throw ValidationError("empirical_g2: times must be sorted");
  }
  const auto nbins = static_cast<std::size_t>(std::floor(max_lag / bin_width));
  const double range = static_cast<double>(nbins) * bin_width;
  std::vector<G2Bin> bins(nbins);
  for (std::size_t k = 0; k < nbins; ++k) {
    bins[k].lag_lo_ns = static_cast<double>(k) * bin_width;
    bins[k].lag_hi_ns = static_cast<double>(k + 1) * bin_width;
  }

  const std::size_t n = times.size();
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      const double lag = times[j] - times[i];
      if (lag >= range) break;
      ++bins[static_cast<std::size_t>(lag / bin_width)].pairs;
    }
  }

  // Uniform points on [0, T]: lag density N(N-1)/T^2 (T - s) for 0 <= s <= T.
  const double span = times.back() - times.front();
  const double nn = static_cast<double>(n) * static_cast<double>(n - 1);
  for (auto& b : bins) {
    if (span > 0.0) {
      const double a = std::min(b.lag_lo_ns, span);
      const double c = std::min(b.lag_hi_ns, span);
      b.expected = nn / (span * span) * ((c - a) * span - 0.5 * (c * c - a * a));
    }
    if (b.expected > 0.0) {
      b.value = static_cast<double>(b.pairs) / b.expected;
      b.error = std::sqrt(static_cast<double>(b.pairs)) / b.expected;
    } else {
      b.value = std::nan("");
      b.error = std::nan("");
    }
  }
  return bins;
}

}  // namespace fermi_hbt::beam
