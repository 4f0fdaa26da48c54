#include "fermi_hbt/fit.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>

#include "fermi_hbt/error.hpp"

namespace fermi_hbt::fit {

namespace {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;
using Params = std::array<double, 3>;

struct Bounds {
  Params lo;
  Params hi;
};

Bounds bounds_of(const Options& o) {
  const double inf = std::numeric_limits<double>::infinity();
  return {{o.alpha_min, o.tau_c_min_ns, -inf}, {o.alpha_max, o.tau_c_max_ns, inf}};
}

Params clamp(Params p, const Bounds& b) {
  for (std::size_t k = 0; k < 3; ++k) p[k] = std::clamp(p[k], b.lo[k], b.hi[k]);
  return p;
}

model::BroadenedModel as_model(const Fixed& fixed, const Params& p) {
  model::BroadenedModel m;
  m.alpha = p[kAlpha];
  m.tau_c_ns = p[kTauC];
  m.baseline = p[kBaseline];
  m.tau_t_ns = fixed.tau_t_ns;
  m.delta_ns = fixed.delta_ns;
  return m;
}

// Normal equations of the weighted residuals r_i = (f_i - y_i) / sigma_i.
void normal_equations(const FitData& d, const Fixed& fixed, const Params& p, Mat3& a,
                      Vec3& g, double& chi) {
  const auto m = as_model(fixed, p);
  a.setZero();
  g.setZero();
  chi = 0.0;
  for (std::size_t i = 0; i < d.t_ns.size(); ++i) {
    const double inv = 1.0 / d.sigma[i];
    const double r = (model::c_exp_closed(d.t_ns[i], m) - d.value[i]) * inv;
    const auto grad = model::c_exp_gradient(d.t_ns[i], m);
    const Vec3 j(grad[0] * inv, grad[1] * inv, grad[2] * inv);
    a.noalias() += j * j.transpose();
    g += j * r;
    chi += r * r;
  }
}

void covariance_of(const Mat3& a, Estimate& est) {
  // Pseudo-inverse in correlation scaling, so the rank cut does not depend on
  // parameter units.
  Vec3 scale;
  for (int k = 0; k < 3; ++k) scale[k] = a(k, k) > 0.0 ? 1.0 / std::sqrt(a(k, k)) : 0.0;
  const Mat3 r = scale.asDiagonal() * a * scale.asDiagonal();
  Eigen::SelfAdjointEigenSolver<Mat3> eig(r);
  const Vec3 values = eig.eigenvalues();
  const Mat3 vectors = eig.eigenvectors();
  constexpr double kRankCut = 1e-13;  // relative to the unit diagonal
  Mat3 inv = Mat3::Zero();
  std::array<bool, 3> unidentified{false, false, false};
  for (int k = 0; k < 3; ++k) {
    if (scale[k] == 0.0) unidentified[static_cast<std::size_t>(k)] = true;
  }
  for (int i = 0; i < 3; ++i) {
    if (values[i] > kRankCut) {
      inv += vectors.col(i) * vectors.col(i).transpose() / values[i];
    } else {
      for (int k = 0; k < 3; ++k) {
        if (std::abs(vectors(k, i)) > 1e-6) unidentified[static_cast<std::size_t>(k)] = true;
      }
    }
  }
  const Mat3 cov = scale.asDiagonal() * inv * scale.asDiagonal();
  for (std::size_t r = 0; r < 3; ++r) {
    for (std::size_t c = 0; c < 3; ++c) {
      est.covariance[r][c] = cov(static_cast<int>(r), static_cast<int>(c));
    }
    est.sigma[r] = unidentified[r] ? std::numeric_limits<double>::infinity()
                                   : std::sqrt(std::max(0.0, est.covariance[r][r]));
  }
}

struct LmOutcome {
  Params p;
  double chi;
  bool converged;
  int iterations;
};

LmOutcome levenberg_marquardt(const FitData& d, const Fixed& fixed, Params p,
                              const Bounds& b, const Options& o) {
  p = clamp(p, b);
  double lambda = 1e-3;
  int successive = 0;
  Mat3 a;
  Vec3 g;
  double chi = 0.0;
  int it = 0;
  for (it = 1; it <= o.max_iterations; ++it) {
    normal_equations(d, fixed, p, a, g, chi);

    // Gradient on the free set (coordinates not pinned at a bound by an
    // outward gradient), measured in the metric of the normal matrix: the
    // chi2 decrease a full Gauss-Newton step would predict. Scale free, so
    // the stiff baseline direction does not dominate through roundoff.
    const double diag_floor = 1e-12 * std::max(a.diagonal().maxCoeff(), 1e-300);
    std::array<int, 3> free_idx{};
    int nfree = 0;
    for (int k = 0; k < 3; ++k) {
      const auto ku = static_cast<std::size_t>(k);
      const bool pinned = (p[ku] <= b.lo[ku] && g[k] > 0.0) || (p[ku] >= b.hi[ku] && g[k] < 0.0);
      if (!pinned) free_idx[static_cast<std::size_t>(nfree++)] = k;
    }
    double grad_measure = 0.0;
    if (nfree > 0) {
      Eigen::MatrixXd af(nfree, nfree);
      Eigen::VectorXd gf(nfree);
      for (int i = 0; i < nfree; ++i) {
        gf[i] = g[free_idx[static_cast<std::size_t>(i)]];
        for (int j = 0; j < nfree; ++j) {
          af(i, j) = a(free_idx[static_cast<std::size_t>(i)], free_idx[static_cast<std::size_t>(j)]);
        }
        af(i, i) += diag_floor;
      }
      grad_measure = std::abs(gf.dot(af.ldlt().solve(gf)));
    }

    Params accepted = p;
    bool improved = false;
    double chi_new = chi;
    while (lambda < 1e16) {
      // damped step on the free set; pinned coordinates stay put
      Vec3 step = Vec3::Zero();
      if (nfree > 0) {
        Eigen::MatrixXd damped(nfree, nfree);
        Eigen::VectorXd rhs(nfree);
        for (int i = 0; i < nfree; ++i) {
          const int ki = free_idx[static_cast<std::size_t>(i)];
          rhs[i] = -g[ki];
          for (int j = 0; j < nfree; ++j) damped(i, j) = a(ki, free_idx[static_cast<std::size_t>(j)]);
          damped(i, i) += lambda * std::max(a(ki, ki), diag_floor);
        }
        const Eigen::VectorXd sub = damped.ldlt().solve(rhs);
        for (int i = 0; i < nfree; ++i) step[free_idx[static_cast<std::size_t>(i)]] = sub[i];
      }
      Params trial = clamp({p[0] + step[0], p[1] + step[1], p[2] + step[2]}, b);
      const double chi_trial = chi2(d, fixed, trial);
      if (std::isfinite(chi_trial) && chi_trial <= chi) {
        accepted = trial;
        chi_new = chi_trial;
        improved = true;
        lambda = std::max(lambda * 0.1, 1e-12);
        break;
      }
      lambda *= 10.0;
    }

    bool step_small = true;
    for (std::size_t k = 0; k < 3; ++k) {
      if (std::abs(accepted[k] - p[k]) > o.tolerance * (std::abs(p[k]) + o.tolerance)) {
        step_small = false;
      }
    }
    const bool grad_small = grad_measure <= o.tolerance * std::max(chi, 1.0);
    p = accepted;
    chi = chi_new;
    successive = (grad_small && step_small) ? successive + 1 : 0;
    if (successive >= 2) return {p, chi, true, it};
    if (!improved) {
      // no descent at any damping: numerically stationary
      return {p, chi, grad_small, it};
    }
  }
  return {p, chi, false, std::min(it, o.max_iterations)};
}

Params nelder_mead(const FitData& d, const Fixed& fixed, Params start, const Bounds& b,
                   int max_evals) {
  auto f = [&](const Params& p) {
    const double v = chi2(d, fixed, clamp(p, b));
    return std::isfinite(v) ? v : std::numeric_limits<double>::max();
  };
  std::array<Params, 4> s{};
  std::array<double, 4> fv{};
  s[0] = clamp(start, b);
  const Params scale{0.1, 0.2 * std::max(s[0][kTauC], 10.0), 0.01};
  for (std::size_t i = 1; i < 4; ++i) {
    s[i] = s[0];
    s[i][i - 1] += scale[i - 1];
    s[i] = clamp(s[i], b);
    if (s[i] == s[0]) s[i][i - 1] -= scale[i - 1];
  }
  for (std::size_t i = 0; i < 4; ++i) fv[i] = f(s[i]);

  int evals = 4;
  while (evals < max_evals) {
    std::array<std::size_t, 4> order{0, 1, 2, 3};
    std::sort(order.begin(), order.end(), [&](auto x, auto y) { return fv[x] < fv[y]; });
    const auto best = order[0], worst = order[3], second = order[2];
    if (std::abs(fv[worst] - fv[best]) <= 1e-14 * (std::abs(fv[best]) + 1e-300)) break;

    Params centroid{};
    for (std::size_t i = 0; i < 3; ++i) {
      for (std::size_t k = 0; k < 3; ++k) centroid[k] += s[order[i]][k] / 3.0;
    }
    auto along = [&](double t) {
      Params p;
      for (std::size_t k = 0; k < 3; ++k) p[k] = centroid[k] + t * (s[worst][k] - centroid[k]);
      return clamp(p, b);
    };
    const Params reflected = along(-1.0);
    const double fr = f(reflected);
    ++evals;
    if (fr < fv[best]) {
      const Params expanded = along(-2.0);
      const double fe = f(expanded);
      ++evals;
      if (fe < fr) {
        s[worst] = expanded;
        fv[worst] = fe;
      } else {
        s[worst] = reflected;
        fv[worst] = fr;
      }
    } else if (fr < fv[second]) {
      s[worst] = reflected;
      fv[worst] = fr;
    } else {
      const Params contracted = along(fr < fv[worst] ? -0.5 : 0.5);
      const double fc = f(contracted);
      ++evals;
      if (fc < std::min(fr, fv[worst])) {
        s[worst] = contracted;
        fv[worst] = fc;
      } else {
        for (std::size_t i = 1; i < 4; ++i) {
          auto& v = s[order[i]];
          for (std::size_t k = 0; k < 3; ++k) v[k] = s[best][k] + 0.5 * (v[k] - s[best][k]);
          fv[order[i]] = f(v);
          ++evals;
        }
      }
    }
  }
  const auto best = static_cast<std::size_t>(std::min_element(fv.begin(), fv.end()) - fv.begin());
  return clamp(s[best], b);
}

}  // namespace

FitData from_histogram(const coincidence::DelayHistogram& hist, double t_min, double t_max) {
  FitData d;
  for (std::size_t k = 0; k < hist.size(); ++k) {
    const double t = hist.lag_ns(k);
    if (t < t_min || t > t_max) continue;
    d.t_ns.push_back(t);
    d.value.push_back(hist.normalized[k]);
    d.sigma.push_back(hist.errors[k]);
  }
  return d;
}

FitData decimate(const FitData& data, std::size_t step) {
  if (step <= 1) return data;
  FitData out;
  for (std::size_t i = 0; i < data.t_ns.size(); i += step) {
    out.t_ns.push_back(data.t_ns[i]);
    out.value.push_back(data.value[i]);
    out.sigma.push_back(data.sigma[i]);
  }
  return out;
}

double chi2(const FitData& data, const Fixed& fixed, const std::array<double, 3>& p) {
  const auto m = as_model(fixed, p);
  double sum = 0.0;
  for (std::size_t i = 0; i < data.t_ns.size(); ++i) {
    const double r = (model::c_exp_closed(data.t_ns[i], m) - data.value[i]) / data.sigma[i];
    sum += r * r;
  }
  return sum;
}

Estimate fit_points(const FitData& data, const Fixed& fixed, const Initial& init,
                    const Options& options) {
  const std::size_t n = data.t_ns.size();
  if (n < 10) {
    throw ValidationError("fit: need at least 10 points, got " + std::to_string(n));
  }
  if (data.value.size() != n || data.sigma.size() != n) {
    throw ValidationError("fit: mismatched data columns");
  }
  for (std::size_t i = 0; i < n; ++i) {
    if (!(data.sigma[i] > 0.0) || !std::isfinite(data.sigma[i])) {
      throw ValidationError("fit: error at t = " + std::to_string(data.t_ns[i]) +
                            " ns is not > 0");
    }
    if (data.t_ns[i] < 0.0) {
      throw ValidationError("fit: negative lag " + std::to_string(data.t_ns[i]) +
                            " ns rejected");
    }
    if (!std::isfinite(data.value[i])) throw ValidationError("fit: non-finite data value");
  }
  if (!(fixed.delta_ns > 0.0) || !(fixed.tau_t_ns >= 0.0)) {
    throw ValidationError("fit: need delta > 0 and tau_t >= 0");
  }

  const Bounds b = bounds_of(options);
  const Params start{init.alpha, init.tau_c_ns, init.baseline};
  LmOutcome lm = levenberg_marquardt(data, fixed, start, b, options);
  std::string method = "levenberg-marquardt";
  int iterations = lm.iterations;
  if (!lm.converged && options.simplex_fallback) {
    const Params polished = nelder_mead(data, fixed, lm.p, b, 20000);
    LmOutcome second = levenberg_marquardt(data, fixed, polished, b, options);
    iterations += second.iterations;
    if (second.chi <= lm.chi || second.converged) lm = second;
    method = "nelder-mead+levenberg-marquardt";
  }

  Estimate est;
  est.value = lm.p;
  est.chi2 = lm.chi;
  est.points = n;
  est.dof = n - 3;
  est.converged = lm.converged;
  est.iterations = iterations;
  est.method = method;
  auto near = [](double x, double edge, double span) {
    return std::abs(x - edge) <= 1e-9 * span;
  };
  est.at_bound =
      near(lm.p[kTauC], b.lo[kTauC], b.hi[kTauC] - b.lo[kTauC]) ||
      near(lm.p[kTauC], b.hi[kTauC], b.hi[kTauC] - b.lo[kTauC]) ||
      near(lm.p[kAlpha], b.lo[kAlpha], b.hi[kAlpha] - b.lo[kAlpha]) ||
      near(lm.p[kAlpha], b.hi[kAlpha], b.hi[kAlpha] - b.lo[kAlpha]);

  Mat3 a;
  Vec3 g;
  double chi = 0.0;
  normal_equations(data, fixed, lm.p, a, g, chi);
  covariance_of(a, est);
  return est;
}

FitResult fit(const FitData& data, const Fixed& fixed, const Initial& init,
              const Options& options) {
  const std::size_t step = std::max<std::size_t>(options.decimation, 1);
  const FitData thinned = decimate(data, step);
  FitResult result;
  result.fixed = fixed;
  const FitData& primary = options.decimate ? thinned : data;
  static_cast<Estimate&>(result) = fit_points(primary, fixed, init, options);
  if (step > 1) {
    const FitData& other = options.decimate ? data : thinned;
    if (other.t_ns.size() >= 10) {
      result.alternate = fit_points(other, fixed, init, options);
      result.alternate_is_decimated = !options.decimate;
    }
  }
  return result;
}

}  // namespace fermi_hbt::fit
