#include <doctest.h>

#include <Eigen/Eigenvalues>
#include <cmath>
#include <random>

#include "fermi_hbt/error.hpp"
#include "fermi_hbt/fit.hpp"

using namespace fermi_hbt;
using fit::Fixed;
using fit::FitData;
using fit::Options;
using fit::decimate;
using fit::chi2;

namespace {

FitData synthetic(const model::BroadenedModel& m, double noise, std::size_t n, std::uint64_t seed,
                  double step = 25.0) {
  std::mt19937_64 g(seed);
  std::normal_distribution<double> gauss(0.0, noise);
  FitData d;
  for (std::size_t i = 0; i < n; ++i) {
    const double t = step * static_cast<double>(i);
    d.t_ns.push_back(t);
    d.value.push_back(model::c_exp_closed(t, m) + gauss(g));
    d.sigma.push_back(noise);
  }
  return d;
}

}  // namespace

TEST_CASE("recovers a synthetic curve with 1% noise") {
  const model::BroadenedModel truth{1.0, 120, 140, 400, 1.0};
  const Fixed fixed{140, 400};
  int inside = 0;
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    const auto r = fit::fit(synthetic(truth, 0.01, 40, seed), fixed, {}, {});
    CHECK(r.converged);
    CHECK(r.dof == 37);
    CHECK(r.points == 40);
    if (std::abs(r.tau_c_ns() - 120) <= 12 && std::abs(r.alpha() - 1) <= 0.1) ++inside;
    CHECK(std::abs(r.baseline() - 1) < 5 * r.sigma_baseline());
  }
  CHECK(inside >= 9);
}

TEST_CASE("noise-free data is fitted exactly") {
  const model::BroadenedModel truth{0.8, 60, 100, 400, 1.02};
  const auto r = fit::fit(synthetic(truth, 1e-9, 40, 1), {100, 400}, {}, {});
  CHECK(r.converged);
  CHECK(r.alpha() == doctest::Approx(0.8).epsilon(1e-4));
  CHECK(r.tau_c_ns() == doctest::Approx(60).epsilon(1e-4));
  CHECK(r.baseline() == doctest::Approx(1.02).epsilon(1e-6));
}

TEST_CASE("flat data gives alpha consistent with zero") {
  const model::BroadenedModel flat{0.0, 120, 140, 400, 1.0};
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const auto r = fit::fit(synthetic(flat, 0.01, 40, seed), {140, 400}, {}, {});
    CHECK(r.converged);
    CHECK(std::abs(r.alpha()) < 3 * r.sigma_alpha());
  }
}

TEST_CASE("preconditions") {
  const model::BroadenedModel truth;
  CHECK_THROWS_AS(fit::fit(synthetic(truth, 0.01, 9, 1), {}, {}, {}), ValidationError);
  auto d = synthetic(truth, 0.01, 20, 1);
  d.sigma[3] = 0;
  CHECK_THROWS_AS(fit::fit(d, {}, {}, {}), ValidationError);
  d = synthetic(truth, 0.01, 20, 1);
  d.t_ns[0] = -25;
  CHECK_THROWS_AS(fit::fit(d, {}, {}, {}), ValidationError);
}

TEST_CASE("non-convergence is reported, not thrown") {
  Options o;
  o.max_iterations = 1;
  o.simplex_fallback = false;
  const auto r = fit::fit(synthetic({1.0, 120, 140, 400, 1.0}, 0.01, 40, 2), {140, 400}, {}, o);
  CHECK_FALSE(r.converged);
  CHECK(r.iterations <= 1);
}

TEST_CASE("parameters stay inside their bounds") {
  // a dip deeper than alpha_max allows
  const auto d = synthetic({1.0, 120, 140, 400, 1.0}, 0.001, 40, 3);
  Options o;
  o.alpha_max = 0.5;
  const auto r = fit::fit(d, {140, 400}, {}, o);
  CHECK(r.alpha() <= 0.5);
  CHECK(r.at_bound);
  CHECK(r.tau_c_ns() >= o.tau_c_min_ns);
  CHECK(r.tau_c_ns() <= o.tau_c_max_ns);

  // a bump instead of a dip drives alpha to zero
  auto bump = d;
  for (auto& v : bump.value) v = 2.0 - v;
  const auto b = fit::fit(bump, {140, 400}, {}, {});
  CHECK(b.alpha() == 0.0);
  CHECK(b.at_bound);
}

TEST_CASE("decimated variant is reported alongside") {
  const auto d = synthetic({1.0, 120, 140, 400, 1.0}, 0.01, 80, 4);
  Options o;
  o.decimation = 4;
  auto r = fit::fit(d, {140, 400}, {}, o);
  REQUIRE(r.alternate.has_value());
  CHECK(r.alternate_is_decimated);
  CHECK(r.points == 80);
  CHECK(r.alternate->points == 20);
  CHECK(r.alternate->chi2 < r.chi2);

  o.decimate = true;
  r = fit::fit(d, {140, 400}, {}, o);
  CHECK(r.points == 20);
  REQUIRE(r.alternate.has_value());
  CHECK_FALSE(r.alternate_is_decimated);
  CHECK(r.alternate->points == 80);

  // too few points left after decimation: no alternate
  o.decimate = false;
  o.decimation = 16;
  r = fit::fit(synthetic({1.0, 120, 140, 400, 1.0}, 0.01, 40, 4), {140, 400}, {}, o);
  CHECK_FALSE(r.alternate.has_value());

  const auto thin = decimate(d, 3);
  CHECK(thin.t_ns.size() == 27);
  CHECK(thin.t_ns[1] == 75.0);
}

TEST_CASE("covariance is symmetric positive semidefinite") {
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const auto r = fit::fit(synthetic({0.7, 90, 140, 400, 1.0}, 0.01, 40, seed), {140, 400}, {}, {});
    REQUIRE(r.converged);
    Eigen::Matrix3d c;
    for (int i = 0; i < 3; ++i) {
      for (int j = 0; j < 3; ++j) c(i, j) = r.covariance[i][j];
    }
    CHECK((c - c.transpose()).cwiseAbs().maxCoeff() <= 1e-12 * c.cwiseAbs().maxCoeff());
    Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> es(c);
    CHECK(es.eigenvalues().minCoeff() >= -1e-12 * es.eigenvalues().maxCoeff());
    for (int k = 0; k < 3; ++k) CHECK(r.sigma[k] == doctest::Approx(std::sqrt(c(k, k))));
  }
}

TEST_CASE("chi2 helper") {
  const model::BroadenedModel truth{1.0, 120, 140, 400, 1.0};
  const auto d = synthetic(truth, 1e-300, 20, 1);
  FitData exact = d;
  for (std::size_t i = 0; i < exact.t_ns.size(); ++i) {
    exact.value[i] = model::c_exp_closed(exact.t_ns[i], truth);
    exact.sigma[i] = 0.01;
  }
  CHECK(chi2(exact, {140, 400}, {1.0, 120, 1.0}) == 0.0);
  CHECK(chi2(exact, {140, 400}, {1.0, 120, 1.01}) == doctest::Approx(20.0));
}

TEST_CASE("unidentified direction at tiny tau_c") {
  // With tau_c << tau_t the model depends on alpha * tau_c only.
  const auto d = synthetic({0.0, 0.03, 274, 400, 1.0}, 0.01, 40, 6);
  const auto r = fit::fit(d, {274, 400}, {}, {});
  CHECK(std::abs(r.alpha()) < 3 * r.sigma_alpha());
}
