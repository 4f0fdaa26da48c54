#include <doctest.h>

#include <cmath>
#include <numeric>
#include <random>

#include "fermi_hbt/coincidence.hpp"
#include "fermi_hbt/detector.hpp"
#include "fermi_hbt/error.hpp"
#include "fermi_hbt/kernels.hpp"
#include "fermi_hbt/simulation.hpp"
#include "oracles.hpp"

using namespace fermi_hbt;
using namespace fermi_hbt::coincidence;

namespace {

// group1 = {9}, group2 = {14}, everything else outside
AnalysisConfig small_config() {
  AnalysisConfig c;
  c.group1 = {9};
  c.group2 = {14};
  return c;
}

std::vector<std::uint64_t> random_ticks(std::mt19937_64& g, std::size_t n, std::uint64_t span) {
  std::vector<std::uint64_t> t(n);
  for (auto& x : t) x = g() % span;
  std::sort(t.begin(), t.end());
  return t;
}

EventStream random_events(std::mt19937_64& g, std::size_t n, std::uint64_t span) {
  EventStream ev(n);
  for (auto& e : ev) {
    e.tick = g() % span;
    e.pixel = static_cast<std::uint16_t>(g() % 64);
    e.flags = static_cast<EventFlag>(g() % 3);
  }
  sort_stream(ev);
  return ev;
}

bool same_keys(const EventStream& a, const EventStream& b) {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i].tick != b[i].tick || a[i].pixel != b[i].pixel) return false;
  }
  return true;
}

std::vector<std::uint64_t> brute_single_group(const EventStream& g, std::uint64_t bin,
                                              std::size_t nbins) {
  std::vector<std::uint64_t> h(nbins, 0);
  for (std::size_t i = 0; i < g.size(); ++i) {
    for (std::size_t j = i + 1; j < g.size(); ++j) {
      if (g[i].pixel == g[j].pixel) continue;
      const auto k = (g[j].tick - g[i].tick) / bin;
      if (k < nbins) ++h[k];
    }
  }
  return h;
}

}  // namespace

TEST_CASE("config validation") {
  ClockConfig clock;
  auto c = small_config();
  CHECK_NOTHROW(c.validate(clock, 64));
  CHECK(c.bin_ticks(clock) == 1u);
  CHECK(c.window_bins() == 16u);
  CHECK(c.lag_bins() == 40u);

  auto overlap = c;
  overlap.group2 = {9, 10};
  CHECK_THROWS_AS(overlap.validate(clock, 64), ValidationError);
  overlap.single_group_mode = true;
  CHECK_NOTHROW(overlap.validate(clock, 64));

  auto bad = c;
  bad.delta_ns = 390;
  CHECK_THROWS_AS(bad.validate(clock, 64), ValidationError);
  bad = c;
  bad.bin_width_ns = 30;
  CHECK_THROWS_AS(bad.validate(clock, 64), ValidationError);
  bad = c;
  bad.group2 = {64};
  CHECK_THROWS_AS(bad.validate(clock, 64), ValidationError);
  bad = c;
  bad.norm_hi_ns = 1000;
  CHECK_THROWS_AS(bad.validate(clock, 64), ValidationError);
  bad = c;
  bad.delta_s_ns = 0;
  CHECK_THROWS_AS(bad.validate(clock, 64), ValidationError);
}

TEST_CASE("clean_events examples") {
  ClockConfig clock;
  const auto cfg = small_config();

  const EventStream dup = {{0, 9}, {4, 9}};
  auto r = clean_events(dup, cfg, clock);
  REQUIRE(r.group1.size() == 1);
  CHECK(r.group1[0].tick == 0);

  const EventStream veto = {{0, 9}, {2, 0}};
  CHECK(clean_events(veto, cfg, clock).group1.empty());

  // the veto window is two-sided and inclusive at delta_s (6 ticks)
  const EventStream before = {{10, 0}, {16, 9}, {17, 14}};
  r = clean_events(before, cfg, clock);
  CHECK(r.group1.empty());
  CHECK(r.group2.size() == 1);

  const EventStream far = {{0, 9}, {7, 14}, {20, 9}, {40, 0}, {47, 14}, {60, 9}};
  r = clean_events(far, cfg, clock);
  CHECK(same_keys(r.group1, {{0, 9}, {20, 9}, {60, 9}}));
  CHECK(same_keys(r.group2, {{7, 14}, {47, 14}}));

  // chaining: 0, 5, 10 collapse to 0 even though 10 - 0 > delta_s
  const EventStream chain = {{0, 9}, {5, 9}, {10, 9}, {17, 9}};
  r = clean_events(chain, cfg, clock);
  CHECK(same_keys(r.group1, {{0, 9}, {17, 9}}));

  // dedup is per group, not across groups
  const EventStream cross = {{0, 9}, {1, 14}};
  r = clean_events(cross, cfg, clock);
  CHECK(r.group1.size() == 1);
  CHECK(r.group2.size() == 1);

  auto off = cfg;
  off.suppress_spurious = false;
  r = clean_events(chain, off, clock);
  CHECK(r.group1.size() == 4);
}

TEST_CASE("clean_events is idempotent and blind to flags") {
  ClockConfig clock;
  AnalysisConfig cfg;
  cfg.group1 = detector::parse_pixel_set("r0-7:c0-2");
  cfg.group2 = detector::parse_pixel_set("r0-7:c4-6");
  std::mt19937_64 g(31);
  for (int trial = 0; trial < 200; ++trial) {
    const auto ev = random_events(g, 300, 3000);
    const auto once = clean_events(ev, cfg, clock);
    EventStream kept = once.group1;
    kept.insert(kept.end(), once.group2.begin(), once.group2.end());
    sort_stream(kept);
    const auto twice = clean_events(kept, cfg, clock);
    REQUIRE(same_keys(twice.group1, once.group1));
    REQUIRE(same_keys(twice.group2, once.group2));

    auto shuffled = ev;
    for (auto& e : shuffled) e.flags = static_cast<EventFlag>(g() % 3);
    const auto blind = clean_events(shuffled, cfg, clock);
    REQUIRE(same_keys(blind.group1, once.group1));
    REQUIRE(same_keys(blind.group2, once.group2));
  }
}

TEST_CASE("delay_histogram examples") {
  const std::vector<std::uint64_t> d1 = {0}, d2 = {16}, none;
  auto h = delay_histogram(d1, d2, 1, 40);
  for (std::size_t k = 0; k < 40; ++k) CHECK(h[k] == (k == 16 ? 1u : 0u));
  h = delay_histogram(d1, none, 1, 40);
  CHECK(std::accumulate(h.begin(), h.end(), std::uint64_t{0}) == 0u);
  // t2 < t1 is never counted; lag 0 is
  const std::vector<std::uint64_t> a = {5}, b = {4, 5};
  h = delay_histogram(a, b, 1, 4);
  CHECK(h == std::vector<std::uint64_t>{1, 0, 0, 0});
  CHECK_THROWS_AS(delay_histogram(a, b, 0, 4), ValidationError);
}

TEST_CASE("delay_histogram matches the brute-force counter on 1000 instances") {
  std::mt19937_64 g(1000);
  for (int trial = 0; trial < 1000; ++trial) {
    const auto d1 = random_ticks(g, g() % 60, 1 + g() % 400);
    const auto d2 = random_ticks(g, g() % 60, 1 + g() % 400);
    const std::uint64_t bin = 1 + g() % 4;
    const std::size_t nbins = 1 + g() % 50;
    const auto expect = oracle::brute_histogram(d1, d2, bin, nbins);
    REQUIRE(delay_histogram(d1, d2, bin, nbins, 1) == expect);
    REQUIRE(delay_histogram(d1, d2, bin, nbins, 3) == expect);
  }
}

TEST_CASE("uncorrelated streams give a flat histogram at the pair-rate level") {
  std::mt19937_64 g(8);
  const std::uint64_t span = 400'000'000;  // 10 s of ticks
  const std::size_t n = 50000;             // 5 kHz each
  const auto d1 = random_ticks(g, n, span), d2 = random_ticks(g, n, span);
  const auto h = delay_histogram(d1, d2, 1, 40, 1);
  const double expect = static_cast<double>(n) * (static_cast<double>(n) / span);
  double chi2 = 0;
  for (auto c : h) chi2 += std::pow(static_cast<double>(c) - expect, 2) / expect;
  CHECK(chi2 < 40 + 5 * std::sqrt(80.0));
}

TEST_CASE("windowed_rate") {
  const std::vector<std::uint64_t> flat(55, 7);
  const auto c = windowed_rate(flat, 16, 40);
  REQUIRE(c.value.size() == 40);
  for (double v : c.value) CHECK(v == 7.0);
  CHECK(c.error[0] == doctest::Approx(std::sqrt(7.0 * 16) / 16));

  std::vector<std::uint64_t> spike(55, 0);
  spike[0] = 16;
  const auto s = windowed_rate(spike, 400.0, 25.0, 40);
  CHECK(s.value[0] == 1.0);
  for (std::size_t k = 1; k < 40; ++k) CHECK(s.value[k] == 0.0);

  CHECK_THROWS_AS(windowed_rate(spike, 390.0, 25.0, 40), ValidationError);
  CHECK_THROWS_AS(windowed_rate(spike, 16, 41), ValidationError);

  std::mt19937_64 g(4);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t w = 1 + g() % 20, out = 1 + g() % 40;
    std::vector<std::uint64_t> raw(out + w - 1);
    for (auto& x : raw) x = g() % 100;
    const auto r = windowed_rate(raw, w, out);
    for (std::size_t k = 0; k < out; ++k) {
      std::uint64_t box = 0;
      for (std::size_t j = k; j < k + w; ++j) box += raw[j];
      REQUIRE(r.value[k] == static_cast<double>(box) / static_cast<double>(w));
    }
  }
}

TEST_CASE("normalize") {
  DelayHistogram h;
  h.config = small_config();
  const std::size_t n = h.config.lag_bins();
  for (std::size_t k = 0; k <= n; ++k) h.bin_edges_ns.push_back(25.0 * static_cast<double>(k));
  h.counts.assign(n, 0);
  h.windowed.assign(n, 200.0);
  h.windowed[0] = 120.0;
  normalize(h);
  CHECK(h.norm_level == 200.0);
  CHECK(h.normalized[0] == doctest::Approx(0.6));
  CHECK(h.normalized[30] == 1.0);
  CHECK(h.errors[0] == doctest::Approx(std::sqrt(120.0 * 16) / 16 / 200));

  h.windowed.assign(n, 5.0);
  normalize(h);
  for (double v : h.normalized) CHECK(v == 1.0);

  for (std::size_t k = 20; k <= 28; ++k) h.windowed[k] = 0.0;
  h.windowed[21] = 3.0;
  h.windowed[22] = 3.0;
  CHECK_THROWS_AS(normalize(h), ValidationError);
}

TEST_CASE("single-group pairs") {
  const EventStream same = {{0, 9}, {4, 9}};
  const auto zero = single_group_pairs(same, 1, 40);
  CHECK(std::accumulate(zero.begin(), zero.end(), std::uint64_t{0}) == 0u);
  const EventStream distinct = {{0, 9}, {4, 17}};
  const auto h = single_group_pairs(distinct, 1, 40, 1);
  for (std::size_t k = 0; k < 40; ++k) CHECK(h[k] == (k == 4 ? 1u : 0u));

  std::mt19937_64 g(12);
  for (int trial = 0; trial < 300; ++trial) {
    auto ev = random_events(g, g() % 80, 1 + g() % 300);
    for (auto& e : ev) e.pixel %= 5;
    sort_stream(ev);
    const std::uint64_t bin = 1 + g() % 3;
    const std::size_t nbins = 1 + g() % 40;
    REQUIRE(single_group_pairs(ev, bin, nbins, 1) == brute_single_group(ev, bin, nbins));
    REQUIRE(single_group_pairs(ev, bin, nbins, 2) == brute_single_group(ev, bin, nbins));
  }
}

TEST_CASE("single-group mode vetoes but does not dedup") {
  ClockConfig clock;
  AnalysisConfig cfg;
  cfg.group1 = {9, 17};
  cfg.single_group_mode = true;
  const EventStream ev = {{0, 9}, {4, 17}, {100, 9}, {101, 3}};
  const auto r = clean_events(ev, cfg, clock);
  CHECK(same_keys(r.group1, {{0, 9}, {4, 17}}));
  CHECK(r.group2.empty());
}

TEST_CASE("analyze rejects unsorted input and handles empty input on request") {
  RunMetadata run;
  const auto cfg = small_config();
  const EventStream bad = {{5, 9}, {1, 14}};
  CHECK_THROWS_AS(analyze(bad, cfg, run, 1), ValidationError);
  CHECK_THROWS_AS(analyze({}, cfg, run, 1), ValidationError);
  const auto h = analyze({}, cfg, run, 1, true);
  CHECK(h.size() == 40);
  CHECK(h.bin_edges_ns.size() == 41);
  for (std::size_t k = 0; k < h.size(); ++k) {
    CHECK(h.counts[k] == 0u);
    CHECK(h.normalized[k] == 0.0);
  }
}

TEST_CASE("antibunched run: two-group and single-group curves both dip at t = 0") {
  SimulationConfig sim;
  sim.beam.rate_hz = 30000;
  sim.beam.duration_s = 100;
  sim.beam.model = {1.0, 120};
  sim.beam.seed = 3;
  const auto ev = parallel::simulate(sim);
  RunMetadata run;

  AnalysisConfig two;
  two.group1 = detector::parse_pixel_set("r0-7:c3");
  two.group2 = detector::parse_pixel_set("r0-7:c4");
  const auto h2 = analyze(ev, two, run);

  AnalysisConfig one;
  one.group1 = detector::parse_pixel_set("r0-7:c3");
  one.single_group_mode = true;
  const auto h1 = analyze(ev, one, run);

  for (const auto* h : {&h2, &h1}) {
    CHECK(h->normalized[0] + 5 * h->errors[0] < 1.0);
    // tail bins sit at 1 by construction
    double tail = 0;
    for (std::size_t k = 20; k <= 28; ++k) tail += h->normalized[k];
    CHECK(tail / 9 == doctest::Approx(1.0).epsilon(1e-12));
    // rising towards the tail
    CHECK(h->normalized[0] < h->normalized[8]);
    CHECK(h->normalized[8] < h->normalized[20]);
  }
  const double diff = h1.normalized[0] - h2.normalized[0];
  const double sigma = std::hypot(h1.errors[0], h2.errors[0]);
  CHECK(std::abs(diff) < 4 * sigma);
}
