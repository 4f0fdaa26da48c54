#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "fermi_hbt/error.hpp"
#include "fermi_hbt/timetag.hpp"

using namespace fermi_hbt;

namespace {

EventStream random_sorted(std::mt19937_64& g, std::size_t n, std::uint64_t max_tick,
                          std::uint16_t pixel) {
  EventStream s(n);
  for (auto& e : s) e = {g() % max_tick, pixel, EventFlag::real};
  sort_stream(s);
  return s;
}

}  // namespace

TEST_CASE("clock defaults to a 25 ns tick") {
  ClockConfig c;
  CHECK(c.frequency_hz == 40'000'000u);
  CHECK(c.period_num() == 25u);
  CHECK(c.period_den() == 1u);
  CHECK(c.tick_period_ns() * static_cast<double>(c.frequency_hz) == doctest::Approx(1e9));
}

TEST_CASE("ns_to_ticks") {
  ClockConfig c;
  CHECK(ns_to_ticks(25.0, c) == 1u);
  CHECK(ns_to_ticks(0.0, c) == 0u);
  CHECK(ns_to_ticks(137.0, c) == 5u);
  CHECK(ns_to_ticks(24.999, c) == 0u);
  CHECK_THROWS_AS(ns_to_ticks(-1.0, c), std::domain_error);
  CHECK_THROWS_AS(ns_to_ticks(std::nan(""), c), std::domain_error);
}

TEST_CASE("ticks_to_ns") {
  ClockConfig c;
  CHECK(ticks_to_ns(1, c) == 25.0);
  CHECK(ticks_to_ns(0, c) == 0.0);
  CHECK(ticks_to_ns(16, c) == 400.0);
  CHECK_THROWS_AS(ticks_to_ns(~0ULL, c), std::range_error);
}

TEST_CASE("ticks_to_ns is exact for a non-integer period") {
  ClockConfig c{30'000'000};  // 100/3 ns
  CHECK(c.period_num() == 100u);
  CHECK(c.period_den() == 3u);
  CHECK(ticks_to_ns(3, c) == 100.0);
  CHECK(ns_to_ticks(ticks_to_ns(7, c), c) == 7u);
}

TEST_CASE("tick conversions round-trip") {
  ClockConfig c;
  std::mt19937_64 g(11);
  for (int i = 0; i < 100000; ++i) {
    const std::uint64_t n = g() >> 18;  // < 2^46, ns exact in a double
    REQUIRE(ns_to_ticks(ticks_to_ns(n, c), c) == n);
  }
  for (int i = 0; i < 10000; ++i) {
    const double t = std::uniform_real_distribution<double>(0, 1e12)(g);
    const auto n = ns_to_ticks(t, c);
    REQUIRE(ticks_to_ns(n, c) <= t);
    REQUIRE(t < ticks_to_ns(n, c) + 25.0);
  }
}

TEST_CASE("merge_streams small cases") {
  std::vector<EventStream> two = {{{10, 0}}, {{5, 1}}};
  const auto m = merge_streams(two);
  REQUIRE(m.size() == 2);
  CHECK(m[0] == Event{5, 1});
  CHECK(m[1] == Event{10, 0});

  std::vector<EventStream> empty = {{}, {}};
  CHECK(merge_streams(empty).empty());

  std::vector<EventStream> tie = {{{7, 3}}, {{7, 1}}};
  const auto t = merge_streams(tie);
  CHECK(t[0].pixel == 1);
  CHECK(t[1].pixel == 3);
}

TEST_CASE("merge_streams keeps input order for equal keys") {
  std::vector<EventStream> s = {{{4, 2, EventFlag::real}}, {{4, 2, EventFlag::crosstalk}}};
  const auto m = merge_streams(s);
  CHECK(m[0].flags == EventFlag::real);
  CHECK(m[1].flags == EventFlag::crosstalk);
}

TEST_CASE("merge_streams names the unsorted stream and position") {
  std::vector<EventStream> s = {{{1, 0}, {2, 0}}, {{1, 0}, {9, 0}, {3, 0}}};
  try {
    merge_streams(s);
    FAIL("expected a ValidationError");
  } catch (const ValidationError& e) {
    const std::string what = e.what();
    CHECK(what.find("stream 1") != std::string::npos);
    CHECK(what.find("position 2") != std::string::npos);
  }
}

TEST_CASE("64 per-pixel streams of 1e5 events merge like concatenate-and-sort") {
  std::mt19937_64 g(2024);
  std::vector<EventStream> streams;
  EventStream all;
  for (std::uint16_t p = 0; p < 64; ++p) {
    streams.push_back(random_sorted(g, 100000, 4'000'000'000ULL, p));
    all.insert(all.end(), streams.back().begin(), streams.back().end());
  }
  std::stable_sort(all.begin(), all.end(), event_before);
  const auto merged = merge_streams(streams);
  CHECK(merged.size() == 6'400'000u);
  CHECK(is_sorted_stream(merged));
  CHECK(merged == all);
}

TEST_CASE("merge is associative and preserves the multiset") {
  std::mt19937_64 g(5);
  for (int trial = 0; trial < 50; ++trial) {
    auto a = random_sorted(g, g() % 200, 1000, static_cast<std::uint16_t>(g() % 4));
    auto b = random_sorted(g, g() % 200, 1000, static_cast<std::uint16_t>(g() % 4));
    auto c = random_sorted(g, g() % 200, 1000, static_cast<std::uint16_t>(g() % 4));
    std::vector<EventStream> ab = {a, b};
    std::vector<EventStream> ab_c = {merge_streams(ab), c};
    std::vector<EventStream> bc = {b, c};
    std::vector<EventStream> a_bc = {a, merge_streams(bc)};
    std::vector<EventStream> abc = {a, b, c};
    const auto left = merge_streams(ab_c);
    CHECK(left == merge_streams(a_bc));
    CHECK(left == merge_streams(abc));
    CHECK(left.size() == a.size() + b.size() + c.size());
  }
}
