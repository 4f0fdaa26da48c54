// Serial reference vs OpenMP kernels. Arg is the thread count, 0 = serial.

#include <benchmark/benchmark.h>

#include <algorithm>
#include <random>

#include "fermi_hbt/kernels.hpp"
#include "fermi_hbt/simulation.hpp"

using namespace fermi_hbt;

namespace {

std::vector<std::uint64_t> sorted_ticks(std::size_t n, std::uint64_t span, std::uint64_t seed) {
  std::mt19937_64 g(seed);
  std::vector<std::uint64_t> v(n);
  for (auto& x : v) x = g() % span;
  std::sort(v.begin(), v.end());
  return v;
}

// ~1e6 events per group over 100 s of 25 ns ticks
struct Streams {
  std::vector<std::uint64_t> d1 = sorted_ticks(1'000'000, 4'000'000'000ULL, 1);
  std::vector<std::uint64_t> d2 = sorted_ticks(1'000'000, 4'000'000'000ULL, 2);
};

const Streams& streams() {
  static const Streams s;
  return s;
}

void BM_delay_histogram(benchmark::State& state) {
  const auto& [d1, d2] = streams();
  const int threads = static_cast<int>(state.range(0));
  for (auto _ : state) {
    auto h = threads == 0 ? serial::delay_histogram(d1, d2, 1, 2000)
                          : parallel::delay_histogram(d1, d2, 1, 2000, threads);
    benchmark::DoNotOptimize(h.data());
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(d1.size()));
}

void BM_single_group_pairs(benchmark::State& state) {
  const auto& d1 = streams().d1;
  EventStream group(d1.size());
  for (std::size_t i = 0; i < d1.size(); ++i) {
    group[i] = {d1[i], static_cast<std::uint16_t>(i % 16)};
  }
  const int threads = static_cast<int>(state.range(0));
  for (auto _ : state) {
    auto h = threads == 0 ? serial::single_group_pairs(group, 1, 2000)
                          : parallel::single_group_pairs(group, 1, 2000, threads);
    benchmark::DoNotOptimize(h.data());
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(group.size()));
}

void BM_quadrature_grid(benchmark::State& state) {
  std::vector<GridPoint> pts;
  for (double tc : {1.0, 30.0, 120.0, 1000.0}) {
    for (int k = 0; k <= 40; ++k) pts.push_back({{1.0, tc, 140.0, 400.0, 1.0}, 25.0 * k});
  }
  const int threads = static_cast<int>(state.range(0));
  for (auto _ : state) {
    auto v = threads == 0 ? serial::quadrature_grid(pts, 1e-9)
                          : parallel::quadrature_grid(pts, 1e-9, threads);
    benchmark::DoNotOptimize(v.data());
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(pts.size()));
}

void BM_simulate(benchmark::State& state) {
  SimulationConfig cfg;
  cfg.beam.rate_hz = 20000;
  cfg.beam.duration_s = 20;
  cfg.detector.crosstalk.probability = 0.05;
  const int threads = static_cast<int>(state.range(0));
  std::size_t n = 0;
  for (auto _ : state) {
    auto ev = threads == 0 ? serial::simulate(cfg) : parallel::simulate(cfg, threads);
    n = ev.size();
    benchmark::DoNotOptimize(ev.data());
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(n));
}

}  // namespace

BENCHMARK(BM_delay_histogram)->Arg(0)->Arg(1)->Arg(2)->Arg(4)->UseRealTime()->Unit(benchmark::kMillisecond);
BENCHMARK(BM_single_group_pairs)->Arg(0)->Arg(1)->Arg(2)->Arg(4)->UseRealTime()->Unit(benchmark::kMillisecond);
BENCHMARK(BM_quadrature_grid)->Arg(0)->Arg(1)->Arg(2)->Arg(4)->UseRealTime()->Unit(benchmark::kMillisecond);
BENCHMARK(BM_simulate)->Arg(0)->Arg(1)->Arg(2)->Arg(4)->UseRealTime()->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
