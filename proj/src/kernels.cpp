#include "fermi_hbt/kernels.hpp"

#include <omp.h>

#include <algorithm>

#include "fermi_hbt/simulation.hpp"

namespace fermi_hbt {

namespace {

// Start-stop sweep for starts d1[begin, end).
void sweep(std::span<const std::uint64_t> d1, std::span<const std::uint64_t> d2,
           std::size_t begin, std::size_t end, std::uint64_t bin_ticks, std::size_t nbins,
           std::vector<std::uint64_t>& counts) {
  const std::uint64_t range = bin_ticks * nbins;
  auto lo = std::lower_bound(d2.begin(), d2.end(), begin < d1.size() ? d1[begin] : 0);
  for (std::size_t i = begin; i < end; ++i) {
    const std::uint64_t t1 = d1[i];
    while (lo != d2.end() && *lo < t1) ++lo;
    for (auto it = lo; it != d2.end(); ++it) {
      const std::uint64_t lag = *it - t1;
      if (lag >= range) break;
      ++counts[lag / bin_ticks];
    }
  }
}

void group_sweep(std::span<const Event> g, std::size_t begin, std::size_t end,
                 std::uint64_t bin_ticks, std::size_t nbins, std::vector<std::uint64_t>& counts) {
  const std::uint64_t range = bin_ticks * nbins;
  for (std::size_t i = begin; i < end; ++i) {
    for (std::size_t j = i + 1; j < g.size(); ++j) {
      const std::uint64_t lag = g[j].tick - g[i].tick;
      if (lag >= range) break;
      if (g[j].pixel != g[i].pixel) ++counts[lag / bin_ticks];
    }
  }
}

int resolve_threads(int threads) { return threads > 0 ? threads : omp_get_max_threads(); }

std::vector<std::uint64_t> sum_partials(const std::vector<std::vector<std::uint64_t>>& parts,
                                        std::size_t nbins) {
  std::vector<std::uint64_t> out(nbins, 0);
  for (const auto& p : parts) {
    for (std::size_t k = 0; k < nbins; ++k) out[k] += p[k];
  }
  return out;
}

}  // namespace

namespace serial {

std::vector<std::uint64_t> delay_histogram(std::span<const std::uint64_t> d1,
                                           std::span<const std::uint64_t> d2,
                                           std::uint64_t bin_ticks, std::size_t nbins) {
  std::vector<std::uint64_t> counts(nbins, 0);
  sweep(d1, d2, 0, d1.size(), bin_ticks, nbins, counts);
  return counts;
}

std::vector<std::uint64_t> single_group_pairs(std::span<const Event> group,
                                              std::uint64_t bin_ticks, std::size_t nbins) {
  std::vector<std::uint64_t> counts(nbins, 0);
  group_sweep(group, 0, group.size(), bin_ticks, nbins, counts);
  return counts;
}

std::vector<double> quadrature_grid(std::span<const GridPoint> points, double tol) {
  std::vector<double> out(points.size());
  for (std::size_t i = 0; i < points.size(); ++i) {
    out[i] = model::c_exp_quadrature(points[i].t_ns, points[i].model, tol).value;
  }
  return out;
}

EventStream simulate(const SimulationConfig& cfg) {
  cfg.validate();
  const double lambda = beam::compensated_rate(cfg.beam);
  std::vector<EventStream> blocks(cfg.beam.block_count());
  for (std::size_t b = 0; b < blocks.size(); ++b) blocks[b] = simulate_block(cfg, b, lambda);
  return merge_streams(blocks);
}

}  // namespace serial

namespace parallel {

std::vector<std::uint64_t> delay_histogram(std::span<const std::uint64_t> d1,
                                           std::span<const std::uint64_t> d2,
                                           std::uint64_t bin_ticks, std::size_t nbins,
                                           int threads) {
  const int nt = resolve_threads(threads);
  std::vector<std::vector<std::uint64_t>> parts(static_cast<std::size_t>(nt),
                                                std::vector<std::uint64_t>(nbins, 0));
  const std::size_t n = d1.size();
#pragma omp parallel num_threads(nt)
  {
    const auto id = static_cast<std::size_t>(omp_get_thread_num());
    const auto count = static_cast<std::size_t>(omp_get_num_threads());
    const std::size_t begin = n * id / count;
    const std::size_t end = n * (id + 1) / count;
    sweep(d1, d2, begin, end, bin_ticks, nbins, parts[id]);
  }
  return sum_partials(parts, nbins);
}

std::vector<std::uint64_t> single_group_pairs(std::span<const Event> group,
                                              std::uint64_t bin_ticks, std::size_t nbins,
                                              int threads) {
  const int nt = resolve_threads(threads);
  std::vector<std::vector<std::uint64_t>> parts(static_cast<std::size_t>(nt),
                                                std::vector<std::uint64_t>(nbins, 0));
  const std::size_t n = group.size();
#pragma omp parallel num_threads(nt)
  {
    const auto id = static_cast<std::size_t>(omp_get_thread_num());
    const auto count = static_cast<std::size_t>(omp_get_num_threads());
    group_sweep(group, n * id / count, n * (id + 1) / count, bin_ticks, nbins, parts[id]);
  }
  return sum_partials(parts, nbins);
}

std::vector<double> quadrature_grid(std::span<const GridPoint> points, double tol,
                                    int threads) {
  std::vector<double> out(points.size());
  const auto n = static_cast<std::ptrdiff_t>(points.size());
  std::exception_ptr failure;
#pragma omp parallel for schedule(dynamic) num_threads(resolve_threads(threads))
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    try {
      const auto& p = points[static_cast<std::size_t>(i)];
      out[static_cast<std::size_t>(i)] = model::c_exp_quadrature(p.t_ns, p.model, tol).value;
    } catch (...) {
#pragma omp critical
      if (!failure) failure = std::current_exception();
    }
  }
  if (failure) std::rethrow_exception(failure);
  return out;
}

EventStream simulate(const SimulationConfig& cfg, int threads) {
  cfg.validate();
  const double lambda = beam::compensated_rate(cfg.beam);
  std::vector<EventStream> blocks(cfg.beam.block_count());
  const auto n = static_cast<std::ptrdiff_t>(blocks.size());
  std::exception_ptr failure;
#pragma omp parallel for schedule(dynamic) num_threads(resolve_threads(threads))
  for (std::ptrdiff_t b = 0; b < n; ++b) {
    try {
      blocks[static_cast<std::size_t>(b)] =
          simulate_block(cfg, static_cast<std::size_t>(b), lambda);
    } catch (...) {
#pragma omp critical
      if (!failure) failure = std::current_exception();
    }
  }
  if (failure) std::rethrow_exception(failure);
  return merge_streams(blocks);
}

}  // namespace parallel

}  // namespace fermi_hbt
