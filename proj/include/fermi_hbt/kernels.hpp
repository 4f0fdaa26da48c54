#pragma once

// Data-parallel kernels. Every OpenMP kernel in `parallel` has a plain
// reference in `serial` with identical output; tests compare them and
// bench/ times them.

#include <cstdint>
#include <span>
#include <vector>

#include "fermi_hbt/model.hpp"
#include "fermi_hbt/timetag.hpp"

namespace fermi_hbt {

struct SimulationConfig;

struct GridPoint {
  model::BroadenedModel model;
  double t_ns = 0.0;
};

namespace serial {

std::vector<std::uint64_t> delay_histogram(std::span<const std::uint64_t> d1,
                                           std::span<const std::uint64_t> d2,
                                           std::uint64_t bin_ticks, std::size_t nbins);

std::vector<std::uint64_t> single_group_pairs(std::span<const Event> group,
                                              std::uint64_t bin_ticks, std::size_t nbins);

std::vector<double> quadrature_grid(std::span<const GridPoint> points, double tol);

EventStream simulate(const SimulationConfig& cfg);

}  // namespace serial

namespace parallel {

/// threads <= 0 uses the OpenMP default.
std::vector<std::uint64_t> delay_histogram(std::span<const std::uint64_t> d1,
                                           std::span<const std::uint64_t> d2,
                                           std::uint64_t bin_ticks, std::size_t nbins,
                                           int threads = 0);

std::vector<std::uint64_t> single_group_pairs(std::span<const Event> group,
                                              std::uint64_t bin_ticks, std::size_t nbins,
                                              int threads = 0);

std::vector<double> quadrature_grid(std::span<const GridPoint> points, double tol,
                                    int threads = 0);

EventStream simulate(const SimulationConfig& cfg, int threads = 0);

}  // namespace parallel

}  // namespace fermi_hbt
