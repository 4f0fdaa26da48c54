#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace fermi_hbt {

/// Acquisition clock. The tick period is held as the reduced rational
/// 1e9 / frequency_hz nanoseconds so that integer periods stay exact.
struct ClockConfig {
  std::uint64_t frequency_hz = 40'000'000;

  std::uint64_t period_num() const;  // ns numerator
  std::uint64_t period_den() const;  // ns denominator
  double tick_period_ns() const;
  void validate() const;
};

enum class EventFlag : std::uint16_t {
  real = 0,
  crosstalk = 1,
  background = 2,
};

/// One detected particle. `flags` is simulator ground truth and must never
/// influence analysis.
struct Event {
  std::uint64_t tick = 0;
  std::uint16_t pixel = 0;
  EventFlag flags = EventFlag::real;

  friend bool operator==(const Event&, const Event&) = default;
};

/// Stream order: by tick, ties by ascending pixel.
inline bool event_before(const Event& a, const Event& b) {
  return a.tick != b.tick ? a.tick < b.tick : a.pixel < b.pixel;
}

struct RunMetadata {
  ClockConfig clock;
  std::uint16_t pixel_count = 64;
  std::uint64_t cycle_length_ns = 10'000'000'000ULL;
  std::uint32_t dead_time_ns = 10'000'000;
  std::uint64_t seed = 0;
  std::string source_label;

  void validate() const;
};

using EventStream = std::vector<Event>;

/// floor(t / tick_period). Throws std::domain_error for negative or non-finite t.
std::uint64_t ns_to_ticks(double t_ns, const ClockConfig& clock);

/// n * tick_period, computed in 128-bit integer arithmetic before the final
/// division. Throws std::range_error when the result exceeds the 64-bit ns range.
double ticks_to_ns(std::uint64_t n, const ClockConfig& clock);

/// Index of the first out-of-order element, or `events.size()` when sorted.
std::size_t first_unsorted(std::span<const Event> events);
bool is_sorted_stream(std::span<const Event> events);

/// K-way stable merge of individually sorted streams. Equal (tick, pixel)
/// keys keep input-stream order. Throws ValidationError naming the offending
/// stream and position when an input is unsorted.
EventStream merge_streams(std::span<const EventStream> streams);

/// Sorts a stream in place into canonical order; stable on equal keys.
void sort_stream(EventStream& events);

}  // namespace fermi_hbt
