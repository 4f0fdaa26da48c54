#include "fermi_hbt/timetag.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <queue>
#include <stdexcept>

#include "fermi_hbt/error.hpp"

namespace fermi_hbt {

namespace {
constexpr std::uint64_t kNsPerSecond = 1'000'000'000ULL;
}

std::uint64_t ClockConfig::period_num() const {
  return kNsPerSecond / std::gcd(kNsPerSecond, frequency_hz);
}

std::uint64_t ClockConfig::period_den() const {
  return frequency_hz / std::gcd(kNsPerSecond, frequency_hz);
}

double ClockConfig::tick_period_ns() const {
  return static_cast<double>(period_num()) / static_cast<double>(period_den());
}

void ClockConfig::validate() const {
  if (frequency_hz == 0) throw ValidationError("clock frequency must be > 0");
}

void RunMetadata::validate() const {
  clock.validate();
  if (cycle_length_ns == 0) throw ValidationError("cycle_length must be > 0");
}

std::uint64_t ns_to_ticks(double t_ns, const ClockConfig& clock) {
  if (!(t_ns >= 0.0) || !std::isfinite(t_ns)) {
    throw std::domain_error("ns_to_ticks: time must be finite and >= 0");
  }
  const double den = static_cast<double>(clock.period_den());
  const double num = static_cast<double>(clock.period_num());
  const double ticks = std::floor(t_ns * den / num);
  if (ticks >= 18446744073709551616.0) {
    throw std::range_error("ns_to_ticks: tick count exceeds 64 bits");
  }
  return static_cast<std::uint64_t>(ticks);
}

double ticks_to_ns(std::uint64_t n, const ClockConfig& clock) {
  const unsigned __int128 scaled =
      static_cast<unsigned __int128>(n) * clock.period_num();
  const unsigned __int128 ns = scaled / clock.period_den();
  if (ns > std::numeric_limits<std::uint64_t>::max()) {
    throw std::range_error("ticks_to_ns: result exceeds the 64-bit ns range");
  }
  const auto whole = static_cast<std::uint64_t>(ns);
  const auto rem = static_cast<std::uint64_t>(scaled % clock.period_den());
  return static_cast<double>(whole) +
         static_cast<double>(rem) / static_cast<double>(clock.period_den());
}

std::size_t first_unsorted(std::span<const Event> events) {
  for (std::size_t i = 1; i < events.size(); ++i) {
    if (event_before(events[i], events[i - 1])) return i;
  }
  return events.size();
}

bool is_sorted_stream(std::span<const Event> events) {
  return first_unsorted(events) == events.size();
}

EventStream merge_streams(std::span<const EventStream> streams) {
  std::size_t total = 0;
  for (std::size_t s = 0; s < streams.size(); ++s) {
    const auto bad = first_unsorted(streams[s]);
    if (bad != streams[s].size()) {
      throw ValidationError("merge_streams: stream " + std::to_string(s) +
                            " is unsorted at position " + std::to_string(bad));
    }
    total += streams[s].size();
  }

  EventStream out;
  out.reserve(total);
  if (streams.size() == 1) {
    out = streams[0];
    return out;
  }

  struct Head {
    Event ev;
    std::size_t stream;
    std::size_t pos;
  };
  // min-heap on (tick, pixel, stream) keeps the merge stable
  auto later = [](const Head& a, const Head& b) {
    if (a.ev.tick != b.ev.tick) return a.ev.tick > b.ev.tick;
    if (a.ev.pixel != b.ev.pixel) return a.ev.pixel > b.ev.pixel;
    return a.stream > b.stream;
  };
  std::priority_queue<Head, std::vector<Head>, decltype(later)> heap(later);
  for (std::size_t s = 0; s < streams.size(); ++s) {
    if (!streams[s].empty()) heap.push({streams[s][0], s, 0});
  }
  while (!heap.empty()) {
    Head h = heap.top();
    heap.pop();
    out.push_back(h.ev);
    const auto next = h.pos + 1;
    if (next < streams[h.stream].size()) {
      heap.push({streams[h.stream][next], h.stream, next});
    }
  }
  return out;
}

void sort_stream(EventStream& events) {
  std::stable_sort(events.begin(), events.end(), event_before);
}

}  // namespace fermi_hbt
