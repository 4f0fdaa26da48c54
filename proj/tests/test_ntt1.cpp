#include <doctest.h>

#include <cstring>
#include <filesystem>
#include <random>

#include "fermi_hbt/ntt1.hpp"

using namespace fermi_hbt;
using ntt1::DecodeFailure;

namespace {

RunMetadata sample_meta() {
  RunMetadata m;
  m.pixel_count = 64;
  m.seed = 0x0123456789abcdefULL;
  m.cycle_length_ns = 10'000'000'000ULL;
  m.dead_time_ns = 10'000'000;
  return m;
}

void check_same(const RunMetadata& a, const RunMetadata& b) {
  CHECK(a.clock.frequency_hz == b.clock.frequency_hz);
  CHECK(a.pixel_count == b.pixel_count);
  CHECK(a.seed == b.seed);
  CHECK(a.cycle_length_ns == b.cycle_length_ns);
  CHECK(a.dead_time_ns == b.dead_time_ns);
}

DecodeFailure failure_of(const std::vector<std::byte>& bytes) {
  try {
    ntt1::decode_run(bytes);
  } catch (const ntt1::DecodeError& e) {
    return e.kind();
  }
  FAIL("decode should have thrown");
  return DecodeFailure::bad_header;
}

}  // namespace

TEST_CASE("empty stream is a bare 40-byte header") {
  const auto meta = sample_meta();
  const auto bytes = ntt1::encode_run(meta, {});
  CHECK(bytes.size() == 40u);
  const auto run = ntt1::decode_run(bytes);
  check_same(run.meta, meta);
  CHECK(run.events.empty());
}

TEST_CASE("header layout") {
  const auto bytes = ntt1::encode_run(sample_meta(), {});
  auto u = [&](std::size_t off, std::size_t n) {
    std::uint64_t v = 0;
    std::memcpy(&v, bytes.data() + off, n);
    return v;
  };
  CHECK(std::memcmp(bytes.data(), "NTT1", 4) == 0);
  CHECK(u(4, 4) == 1u);
  CHECK(u(8, 8) == 40'000'000u);
  CHECK(u(16, 2) == 64u);
  CHECK(u(18, 2) == 0u);
  CHECK(u(20, 8) == 0x0123456789abcdefULL);
  CHECK(u(28, 8) == 10'000'000'000ULL);
  CHECK(u(36, 4) == 10'000'000u);
}

TEST_CASE("one record") {
  const EventStream ev = {{1, 3, EventFlag::crosstalk}};
  const auto bytes = ntt1::encode_run(sample_meta(), ev);
  REQUIRE(bytes.size() == 52u);
  std::uint64_t tick = 0;
  std::uint16_t pixel = 0, flags = 0;
  std::memcpy(&tick, bytes.data() + 40, 8);
  std::memcpy(&pixel, bytes.data() + 48, 2);
  std::memcpy(&flags, bytes.data() + 50, 2);
  CHECK(tick == 1u);
  CHECK(pixel == 3u);
  CHECK(flags == 1u);
  CHECK(ntt1::decode_run(bytes).events == ev);
}

TEST_CASE("1e6 random sorted events round-trip") {
  std::mt19937_64 g(99);
  EventStream ev(1'000'000);
  for (auto& e : ev) {
    e.tick = g() >> 8;
    e.pixel = static_cast<std::uint16_t>(g() % 64);
    e.flags = static_cast<EventFlag>(g() % 3);
  }
  sort_stream(ev);
  const auto meta = sample_meta();
  const auto bytes = ntt1::encode_run(meta, ev);
  CHECK(bytes.size() == 40u + 12u * 1'000'000u);
  const auto run = ntt1::decode_run(bytes);
  check_same(run.meta, meta);
  CHECK(run.events == ev);
}

TEST_CASE("decode failures are distinct") {
  const EventStream ev = {{1, 3}, {5, 2}};
  const auto good = ntt1::encode_run(sample_meta(), ev);

  auto bad_magic = good;
  bad_magic[0] = std::byte{'X'};
  CHECK(failure_of(bad_magic) == DecodeFailure::bad_magic);

  auto bad_version = good;
  bad_version[4] = std::byte{2};
  CHECK(failure_of(bad_version) == DecodeFailure::version_mismatch);

  auto truncated = good;
  truncated.pop_back();
  CHECK(failure_of(truncated) == DecodeFailure::truncated);

  auto short_header = std::vector<std::byte>(good.begin(), good.begin() + 20);
  CHECK(failure_of(short_header) == DecodeFailure::truncated);

  auto unsorted = good;
  std::uint64_t late = 100;
  std::memcpy(unsorted.data() + 40, &late, 8);
  CHECK(failure_of(unsorted) == DecodeFailure::unsorted);

  auto pixel = good;
  std::uint16_t big = 64;
  std::memcpy(pixel.data() + 48, &big, 2);
  CHECK(failure_of(pixel) == DecodeFailure::bad_pixel);
}

TEST_CASE("file round-trip and I/O errors") {
  const auto path = std::filesystem::temp_directory_path() / "fermi_hbt_test_ntt1.ntt1";
  const EventStream ev = {{0, 0}, {0, 1}, {7, 63, EventFlag::background}};
  ntt1::write_file(path, sample_meta(), ev);
  CHECK(std::filesystem::file_size(path) == 40u + 36u);
  CHECK(ntt1::read_file(path).events == ev);
  std::filesystem::remove(path);
  CHECK_THROWS_AS(ntt1::read_file(path), IoError);
  CHECK_THROWS_AS(ntt1::write_file("/nonexistent-dir/x.ntt1", sample_meta(), ev), IoError);
}
