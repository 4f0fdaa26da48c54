#include "fermi_hbt/ntt1.hpp"

#include <array>
#include <bit>
#include <cstring>
#include <fstream>

namespace fermi_hbt::ntt1 {

namespace {

static_assert(std::endian::native == std::endian::little,
              "NTT1 codec assumes a little-endian host");

constexpr std::array<char, 4> kMagic = {'N', 'T', 'T', '1'};

template <typename T>
void put(std::byte* dst, T value) {
  std::memcpy(dst, &value, sizeof(T));
}

template <typename T>
T get(const std::byte* src) {
  T value;
  std::memcpy(&value, src, sizeof(T));
  return value;
}

}  // namespace

std::vector<std::byte> encode_run(const RunMetadata& meta,
                                  std::span<const Event> events) {
  meta.validate();
  const auto bad = first_unsorted(events);
  if (bad != events.size()) {
    throw ValidationError("encode_run: events unsorted at position " +
                          std::to_string(bad));
  }
  std::vector<std::byte> out(kHeaderSize + kRecordSize * events.size());
  std::byte* p = out.data();
  std::memcpy(p, kMagic.data(), kMagic.size());
  put<std::uint32_t>(p + 4, kVersion);
  put<std::uint64_t>(p + 8, meta.clock.frequency_hz);
  put<std::uint16_t>(p + 16, meta.pixel_count);
  put<std::uint16_t>(p + 18, 0);
  put<std::uint64_t>(p + 20, meta.seed);
  put<std::uint64_t>(p + 28, meta.cycle_length_ns);
  put<std::uint32_t>(p + 36, meta.dead_time_ns);
  p += kHeaderSize;
  for (const Event& e : events) {
    put<std::uint64_t>(p, e.tick);
    put<std::uint16_t>(p + 8, e.pixel);
    put<std::uint16_t>(p + 10, static_cast<std::uint16_t>(e.flags));
    p += kRecordSize;
  }
  return out;
}

Run decode_run(std::span<const std::byte> bytes) {
  if (bytes.size() < kHeaderSize) {
    if (bytes.size() >= 4 && std::memcmp(bytes.data(), kMagic.data(), 4) != 0) {
      throw DecodeError(DecodeFailure::bad_magic, "NTT1: bad magic");
    }
    throw DecodeError(DecodeFailure::truncated,
                      "NTT1: truncated header (" + std::to_string(bytes.size()) +
                          " bytes)");
  }
  const std::byte* p = bytes.data();
  if (std::memcmp(p, kMagic.data(), kMagic.size()) != 0) {
    throw DecodeError(DecodeFailure::bad_magic, "NTT1: bad magic");
  }
  const auto version = get<std::uint32_t>(p + 4);
  if (version != kVersion) {
    throw DecodeError(DecodeFailure::version_mismatch,
                      "NTT1: unsupported version " + std::to_string(version));
  }
  Run run;
  run.meta.clock.frequency_hz = get<std::uint64_t>(p + 8);
  run.meta.pixel_count = get<std::uint16_t>(p + 16);
  run.meta.seed = get<std::uint64_t>(p + 20);
  run.meta.cycle_length_ns = get<std::uint64_t>(p + 28);
  run.meta.dead_time_ns = get<std::uint32_t>(p + 36);
  if (run.meta.clock.frequency_hz == 0 || run.meta.cycle_length_ns == 0) {
    throw DecodeError(DecodeFailure::bad_header,
                      "NTT1: zero clock frequency or cycle length");
  }

  const std::size_t payload = bytes.size() - kHeaderSize;
  if (payload % kRecordSize != 0) {
    throw DecodeError(DecodeFailure::truncated,
                      "NTT1: truncated record at byte " +
                          std::to_string(kHeaderSize + payload / kRecordSize * kRecordSize));
  }
  const std::size_t n = payload / kRecordSize;
  run.events.resize(n);
  p += kHeaderSize;
  for (std::size_t i = 0; i < n; ++i, p += kRecordSize) {
    Event& e = run.events[i];
    e.tick = get<std::uint64_t>(p);
    e.pixel = get<std::uint16_t>(p + 8);
    e.flags = static_cast<EventFlag>(get<std::uint16_t>(p + 10));
    if (e.pixel >= run.meta.pixel_count) {
      throw DecodeError(DecodeFailure::bad_pixel,
                        "NTT1: record " + std::to_string(i) + " has pixel " +
                            std::to_string(e.pixel) + " >= pixel_count");
    }
    if (i > 0 && event_before(e, run.events[i - 1])) {
      throw DecodeError(DecodeFailure::unsorted,
                        "NTT1: unsorted payload at record " + std::to_string(i));
    }
  }
  return run;
}

void write_file(const std::filesystem::path& path, const RunMetadata& meta,
                std::span<const Event> events) {
  const auto bytes = encode_run(meta, events);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("write failed on '" + path.string() + "'");
}

Run read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path.string() + "'");
  in.seekg(0, std::ios::end);
  const auto size = static_cast<std::size_t>(in.tellg());
  in.seekg(0);
  std::vector<std::byte> bytes(size);
  in.read(reinterpret_cast<char*>(bytes.data()), static_cast<std::streamsize>(size));
  if (!in) throw IoError("read failed on '" + path.string() + "'");
  return decode_run(bytes);
}

}  // namespace fermi_hbt::ntt1
