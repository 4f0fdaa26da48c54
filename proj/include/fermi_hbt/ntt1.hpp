#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "fermi_hbt/error.hpp"
#include "fermi_hbt/timetag.hpp"

namespace fermi_hbt::ntt1 {

// Little-endian layout:
//   0  magic "NTT1"        20 seed (u64)
//   4  version = 1 (u32)   28 cycle_length ns (u64)
//   8  clock Hz (u64)      36 dead_time ns (u32)
//   16 pixel_count (u16)   40 records: tick u64, pixel u16, flags u16
//   18 reserved = 0 (u16)
inline constexpr std::size_t kHeaderSize = 40;
inline constexpr std::size_t kRecordSize = 12;
inline constexpr std::uint32_t kVersion = 1;

enum class DecodeFailure {
  bad_magic,
  version_mismatch,
  truncated,
  unsorted,
  bad_pixel,
  bad_header,
};

class DecodeError : public IoError {
 public:
  DecodeError(DecodeFailure kind, const std::string& what)
      : IoError(what), kind_(kind) {}
  DecodeFailure kind() const { return kind_; }

 private:
  DecodeFailure kind_;
};

struct Run {
  RunMetadata meta;
  EventStream events;
};

std::vector<std::byte> encode_run(const RunMetadata& meta,
                                  std::span<const Event> events);
Run decode_run(std::span<const std::byte> bytes);

void write_file(const std::filesystem::path& path, const RunMetadata& meta,
                std::span<const Event> events);
Run read_file(const std::filesystem::path& path);

}  // namespace fermi_hbt::ntt1
