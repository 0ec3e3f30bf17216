#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "knnmem/collection.hpp"

namespace knnmem {

/// EMBV1 binary segment, little-endian throughout:
///
///   "EMBV" 0x01 | dimension u32 | record_count u64 |
///   record_count x { id u64 | label_id u32 | tag_len u16 | tag bytes |
///                    dimension x f32 } |
///   crc32c u32 over every preceding byte
struct Segment {
  std::uint32_t dimension = 0;
  std::vector<EmbeddingRecord> records;
  std::uint32_t crc = 0;
};

inline constexpr std::uint8_t kSegmentVersion = 0x01;

std::vector<std::byte> encode_segment(std::uint32_t dimension,
                                      std::span<const EmbeddingRecord> records);

/// Rejects anything malformed with FORMAT_ERROR (carrying the byte offset)
/// or CHECKSUM_FAILED. Never returns a partial segment.
Segment decode_segment(std::span<const std::byte> bytes);

/// Writes via a temporary file and rename; returns the trailing CRC.
std::uint32_t write_segment_file(const std::filesystem::path& path,
                                 std::uint32_t dimension,
                                 std::span<const EmbeddingRecord> records);
Segment read_segment_file(const std::filesystem::path& path);

std::vector<std::byte> read_file_bytes(const std::filesystem::path& path);
/// Atomic replace: write `path`.tmp, fsync, rename over `path`.
void write_file_atomic(const std::filesystem::path& path,
                       std::span<const std::byte> bytes);

}  // namespace knnmem
