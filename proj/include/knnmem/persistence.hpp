#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "knnmem/collection.hpp"

namespace knnmem {

inline constexpr int kManifestFormatVersion = 1;
inline constexpr char kManifestFileName[] = "manifest.json";

struct SegmentEntry {
  std::string path;  // relative to the manifest's directory
  std::uint32_t crc32c = 0;
  std::uint64_t count = 0;

  bool operator==(const SegmentEntry&) const = default;
};

struct Manifest {
  int format_version = kManifestFormatVersion;
  std::string name;
  std::uint32_t dimension = 0;
  std::vector<std::string> labels;
  std::uint64_t record_count = 0;
  std::vector<SegmentEntry> segments;
  std::uint64_t generation = 0;

  bool operator==(const Manifest&) const = default;
};

std::string manifest_to_json(const Manifest& m);
Manifest manifest_from_json(const std::string& text);

/// Persists `c` into directory `dir` (created if missing). Tombstones are
/// compacted away first. Segments are written before the manifest, and the
/// manifest swap is an atomic rename; segment files the new manifest no
/// longer references are removed afterwards.
Manifest save(Collection& c, const std::filesystem::path& dir,
              std::size_t records_per_segment = 1 << 20);

/// Loads a collection from a store directory or a manifest file. Verifies
/// format_version, every segment checksum (trailer and manifest), counts and
/// dimensions; any failure throws without returning a partial collection.
Collection load(const std::filesystem::path& path);

Manifest read_manifest(const std::filesystem::path& path);

}  // namespace knnmem
