#include "knnmem/persistence.hpp"

#include <algorithm>
#include <cstdio>
#include <set>

#include <nlohmann/json.hpp>

#include "knnmem/error.hpp"
#include "knnmem/segment.hpp"

namespace knnmem {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

fs::path manifest_path(const fs::path& path) {
  return fs::is_directory(path) ? path / kManifestFileName : path;
}

std::string segment_name(std::uint64_t generation, std::size_t index) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "segment-%020llu-%04zu.embv",
                static_cast<unsigned long long>(generation), index);
  return buf;
}

}  // namespace

std::string manifest_to_json(const Manifest& m) {
  json segs = json::array();
  for (const auto& s : m.segments) {
    segs.push_back({{"path", s.path}, {"crc32c", s.crc32c}, {"count", s.count}});
  }
  json j = {{"format_version", m.format_version},
            {"name", m.name},
            {"dimension", m.dimension},
            {"labels", m.labels},
            {"record_count", m.record_count},
            {"segments", segs},
            {"generation", m.generation}};
  return j.dump(2) + "\n";
}

Manifest manifest_from_json(const std::string& text) {
  Manifest m;
  try {
    const json j = json::parse(text);
    m.format_version = j.at("format_version").get<int>();
    if (m.format_version != kManifestFormatVersion) {
      throw Error(ErrorCode::kFormatError,
                  "unknown manifest format_version " + std::to_string(m.format_version),
                  "format_version");
    }
    m.name = j.at("name").get<std::string>();
    m.dimension = j.at("dimension").get<std::uint32_t>();
    m.labels = j.at("labels").get<std::vector<std::string>>();
    m.generation = j.value("generation", std::uint64_t{0});
    for (const auto& s : j.at("segments")) {
      m.segments.push_back(SegmentEntry{s.at("path").get<std::string>(),
                                        s.at("crc32c").get<std::uint32_t>(),
                                        s.at("count").get<std::uint64_t>()});
    }
    std::uint64_t total = 0;
    for (const auto& s : m.segments) total += s.count;
    m.record_count = j.value("record_count", total);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kFormatError, std::string("malformed manifest: ") + e.what(),
                "manifest");
  }
  return m;
}

Manifest read_manifest(const fs::path& path) {
  const auto bytes = read_file_bytes(manifest_path(path));
  return manifest_from_json(
      std::string(reinterpret_cast<const char*>(bytes.data()), bytes.size()));
}

Manifest save(Collection& c, const fs::path& dir, std::size_t records_per_segment) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) {
    throw Error(ErrorCode::kIoError, "cannot create " + dir.string() + ": " + ec.message(),
                "path");
  }
  c.compact();
  const auto records = c.snapshot();

  Manifest m;
  m.name = c.name();
  m.dimension = static_cast<std::uint32_t>(c.dimension());
  m.labels = c.labels();
  m.record_count = records.size();
  m.generation = c.generation();

  records_per_segment = std::max<std::size_t>(records_per_segment, 1);
  std::size_t begin = 0;
  do {
    const std::size_t end = std::min(records.size(), begin + records_per_segment);
    const auto name = segment_name(m.generation, m.segments.size());
    std::span<const EmbeddingRecord> chunk(records.data() + begin, end - begin);
    const auto crc = write_segment_file(dir / name, m.dimension, chunk);
    m.segments.push_back(SegmentEntry{name, crc, chunk.size()});
    begin = end;
  } while (begin < records.size());

  const auto text = manifest_to_json(m);
  write_file_atomic(dir / kManifestFileName,
                    std::as_bytes(std::span(text.data(), text.size())));

  std::set<std::string> keep;
  for (const auto& s : m.segments) keep.insert(s.path);
  for (const auto& entry : fs::directory_iterator(dir)) {
    const auto fname = entry.path().filename().string();
    if (entry.path().extension() == ".embv" && fname.starts_with("segment-") &&
        !keep.contains(fname)) {
      fs::remove(entry.path(), ec);
    }
  }
  return m;
}

Collection load(const fs::path& path) {
  const auto mpath = manifest_path(path);
  const Manifest m = read_manifest(mpath);
  const auto base = mpath.parent_path();

  std::vector<EmbeddingRecord> records;
  records.reserve(m.record_count);
  std::uint64_t total = 0;
  for (const auto& entry : m.segments) {
    Segment seg = read_segment_file(base / entry.path);
    if (seg.crc != entry.crc32c) {
      throw Error(ErrorCode::kChecksumFailed,
                  entry.path + ": checksum does not match manifest", "crc32c");
    }
    if (seg.dimension != m.dimension) {
      throw Error(ErrorCode::kDimensionMismatch,
                  entry.path + ": segment dimension " + std::to_string(seg.dimension) +
                      " differs from manifest " + std::to_string(m.dimension),
                  "dimension");
    }
    if (seg.records.size() != entry.count) {
      throw Error(ErrorCode::kFormatError,
                  entry.path + ": holds " + std::to_string(seg.records.size()) +
                      " records, manifest says " + std::to_string(entry.count),
                  "count");
    }
    total += seg.records.size();
    std::move(seg.records.begin(), seg.records.end(), std::back_inserter(records));
  }
  if (total != m.record_count) {
    throw Error(ErrorCode::kFormatError,
                "record_count " + std::to_string(m.record_count) +
                    " differs from segment total " + std::to_string(total),
                "record_count");
  }

  Collection c(m.name, m.dimension, m.labels);
  c.insert(records);
  c.restore_generation(m.generation);
  return c;
}

}  // namespace knnmem
