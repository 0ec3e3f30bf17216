#include "knnmem/segment.hpp"

#include <bit>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <limits>
#include <string>

#include <unistd.h>

#include "knnmem/crc32c.hpp"
#include "knnmem/error.hpp"

namespace knnmem {

namespace {

constexpr char kMagic[4] = {'E', 'M', 'B', 'V'};
constexpr std::size_t kHeaderSize = 4 + 1 + 4 + 8;
constexpr std::size_t kTrailerSize = 4;

class Writer {
 public:
  void bytes(const void* p, std::size_t n) {
    const auto* b = static_cast<const std::byte*>(p);
    out_.insert(out_.end(), b, b + n);
  }
  template <typename T>
  void le(T value) {
    using U = std::make_unsigned_t<T>;
    auto u = static_cast<U>(value);
    for (std::size_t i = 0; i < sizeof(T); ++i) {
      out_.push_back(static_cast<std::byte>(u & 0xFF));
      if constexpr (sizeof(T) > 1) u = static_cast<U>(u >> 8);
    }
  }
  void f32(float value) { le(std::bit_cast<std::uint32_t>(value)); }
  std::vector<std::byte>& buffer() { return out_; }

 private:
  std::vector<std::byte> out_;
};

class Reader {
 public:
  explicit Reader(std::span<const std::byte> in) : in_(in) {}

  std::size_t offset() const { return pos_; }

  template <typename T>
  T le(const char* what) {
    need(sizeof(T), what);
    std::make_unsigned_t<T> u = 0;
    for (std::size_t i = 0; i < sizeof(T); ++i) {
      u |= static_cast<std::make_unsigned_t<T>>(
          static_cast<std::uint64_t>(in_[pos_ + i]) << (8 * i));
    }
    pos_ += sizeof(T);
    return static_cast<T>(u);
  }
  float f32(const char* what) { return std::bit_cast<float>(le<std::uint32_t>(what)); }
  std::string str(std::size_t n, const char* what) {
    need(n, what);
    std::string s(reinterpret_cast<const char*>(in_.data() + pos_), n);
    pos_ += n;
    return s;
  }

 private:
  void need(std::size_t n, const char* what) {
    if (in_.size() - pos_ < n) {
      throw Error(ErrorCode::kFormatError,
                  std::string("truncated segment while reading ") + what + " at offset " +
                      std::to_string(pos_),
                  what, pos_);
    }
  }

  std::span<const std::byte> in_;
  std::size_t pos_ = 0;
};

}  // namespace

std::vector<std::byte> encode_segment(std::uint32_t dimension,
                                      std::span<const EmbeddingRecord> records) {
  Writer w;
  w.bytes(kMagic, 4);
  w.le<std::uint8_t>(kSegmentVersion);
  w.le<std::uint32_t>(dimension);
  w.le<std::uint64_t>(records.size());
  for (const auto& r : records) {
    if (r.vector.size() != dimension) {
      throw Error(ErrorCode::kDimensionMismatch,
                  "record " + std::to_string(r.id) + " does not match segment dimension",
                  "vector");
    }
    if (r.source_tag.size() > std::numeric_limits<std::uint16_t>::max()) {
      throw Error(ErrorCode::kInvalidArgument,
                  "source_tag of record " + std::to_string(r.id) + " exceeds 65535 bytes",
                  "source_tag");
    }
    w.le<std::uint64_t>(r.id);
    w.le<std::uint32_t>(r.label_id);
    w.le<std::uint16_t>(static_cast<std::uint16_t>(r.source_tag.size()));
    w.bytes(r.source_tag.data(), r.source_tag.size());
    for (float x : r.vector) w.f32(x);
  }
  const std::uint32_t crc = crc32c(w.buffer());
  w.le<std::uint32_t>(crc);
  return std::move(w.buffer());
}

Segment decode_segment(std::span<const std::byte> bytes) {
  for (std::size_t i = 0; i < 4; ++i) {
    if (i >= bytes.size() || bytes[i] != static_cast<std::byte>(kMagic[i])) {
      throw Error(ErrorCode::kFormatError, "bad magic at offset 0, expected \"EMBV\"",
                  "magic", 0);
    }
  }
  if (bytes.size() < 5 || bytes[4] != static_cast<std::byte>(kSegmentVersion)) {
    throw Error(ErrorCode::kFormatError, "unsupported segment version at offset 4",
                "version", 4);
  }
  if (bytes.size() < kHeaderSize + kTrailerSize) {
    throw Error(ErrorCode::kFormatError,
                "truncated segment: " + std::to_string(bytes.size()) + " bytes",
                "header", bytes.size());
  }

  const auto body = bytes.first(bytes.size() - kTrailerSize);
  Reader trailer(bytes.subspan(body.size()));
  const auto stored_crc = trailer.le<std::uint32_t>("crc32c");
  const auto actual_crc = crc32c(body);
  if (stored_crc != actual_crc) {
    throw Error(ErrorCode::kChecksumFailed,
                "segment checksum mismatch: stored " + std::to_string(stored_crc) +
                    ", computed " + std::to_string(actual_crc),
                "crc32c", body.size());
  }

  Reader r(body);
  r.str(5, "magic");
  Segment seg;
  seg.crc = stored_crc;
  seg.dimension = r.le<std::uint32_t>("dimension");
  const auto count = r.le<std::uint64_t>("record_count");
  const std::size_t min_record = 8 + 4 + 2 + std::size_t{seg.dimension} * 4;
  if (count > (body.size() - kHeaderSize) / min_record + 1) {
    throw Error(ErrorCode::kFormatError,
                "record_count " + std::to_string(count) + " exceeds segment size",
                "record_count", 9);
  }
  seg.records.reserve(count);
  for (std::uint64_t i = 0; i < count; ++i) {
    EmbeddingRecord rec;
    rec.id = r.le<std::uint64_t>("id");
    rec.label_id = r.le<std::uint32_t>("label_id");
    const auto tag_len = r.le<std::uint16_t>("source_tag length");
    rec.source_tag = r.str(tag_len, "source_tag");
    rec.vector.resize(seg.dimension);
    for (auto& x : rec.vector) x = r.f32("vector");
    seg.records.push_back(std::move(rec));
  }
  if (r.offset() != body.size()) {
    throw Error(ErrorCode::kFormatError,
                "trailing bytes after last record at offset " + std::to_string(r.offset()),
                "records", r.offset());
  }
  return seg;
}

std::vector<std::byte> read_file_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary | std::ios::ate);
  if (!in) {
    throw Error(ErrorCode::kIoError, "cannot open " + path.string(), "path");
  }
  const auto size = static_cast<std::size_t>(in.tellg());
  std::vector<std::byte> bytes(size);
  in.seekg(0);
  in.read(reinterpret_cast<char*>(bytes.data()), static_cast<std::streamsize>(size));
  if (!in) throw Error(ErrorCode::kIoError, "read failed: " + path.string(), "path");
  return bytes;
}

void write_file_atomic(const std::filesystem::path& path,
                       std::span<const std::byte> bytes) {
  auto tmp = path;
  tmp += ".tmp";
  std::FILE* f = std::fopen(tmp.c_str(), "wb");
  if (f == nullptr) {
    throw Error(ErrorCode::kIoError, "cannot write " + tmp.string(), "path");
  }
  const bool ok = std::fwrite(bytes.data(), 1, bytes.size(), f) == bytes.size() &&
                  std::fflush(f) == 0 && ::fsync(::fileno(f)) == 0;
  std::fclose(f);
  if (!ok) {
    std::filesystem::remove(tmp);
    throw Error(ErrorCode::kIoError, "write failed: " + tmp.string(), "path");
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) {
    throw Error(ErrorCode::kIoError, "rename to " + path.string() + ": " + ec.message(),
                "path");
  }
}

std::uint32_t write_segment_file(const std::filesystem::path& path,
                                 std::uint32_t dimension,
                                 std::span<const EmbeddingRecord> records) {
  const auto bytes = encode_segment(dimension, records);
  write_file_atomic(path, bytes);
  Reader trailer(std::span<const std::byte>(bytes).last(kTrailerSize));
  return trailer.le<std::uint32_t>("crc32c");
}

Segment read_segment_file(const std::filesystem::path& path) {
  const auto bytes = read_file_bytes(path);
  return decode_segment(bytes);
}

}  // namespace knnmem
