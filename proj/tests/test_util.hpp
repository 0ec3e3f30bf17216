#pragma once

#include <atomic>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include <unistd.h>

#include "knnmem/collection.hpp"

namespace knnmem::testing {

/// Scratch directory removed on destruction.
class TempDir {
 public:
  TempDir() {
    static std::atomic<int> counter{0};
    path_ = std::filesystem::temp_directory_path() /
            ("knnmem-test-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

inline std::vector<std::string> make_labels(std::size_t n) {
  std::vector<std::string> out;
  for (std::size_t i = 0; i < n; ++i) out.push_back("l" + std::to_string(i));
  return out;
}

inline std::vector<float> random_vector(std::mt19937_64& rng, std::size_t dim) {
  std::normal_distribution<float> dist(0.0f, 1.0f);
  std::vector<float> v(dim);
  for (auto& x : v) x = dist(rng);
  return v;
}

/// n records with ids 0..n-1, random
/// Gaussian vectors and uniformly random labels.
inline std::vector<EmbeddingRecord> random_records(std::mt19937_64& rng, std::size_t n,
                                                   std::size_t dim, std::size_t n_labels) {
  std::uniform_int_distribution<LabelId> label(0, static_cast<LabelId>(n_labels - 1));
  std::vector<EmbeddingRecord> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    out.push_back(EmbeddingRecord{i, label(rng), random_vector(rng, dim), ""});
  }
  return out;
}

inline std::vector<float> one_hot(std::size_t dim, std::size_t hot, float value = 1.0f) {
  std::vector<float> v(dim, 0.0f);
  v[hot] = value;
  return v;
}

}  // namespace knnmem::testing
