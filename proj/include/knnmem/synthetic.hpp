#pragma once

#include <cstddef>
#include <cstdint>
#include <utility>

#include "knnmem/harness.hpp"

namespace knnmem::synthetic {

struct ClusterSpec {
  std::size_t classes = 10;
  std::size_t dimension = 32;
  std::size_t support_per_class = 100;
  std::size_t test_per_class = 100;
  /// Class means are N(0, separation^2) per component; samples add N(0, spread^2).
  double separation = 1.0;
  double spread = 0.5;
  std::uint64_t seed = 0;
};

/// Labeled Gaussian clusters. Support ids are 0..n-1 and test ids continue
/// after them; labels are "class_<i>".
std::pair<LabeledSet, LabeledSet> gaussian_clusters(const ClusterSpec& spec);

}  // namespace knnmem::synthetic
