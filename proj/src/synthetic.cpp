#include "knnmem/synthetic.hpp"

#include <random>
#include <string>

namespace knnmem::synthetic {

std::pair<LabeledSet, LabeledSet> gaussian_clusters(const ClusterSpec& spec) {
  std::mt19937_64 rng(spec.seed);
  std::normal_distribution<double> unit(0.0, 1.0);

  std::vector<std::string> labels;
  std::vector<std::vector<double>> means(spec.classes);
  for (std::size_t c = 0; c < spec.classes; ++c) {
    labels.push_back("class_" + std::to_string(c));
    for (std::size_t d = 0; d < spec.dimension; ++d) {
      means[c].push_back(unit(rng) * spec.separation);
    }
  }

  auto sample = [&](std::size_t c) {
    std::vector<float> v(spec.dimension);
    for (std::size_t d = 0; d < spec.dimension; ++d) {
      v[d] = static_cast<float>(means[c][d] + unit(rng) * spec.spread);
    }
    return v;
  };

  LabeledSet support{spec.dimension, labels, {}, SetRole::kSupport};
  LabeledSet test{spec.dimension, labels, {}, SetRole::kTest};
  RecordId id = 0;
  for (std::size_t i = 0; i < spec.support_per_class; ++i) {
    for (std::size_t c = 0; c < spec.classes; ++c) {
      support.records.push_back(
          EmbeddingRecord{id++, static_cast<LabelId>(c), sample(c), "synthetic"});
    }
  }
  for (std::size_t i = 0; i < spec.test_per_class; ++i) {
    for (std::size_t c = 0; c < spec.classes; ++c) {
      test.records.push_back(
          EmbeddingRecord{id++, static_cast<LabelId>(c), sample(c), "synthetic"});
    }
  }
  return {std::move(support), std::move(test)};
}

}  // namespace knnmem::synthetic
