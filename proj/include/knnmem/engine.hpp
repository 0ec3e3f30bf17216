#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <variant>
#include <vector>

#include "knnmem/collection.hpp"
#include "knnmem/error.hpp"

namespace knnmem {

/// k = 10 is the neighborhood size used throughout the reference experiments.
inline constexpr std::size_t kDefaultK = 10;

struct EngineConfig {
  std::size_t k = kDefaultK;
  /// Worker threads for batch paths; 0 picks the hardware concurrency.
  std::size_t threads = 0;
};

struct Neighbor {
  RecordId record_id = 0;
  LabelId label_id = 0;
  double similarity = 0.0;

  bool operator==(const Neighbor&) const = default;
};

struct ClassificationResult {
  LabelId predicted_label_id = 0;
  std::vector<Neighbor> neighbors;
  /// Indexed by label id; sized to the collection's vocabulary.
  std::vector<std::uint32_t> votes;
  std::vector<double> summed_similarity;

  bool operator==(const ClassificationResult&) const = default;
};

/// A query vector paired with its ground-truth label.
struct LabeledQuery {
  std::span<const float> vector;
  LabelId true_label = 0;
};

/// Which neighbors of a query earn usage credit in `neighbor_attribution`.
enum class AttributionRule {
  /// Query classified correctly and neighbor label equals the true label.
  kCorrectAndLabelMatch,
  /// Any query, neighbor label equals the true label.
  kLabelMatchOnly,
  /// Correctly classified query, every neighbor.
  kCorrectOnly,
};

struct RecordUsage {
  RecordId record_id = 0;
  LabelId label_id = 0;
  std::uint64_t count = 0;

  bool operator==(const RecordUsage&) const = default;
};

using BatchOutcome = std::variant<ClassificationResult, Error>;

/// Exact top-k by cosine similarity. Neighbors come back in non-increasing
/// similarity, equal similarities ordered by ascending record id. Returns
/// min(k, size()) entries; an empty collection yields an empty list.
std::vector<Neighbor> top_k(const Collection& c, std::span<const float> query,
                            std::size_t k);

/// Majority vote over the top-k neighbors. Vote ties go to the larger summed
/// similarity, then to the smaller label id. Throws EMPTY_COLLECTION when
/// there is nothing to vote with.
ClassificationResult classify(const Collection& c, std::span<const float> query,
                              const EngineConfig& cfg = {});

/// Element i is classify(c, queries[i], cfg) or the error it raised.
std::vector<BatchOutcome> classify_batch(const Collection& c,
                                         std::span<const std::span<const float>> queries,
                                         const EngineConfig& cfg = {});

/// Per live record, how many queries used it to reach a classification
/// (see AttributionRule). Ascending record id, zero counts included.
std::vector<RecordUsage> neighbor_attribution(
    const Collection& c, std::span<const LabeledQuery> queries,
    const EngineConfig& cfg = {},
    AttributionRule rule = AttributionRule::kCorrectAndLabelMatch);

/// Shared validation for query vectors: dimension, finiteness, non-zero norm.
/// Returns the query norm.
double check_query(const Collection& c, std::span<const float> query);

/// Runs fn(i) for i in [0, n) across up to `threads` workers.
void parallel_for(std::size_t n, std::size_t threads,
                  const std::function<void(std::size_t)>& fn);

}  // namespace knnmem
