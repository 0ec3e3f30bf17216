#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "knnmem/collection.hpp"
#include "knnmem/engine.hpp"

namespace knnmem {

enum class SetRole { kSupport, kTest };

/// Labeled embeddings outside any store: a support set to be ingested or a
/// test set to be classified.
struct LabeledSet {
  std::size_t dimension = 0;
  std::vector<std::string> labels;
  std::vector<EmbeddingRecord> records;
  SetRole role = SetRole::kSupport;
};

LabeledSet to_labeled_set(const Collection& c, SetRole role = SetRole::kSupport);
Collection build_collection(const std::string& name, const LabeledSet& set);

struct ClassStat {
  std::string label;
  std::uint64_t size = 0;
  std::optional<double> accuracy;

  bool operator==(const ClassStat&) const = default;
};

struct ReportStep {
  std::size_t index = 0;
  /// "*" for whole-run steps; merge runs use "<tag>@isolated" / "<tag>@merged".
  std::string scope = "*";
  std::uint64_t support_size = 0;
  std::uint64_t removed_or_added = 0;
  std::vector<ClassStat> classes;
  double accuracy = 0.0;
  std::uint64_t generation = 0;

  bool operator==(const ReportStep&) const = default;
};

struct ProtocolReport {
  std::string protocol;
  std::size_t k = kDefaultK;
  std::uint64_t seed = 0;
  std::vector<ReportStep> steps;

  bool operator==(const ProtocolReport&) const = default;
};

struct HarnessConfig {
  EngineConfig engine;
  std::uint64_t seed = 0;
  bool per_class_accuracy = false;
};

struct AccuracyResult {
  std::uint64_t correct = 0;
  std::uint64_t total = 0;
  std::vector<std::uint64_t> class_correct;  // by true label id
  std::vector<std::uint64_t> class_total;

  double accuracy() const {
    return total == 0 ? 0.0 : static_cast<double>(correct) / static_cast<double>(total);
  }
};

/// Classifies every test record against `store`. Throws INVALID_ARGUMENT on
/// an empty test set and EMPTY_COLLECTION on an empty store.
AccuracyResult measure_accuracy(const Collection& store,
                                std::span<const EmbeddingRecord> test,
                                const EngineConfig& cfg);

/// Fraction of `test` predicted correctly by a fresh store built from `support`.
double evaluate_accuracy(const LabeledSet& support, const LabeledSet& test,
                         const EngineConfig& cfg = {});

/// Grows the label space one class at a time. Step t holds the support and
/// test records of the first t classes of `class_order` (label ids; empty
/// means vocabulary order; a prefix of the classes is allowed). Earlier
/// records are never touched again.
ProtocolReport run_class_incremental(const LabeledSet& support, const LabeledSet& test,
                                     std::vector<LabelId> class_order,
                                     const HarnessConfig& cfg = {});

/// Grows the support set per class. Each class's records are shuffled once
/// under the seed; step i holds the first per_class_counts[i] of them
/// (clamped to what the class has), so steps are nested.
ProtocolReport run_sample_incremental(const LabeledSet& support, const LabeledSet& test,
                                      const std::vector<std::size_t>& per_class_counts,
                                      const HarnessConfig& cfg = {});

struct NamedDataset {
  std::string tag;
  LabeledSet support;
  LabeledSet test;
};

/// Accuracy of each dataset alone, then against the union of all supports
/// with labels namespaced as "<tag>/<label>". Datasets with no support and
/// no test records are ignored.
ProtocolReport run_merge_consistency(const std::vector<NamedDataset>& datasets,
                                     const HarnessConfig& cfg = {});

/// Cumulative removal targets from fractions of `support_size` (floored).
std::vector<std::size_t> removal_counts_from_fractions(std::size_t support_size,
                                                       const std::vector<double>& fractions);

/// The order in which random removal deletes records. Uniform: one seeded
/// shuffle of all ids. Stratified: per-class shuffles, drawing next from the
/// class with the most remaining records (ties to the smaller label id).
std::vector<RecordId> random_removal_order(const LabeledSet& support, std::uint64_t seed,
                                           bool stratified);

/// Deletes records in `random_removal_order` until each cumulative target in
/// `removal_counts` (strictly increasing, below the support size) is met.
/// `trace`, if given, receives the ids removed at each step.
ProtocolReport run_random_removal(const LabeledSet& support, const LabeledSet& test,
                                  const std::vector<std::size_t>& removal_counts,
                                  const HarnessConfig& cfg = {}, bool stratified = false,
                                  std::vector<std::vector<RecordId>>* trace = nullptr);

/// Most valuable feature of every class with live members: the record with
/// the highest attribution count, ties and all-zero counts resolved to the
/// smallest id. One id per non-empty class, ascending label order.
std::vector<RecordId> select_mvf(const Collection& store,
                                 std::span<const LabeledQuery> test,
                                 const EngineConfig& cfg,
                                 AttributionRule rule = AttributionRule::kCorrectAndLabelMatch);

/// Step 0 is the untouched baseline; each later round recomputes attribution
/// on the current support, removes every class's MVF and re-measures. Stops
/// early if a round would leave the support empty.
ProtocolReport run_mvf_removal(const LabeledSet& support, const LabeledSet& test,
                               std::size_t rounds, const HarnessConfig& cfg = {},
                               AttributionRule rule = AttributionRule::kCorrectAndLabelMatch,
                               std::vector<std::vector<RecordId>>* trace = nullptr);

/// Seeded Fisher-Yates over `items`, using only the portable mt19937_64
/// output sequence so orders are reproducible across standard libraries.
template <typename T>
void seeded_shuffle(std::vector<T>& items, std::mt19937_64& rng) {
  for (std::size_t i = items.size(); i > 1; --i) {
    const std::uint64_t bound = i;
    const std::uint64_t limit = UINT64_MAX - (UINT64_MAX % bound);
    std::uint64_t draw = rng();
    while (draw >= limit) draw = rng();
    std::swap(items[i - 1], items[static_cast<std::size_t>(draw % bound)]);
  }
}

}  // namespace knnmem
