#include "knnmem/harness.hpp"

#include <algorithm>
#include <map>
#include <numeric>
#include <set>

#include "knnmem/error.hpp"

namespace knnmem {

namespace {

void check_compatible(const LabeledSet& support, const LabeledSet& test) {
  if (support.dimension != test.dimension) {
    throw Error(ErrorCode::kDimensionMismatch,
                "support dimension " + std::to_string(support.dimension) +
                    " differs from test dimension " + std::to_string(test.dimension),
                "dimension");
  }
  if (support.labels != test.labels) {
    throw Error(ErrorCode::kLabelInvalid,
                "support and test sets use different label vocabularies", "labels");
  }
}

std::vector<LabeledQuery> as_queries(std::span<const EmbeddingRecord> records) {
  std::vector<LabeledQuery> out;
  out.reserve(records.size());
  for (const auto& r : records) out.push_back(LabeledQuery{r.vector, r.label_id});
  return out;
}

std::vector<std::uint64_t> live_class_sizes(const Collection& c) {
  std::vector<std::uint64_t> sizes(c.labels().size(), 0);
  for (std::size_t slot = 0; slot < c.slot_count(); ++slot) {
    if (c.slot_live(slot)) ++sizes[c.slot_label(slot)];
  }
  return sizes;
}

// Fills step.classes for `labels` (in the given order) from the store and
// the accuracy breakdown.
void record_classes(ReportStep& step, const Collection& store,
                    const std::vector<LabelId>& labels, const AccuracyResult& acc,
                    bool per_class_accuracy) {
  const auto sizes = live_class_sizes(store);
  for (LabelId label : labels) {
    ClassStat stat{store.labels()[label], sizes[label], std::nullopt};
    if (per_class_accuracy && acc.class_total[label] > 0) {
      stat.accuracy = static_cast<double>(acc.class_correct[label]) /
                      static_cast<double>(acc.class_total[label]);
    }
    step.classes.push_back(std::move(stat));
  }
}

std::vector<LabelId> all_labels(std::size_t n) {
  std::vector<LabelId> out(n);
  std::iota(out.begin(), out.end(), LabelId{0});
  return out;
}

ReportStep measure_step(std::size_t index, const Collection& store,
                        std::span<const EmbeddingRecord> test,
                        const std::vector<LabelId>& classes, std::uint64_t delta,
                        const HarnessConfig& cfg) {
  const auto acc = measure_accuracy(store, test, cfg.engine);
  ReportStep step;
  step.index = index;
  step.support_size = store.size();
  step.removed_or_added = delta;
  step.accuracy = acc.accuracy();
  step.generation = store.generation();
  record_classes(step, store, classes, acc, cfg.per_class_accuracy);
  return step;
}

ProtocolReport new_report(std::string name, const HarnessConfig& cfg) {
  ProtocolReport report;
  report.protocol = std::move(name);
  report.k = cfg.engine.k;
  report.seed = cfg.seed;
  return report;
}

}  // namespace

LabeledSet to_labeled_set(const Collection& c, SetRole role) {
  return LabeledSet{c.dimension(), c.labels(), c.snapshot(), role};
}

Collection build_collection(const std::string& name, const LabeledSet& set) {
  Collection c(name, set.dimension, set.labels);
  c.insert(set.records);
  return c;
}

AccuracyResult measure_accuracy(const Collection& store,
                                std::span<const EmbeddingRecord> test,
                                const EngineConfig& cfg) {
  if (test.empty()) {
    throw Error(ErrorCode::kInvalidArgument, "test set is empty", "test");
  }
  std::vector<std::span<const float>> queries;
  queries.reserve(test.size());
  for (const auto& r : test) queries.emplace_back(r.vector);
  const auto outcomes = classify_batch(store, queries, cfg);

  AccuracyResult acc;
  acc.class_correct.assign(store.labels().size(), 0);
  acc.class_total.assign(store.labels().size(), 0);
  for (std::size_t i = 0; i < test.size(); ++i) {
    if (const auto* err = std::get_if<Error>(&outcomes[i])) throw *err;
    const auto& result = std::get<ClassificationResult>(outcomes[i]);
    const LabelId truth = test[i].label_id;
    if (truth >= store.labels().size()) {
      throw Error(ErrorCode::kLabelInvalid,
                  "test record " + std::to_string(test[i].id) + " has label_id " +
                      std::to_string(truth) + " outside the vocabulary",
                  "label_id");
    }
    ++acc.total;
    ++acc.class_total[truth];
    if (result.predicted_label_id == truth) {
      ++acc.correct;
      ++acc.class_correct[truth];
    }
  }
  return acc;
}

double evaluate_accuracy(const LabeledSet& support, const LabeledSet& test,
                         const EngineConfig& cfg) {
  check_compatible(support, test);
  if (test.records.empty()) {
    throw Error(ErrorCode::kInvalidArgument, "test set is empty", "test");
  }
  const Collection store = build_collection("support", support);
  return measure_accuracy(store, test.records, cfg).accuracy();
}

ProtocolReport run_class_incremental(const LabeledSet& support, const LabeledSet& test,
                                     std::vector<LabelId> class_order,
                                     const HarnessConfig& cfg) {
  check_compatible(support, test);
  const std::size_t n_classes = support.labels.size();
  if (class_order.empty()) class_order = all_labels(n_classes);
  {
    std::set<LabelId> seen;
    for (LabelId label : class_order) {
      if (label >= n_classes || !seen.insert(label).second) {
        throw Error(ErrorCode::kLabelInvalid,
                    "class order entry " + std::to_string(label) +
                        " is unknown or repeated",
                    "class_order");
      }
    }
  }

  auto report = new_report("class-incremental", cfg);
  Collection store("support", support.dimension, support.labels);
  std::vector<bool> seen(n_classes, false);
  std::vector<LabelId> seen_order;
  for (std::size_t t = 0; t < class_order.size(); ++t) {
    const LabelId label = class_order[t];
    seen[label] = true;
    seen_order.push_back(label);

    std::vector<EmbeddingRecord> added;
    for (const auto& r : support.records) {
      if (r.label_id == label) added.push_back(r);
    }
    store.insert(added);

    std::vector<EmbeddingRecord> subset;
    for (const auto& r : test.records) {
      if (r.label_id < n_classes && seen[r.label_id]) subset.push_back(r);
    }
    report.steps.push_back(
        measure_step(t + 1, store, subset, seen_order, added.size(), cfg));
  }
  return report;
}

ProtocolReport run_sample_incremental(const LabeledSet& support, const LabeledSet& test,
                                      const std::vector<std::size_t>& per_class_counts,
                                      const HarnessConfig& cfg) {
  check_compatible(support, test);
  if (per_class_counts.empty()) {
    throw Error(ErrorCode::kInvalidArgument, "sample schedule is empty", "steps");
  }
  for (std::size_t i = 0; i < per_class_counts.size(); ++i) {
    if (per_class_counts[i] == 0 || (i > 0 && per_class_counts[i] < per_class_counts[i - 1])) {
      throw Error(ErrorCode::kInvalidArgument,
                  "per-class counts must be positive and ascending", "steps");
    }
  }

  const std::size_t n_classes = support.labels.size();
  std::vector<std::vector<const EmbeddingRecord*>> by_class(n_classes);
  for (const auto& r : support.records) {
    if (r.label_id >= n_classes) {
      throw Error(ErrorCode::kLabelInvalid,
                  "support record " + std::to_string(r.id) + " has an invalid label",
                  "label_id");
    }
    by_class[r.label_id].push_back(&r);
  }
  std::mt19937_64 rng(cfg.seed);
  for (auto& members : by_class) {
    std::sort(members.begin(), members.end(),
              [](const auto* a, const auto* b) { return a->id < b->id; });
    seeded_shuffle(members, rng);
  }

  auto report = new_report("sample-incremental", cfg);
  Collection store("support", support.dimension, support.labels);
  std::vector<std::size_t> taken(n_classes, 0);
  const auto classes = all_labels(n_classes);
  for (std::size_t i = 0; i < per_class_counts.size(); ++i) {
    std::vector<EmbeddingRecord> added;
    for (LabelId label = 0; label < n_classes; ++label) {
      const std::size_t target = std::min(per_class_counts[i], by_class[label].size());
      for (std::size_t j = taken[label]; j < target; ++j) {
        added.push_back(*by_class[label][j]);
      }
      taken[label] = std::max(taken[label], target);
    }
    store.insert(added);
    report.steps.push_back(measure_step(i + 1, store, test.records, classes,
                                        added.size(), cfg));
  }
  return report;
}

ProtocolReport run_merge_consistency(const std::vector<NamedDataset>& datasets,
                                     const HarnessConfig& cfg) {
  std::vector<const NamedDataset*> active;
  for (const auto& d : datasets) {
    if (d.support.records.empty() && d.test.records.empty()) continue;
    check_compatible(d.support, d.test);
    if (d.support.records.empty() || d.test.records.empty()) {
      throw Error(ErrorCode::kInvalidArgument,
                  "dataset '" + d.tag + "' needs both support and test records", "datasets");
    }
    active.push_back(&d);
  }
  if (active.empty()) {
    throw Error(ErrorCode::kInvalidArgument, "no non-empty datasets to merge", "datasets");
  }
  for (const auto* d : active) {
    if (d->support.dimension != active.front()->support.dimension) {
      throw Error(ErrorCode::kDimensionMismatch,
                  "dataset '" + d->tag + "' has a different embedding dimension",
                  "dimension");
    }
  }

  // Union vocabulary, namespaced per dataset.
  std::vector<std::string> union_labels;
  std::vector<LabelId> offsets;
  std::set<std::string> seen;
  for (const auto* d : active) {
    offsets.push_back(static_cast<LabelId>(union_labels.size()));
    for (const auto& label : d->support.labels) {
      auto name = d->tag + "/" + label;
      if (!seen.insert(name).second) {
        throw Error(ErrorCode::kLabelInvalid,
                    "label '" + name + "' collides after namespacing", "labels");
      }
      union_labels.push_back(std::move(name));
    }
  }

  Collection merged("merged", active.front()->support.dimension, union_labels);
  std::vector<std::vector<EmbeddingRecord>> merged_tests;
  RecordId next_id = 0;
  for (std::size_t d = 0; d < active.size(); ++d) {
    auto support = active[d]->support.records;
    std::sort(support.begin(), support.end(),
              [](const auto& a, const auto& b) { return a.id < b.id; });
    for (auto& r : support) {
      r.id = next_id++;
      r.label_id += offsets[d];
      r.source_tag = active[d]->tag;
    }
    merged.insert(support);
    auto test = active[d]->test.records;
    for (auto& r : test) r.label_id += offsets[d];
    merged_tests.push_back(std::move(test));
  }

  auto report = new_report("merge", cfg);
  for (std::size_t d = 0; d < active.size(); ++d) {
    const auto& ds = *active[d];
    const Collection isolated = build_collection(ds.tag, ds.support);
    auto step = measure_step(report.steps.size() + 1, isolated, ds.test.records,
                             all_labels(ds.support.labels.size()), ds.support.records.size(),
                             cfg);
    step.scope = ds.tag + "@isolated";
    report.steps.push_back(std::move(step));

    std::vector<LabelId> own(ds.support.labels.size());
    std::iota(own.begin(), own.end(), offsets[d]);
    step = measure_step(report.steps.size() + 1, merged, merged_tests[d], own,
                        ds.support.records.size(), cfg);
    step.scope = ds.tag + "@merged";
    report.steps.push_back(std::move(step));
  }
  return report;
}

std::vector<std::size_t> removal_counts_from_fractions(std::size_t support_size,
                                                       const std::vector<double>& fractions) {
  std::vector<std::size_t> out;
  out.reserve(fractions.size());
  for (double f : fractions) {
    if (!(f >= 0.0 && f <= 1.0)) {
      throw Error(ErrorCode::kInvalidArgument, "removal fraction outside [0, 1]", "steps");
    }
    out.push_back(static_cast<std::size_t>(f * static_cast<double>(support_size)));
  }
  return out;
}

std::vector<RecordId> random_removal_order(const LabeledSet& support, std::uint64_t seed,
                                           bool stratified) {
  std::vector<const EmbeddingRecord*> sorted;
  sorted.reserve(support.records.size());
  for (const auto& r : support.records) sorted.push_back(&r);
  std::sort(sorted.begin(), sorted.end(),
            [](const auto* a, const auto* b) { return a->id < b->id; });

  std::mt19937_64 rng(seed);
  std::vector<RecordId> order;
  order.reserve(sorted.size());
  if (!stratified) {
    for (const auto* r : sorted) order.push_back(r->id);
    seeded_shuffle(order, rng);
    return order;
  }

  std::map<LabelId, std::vector<RecordId>> by_class;
  for (const auto* r : sorted) by_class[r->label_id].push_back(r->id);
  for (auto& [label, ids] : by_class) {
    seeded_shuffle(ids, rng);
    std::reverse(ids.begin(), ids.end());  // pop from the back in shuffled order
  }
  while (order.size() < sorted.size()) {
    std::vector<RecordId>* fullest = nullptr;
    for (auto& [label, ids] : by_class) {
      if (fullest == nullptr || ids.size() > fullest->size()) fullest = &ids;
    }
    order.push_back(fullest->back());
    fullest->pop_back();
  }
  return order;
}

ProtocolReport run_random_removal(const LabeledSet& support, const LabeledSet& test,
                                  const std::vector<std::size_t>& removal_counts,
                                  const HarnessConfig& cfg, bool stratified,
                                  std::vector<std::vector<RecordId>>* trace) {
  check_compatible(support, test);
  const std::size_t n = support.records.size();
  for (std::size_t i = 0; i < removal_counts.size(); ++i) {
    if (i > 0 && removal_counts[i] <= removal_counts[i - 1]) {
      throw Error(ErrorCode::kInvalidArgument,
                  "removal schedule must strictly shrink the support", "steps");
    }
    if (removal_counts[i] >= n) {
      throw Error(ErrorCode::kInvalidArgument,
                  "removing " + std::to_string(removal_counts[i]) + " of " +
                      std::to_string(n) + " records leaves no support",
                  "steps");
    }
  }

  const auto order = random_removal_order(support, cfg.seed, stratified);
  auto report = new_report(stratified ? "random-removal-stratified" : "random-removal", cfg);
  Collection store = build_collection("support", support);
  const auto classes = all_labels(support.labels.size());
  std::size_t removed = 0;
  for (std::size_t i = 0; i < removal_counts.size(); ++i) {
    std::vector<RecordId> batch(order.begin() + static_cast<std::ptrdiff_t>(removed),
                                order.begin() + static_cast<std::ptrdiff_t>(removal_counts[i]));
    store.erase(batch);
    removed = removal_counts[i];
    report.steps.push_back(measure_step(i, store, test.records, classes, batch.size(), cfg));
    if (trace != nullptr) trace->push_back(std::move(batch));
  }
  return report;
}

std::vector<RecordId> select_mvf(const Collection& store,
                                 std::span<const LabeledQuery> test,
                                 const EngineConfig& cfg, AttributionRule rule) {
  const auto usage = neighbor_attribution(store, test, cfg, rule);
  // usage is ascending by id, so strict '>' keeps the smallest id on ties.
  std::vector<const RecordUsage*> best(store.labels().size(), nullptr);
  for (const auto& u : usage) {
    auto& slot = best[u.label_id];
    if (slot == nullptr || u.count > slot->count) slot = &u;
  }
  std::vector<RecordId> out;
  for (const auto* b : best) {
    if (b != nullptr) out.push_back(b->record_id);
  }
  return out;
}

ProtocolReport run_mvf_removal(const LabeledSet& support, const LabeledSet& test,
                               std::size_t rounds, const HarnessConfig& cfg,
                               AttributionRule rule,
                               std::vector<std::vector<RecordId>>* trace) {
  check_compatible(support, test);
  if (rounds == 0) {
    throw Error(ErrorCode::kInvalidArgument, "mvf-removal needs at least one round",
                "rounds");
  }
  if (test.records.empty()) {
    throw Error(ErrorCode::kInvalidArgument, "test set is empty", "test");
  }
  const auto queries = as_queries(test.records);
  auto report = new_report("mvf-removal", cfg);
  Collection store = build_collection("support", support);
  const auto classes = all_labels(support.labels.size());

  report.steps.push_back(measure_step(0, store, test.records, classes, 0, cfg));
  for (std::size_t round = 1; round <= rounds; ++round) {
    auto victims = select_mvf(store, queries, cfg.engine, rule);
    if (victims.size() >= store.size()) break;
    store.erase(victims);
    report.steps.push_back(
        measure_step(round, store, test.records, classes, victims.size(), cfg));
    if (trace != nullptr) trace->push_back(std::move(victims));
  }
  return report;
}

}  // namespace knnmem
