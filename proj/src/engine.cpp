#include "knnmem/engine.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <functional>
#include <thread>

namespace knnmem {

namespace {

// Strict "better than" ordering for neighbors.
bool ranks_before(const Neighbor& a, const Neighbor& b) {
  if (a.similarity != b.similarity) return a.similarity > b.similarity;
  return a.record_id < b.record_id;
}

double dot(std::span<const float> a, std::span<const float> b) {
  double sum = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    sum += static_cast<double>(a[i]) * static_cast<double>(b[i]);
  }
  return sum;
}

}  // namespace

double check_query(const Collection& c, std::span<const float> query) {
  if (query.size() != c.dimension()) {
    throw Error(ErrorCode::kDimensionMismatch,
                "query has " + std::to_string(query.size()) + " components, expected " +
                    std::to_string(c.dimension()),
                "vector");
  }
  for (float x : query) {
    if (!std::isfinite(x)) {
      throw Error(ErrorCode::kNonFinite, "query has a NaN or infinite component",
                  "vector");
    }
  }
  const double norm = l2_norm(query);
  if (!(norm > 0.0)) {
    throw Error(ErrorCode::kZeroNorm, "query vector has zero norm", "vector");
  }
  return norm;
}

std::vector<Neighbor> top_k(const Collection& c, std::span<const float> query,
                            std::size_t k) {
  if (k == 0) {
    throw Error(ErrorCode::kInvalidArgument, "k must be at least 1", "k");
  }
  const double query_norm = check_query(c, query);
  const std::size_t keep = std::min(k, c.size());
  std::vector<Neighbor> heap;  // worst-ranked neighbor at the front
  heap.reserve(keep + 1);
  if (keep == 0) return heap;

  for (std::size_t slot = 0; slot < c.slot_count(); ++slot) {
    if (!c.slot_live(slot)) continue;
    const double sim =
        dot(query, c.slot_vector(slot)) / (query_norm * c.slot_norm(slot));
    Neighbor n{c.slot_id(slot), c.slot_label(slot), sim};
    if (heap.size() < keep) {
      heap.push_back(n);
      std::push_heap(heap.begin(), heap.end(), ranks_before);
    } else if (ranks_before(n, heap.front())) {
      std::pop_heap(heap.begin(), heap.end(), ranks_before);
      heap.back() = n;
      std::push_heap(heap.begin(), heap.end(), ranks_before);
    }
  }
  std::sort_heap(heap.begin(), heap.end(), ranks_before);
  return heap;
}

ClassificationResult classify(const Collection& c, std::span<const float> query,
                              const EngineConfig& cfg) {
  if (c.empty()) {
    // Validate the query first so malformed input still reports its own error.
    check_query(c, query);
    throw Error(ErrorCode::kEmptyCollection,
                "collection '" + c.name() + "' holds no knowledge to classify with");
  }
  ClassificationResult result;
  result.neighbors = top_k(c, query, cfg.k);
  result.votes.assign(c.labels().size(), 0);
  result.summed_similarity.assign(c.labels().size(), 0.0);
  for (const auto& n : result.neighbors) {
    ++result.votes[n.label_id];
    result.summed_similarity[n.label_id] += n.similarity;
  }
  LabelId best = 0;
  for (LabelId label = 1; label < result.votes.size(); ++label) {
    if (result.votes[label] > result.votes[best] ||
        (result.votes[label] == result.votes[best] &&
         result.summed_similarity[label] > result.summed_similarity[best])) {
      best = label;
    }
  }
  result.predicted_label_id = best;
  return result;
}

void parallel_for(std::size_t n, std::size_t threads,
                  const std::function<void(std::size_t)>& fn) {
  if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
  threads = std::min(threads, n);
  if (threads <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::atomic<bool> failed{false};
  std::vector<std::jthread> workers;
  workers.reserve(threads);
  for (std::size_t t = 0; t < threads; ++t) {
    workers.emplace_back([&] {
      for (std::size_t i = next++; i < n && !failed; i = next++) {
        try {
          fn(i);
        } catch (...) {
          if (!failed.exchange(true)) failure = std::current_exception();
        }
      }
    });
  }
  workers.clear();
  if (failure) std::rethrow_exception(failure);
}

std::vector<BatchOutcome> classify_batch(const Collection& c,
                                         std::span<const std::span<const float>> queries,
                                         const EngineConfig& cfg) {
  std::vector<BatchOutcome> out(queries.size());
  parallel_for(queries.size(), cfg.threads, [&](std::size_t i) {
    try {
      out[i] = classify(c, queries[i], cfg);
    } catch (const Error& e) {
      out[i] = e;
    }
  });
  return out;
}

std::vector<RecordUsage> neighbor_attribution(const Collection& c,
                                              std::span<const LabeledQuery> queries,
                                              const EngineConfig& cfg,
                                              AttributionRule rule) {
  std::vector<std::vector<Neighbor>> credited(queries.size());
  parallel_for(queries.size(), cfg.threads, [&](std::size_t i) {
    const auto& q = queries[i];
    auto result = classify(c, q.vector, cfg);
    const bool correct = result.predicted_label_id == q.true_label;
    const bool need_correct = rule != AttributionRule::kLabelMatchOnly;
    const bool need_match = rule != AttributionRule::kCorrectOnly;
    if (need_correct && !correct) return;
    for (const auto& n : result.neighbors) {
      if (!need_match || n.label_id == q.true_label) credited[i].push_back(n);
    }
  });

  std::vector<RecordUsage> usage;
  usage.reserve(c.size());
  for (const auto& r : c.scan()) usage.push_back(RecordUsage{r.id, r.label_id, 0});
  auto find = [&](RecordId id) {
    return std::lower_bound(usage.begin(), usage.end(), id,
                            [](const RecordUsage& u, RecordId v) { return u.record_id < v; });
  };
  for (const auto& list : credited) {
    for (const auto& n : list) ++find(n.record_id)->count;
  }
  return usage;
}

}  // namespace knnmem
