#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "knnmem/harness.hpp"

namespace knnmem {

enum class ScheduleKind {
  kClassIncremental,
  kSampleIncremental,
  kRandomRemoval,
  kMvfRemoval,
  kMerge,
};

std::string_view to_string(ScheduleKind kind);

/// Protocol run configuration, read from JSON:
///
///   {"kind": "sample-incremental", "steps": [1, 2, 5, 10], "seed": 7, "k": 10}
///
/// `steps` means per-class counts (sample-incremental), cumulative removal
/// targets (random-removal; counts, or fractions when "unit": "fraction"), or
/// class names / label ids (class-incremental, optional). mvf-removal takes
/// "rounds". Optional: "stratified", "per_class_accuracy", "attribution"
/// ("correct-and-match" | "match-only" | "correct-only").
struct Schedule {
  ScheduleKind kind = ScheduleKind::kClassIncremental;
  std::vector<double> steps;
  std::vector<std::string> class_order;
  std::uint64_t seed = 0;
  std::size_t k = kDefaultK;
  std::size_t rounds = 0;
  bool fraction_unit = false;
  bool stratified = false;
  bool per_class_accuracy = false;
  AttributionRule attribution = AttributionRule::kCorrectAndLabelMatch;
};

/// Throws INVALID_ARGUMENT naming the offending field.
Schedule parse_schedule(const std::string& json_text);

/// Runs the schedule. Every kind but merge uses datasets.front().
ProtocolReport run_schedule(const Schedule& schedule,
                            const std::vector<NamedDataset>& datasets,
                            std::size_t threads = 0);

}  // namespace knnmem
