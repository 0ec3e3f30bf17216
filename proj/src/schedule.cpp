#include "knnmem/schedule.hpp"

#include <cmath>

#include <nlohmann/json.hpp>

#include "knnmem/error.hpp"

namespace knnmem {

using nlohmann::json;

namespace {

[[noreturn]] void invalid(const std::string& field, const std::string& why) {
  throw Error(ErrorCode::kInvalidArgument, "schedule." + field + ": " + why, field);
}

std::vector<std::size_t> as_counts(const std::vector<double>& steps) {
  std::vector<std::size_t> out;
  for (double s : steps) {
    if (s < 0 || std::floor(s) != s) invalid("steps", "expected non-negative integers");
    out.push_back(static_cast<std::size_t>(s));
  }
  return out;
}

}  // namespace

std::string_view to_string(ScheduleKind kind) {
  switch (kind) {
    case ScheduleKind::kClassIncremental: return "class-incremental";
    case ScheduleKind::kSampleIncremental: return "sample-incremental";
    case ScheduleKind::kRandomRemoval: return "random-removal";
    case ScheduleKind::kMvfRemoval: return "mvf-removal";
    case ScheduleKind::kMerge: return "merge";
  }
  return "unknown";
}

Schedule parse_schedule(const std::string& json_text) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw Error(ErrorCode::kInvalidArgument, std::string("schedule is not valid JSON: ") + e.what(),
                "schedule");
  }
  if (!j.is_object()) invalid("", "expected a JSON object");

  Schedule s;
  if (!j.contains("kind") || !j["kind"].is_string()) invalid("kind", "missing or not a string");
  const auto kind = j["kind"].get<std::string>();
  if (kind == "class-incremental") s.kind = ScheduleKind::kClassIncremental;
  else if (kind == "sample-incremental") s.kind = ScheduleKind::kSampleIncremental;
  else if (kind == "random-removal") s.kind = ScheduleKind::kRandomRemoval;
  else if (kind == "mvf-removal") s.kind = ScheduleKind::kMvfRemoval;
  else if (kind == "merge") s.kind = ScheduleKind::kMerge;
  else invalid("kind", "unknown kind '" + kind + "'");

  if (j.contains("seed")) {
    if (!j["seed"].is_number_unsigned()) invalid("seed", "expected an unsigned integer");
    s.seed = j["seed"].get<std::uint64_t>();
  }
  if (j.contains("k")) {
    if (!j["k"].is_number_unsigned() || j["k"].get<std::uint64_t>() == 0) {
      invalid("k", "expected a positive integer");
    }
    s.k = j["k"].get<std::size_t>();
  }
  if (j.contains("steps")) {
    if (!j["steps"].is_array()) invalid("steps", "expected an array");
    for (const auto& step : j["steps"]) {
      if (step.is_number()) {
        s.steps.push_back(step.get<double>());
      } else if (step.is_string() && s.kind == ScheduleKind::kClassIncremental) {
        s.class_order.push_back(step.get<std::string>());
      } else {
        invalid("steps", "unexpected entry " + step.dump());
      }
    }
    if (!s.steps.empty() && !s.class_order.empty()) {
      invalid("steps", "mixes class names and numbers");
    }
  }
  if (j.contains("rounds")) {
    if (!j["rounds"].is_number_unsigned()) invalid("rounds", "expected an unsigned integer");
    s.rounds = j["rounds"].get<std::size_t>();
  }
  if (j.contains("unit")) {
    if (!j["unit"].is_string()) invalid("unit", "expected a string");
    const auto unit = j["unit"].get<std::string>();
    if (unit == "fraction") s.fraction_unit = true;
    else if (unit != "count") invalid("unit", "expected \"count\" or \"fraction\"");
  }
  for (const char* flag : {"stratified", "per_class_accuracy"}) {
    if (j.contains(flag) && !j[flag].is_boolean()) invalid(flag, "expected a boolean");
  }
  s.stratified = j.value("stratified", false);
  s.per_class_accuracy = j.value("per_class_accuracy", false);
  if (j.contains("attribution")) {
    if (!j["attribution"].is_string()) invalid("attribution", "expected a string");
    const auto rule = j["attribution"].get<std::string>();
    if (rule == "correct-and-match") s.attribution = AttributionRule::kCorrectAndLabelMatch;
    else if (rule == "match-only") s.attribution = AttributionRule::kLabelMatchOnly;
    else if (rule == "correct-only") s.attribution = AttributionRule::kCorrectOnly;
    else invalid("attribution", "unknown rule '" + rule + "'");
  }

  switch (s.kind) {
    case ScheduleKind::kSampleIncremental:
    case ScheduleKind::kRandomRemoval:
      if (s.steps.empty()) invalid("steps", "required for " + kind);
      break;
    case ScheduleKind::kMvfRemoval:
      if (s.rounds == 0) s.rounds = s.steps.size();
      if (s.rounds == 0) invalid("rounds", "mvf-removal needs rounds >= 1");
      break;
    default:
      break;
  }
  return s;
}

ProtocolReport run_schedule(const Schedule& s, const std::vector<NamedDataset>& datasets,
                            std::size_t threads) {
  if (datasets.empty()) {
    throw Error(ErrorCode::kInvalidArgument, "no datasets supplied", "datasets");
  }
  HarnessConfig cfg;
  cfg.engine.k = s.k;
  cfg.engine.threads = threads;
  cfg.seed = s.seed;
  cfg.per_class_accuracy = s.per_class_accuracy;
  const auto& d = datasets.front();

  switch (s.kind) {
    case ScheduleKind::kClassIncremental: {
      std::vector<LabelId> order;
      for (const auto& name : s.class_order) {
        bool found = false;
        for (std::size_t i = 0; i < d.support.labels.size(); ++i) {
          if (d.support.labels[i] == name) {
            order.push_back(static_cast<LabelId>(i));
            found = true;
          }
        }
        if (!found) {
          throw Error(ErrorCode::kLabelInvalid, "unknown class '" + name + "' in order",
                      "steps");
        }
      }
      for (auto id : as_counts(s.steps)) order.push_back(static_cast<LabelId>(id));
      return run_class_incremental(d.support, d.test, order, cfg);
    }
    case ScheduleKind::kSampleIncremental:
      return run_sample_incremental(d.support, d.test, as_counts(s.steps), cfg);
    case ScheduleKind::kRandomRemoval: {
      const auto counts = s.fraction_unit
                              ? removal_counts_from_fractions(d.support.records.size(), s.steps)
                              : as_counts(s.steps);
      return run_random_removal(d.support, d.test, counts, cfg, s.stratified);
    }
    case ScheduleKind::kMvfRemoval:
      return run_mvf_removal(d.support, d.test, s.rounds, cfg, s.attribution);
    case ScheduleKind::kMerge:
      return run_merge_consistency(datasets, cfg);
  }
  throw Error(ErrorCode::kInvalidArgument, "unhandled schedule kind", "kind");
}

}  // namespace knnmem
