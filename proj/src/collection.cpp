#include "knnmem/collection.hpp"

#include <cmath>
#include <set>
#include <unordered_set>
#include <utility>

#include "knnmem/error.hpp"

namespace knnmem {

namespace {

std::string record_ref(std::size_t index, RecordId id) {
  return "records[" + std::to_string(index) + "] (id " + std::to_string(id) + ")";
}

}  // namespace

double l2_norm(std::span<const float> v) {
  double sum = 0.0;
  for (float x : v) {
    const double d = x;
    sum += d * d;
  }
  return std::sqrt(sum);
}

Collection::Collection(std::string name, std::size_t dimension,
                       std::vector<std::string> labels)
    : name_(std::move(name)), dimension_(dimension), labels_(std::move(labels)) {
  if (dimension_ == 0) {
    throw Error(ErrorCode::kInvalidArgument, "dimension must be at least 1",
                "dimension");
  }
  if (labels_.empty()) {
    throw Error(ErrorCode::kInvalidArgument, "label vocabulary is empty", "labels");
  }
  std::set<std::string_view> seen;
  for (const auto& label : labels_) {
    if (!seen.insert(label).second) {
      throw Error(ErrorCode::kInvalidArgument, "duplicate label '" + label + "'",
                  "labels");
    }
  }
}

void Collection::validate(std::span<const EmbeddingRecord> records) const {
  std::unordered_set<RecordId> batch_ids;
  batch_ids.reserve(records.size());
  for (std::size_t i = 0; i < records.size(); ++i) {
    const auto& r = records[i];
    if (r.vector.size() != dimension_) {
      throw Error(ErrorCode::kDimensionMismatch,
                  record_ref(i, r.id) + ": vector has " +
                      std::to_string(r.vector.size()) + " components, expected " +
                      std::to_string(dimension_),
                  "vector");
    }
    for (float x : r.vector) {
      if (!std::isfinite(x)) {
        throw Error(ErrorCode::kNonFinite,
                    record_ref(i, r.id) + ": vector has a NaN or infinite component",
                    "vector");
      }
    }
    if (!(l2_norm(r.vector) > 0.0)) {
      throw Error(ErrorCode::kZeroNorm, record_ref(i, r.id) + ": zero vector",
                  "vector");
    }
    if (r.label_id >= labels_.size()) {
      throw Error(ErrorCode::kLabelInvalid,
                  record_ref(i, r.id) + ": label_id " + std::to_string(r.label_id) +
                      " outside vocabulary of " + std::to_string(labels_.size()),
                  "label_id");
    }
    if (index_.contains(r.id) || !batch_ids.insert(r.id).second) {
      throw Error(ErrorCode::kDuplicateId, record_ref(i, r.id) + ": id already live",
                  "id");
    }
  }
}

std::size_t Collection::insert(std::span<const EmbeddingRecord> records) {
  if (records.empty()) return 0;
  validate(records);

  data_.reserve(data_.size() + records.size() * dimension_);
  for (const auto& r : records) {
    const std::size_t slot = ids_.size();
    data_.insert(data_.end(), r.vector.begin(), r.vector.end());
    norms_.push_back(l2_norm(r.vector));
    ids_.push_back(r.id);
    label_ids_.push_back(r.label_id);
    tags_.push_back(r.source_tag);
    live_.push_back(1);
    index_.emplace(r.id, slot);
  }
  ++generation_;
  return records.size();
}

DeleteResult Collection::erase(std::span<const RecordId> ids) {
  DeleteResult result;
  for (RecordId id : ids) {
    auto it = index_.find(id);
    if (it == index_.end()) {
      result.not_live.push_back(id);
      continue;
    }
    live_[it->second] = 0;
    index_.erase(it);
    ++result.deleted;
  }
  if (result.deleted > 0) ++generation_;
  return result;
}

LabelId Collection::relabel(RecordId id, LabelId new_label) {
  auto it = index_.find(id);
  if (it == index_.end()) {
    throw Error(ErrorCode::kUnknownId, "id " + std::to_string(id) + " is not live",
                "id");
  }
  if (new_label >= labels_.size()) {
    throw Error(ErrorCode::kLabelInvalid,
                "label_id " + std::to_string(new_label) + " outside vocabulary",
                "label_id");
  }
  const LabelId previous = label_ids_[it->second];
  label_ids_[it->second] = new_label;
  ++generation_;
  return previous;
}

RecordView Collection::view(std::size_t slot) const {
  return RecordView{ids_[slot], label_ids_[slot], slot_vector(slot), tags_[slot],
                    norms_[slot]};
}

RecordView Collection::get(RecordId id) const {
  auto it = index_.find(id);
  if (it == index_.end()) {
    throw Error(ErrorCode::kUnknownId, "id " + std::to_string(id) + " is not live",
                "id");
  }
  return view(it->second);
}

LabelId Collection::label_id(std::string_view label) const {
  for (std::size_t i = 0; i < labels_.size(); ++i) {
    if (labels_[i] == label) return static_cast<LabelId>(i);
  }
  throw Error(ErrorCode::kLabelInvalid,
              "label '" + std::string(label) + "' not in vocabulary", "label");
}

std::vector<RecordView> Collection::scan() const {
  std::vector<RecordView> out;
  out.reserve(index_.size());
  for (const auto& [id, slot] : index_) out.push_back(view(slot));
  return out;
}

std::vector<EmbeddingRecord> Collection::snapshot() const {
  std::vector<EmbeddingRecord> out;
  out.reserve(index_.size());
  for (const auto& [id, slot] : index_) {
    auto v = slot_vector(slot);
    out.push_back(EmbeddingRecord{id, label_ids_[slot], {v.begin(), v.end()},
                                  tags_[slot]});
  }
  return out;
}

void Collection::compact() {
  if (index_.size() == ids_.size()) return;
  std::vector<float> data;
  std::vector<double> norms;
  std::vector<RecordId> ids;
  std::vector<LabelId> labels;
  std::vector<std::string> tags;
  data.reserve(index_.size() * dimension_);
  for (auto& [id, slot] : index_) {
    auto v = slot_vector(slot);
    data.insert(data.end(), v.begin(), v.end());
    norms.push_back(norms_[slot]);
    ids.push_back(id);
    labels.push_back(label_ids_[slot]);
    tags.push_back(std::move(tags_[slot]));
    slot = ids.size() - 1;
  }
  data_ = std::move(data);
  norms_ = std::move(norms);
  ids_ = std::move(ids);
  label_ids_ = std::move(labels);
  tags_ = std::move(tags);
  live_.assign(ids_.size(), 1);
}

std::vector<RecordId> select_ids(const Collection& c, std::string_view predicate) {
  const auto eq = predicate.find('=');
  if (eq == std::string_view::npos) {
    throw Error(ErrorCode::kInvalidArgument,
                "predicate must be label=<name> or source_tag=<tag>", "predicate");
  }
  const auto key = predicate.substr(0, eq);
  const auto value = predicate.substr(eq + 1);
  if (key != "label" && key != "source_tag") {
    throw Error(ErrorCode::kInvalidArgument,
                "unknown predicate key '" + std::string(key) + "'", "predicate");
  }
  std::vector<RecordId> out;
  for (const auto& r : c.scan()) {
    const bool hit = key == "label" ? c.labels()[r.label_id] == value : r.source_tag == value;
    if (hit) out.push_back(r.id);
  }
  return out;
}

}  // namespace knnmem
