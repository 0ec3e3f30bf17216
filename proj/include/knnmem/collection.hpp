#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace knnmem {

using RecordId = std::uint64_t;
using LabelId = std::uint32_t;

/// One stored support sample. Owns its vector; used at the API boundary
/// (insert batches, segment files, labeled sets).
struct EmbeddingRecord {
  RecordId id = 0;
  LabelId label_id = 0;
  std::vector<float> vector;
  std::string source_tag;

  bool operator==(const EmbeddingRecord&) const = default;
};

/// Non-owning view of a live record inside a Collection. Valid until the
/// next mutation of that collection.
struct RecordView {
  RecordId id;
  LabelId label_id;
  std::span<const float> vector;
  std::string_view source_tag;
  double norm;
};

/// Result of a delete call: how many live records went away and which of
/// the requested ids were not live.
struct DeleteResult {
  std::size_t deleted = 0;
  std::vector<RecordId> not_live;
};

/// A named, mutable set of labeled embeddings sharing one dimension and one
/// label vocabulary.
///
/// Storage is slot-based: vectors live contiguously, deletes only tombstone a
/// slot, and `compact()` reclaims the holes. Vectors are kept exactly as
/// given; their L2 norms are computed once at insert in double precision.
///
/// Const member functions never mutate shared state, so any number of
/// threads may read concurrently as long as no writer is active.
class Collection {
 public:
  Collection(std::string name, std::size_t dimension,
             std::vector<std::string> labels);

  const std::string& name() const noexcept { return name_; }
  std::size_t dimension() const noexcept { return dimension_; }
  const std::vector<std::string>& labels() const noexcept { return labels_; }
  std::uint64_t generation() const noexcept { return generation_; }
  std::size_t size() const noexcept { return index_.size(); }
  bool empty() const noexcept { return index_.empty(); }

  /// Validates the whole batch first; on any failure nothing is inserted and
  /// the error names the first offending record. Returns the count inserted.
  std::size_t insert(std::span<const EmbeddingRecord> records);
  DeleteResult erase(std::span<const RecordId> ids);
  /// Returns the previous label. Bumps the generation even if unchanged.
  LabelId relabel(RecordId id, LabelId new_label);

  bool contains(RecordId id) const { return index_.contains(id); }
  RecordView get(RecordId id) const;
  /// Label index for `label`, or throws LABEL_INVALID.
  LabelId label_id(std::string_view label) const;

  /// Live records in ascending id order.
  std::vector<RecordView> scan() const;
  std::vector<EmbeddingRecord> snapshot() const;

  /// Drops tombstoned slots. Does not change the generation.
  void compact();

  // Slot-level access for the search kernel. Slots include tombstones.
  std::size_t slot_count() const noexcept { return ids_.size(); }
  bool slot_live(std::size_t slot) const noexcept { return live_[slot] != 0; }
  RecordId slot_id(std::size_t slot) const noexcept { return ids_[slot]; }
  LabelId slot_label(std::size_t slot) const noexcept { return label_ids_[slot]; }
  double slot_norm(std::size_t slot) const noexcept { return norms_[slot]; }
  std::span<const float> slot_vector(std::size_t slot) const noexcept {
    return {data_.data() + slot * dimension_, dimension_};
  }

  /// Used by the loader to restore a persisted generation.
  void restore_generation(std::uint64_t generation) noexcept {
    generation_ = generation;
  }

 private:
  void validate(std::span<const EmbeddingRecord> records) const;
  RecordView view(std::size_t slot) const;

  std::string name_;
  std::size_t dimension_;
  std::vector<std::string> labels_;
  std::uint64_t generation_ = 0;

  std::vector<float> data_;
  std::vector<double> norms_;
  std::vector<RecordId> ids_;
  std::vector<LabelId> label_ids_;
  std::vector<std::string> tags_;
  std::vector<std::uint8_t> live_;
  std::map<RecordId, std::size_t> index_;  // live id -> slot
};

/// Live ids matching "label=<name>" or "source_tag=<tag>", ascending. A
/// label outside the vocabulary simply matches nothing.
std::vector<RecordId> select_ids(const Collection& c, std::string_view predicate);

/// L2 norm accumulated in double, component order.
double l2_norm(std::span<const float> v);

}  // namespace knnmem
