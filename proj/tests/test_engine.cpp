#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "knnmem/engine.hpp"
#include "oracle.hpp"
#include "test_util.hpp"

namespace knnmem {
namespace {

using testing::make_labels;
using testing::one_hot;
using testing::random_records;
using testing::random_vector;

Collection collection_of(const std::vector<EmbeddingRecord>& records, std::size_t dim,
                         std::size_t n_labels) {
  Collection c("t", dim, make_labels(n_labels));
  c.insert(records);
  return c;
}

std::vector<RecordId> ids_of(const std::vector<Neighbor>& ns) {
  std::vector<RecordId> out;
  for (const auto& n : ns) out.push_back(n.record_id);
  return out;
}

TEST(TopKTest, SelfQueryHasSimilarityOne) {
  std::mt19937_64 rng(1);
  const auto records = random_records(rng, 100, 16, 3);
  const auto c = collection_of(records, 16, 3);
  const auto& target = records[42];
  const auto result = top_k(c, target.vector, 5);
  ASSERT_EQ(result.size(), 5u);
  EXPECT_EQ(result[0].record_id, 42u);
  EXPECT_NEAR(result[0].similarity, 1.0, 1e-15);
}

TEST(TopKTest, MatchesOracleOnRandomData) {
  std::mt19937_64 rng(2);
  const auto records = random_records(rng, 1000, 64, 10);
  const auto c = collection_of(records, 64, 10);
  const auto entries = oracle::entries_of(records);
  for (std::size_t k = 1; k <= 20; ++k) {
    const auto q = random_vector(rng, 64);
    const auto got = top_k(c, q, k);
    const auto want = oracle::top_k(entries, q, k);
    ASSERT_EQ(got, want) << "k=" << k;
  }
}

TEST(TopKTest, OrthogonalQueryOrdersByAscendingId) {
  Collection c("t", 6, {"a"});
  std::vector<EmbeddingRecord> records;
  for (RecordId id : {9, 4, 7, 1, 5}) {
    records.push_back({id, 0, one_hot(6, 1 + records.size()), ""});
  }
  c.insert(records);
  const auto result = top_k(c, one_hot(6, 0), 10);
  ASSERT_EQ(result.size(), 5u);
  EXPECT_EQ(ids_of(result), (std::vector<RecordId>{1, 4, 5, 7, 9}));
  for (const auto& n : result) EXPECT_EQ(n.similarity, 0.0);
}

TEST(TopKTest, KLargerThanCollectionReturnsAll) {
  std::mt19937_64 rng(3);
  const auto c = collection_of(random_records(rng, 4, 3, 2), 3, 2);
  EXPECT_EQ(top_k(c, random_vector(rng, 3), 10).size(), 4u);
}

TEST(TopKTest, EmptyCollectionYieldsEmptyList) {
  Collection c("t", 3, {"a"});
  EXPECT_TRUE(top_k(c, std::vector<float>{1, 0, 0}, 5).empty());
}

TEST(TopKTest, DeletedRecordsNeverReturned) {
  std::mt19937_64 rng(4);
  auto records = random_records(rng, 200, 8, 3);
  auto c = collection_of(records, 8, 3);
  std::vector<RecordId> gone;
  for (RecordId id = 0; id < 200; id += 3) gone.push_back(id);
  c.erase(gone);
  for (int i = 0; i < 50; ++i) {
    for (const auto& n : top_k(c, random_vector(rng, 8), 20)) {
      EXPECT_NE(n.record_id % 3, 0u);
    }
  }
}

TEST(TopKTest, InvalidQueriesRejected) {
  Collection c("t", 3, {"a"});
  c.insert(std::vector<EmbeddingRecord>{{1, 0, {1, 0, 0}, ""}});
  auto code = [&](std::vector<float> q, std::size_t k) {
    try {
      top_k(c, q, k);
    } catch (const Error& e) {
      return e.code();
    }
    return ErrorCode::kIoError;
  };
  EXPECT_EQ(code({1, 0}, 1), ErrorCode::kDimensionMismatch);
  EXPECT_EQ(code({0, 0, 0}, 1), ErrorCode::kZeroNorm);
  EXPECT_EQ(code({NAN, 0, 0}, 1), ErrorCode::kNonFinite);
  EXPECT_EQ(code({1, 0, 0}, 0), ErrorCode::kInvalidArgument);
}

TEST(TopKTest, SimilarityWithinOneRoundingOfExtendedReference) {
  std::mt19937_64 rng(5);
  const auto records = random_records(rng, 300, 32, 2);
  const auto c = collection_of(records, 32, 2);
  for (int i = 0; i < 20; ++i) {
    const auto q = random_vector(rng, 32);
    for (const auto& n : top_k(c, q, 10)) {
      const auto& v = records[n.record_id].vector;
      long double ab = 0, aa = 0, bb = 0;
      for (std::size_t d = 0; d < 32; ++d) {
        ab += static_cast<long double>(q[d]) * v[d];
        aa += static_cast<long double>(q[d]) * q[d];
        bb += static_cast<long double>(v[d]) * v[d];
      }
      const long double ref = ab / (std::sqrt(aa) * std::sqrt(bb));
      EXPECT_NEAR(n.similarity, static_cast<double>(ref), 1e-13);
    }
  }
}

TEST(ClassifyTest, SingleVoterDecides) {
  Collection c("t", 4, {"a", "b", "c"});
  c.insert(std::vector<EmbeddingRecord>{{1, 2, {1, 2, 3, 4}, ""}});
  std::mt19937_64 rng(6);
  for (int i = 0; i < 10; ++i) {
    EXPECT_EQ(classify(c, random_vector(rng, 4)).predicted_label_id, 2u);
  }
}

TEST(ClassifyTest, VoteTieBrokenBySummedSimilarity) {
  // Five "a" records near the query, five "b" records further away.
  Collection c("t", 2, {"a", "b"});
  std::vector<EmbeddingRecord> records;
  for (int i = 0; i < 5; ++i) {
    records.push_back({static_cast<RecordId>(i), 0, {1.0f, 0.1f * static_cast<float>(i)}, ""});
    records.push_back({static_cast<RecordId>(10 + i), 1, {1.0f, 0.6f + 0.1f * static_cast<float>(i)}, ""});
  }
  c.insert(records);
  const std::vector<float> q{1, 0};
  const auto r = classify(c, q, EngineConfig{10});
  EXPECT_EQ(r.votes, (std::vector<std::uint32_t>{5, 5}));
  EXPECT_EQ(r.predicted_label_id, 0u);

  const auto want = oracle::classify(oracle::entries_of(records), 2, q, 10);
  EXPECT_EQ(r.votes, want.votes);
  EXPECT_EQ(r.summed_similarity, want.summed_similarity);
  EXPECT_GT(r.summed_similarity[0], r.summed_similarity[1]);
  EXPECT_EQ(r, want);
}

TEST(ClassifyTest, FullTieGoesToSmallestLabel) {
  Collection c("t", 2, {"a", "b"});
  // Mirror images around the query direction: identical cosines.
  c.insert(std::vector<EmbeddingRecord>{{1, 1, {1.0f, 0.5f}, ""}, {2, 0, {1.0f, -0.5f}, ""}});
  const auto r = classify(c, std::vector<float>{1, 0}, EngineConfig{2});
  EXPECT_EQ(r.summed_similarity[0], r.summed_similarity[1]);
  EXPECT_EQ(r.predicted_label_id, 0u);
}

TEST(ClassifyTest, EmptyCollectionIsAnError) {
  Collection c("t", 2, {"a"});
  try {
    classify(c, std::vector<float>{1, 0});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kEmptyCollection);
  }
}

TEST(ClassifyTest, ResultInvariantsHold) {
  std::mt19937_64 rng(7);
  const auto c = collection_of(random_records(rng, 60, 8, 4), 8, 4);
  for (std::size_t k : {1, 3, 10, 60, 100}) {
    const auto r = classify(c, random_vector(rng, 8), EngineConfig{k});
    std::uint32_t total = 0;
    for (auto v : r.votes) total += v;
    EXPECT_EQ(total, std::min<std::size_t>(k, 60));
    for (std::size_t l = 0; l < r.votes.size(); ++l) {
      EXPECT_LE(r.votes[l], r.votes[r.predicted_label_id]);
    }
  }
}

TEST(ClassifyTest, RelabelRedirectsSoleNeighbor) {
  Collection c("t", 3, {"a", "b"});
  c.insert(std::vector<EmbeddingRecord>{
      {7, 0, {1, 0, 0}, ""}, {8, 1, {0, 1, 0}, ""}, {9, 1, {0, 0, 1}, ""}});
  const std::vector<float> q{1, 0.1f, 0};
  EXPECT_EQ(classify(c, q, EngineConfig{1}).predicted_label_id, 0u);
  EXPECT_EQ(c.relabel(7, 1), 0u);
  const auto r = classify(c, q, EngineConfig{1});
  EXPECT_EQ(r.neighbors[0].record_id, 7u);
  EXPECT_EQ(r.predicted_label_id, 1u);
}

TEST(ClassifyTest, DeletedClassIsNeverPredicted) {
  std::mt19937_64 rng(8);
  auto records = random_records(rng, 300, 16, 4);
  auto c = collection_of(records, 16, 4);
  c.erase(select_ids(c, "label=l2"));
  const auto survivors = oracle::entries_of(c);
  for (int i = 0; i < 200; ++i) {
    const auto q = random_vector(rng, 16);
    const auto r = classify(c, q);
    EXPECT_NE(r.predicted_label_id, 2u);
    EXPECT_EQ(r.predicted_label_id, oracle::classify(survivors, 4, q, kDefaultK).predicted_label_id);
  }
}

TEST(ClassifyTest, ScaleInvariance) {
  std::mt19937_64 rng(9);
  const auto c = collection_of(random_records(rng, 500, 16, 5), 16, 5);
  for (int i = 0; i < 50; ++i) {
    const auto q = random_vector(rng, 16);
    const auto base = classify(c, q);
    for (float s : {0.25f, 2.0f, 1024.0f}) {  // exact in binary floating point
      auto scaled = q;
      for (auto& x : scaled) x *= s;
      EXPECT_EQ(classify(c, scaled), base);
    }
    auto scaled = q;
    for (auto& x : scaled) x *= 3.7f;
    const auto r = classify(c, scaled);
    EXPECT_EQ(r.predicted_label_id, base.predicted_label_id);
    EXPECT_EQ(ids_of(r.neighbors), ids_of(base.neighbors));
    EXPECT_EQ(r.votes, base.votes);
  }
}

TEST(ClassifyTest, MonotoneKnowledgeWithKOne) {
  std::mt19937_64 rng(10);
  const auto records = random_records(rng, 300, 8, 6);
  const auto c = collection_of(records, 8, 6);
  for (const auto& r : records) {
    EXPECT_EQ(classify(c, r.vector, EngineConfig{1}).predicted_label_id, r.label_id);
  }
}

TEST(ClassifyTest, InsertionOrderDoesNotMatter) {
  std::mt19937_64 rng(11);
  auto records = random_records(rng, 200, 8, 3);
  // Duplicate vectors under different ids force similarity ties.
  for (int i = 0; i < 20; ++i) records[100 + i].vector = records[i].vector;
  const auto reference = collection_of(records, 8, 3);
  std::vector<std::vector<float>> queries;
  for (int i = 0; i < 50; ++i) queries.push_back(random_vector(rng, 8));
  for (int p = 0; p < 5; ++p) {
    std::shuffle(records.begin(), records.end(), rng);
    const auto shuffled = collection_of(records, 8, 3);
    for (const auto& q : queries) {
      ASSERT_EQ(classify(shuffled, q), classify(reference, q));
    }
  }
}

TEST(ClassifyBatchTest, RepeatedQueryGivesIdenticalResults) {
  std::mt19937_64 rng(12);
  const auto c = collection_of(random_records(rng, 100, 8, 3), 8, 3);
  const auto q = random_vector(rng, 8);
  const std::vector<std::span<const float>> qs{q, q, q};
  const auto out = classify_batch(c, qs, EngineConfig{5, 3});
  ASSERT_EQ(out.size(), 3u);
  const auto& first = std::get<ClassificationResult>(out[0]);
  EXPECT_EQ(std::get<ClassificationResult>(out[1]), first);
  EXPECT_EQ(std::get<ClassificationResult>(out[2]), first);
}

TEST(ClassifyBatchTest, EqualsSequentialClassify) {
  std::mt19937_64 rng(13);
  const auto c = collection_of(random_records(rng, 400, 16, 5), 16, 5);
  std::vector<std::vector<float>> owned;
  for (int i = 0; i < 200; ++i) owned.push_back(random_vector(rng, 16));
  std::vector<std::span<const float>> qs(owned.begin(), owned.end());
  for (std::size_t threads : {1, 4}) {
    const auto out = classify_batch(c, qs, EngineConfig{10, threads});
    ASSERT_EQ(out.size(), qs.size());
    for (std::size_t i = 0; i < qs.size(); ++i) {
      ASSERT_EQ(std::get<ClassificationResult>(out[i]), classify(c, qs[i]));
    }
  }
}

TEST(ClassifyBatchTest, EmptyBatchAndPositionalErrors) {
  std::mt19937_64 rng(14);
  const auto c = collection_of(random_records(rng, 10, 3, 2), 3, 2);
  EXPECT_TRUE(classify_batch(c, {}).empty());

  const std::vector<float> good{1, 2, 3};
  const std::vector<float> zero{0, 0, 0};
  const std::vector<float> short_q{1, 2};
  const std::vector<std::span<const float>> qs{good, zero, good, short_q};
  const auto out = classify_batch(c, qs);
  ASSERT_EQ(out.size(), 4u);
  EXPECT_TRUE(std::holds_alternative<ClassificationResult>(out[0]));
  EXPECT_EQ(std::get<Error>(out[1]).code(), ErrorCode::kZeroNorm);
  EXPECT_TRUE(std::holds_alternative<ClassificationResult>(out[2]));
  EXPECT_EQ(std::get<Error>(out[3]).code(), ErrorCode::kDimensionMismatch);
}

TEST(AttributionTest, CorrectQueryWithKOneCreditsItsNeighbor) {
  Collection c("t", 2, {"a", "b"});
  c.insert(std::vector<EmbeddingRecord>{{1, 0, {1, 0}, ""}, {2, 1, {0, 1}, ""}, {3, 0, {1, 1}, ""}});
  const std::vector<float> q{1, 0.1f};
  const LabeledQuery lq[] = {{q, 0}};
  const auto usage = neighbor_attribution(c, lq, EngineConfig{1});
  ASSERT_EQ(usage.size(), 3u);
  EXPECT_EQ(usage[0], (RecordUsage{1, 0, 1}));
  EXPECT_EQ(usage[1].count, 0u);
  EXPECT_EQ(usage[2].count, 0u);
}

TEST(AttributionTest, MisclassifiedQueryContributesNothing) {
  Collection c("t", 2, {"a", "b"});
  c.insert(std::vector<EmbeddingRecord>{{1, 0, {1, 0}, ""}, {2, 1, {0, 1}, ""}});
  const std::vector<float> q{1, 0.1f};
  const LabeledQuery lq[] = {{q, 1}};
  for (const auto& u : neighbor_attribution(c, lq, EngineConfig{2})) EXPECT_EQ(u.count, 0u);
  // The relaxed rule still credits the label-matching neighbor.
  const auto relaxed =
      neighbor_attribution(c, lq, EngineConfig{2}, AttributionRule::kLabelMatchOnly);
  EXPECT_EQ(relaxed[1].count, 1u);
  EXPECT_EQ(relaxed[0].count, 0u);
}

TEST(AttributionTest, MatchesOracleRecount) {
  std::mt19937_64 rng(15);
  const auto records = random_records(rng, 50, 8, 3);
  const auto c = collection_of(records, 8, 3);
  std::vector<std::vector<float>> owned;
  std::vector<LabeledQuery> queries;
  std::vector<oracle::LabeledVector> oq;
  std::uniform_int_distribution<LabelId> label(0, 2);
  for (int i = 0; i < 100; ++i) owned.push_back(random_vector(rng, 8));
  for (const auto& v : owned) {
    const LabelId l = label(rng);
    queries.push_back({v, l});
    oq.push_back({v, l});
  }
  for (std::size_t k : {1, 5, 10}) {
    const auto usage = neighbor_attribution(c, queries, EngineConfig{k});
    const auto want = oracle::attribution(oracle::entries_of(records), 3, oq, k);
    ASSERT_EQ(usage.size(), want.size());
    std::uint64_t total = 0;
    for (std::size_t i = 0; i < usage.size(); ++i) {
      EXPECT_EQ(usage[i].record_id, records[i].id);
      EXPECT_EQ(usage[i].count, want[i]) << "record " << i << " k=" << k;
      total += usage[i].count;
    }
    EXPECT_GT(total, 0u);
  }
}

TEST(ParallelForTest, PropagatesExceptions) {
  EXPECT_THROW(parallel_for(100, 4,
                            [](std::size_t i) {
                              if (i == 37) throw std::runtime_error("boom");
                            }),
               std::runtime_error);
}

}  // namespace
}  // namespace knnmem
