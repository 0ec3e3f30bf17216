#include <gtest/gtest.h>

#include <fstream>
#include <sstream>

#include "knnmem/cli.hpp"
#include "knnmem/harness.hpp"
#include "knnmem/persistence.hpp"
#include "knnmem/report.hpp"
#include "knnmem/segment.hpp"
#include "knnmem/synthetic.hpp"
#include "test_util.hpp"

namespace knnmem {
namespace {

struct CliRun {
  int code;
  std::string out;
  std::string err;
};

CliRun cli(const std::vector<std::string>& args) {
  std::ostringstream out;
  std::ostringstream err;
  const int code = run_cli(args, out, err);
  return {code, out.str(), err.str()};
}

std::vector<std::string> lines(const std::string& text) {
  std::vector<std::string> out;
  std::istringstream in(text);
  for (std::string line; std::getline(in, line);) out.push_back(line);
  return out;
}

std::vector<std::string> fields_of(const std::string& row) {
  std::vector<std::string> out;
  std::istringstream in(row);
  for (std::string f; std::getline(in, f, ',');) out.push_back(f);
  if (!row.empty() && row.back() == ',') out.emplace_back();
  return out;
}

std::string join_labels(const std::vector<std::string>& labels) {
  std::string s;
  for (const auto& l : labels) s += (s.empty() ? "" : ",") + l;
  return s;
}

class CliTest : public ::testing::Test {
 protected:
  void SetUp() override {
    synthetic::ClusterSpec spec;
    spec.classes = 5;
    spec.dimension = 16;
    spec.support_per_class = 20;
    spec.test_per_class = 20;
    spec.spread = 1.2;
    spec.seed = 17;
    std::tie(support_, test_) = synthetic::gaussian_clusters(spec);
    write_segment_file(path("support.embv"), 16, support_.records);
    write_segment_file(path("test.embv"), 16, test_.records);
  }
  std::string path(const std::string& name) const { return (dir_.path() / name).string(); }
  CliRun ingest_support() {
    return cli({"ingest", path("support.embv"), "--collection", path("store"), "--labels",
                join_labels(support_.labels)});
  }

  testing::TempDir dir_;
  LabeledSet support_;
  LabeledSet test_;
};

TEST_F(CliTest, IngestCreatesThenAppends) {
  auto r = ingest_support();
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(load(path("store")).size(), 100u);

  std::vector<EmbeddingRecord> extra{{1000, 2, std::vector<float>(16, 1.0f), "extra"}};
  write_segment_file(path("extra.embv"), 16, extra);
  r = cli({"ingest", path("extra.embv"), "--collection", path("store")});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(load(path("store")).size(), 101u);

  // Same ids again: the whole batch is refused and the store is untouched.
  r = cli({"ingest", path("extra.embv"), "--collection", path("store")});
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.err.find("DUPLICATE_ID"), std::string::npos);
  EXPECT_EQ(load(path("store")).size(), 101u);
}

TEST_F(CliTest, IngestEmptySegment) {
  write_segment_file(path("empty.embv"), 16, {});
  const auto r = cli({"ingest", path("empty.embv"), "--collection", path("e"), "--labels", "a"});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(load(path("e")).size(), 0u);
}

TEST_F(CliTest, IngestReportsBadMagicAtOffsetZero) {
  std::ofstream(path("bad.embv"), std::ios::binary) << "EMBX\x01garbage-garbage-garbage";
  const auto r = cli({"ingest", path("bad.embv"), "--collection", path("s"), "--labels", "a"});
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.err.find("FORMAT_ERROR at offset 0"), std::string::npos) << r.err;
  EXPECT_FALSE(std::filesystem::exists(path("s") + "/manifest.json"));
}

TEST_F(CliTest, ClassifyMatchesHarnessAccuracy) {
  ASSERT_EQ(ingest_support().code, 0);
  const auto r = cli({"classify", "--collection", path("store"), "--queries", path("test.embv"),
                      "--output", path("pred.csv")});
  ASSERT_EQ(r.code, 0) << r.err;
  std::ifstream in(path("pred.csv"));
  std::stringstream text;
  text << in.rdbuf();
  const auto rows = lines(text.str());
  ASSERT_EQ(rows.size(), 101u);
  EXPECT_EQ(rows[0], "query_id,true_label,predicted_label,correct,votes,neighbor_ids,"
                     "neighbor_similarities");
  std::size_t correct = 0;
  for (std::size_t i = 1; i < rows.size(); ++i) {
    const auto fields = fields_of(rows[i]);
    ASSERT_EQ(fields.size(), 7u) << rows[i];
    correct += fields[3] == "1";
  }
  const double want = evaluate_accuracy(support_, test_);
  EXPECT_EQ(static_cast<double>(correct) / 100.0, want);
}

TEST_F(CliTest, ClassifyRejectsWrongDimension) {
  ASSERT_EQ(ingest_support().code, 0);
  std::vector<EmbeddingRecord> q{{1, 0, {1, 2, 3}, ""}};
  write_segment_file(path("q3.embv"), 3, q);
  const auto r = cli({"classify", "--collection", path("store"), "--queries", path("q3.embv")});
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.err.find("DIMENSION_MISMATCH"), std::string::npos);
}

TEST_F(CliTest, EraseByIdIsIdempotent) {
  ASSERT_EQ(ingest_support().code, 0);
  auto r = cli({"erase", "--collection", path("store"), "--id", "3"});
  EXPECT_EQ(r.code, 0);
  EXPECT_EQ(r.out.rfind("erased 1 ", 0), 0u) << r.out;
  r = cli({"erase", "--collection", path("store"), "--id", "3"});
  EXPECT_EQ(r.out.rfind("erased 0 ", 0), 0u) << r.out;
  EXPECT_FALSE(load(path("store")).contains(3));

  std::ofstream(path("ids.txt")) << "4 5\n6\n";
  r = cli({"erase", "--collection", path("store"), "--ids", path("ids.txt")});
  EXPECT_EQ(r.out.rfind("erased 3 ", 0), 0u) << r.out;
}

TEST_F(CliTest, EraseByLabelRemovesClassFromPredictions) {
  ASSERT_EQ(ingest_support().code, 0);
  auto r = cli({"erase", "--collection", path("store"), "--where", "label=class_2"});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(r.out.rfind("erased 20 ", 0), 0u) << r.out;
  r = cli({"classify", "--collection", path("store"), "--queries", path("test.embv")});
  ASSERT_EQ(r.code, 0);
  const auto rows = lines(r.out);
  for (std::size_t i = 1; i < rows.size(); ++i) {
    const auto fields = fields_of(rows[i]);
    ASSERT_EQ(fields.size(), 7u);
    EXPECT_NE(fields[2], "class_2");
    EXPECT_EQ(fields[4].find("class_2="), std::string::npos);
  }
}

TEST_F(CliTest, ProtocolReportsAreReproducible) {
  ASSERT_EQ(ingest_support().code, 0);
  std::ofstream(path("ci.json")) << R"({"kind": "class-incremental", "steps": ["class_0", "class_1"]})";
  auto r = cli({"protocol", "--schedule", path("ci.json"), "--collection", path("store"),
                "--test", path("test.embv")});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(lines(r.out).size(), 3u);

  std::ofstream(path("rr.json")) << R"({"kind": "random-removal", "steps": [0, 10, 50], "seed": 3})";
  for (const char* out : {"a.csv", "b.csv"}) {
    r = cli({"protocol", "--schedule", path("rr.json"), "--collection", path("store"), "--test",
             path("test.embv"), "--output", path(out)});
    ASSERT_EQ(r.code, 0) << r.err;
  }
  EXPECT_EQ(read_file_bytes(path("a.csv")), read_file_bytes(path("b.csv")));

  std::ofstream(path("mvf.json")) << R"({"kind": "mvf-removal", "rounds": 3})";
  r = cli({"protocol", "--schedule", path("mvf.json"), "--collection", path("store"), "--test",
           path("test.embv"), "--k", "5", "--output", path("m.csv")});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto report = read_report(path("m.csv"));
  EXPECT_EQ(report.k, 5u);
  ASSERT_EQ(report.steps.size(), 4u);
  for (std::size_t i = 1; i < report.steps.size(); ++i) {
    EXPECT_LE(report.steps[i - 1].support_size - report.steps[i].support_size, 5u);
  }
  EXPECT_GE(report.steps.back().support_size, 100u - 15u);
}

TEST_F(CliTest, ProtocolMergeTakesSeveralCollections) {
  ASSERT_EQ(ingest_support().code, 0);
  ASSERT_EQ(cli({"ingest", path("support.embv"), "--collection", path("other"), "--labels",
                 join_labels(support_.labels)})
                .code,
            0);
  std::ofstream(path("merge.json")) << R"({"kind": "merge"})";
  const auto r = cli({"protocol", "--schedule", path("merge.json"), "--collection", path("store"),
                      "--test", path("test.embv"), "--collection", path("other"), "--test",
                      path("test.embv")});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto report = report_from_csv(r.out);
  ASSERT_EQ(report.steps.size(), 4u);
  EXPECT_EQ(report.steps[0].scope, "store@isolated");
  EXPECT_EQ(report.steps[3].scope, "other@merged");
}

TEST_F(CliTest, StatsAndUsageErrors) {
  ASSERT_EQ(ingest_support().code, 0);
  auto r = cli({"stats", "--collection", path("store")});
  EXPECT_EQ(r.code, 0);
  EXPECT_NE(r.out.find("\"count\": 100"), std::string::npos) << r.out;
  EXPECT_NE(cli({}).code, 0);
  EXPECT_NE(cli({"classify"}).code, 0);
  r = cli({"stats", "--collection", path("missing")});
  EXPECT_EQ(r.code, 1);
  EXPECT_EQ(r.err.rfind("error: ", 0), 0u);
}

}  // namespace
}  // namespace knnmem
