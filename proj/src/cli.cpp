#include "knnmem/cli.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <ostream>
#include <optional>
#include <sstream>

#include <CLI11.hpp>

#include "knnmem/engine.hpp"
#include "knnmem/error.hpp"
#include "knnmem/harness.hpp"
#include "knnmem/persistence.hpp"
#include "knnmem/report.hpp"
#include "knnmem/schedule.hpp"
#include "knnmem/segment.hpp"
#include "knnmem/service.hpp"

namespace knnmem {

namespace fs = std::filesystem;

namespace {

bool has_store(const fs::path& dir) { return fs::exists(dir / kManifestFileName); }

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::stringstream in(s);
  std::string part;
  while (std::getline(in, part, sep)) out.push_back(part);
  return out;
}

std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::string read_text(const fs::path& path) {
  const auto bytes = read_file_bytes(path);
  return {reinterpret_cast<const char*>(bytes.data()), bytes.size()};
}

// A labeled set from a store directory or a bare segment file. Segment
// records are taken to use `labels`.
LabeledSet load_set(const fs::path& path, const std::vector<std::string>& labels,
                    SetRole role) {
  if (fs::is_directory(path) || path.extension() == ".json") {
    auto set = to_labeled_set(load(path), role);
    if (set.labels != labels) {
      throw Error(ErrorCode::kLabelInvalid,
                  path.string() + ": label vocabulary differs from the support collection",
                  "labels");
    }
    return set;
  }
  auto seg = read_segment_file(path);
  return LabeledSet{seg.dimension, labels, std::move(seg.records), role};
}

struct Options {
  // shared
  std::string collection;
  std::size_t k = kDefaultK;
  std::size_t threads = 0;
  std::optional<std::uint64_t> seed;
  std::string output;
  // ingest
  std::vector<std::string> segments;
  std::string manifest;
  std::string name;
  std::string labels;
  // classify
  std::string queries;
  // erase
  std::string ids_file;
  std::vector<RecordId> ids;
  std::string where;
  // protocol
  std::string schedule;
  std::vector<std::string> supports;
  std::vector<std::string> tests;
  std::optional<std::size_t> protocol_k;
  // serve
  std::string bind = "127.0.0.1:8080";
};

int cmd_ingest(const Options& o, std::ostream& out) {
  std::vector<EmbeddingRecord> records;
  std::optional<std::uint32_t> dimension;
  std::vector<std::string> labels;
  std::string name = o.name;

  if (!o.manifest.empty()) {
    const Collection source = load(o.manifest);
    records = source.snapshot();
    dimension = static_cast<std::uint32_t>(source.dimension());
    labels = source.labels();
    if (name.empty()) name = source.name();
  }
  for (const auto& path : o.segments) {
    Segment seg;
    try {
      seg = read_segment_file(path);
    } catch (const Error& e) {
      throw Error(e.code(), path + ": " + e.what(), e.offending_field(), e.byte_offset());
    }
    if (dimension && *dimension != seg.dimension) {
      throw Error(ErrorCode::kDimensionMismatch,
                  path + ": dimension " + std::to_string(seg.dimension) + " differs from " +
                      std::to_string(*dimension),
                  "dimension");
    }
    dimension = seg.dimension;
    std::move(seg.records.begin(), seg.records.end(), std::back_inserter(records));
  }
  if (!o.labels.empty()) {
    const auto given = split(o.labels, ',');
    if (!labels.empty() && given != labels) {
      throw Error(ErrorCode::kLabelInvalid, "--labels disagrees with the manifest", "labels");
    }
    labels = given;
  }

  const fs::path dir = o.collection;
  std::optional<Collection> target;
  if (has_store(dir)) {
    target.emplace(load(dir));
    if (!labels.empty() && labels != target->labels()) {
      throw Error(ErrorCode::kLabelInvalid,
                  "label vocabulary differs from the existing collection", "labels");
    }
  } else {
    if (!dimension) {
      throw Error(ErrorCode::kInvalidArgument, "nothing to ingest: give segments or --manifest",
                  "segments");
    }
    if (labels.empty()) {
      throw Error(ErrorCode::kLabelInvalid, "new collection needs --labels", "labels");
    }
    if (name.empty()) name = dir.filename().string();
    target.emplace(name, *dimension, labels);
  }
  const auto inserted = target->insert(records);
  save(*target, dir);
  out << "ingested " << inserted << " records into '" << target->name() << "' ("
      << target->size() << " live, generation " << target->generation() << ")\n";
  return 0;
}

int cmd_classify(const Options& o, std::ostream& out, std::ostream& err) {
  const Collection c = load(o.collection);
  const auto seg = read_segment_file(o.queries);
  std::vector<std::span<const float>> queries;
  for (const auto& r : seg.records) queries.emplace_back(r.vector);
  const auto outcomes = classify_batch(c, queries, EngineConfig{o.k, o.threads});

  std::ostringstream csv;
  csv << "query_id,true_label,predicted_label,correct,votes,neighbor_ids,"
         "neighbor_similarities\n";
  std::size_t correct = 0;
  std::size_t judged = 0;
  for (std::size_t i = 0; i < seg.records.size(); ++i) {
    if (const auto* e = std::get_if<Error>(&outcomes[i])) {
      throw Error(e->code(), "query " + std::to_string(seg.records[i].id) + ": " + e->what(),
                  e->offending_field());
    }
    const auto& r = std::get<ClassificationResult>(outcomes[i]);
    const auto& q = seg.records[i];
    const bool has_truth = q.label_id < c.labels().size();
    const bool hit = has_truth && q.label_id == r.predicted_label_id;
    judged += has_truth;
    correct += hit;

    std::string votes;
    for (std::size_t l = 0; l < r.votes.size(); ++l) {
      if (r.votes[l] == 0) continue;
      if (!votes.empty()) votes += ';';
      votes += c.labels()[l] + "=" + std::to_string(r.votes[l]);
    }
    std::string ids;
    std::string sims;
    for (const auto& n : r.neighbors) {
      if (!ids.empty()) {
        ids += ';';
        sims += ';';
      }
      ids += std::to_string(n.record_id);
      sims += format_double(n.similarity);
    }
    csv << q.id << "," << (has_truth ? c.labels()[q.label_id] : "") << ","
        << c.labels()[r.predicted_label_id] << "," << (has_truth ? (hit ? "1" : "0") : "")
        << "," << votes << "," << ids << "," << sims << "\n";
  }
  const auto text = csv.str();
  if (o.output.empty() || o.output == "-") {
    out << text;
  } else {
    write_file_atomic(o.output, std::as_bytes(std::span(text.data(), text.size())));
  }
  err << "classified " << seg.records.size() << " queries";
  if (judged > 0) {
    err << "; accuracy " << correct << "/" << judged << " = "
        << format_double(static_cast<double>(correct) / static_cast<double>(judged));
  }
  err << "\n";
  return 0;
}

int cmd_erase(const Options& o, std::ostream& out) {
  Collection c = load(o.collection);
  std::vector<RecordId> ids = o.ids;
  if (!o.ids_file.empty()) {
    std::istringstream in(read_text(o.ids_file));
    std::string token;
    while (in >> token) {
      try {
        std::size_t used = 0;
        ids.push_back(std::stoull(token, &used));
        if (used != token.size()) throw std::invalid_argument(token);
      } catch (const std::exception&) {
        throw Error(ErrorCode::kInvalidArgument, "bad id '" + token + "' in " + o.ids_file,
                    "ids");
      }
    }
  }
  if (!o.where.empty()) {
    const auto matched = select_ids(c, o.where);
    ids.insert(ids.end(), matched.begin(), matched.end());
  }
  const auto result = c.erase(ids);
  if (result.deleted > 0) save(c, o.collection);
  out << "erased " << result.deleted << " (" << c.size() << " live, generation "
      << c.generation() << ")\n";
  return 0;
}

int cmd_stats(const Options& o, std::ostream& out) {
  const Collection c = load(o.collection);
  out << stats_to_json(c).dump(2) << "\n";
  return 0;
}

int cmd_protocol(const Options& o, std::ostream& out) {
  auto schedule = parse_schedule(read_text(o.schedule));
  if (o.seed) schedule.seed = *o.seed;
  if (o.protocol_k) schedule.k = *o.protocol_k;
  if (o.supports.size() != o.tests.size()) {
    throw Error(ErrorCode::kInvalidArgument,
                "every --collection needs a matching --test", "test");
  }
  std::vector<NamedDataset> datasets;
  for (std::size_t i = 0; i < o.supports.size(); ++i) {
    const Collection support = load(o.supports[i]);
    datasets.push_back(NamedDataset{
        support.name(), to_labeled_set(support, SetRole::kSupport),
        load_set(o.tests[i], support.labels(), SetRole::kTest)});
  }
  const auto report = run_schedule(schedule, datasets, o.threads);
  if (o.output.empty() || o.output == "-") {
    out << report_to_csv(report);
  } else {
    emit_report(report, o.output);
    out << "wrote " << report.steps.size() << " steps of " << report.protocol << " to "
        << o.output << "\n";
  }
  return 0;
}

int cmd_serve(const Options& o, std::ostream& out) {
  const auto colon = o.bind.rfind(':');
  if (colon == std::string::npos) {
    throw Error(ErrorCode::kInvalidArgument, "--bind expects host:port", "bind");
  }
  const auto host = o.bind.substr(0, colon);
  const int port = std::stoi(o.bind.substr(colon + 1));
  Service service(o.collection);
  const int bound = service.bind(host, port);
  if (bound <= 0) {
    throw Error(ErrorCode::kIoError, "cannot bind " + o.bind, "bind");
  }
  out << "serving on " << host << ":" << bound << std::endl;
  return service.listen() ? 0 : 1;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"knnmem: kNN classification over a mutable embedding store", "knnmem"};
  app.require_subcommand(1);
  Options o;

  auto* ingest = app.add_subcommand("ingest", "Add EMBV1 segments to a collection on disk");
  ingest->add_option("segments", o.segments, "EMBV1 segment files");
  ingest->add_option("--manifest", o.manifest, "Manifest (plus its segments) to ingest");
  ingest->add_option("--collection", o.collection, "Store directory")->required();
  ingest->add_option("--name", o.name, "Collection name for a new store");
  ingest->add_option("--labels", o.labels, "Comma-separated label vocabulary");

  auto* classify_cmd = app.add_subcommand("classify", "Classify the records of a segment");
  classify_cmd->add_option("--collection", o.collection, "Store directory")->required();
  classify_cmd->add_option("--queries", o.queries, "EMBV1 segment of queries")->required();
  classify_cmd->add_option("--k", o.k, "Neighbors per vote")->capture_default_str()
      ->check(CLI::PositiveNumber);
  classify_cmd->add_option("--output", o.output, "CSV output (default stdout)");
  classify_cmd->add_option("--threads", o.threads, "Worker threads (0 = all cores)");

  auto* erase_cmd = app.add_subcommand("erase", "Delete records and persist the store");
  erase_cmd->add_option("--collection", o.collection, "Store directory")->required();
  erase_cmd->add_option("--ids", o.ids_file, "File of whitespace-separated ids");
  erase_cmd->add_option("--id", o.ids, "Id to delete (repeatable)");
  erase_cmd->add_option("--where", o.where, "Predicate label=<name> or source_tag=<tag>");

  auto* protocol = app.add_subcommand("protocol", "Run an evaluation schedule");
  protocol->add_option("--schedule", o.schedule, "Schedule JSON")->required();
  protocol->add_option("--collection", o.supports, "Support store (repeatable)")->required();
  protocol->add_option("--test", o.tests, "Test store or segment (one per --collection)")
      ->required();
  protocol->add_option("--output", o.output, "Report CSV (default stdout)");
  protocol->add_option("--k", o.protocol_k, "Override the schedule k (default 10)")
      ->check(CLI::PositiveNumber);
  protocol->add_option("--seed", o.seed, "Override the schedule seed");
  protocol->add_option("--threads", o.threads, "Worker threads (0 = all cores)");

  auto* serve = app.add_subcommand("serve", "Serve the HTTP API over one store");
  serve->add_option("--collection", o.collection, "Store directory")->required();
  serve->add_option("--bind", o.bind, "host:port")->capture_default_str();

  auto* stats = app.add_subcommand("stats", "Print collection statistics as JSON");
  stats->add_option("--collection", o.collection, "Store directory")->required();

  std::vector<std::string> argv_storage{"knnmem"};
  argv_storage.insert(argv_storage.end(), args.begin(), args.end());
  std::vector<const char*> argv;
  for (const auto& a : argv_storage) argv.push_back(a.c_str());

  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    return app.exit(e, out, err);
  }

  try {
    if (*ingest) return cmd_ingest(o, out);
    if (*classify_cmd) return cmd_classify(o, out, err);
    if (*erase_cmd) return cmd_erase(o, out);
    if (*protocol) return cmd_protocol(o, out);
    if (*serve) return cmd_serve(o, out);
    if (*stats) return cmd_stats(o, out);
  } catch (const Error& e) {
    err << "error: " << to_string(e.code());
    if (e.byte_offset()) err << " at offset " << *e.byte_offset();
    err << ": " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  }
  return 2;
}

}  // namespace knnmem
