#include "knnmem/service.hpp"

#include <mutex>

#include <httplib.h>

#include "knnmem/persistence.hpp"

namespace knnmem {

using nlohmann::json;

namespace {

std::vector<float> vector_from_json(const json& j) {
  if (!j.is_array()) {
    throw Error(ErrorCode::kInvalidArgument, "vector must be an array of numbers", "vector");
  }
  std::vector<float> v;
  v.reserve(j.size());
  for (const auto& x : j) {
    if (!x.is_number()) {
      throw Error(ErrorCode::kInvalidArgument, "vector must be an array of numbers",
                  "vector");
    }
    v.push_back(static_cast<float>(x.get<double>()));
  }
  return v;
}

json parse_body(const std::string& body) {
  try {
    auto j = json::parse(body);
    if (!j.is_object()) {
      throw Error(ErrorCode::kInvalidArgument, "request body must be a JSON object", "body");
    }
    return j;
  } catch (const json::parse_error& e) {
    throw Error(ErrorCode::kInvalidArgument, std::string("malformed JSON: ") + e.what(),
                "body");
  }
}

int status_for(ErrorCode code) {
  switch (code) {
    case ErrorCode::kNotFound: return 404;
    case ErrorCode::kIoError: return 500;
    default: return 400;
  }
}

}  // namespace

json result_to_json(const Collection& c, const ClassificationResult& r) {
  json neighbors = json::array();
  for (const auto& n : r.neighbors) {
    neighbors.push_back({{"record_id", n.record_id},
                         {"label_id", n.label_id},
                         {"label", c.labels()[n.label_id]},
                         {"similarity", n.similarity}});
  }
  return {{"predicted_label_id", r.predicted_label_id},
          {"predicted_label", c.labels()[r.predicted_label_id]},
          {"neighbors", neighbors},
          {"votes", r.votes},
          {"summed_similarity", r.summed_similarity}};
}

json error_to_json(const Error& e) {
  return {{"code", std::string(to_string(e.code()))},
          {"message", e.what()},
          {"offending_field", e.offending_field()}};
}

EmbeddingRecord record_from_json(const Collection& c, const json& j) {
  if (!j.is_object()) {
    throw Error(ErrorCode::kInvalidArgument, "record must be an object", "records");
  }
  EmbeddingRecord r;
  if (!j.contains("id") || !j["id"].is_number_unsigned()) {
    throw Error(ErrorCode::kInvalidArgument, "record id must be an unsigned integer", "id");
  }
  r.id = j["id"].get<RecordId>();
  if (j.contains("label") && j["label"].is_string()) {
    r.label_id = c.label_id(j["label"].get<std::string>());
  } else if (j.contains("label_id") && j["label_id"].is_number_unsigned()) {
    r.label_id = j["label_id"].get<LabelId>();
  } else {
    throw Error(ErrorCode::kLabelInvalid, "record needs a label or label_id", "label");
  }
  if (!j.contains("vector")) {
    throw Error(ErrorCode::kInvalidArgument, "record needs a vector", "vector");
  }
  r.vector = vector_from_json(j["vector"]);
  r.source_tag = j.value("source_tag", std::string{});
  return r;
}

json stats_to_json(const Collection& c) {
  return {{"name", c.name()},
          {"count", c.size()},
          {"dimension", c.dimension()},
          {"labels", c.labels()},
          {"generation", c.generation()}};
}

Service::Service(std::filesystem::path store_path)
    : path_(std::move(store_path)), collection_(load(path_)), name_(collection_.name()) {}

Service::~Service() { stop(); }

std::uint64_t Service::generation() const {
  std::shared_lock lock(mutex_);
  return collection_.generation();
}

template <typename Fn>
ApiResponse Service::guarded(const std::string& name, Fn&& fn) {
  try {
    if (name != name_) {
      throw Error(ErrorCode::kNotFound, "no collection named '" + name + "'", "name");
    }
    return fn();
  } catch (const Error& e) {
    return ApiResponse{status_for(e.code()), error_to_json(e)};
  } catch (const json::exception& e) {
    return ApiResponse{400, error_to_json(Error(ErrorCode::kInvalidArgument, e.what(), "body"))};
  }
}

void Service::persist() {
  try {
    save(collection_, path_);
  } catch (...) {
    // Keep memory and disk in agreement: the mutation was not acknowledged.
    collection_ = load(path_);
    throw;
  }
}

ApiResponse Service::query(const std::string& name, const std::string& body) {
  return guarded(name, [&] {
    const auto j = parse_body(body);
    if (!j.contains("vector")) {
      throw Error(ErrorCode::kInvalidArgument, "query needs a vector", "vector");
    }
    const auto vector = vector_from_json(j["vector"]);
    EngineConfig cfg;
    if (j.contains("k")) {
      if (!j["k"].is_number_unsigned() || j["k"].get<std::size_t>() == 0) {
        throw Error(ErrorCode::kInvalidArgument, "k must be a positive integer", "k");
      }
      cfg.k = j["k"].get<std::size_t>();
    }
    std::shared_lock lock(mutex_);
    auto out = result_to_json(collection_, classify(collection_, vector, cfg));
    out["generation"] = collection_.generation();
    return ApiResponse{200, std::move(out)};
  });
}

ApiResponse Service::insert(const std::string& name, const std::string& body) {
  return guarded(name, [&] {
    const auto j = parse_body(body);
    if (!j.contains("records") || !j["records"].is_array()) {
      throw Error(ErrorCode::kInvalidArgument, "body needs a records array", "records");
    }
    std::unique_lock lock(mutex_);
    std::vector<EmbeddingRecord> records;
    for (const auto& r : j["records"]) records.push_back(record_from_json(collection_, r));
    const auto inserted = collection_.insert(records);
    if (inserted > 0) persist();
    return ApiResponse{200, {{"inserted", inserted}, {"generation", collection_.generation()}}};
  });
}

ApiResponse Service::erase(const std::string& name, const std::string& body) {
  return guarded(name, [&] {
    const auto j = parse_body(body);
    std::unique_lock lock(mutex_);
    std::vector<RecordId> ids;
    if (j.contains("ids")) {
      if (!j["ids"].is_array()) {
        throw Error(ErrorCode::kInvalidArgument, "ids must be an array", "ids");
      }
      for (const auto& id : j["ids"]) {
        if (!id.is_number_unsigned()) {
          throw Error(ErrorCode::kInvalidArgument, "ids must be unsigned integers", "ids");
        }
        ids.push_back(id.get<RecordId>());
      }
    } else if (j.contains("predicate") && j["predicate"].is_string()) {
      ids = select_ids(collection_, j["predicate"].get<std::string>());
    } else {
      throw Error(ErrorCode::kInvalidArgument, "body needs ids or predicate", "ids");
    }
    const auto result = collection_.erase(ids);
    if (result.deleted > 0) persist();
    return ApiResponse{200,
                       {{"deleted", result.deleted},
                        {"not_live", result.not_live},
                        {"generation", collection_.generation()}}};
  });
}

ApiResponse Service::stats(const std::string& name) {
  return guarded(name, [&] {
    std::shared_lock lock(mutex_);
    return ApiResponse{200, stats_to_json(collection_)};
  });
}

int Service::bind(const std::string& host, int port) {
  server_ = std::make_unique<httplib::Server>();
  auto reply = [](httplib::Response& res, const ApiResponse& r) {
    res.status = r.status;
    res.set_content(r.body.dump(), "application/json");
  };
  server_->Post(R"(/collections/([^/]+)/query)",
                [this, reply](const httplib::Request& req, httplib::Response& res) {
                  reply(res, query(req.matches[1], req.body));
                });
  server_->Post(R"(/collections/([^/]+)/records)",
                [this, reply](const httplib::Request& req, httplib::Response& res) {
                  reply(res, insert(req.matches[1], req.body));
                });
  server_->Delete(R"(/collections/([^/]+)/records)",
                  [this, reply](const httplib::Request& req, httplib::Response& res) {
                    reply(res, erase(req.matches[1], req.body));
                  });
  server_->Get(R"(/collections/([^/]+)/stats)",
               [this, reply](const httplib::Request& req, httplib::Response& res) {
                 reply(res, stats(req.matches[1]));
               });

  if (port == 0) return server_->bind_to_any_port(host);
  if (!server_->bind_to_port(host, port)) {
    throw Error(ErrorCode::kIoError, "cannot bind " + host + ":" + std::to_string(port),
                "bind");
  }
  return port;
}

bool Service::listen() {
  if (!server_) {
    throw Error(ErrorCode::kInvalidArgument, "bind() must precede listen()", "bind");
  }
  return server_->listen_after_bind();
}

void Service::stop() {
  if (server_) server_->stop();
}

}  // namespace knnmem
