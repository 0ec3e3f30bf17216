#pragma once

#include <filesystem>
#include <memory>
#include <shared_mutex>
#include <string>

#include <nlohmann/json.hpp>

#include "knnmem/collection.hpp"
#include "knnmem/engine.hpp"
#include "knnmem/error.hpp"

namespace httplib {
class Server;
}

namespace knnmem {

// JSON shapes shared by the HTTP service and the CLI.
nlohmann::json result_to_json(const Collection& c, const ClassificationResult& r);
nlohmann::json error_to_json(const Error& e);
/// {"id", "label" | "label_id", "vector", "source_tag"?}
EmbeddingRecord record_from_json(const Collection& c, const nlohmann::json& j);
nlohmann::json stats_to_json(const Collection& c);

/// Response produced by the service's request handlers.
struct ApiResponse {
  int status = 200;
  nlohmann::json body;
};

/// Single-process HTTP front end owning one persisted store.
///
///   POST   /collections/{name}/query    {"vector": [...], "k": 10}
///   POST   /collections/{name}/records  {"records": [...]}
///   DELETE /collections/{name}/records  {"ids": [...]} or {"predicate": "label=x"}
///   GET    /collections/{name}/stats
///
/// Reads share a lock; mutations take it exclusively and are saved to disk
/// before the response is sent, so acknowledgment order is mutation order.
/// Every response body carries the generation it observed.
class Service {
 public:
  explicit Service(std::filesystem::path store_path);
  ~Service();

  Service(const Service&) = delete;
  Service& operator=(const Service&) = delete;

  ApiResponse query(const std::string& name, const std::string& body);
  ApiResponse insert(const std::string& name, const std::string& body);
  ApiResponse erase(const std::string& name, const std::string& body);
  ApiResponse stats(const std::string& name);

  /// Binds to host:port (port 0 picks a free one) and returns the port.
  int bind(const std::string& host, int port);
  /// Serves until stop(); call after bind().
  bool listen();
  void stop();

  std::uint64_t generation() const;

 private:
  template <typename Fn>
  ApiResponse guarded(const std::string& name, Fn&& fn);
  void persist();

  std::filesystem::path path_;
  Collection collection_;
  std::string name_;
  mutable std::shared_mutex mutex_;
  std::unique_ptr<httplib::Server> server_;
};

}  // namespace knnmem
