#pragma once

#include "ccgp/dataset.hpp"
#include "ccgp/pcva.hpp"

#include <atomic>
#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <string>

namespace ccgp {

struct ServiceOptions {
  std::filesystem::path assignments;  // JSONL from `predict`
  std::filesystem::path manifest;     // for image bytes
  std::filesystem::path workdir;      // labelmap.json and map.geojson are written here
  std::string checkpoint;             // echoed by /api/status
  double cell_size = 100.0;
  int default_top_n = 12;
};

struct HttpResponse {
  int status = 200;
  std::string content_type = "application/json; charset=utf-8";
  std::string body;
};

/// Backs the labeling UI. The routing lives in `handle` so tests can drive it
/// without a socket; `listen` wraps it in an HTTP server.
///
/// POST /api/labelmap builds the new map and grid off to the side, persists
/// them, then swaps them in under an exclusive lock, so readers always see one
/// consistent version.
class Service {
 public:
  explicit Service(ServiceOptions options);

  HttpResponse handle(const std::string& method, const std::string& path,
                      const std::multimap<std::string, std::string>& query = {}, const std::string& body = {});

  /// Blocks until `stop` is called from another thread.
  bool listen(const std::string& host, int port);
  void stop();
  int bound_port() const { return port_.load(); }

  std::uint64_t labelmap_version() const;

 private:
  struct State {
    LabelMap map;
    std::string geojson;
    std::uint64_t version = 0;
  };

  HttpResponse clusters() const;
  HttpResponse representatives(int cluster, int n) const;
  HttpResponse image(const std::string& record_id) const;
  HttpResponse map_geojson() const;
  HttpResponse status() const;
  HttpResponse post_labelmap(const std::string& body);

  std::shared_ptr<const State> build_state(LabelMap map, std::uint64_t version) const;
  std::shared_ptr<const State> current() const;

  ServiceOptions options_;
  AssignmentTable table_;
  GridSpec grid_;
  std::map<std::string, std::filesystem::path> image_paths_;
  std::map<std::string, std::size_t> row_of_;

  mutable std::shared_mutex mutex_;
  std::mutex write_mutex_;
  std::shared_ptr<const State> state_;

  struct Server;
  std::shared_ptr<Server> server_;
  std::atomic<int> port_{0};
};

}  // namespace ccgp
