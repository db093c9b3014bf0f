#include "ccgp/service.hpp"

#include "ccgp/diagnostics.hpp"

#include <httplib.h>

#include <fstream>
#include <regex>
#include <stdexcept>

namespace ccgp {

using json = nlohmann::json;

namespace {

HttpResponse json_response(const json& doc, int status = 200) { return {status, "application/json; charset=utf-8", doc.dump()}; }

HttpResponse error_response(int status, const std::string& message) {
  return json_response(json{{"error", message}}, status);
}

// Writes next to the target and renames, so a crash never leaves a torn file.
void write_atomically(const std::filesystem::path& path, const std::string& contents) {
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + tmp.string());
    out << contents;
    if (!out) throw std::runtime_error("short write to " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

std::optional<int> parse_int(const std::string& text) {
  try {
    std::size_t used = 0;
    const int v = std::stoi(text, &used);
    if (used == text.size()) return v;
  } catch (const std::exception&) {
  }
  return std::nullopt;
}

}  // namespace

struct Service::Server {
  httplib::Server http;
};

Service::Service(ServiceOptions options) : options_(std::move(options)) {
  table_ = load_assignments(options_.assignments);
  if (table_.ids.empty()) throw std::runtime_error("service: assignment table is empty");
  for (std::size_t i = 0; i < table_.ids.size(); ++i) row_of_.emplace(table_.ids[i], i);
  grid_ = GridSpec::covering(table_.points, options_.cell_size);

  if (!options_.manifest.empty()) {
    const auto base = options_.manifest.parent_path();
    for (const auto& r : load_manifest(options_.manifest)) image_paths_.emplace(r.id, base / r.image_path);
  }

  std::filesystem::create_directories(options_.workdir);
  const auto stored = options_.workdir / "labelmap.json";
  LabelMap initial = LabelMap::identity(table_.cluster_count());
  std::uint64_t version = 0;
  if (std::filesystem::exists(stored)) {
    try {
      LabelMap loaded = LabelMap::load(stored);
      loaded.require_total(table_.cluster_count());
      initial = std::move(loaded);
      version = 1;
    } catch (const std::exception& e) {
      warn(std::string("service: ignoring stored label map: ") + e.what());
    }
  }
  state_ = build_state(std::move(initial), version);
  write_atomically(options_.workdir / "map.geojson", state_->geojson);
}

std::shared_ptr<const Service::State> Service::build_state(LabelMap map, std::uint64_t version) const {
  map.require_total(table_.cluster_count());
  auto s = std::make_shared<State>();
  const GridMap grid = grid_map(table_.points, apply_label_map(table_.probs, map), grid_);
  s->geojson = export_geojson(grid, map).dump();
  s->map = std::move(map);
  s->version = version;
  return s;
}

std::shared_ptr<const Service::State> Service::current() const {
  std::shared_lock lock(mutex_);
  return state_;
}

std::uint64_t Service::labelmap_version() const { return current()->version; }

HttpResponse Service::handle(const std::string& method, const std::string& path,
                             const std::multimap<std::string, std::string>& query, const std::string& body) {
  static const std::regex kReps(R"(/api/representatives/([^/]+))");
  static const std::regex kImage(R"(/api/images/([^/]+))");
  std::smatch m;
  try {
    if (method == "GET") {
      if (path == "/api/clusters") return clusters();
      if (path == "/api/map.geojson") return map_geojson();
      if (path == "/api/status") return status();
      if (std::regex_match(path, m, kReps)) {
        const auto cluster = parse_int(m[1].str());
        if (!cluster || *cluster < 0 || *cluster >= table_.cluster_count())
          return error_response(404, "unknown cluster '" + m[1].str() + "'");
        int n = options_.default_top_n;
        if (const auto it = query.find("n"); it != query.end()) {
          const auto parsed = parse_int(it->second);
          if (!parsed || *parsed < 1) return error_response(400, "n must be a positive integer");
          n = *parsed;
        }
        return representatives(*cluster, n);
      }
      if (std::regex_match(path, m, kImage)) return image(m[1].str());
    } else if (method == "POST") {
      if (path == "/api/labelmap") return post_labelmap(body);
    }
    return error_response(404, "no route for " + method + " " + path);
  } catch (const std::exception& e) {
    return error_response(500, e.what());
  }
}

HttpResponse Service::clusters() const {
  json out = json::array();
  std::vector<int> size(static_cast<std::size_t>(table_.cluster_count()), 0);
  for (int c : table_.clusters) ++size[static_cast<std::size_t>(c)];
  for (int c = 0; c < table_.cluster_count(); ++c)
    out.push_back({{"cluster_id", c},
                   {"size", size[static_cast<std::size_t>(c)]},
                   {"top_confidence", table_.probs.col(c).maxCoeff()}});
  return json_response(out);
}

HttpResponse Service::representatives(int cluster, int n) const {
  const auto reps = ccgp::representatives(table_.probs, table_.ids, n);
  json out = json::array();
  for (const auto& r : reps[static_cast<std::size_t>(cluster)]) {
    const auto& id = table_.ids[r.record];
    out.push_back({{"record_id", id}, {"confidence", r.confidence}, {"image_url", "/api/images/" + id}});
  }
  return json_response(out);
}

HttpResponse Service::image(const std::string& record_id) const {
  const auto it = image_paths_.find(record_id);
  if (it == image_paths_.end()) return error_response(404, "unknown record '" + record_id + "'");
  const auto bytes = read_file_bytes(it->second);
  return {200, "image/png", std::string(bytes.begin(), bytes.end())};
}

HttpResponse Service::map_geojson() const { return {200, "application/geo+json; charset=utf-8", current()->geojson}; }

HttpResponse Service::status() const {
  const auto s = current();
  return json_response({{"checkpoint", options_.checkpoint},
                        {"M", table_.cluster_count()},
                        {"labelmap_version", s->version},
                        {"records", table_.ids.size()},
                        {"categories", s->map.categories()}});
}

HttpResponse Service::post_labelmap(const std::string& body) {
  LabelMap map;
  try {
    map = LabelMap::from_json(json::parse(body));
    map.require_total(table_.cluster_count());
  } catch (const std::exception& e) {
    return error_response(400, e.what());
  }
  // Serialize writers; readers keep the old state until the swap.
  std::lock_guard writer(write_mutex_);
  auto next = build_state(std::move(map), current()->version + 1);
  write_atomically(options_.workdir / "labelmap.json", next->map.to_json().dump(2) + "\n");
  write_atomically(options_.workdir / "map.geojson", next->geojson);
  {
    std::unique_lock lock(mutex_);
    state_ = std::move(next);
  }
  return {204, "", ""};
}

bool Service::listen(const std::string& host, int port) {
  server_ = std::make_shared<Server>();
  auto& http = server_->http;
  auto dispatch = [this](const httplib::Request& req, httplib::Response& res) {
    std::multimap<std::string, std::string> query(req.params.begin(), req.params.end());
    const HttpResponse r = handle(req.method, req.path, query, req.body);
    res.status = r.status;
    if (!r.body.empty() || !r.content_type.empty()) res.set_content(r.body, r.content_type);
  };
  http.Get(R"(/api/.*)", dispatch);
  http.Post(R"(/api/.*)", dispatch);
  if (port == 0) {
    const int bound = http.bind_to_any_port(host);
    if (bound < 0) return false;
    port_ = bound;
  } else {
    if (!http.bind_to_port(host, port)) return false;
    port_ = port;
  }
  return http.listen_after_bind();
}

void Service::stop() {
  if (server_) server_->http.stop();
}

}  // namespace ccgp
