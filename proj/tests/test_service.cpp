#include "ccgp/service.hpp"

#include <doctest.h>
#include <httplib.h>

#include <filesystem>
#include <thread>

using namespace ccgp;
using json = nlohmann::json;
namespace fs = std::filesystem;

namespace {

// Six records in a 3 x 1 strip of 100 m cells, three clusters.
struct Fixture {
  fs::path dir = fs::temp_directory_path() / "ccgp_test_service";
  ServiceOptions options;

  Fixture() {
    fs::remove_all(dir);
    fs::create_directories(dir / "images");
    std::vector<GeoImageRecord> recs;
    AssignmentTable t;
    t.probs.resize(6, 3);
    for (int i = 0; i < 6; ++i) {
      GeoImageRecord r;
      r.id = "img" + std::to_string(i);
      r.image_path = "images/" + r.id + ".png";
      r.proj = {950000.0 + 50.0 * i + 10.0, 6000000.0 + 10.0};
      r.geo = unproject(r.proj);
      r.proj = project(r.geo);
      write_png(dir / r.image_path, render_image(i % 3, 3, static_cast<std::uint64_t>(i), 0.0, 16).image);
      recs.push_back(r);
      t.ids.push_back(r.id);
      t.points.push_back(r.proj);
      const int c = i / 2;
      for (int k = 0; k < 3; ++k) t.probs(i, k) = k == c ? 0.6 + 0.05 * i : (0.4 - 0.05 * i) / 2.0;
      t.clusters.push_back(c);
    }
    write_manifest(dir / "manifest.jsonl", recs);
    save_assignments(dir / "assign.jsonl", t);
    options = {dir / "assign.jsonl", dir / "manifest.jsonl", dir / "work", "ckpt-A", 100.0, 12};
  }
};

}  // namespace

TEST_SUITE("service") {

TEST_CASE("routes") {
  Fixture f;
  Service s(f.options);

  SUBCASE("clusters") {
    const auto r = s.handle("GET", "/api/clusters");
    CHECK(r.status == 200);
    const auto doc = json::parse(r.body);
    REQUIRE(doc.size() == 3);
    CHECK(doc[0]["cluster_id"] == 0);
    CHECK(doc[0]["size"] == 2);
    CHECK(doc[2]["top_confidence"].get<double>() == doctest::Approx(0.85));
  }
  SUBCASE("representatives are ranked and truncated") {
    const auto r = s.handle("GET", "/api/representatives/1", {{"n", "1"}});
    CHECK(r.status == 200);
    const auto doc = json::parse(r.body);
    REQUIRE(doc.size() == 1);
    CHECK(doc[0]["record_id"] == "img3");
    CHECK(doc[0]["image_url"] == "/api/images/img3");
    const auto all = json::parse(s.handle("GET", "/api/representatives/1").body);
    CHECK(all.size() == 6);
    for (std::size_t i = 1; i < all.size(); ++i) CHECK(all[i - 1]["confidence"] >= all[i]["confidence"]);
    CHECK(s.handle("GET", "/api/representatives/9").status == 404);
    CHECK(s.handle("GET", "/api/representatives/x").status == 404);
    CHECK(s.handle("GET", "/api/representatives/0", {{"n", "0"}}).status == 400);
  }
  SUBCASE("images") {
    const auto r = s.handle("GET", "/api/images/img2");
    CHECK(r.status == 200);
    CHECK(r.content_type == "image/png");
    CHECK(decode_png(std::vector<std::uint8_t>(r.body.begin(), r.body.end())).width == 16);
    CHECK(s.handle("GET", "/api/images/nope").status == 404);
  }
  SUBCASE("status and default map") {
    const auto st = json::parse(s.handle("GET", "/api/status").body);
    CHECK(st["checkpoint"] == "ckpt-A");
    CHECK(st["M"] == 3);
    CHECK(st["labelmap_version"] == 0);
    const auto geo = json::parse(s.handle("GET", "/api/map.geojson").body);
    CHECK(geo["features"].size() == 3);
  }
  SUBCASE("posting a label map") {
    const std::string body = R"({"assignments": {"0": "built", "1": "built", "2": "green"}})";
    const auto r = s.handle("POST", "/api/labelmap", {}, body);
    CHECK(r.status == 204);
    CHECK(r.body.empty());
    CHECK(json::parse(s.handle("GET", "/api/status").body)["labelmap_version"] == 1);
    const auto geo = json::parse(s.handle("GET", "/api/map.geojson").body);
    std::set<std::string> cats;
    for (const auto& feat : geo["features"]) cats.insert(feat["properties"]["category"]);
    CHECK(cats == std::set<std::string>{"built", "green"});
    // Persisted, and the file on disk is what GET serves.
    CHECK(fs::exists(f.dir / "work" / "labelmap.json"));
    std::ifstream in(f.dir / "work" / "map.geojson");
    CHECK(json::parse(in) == geo);
    // A fresh service picks the stored map up.
    Service again(f.options);
    CHECK(json::parse(again.handle("GET", "/api/map.geojson").body) == geo);
  }
  SUBCASE("invalid label maps are rejected and change nothing") {
    const auto before = s.handle("GET", "/api/map.geojson").body;
    CHECK(s.handle("POST", "/api/labelmap", {}, "not json").status == 400);
    CHECK(s.handle("POST", "/api/labelmap", {}, R"({"assignments": {"0": "a", "1": "a"}})").status == 400);
    CHECK(s.handle("POST", "/api/labelmap", {}, R"({"assignments": {"0": "a", "1": "a", "2": "a", "3": "b"}})").status ==
          400);
    CHECK(s.handle("GET", "/api/map.geojson").body == before);
    CHECK(s.labelmap_version() == 0);
  }
  SUBCASE("unknown routes") {
    CHECK(s.handle("GET", "/api/nothing").status == 404);
    CHECK(s.handle("DELETE", "/api/clusters").status == 404);
  }
}

TEST_CASE("over HTTP with concurrent readers and a writer") {
  Fixture f;
  Service s(f.options);
  std::thread server([&] { s.listen("127.0.0.1", 0); });
  for (int i = 0; i < 500 && s.bound_port() == 0; ++i) std::this_thread::sleep_for(std::chrono::milliseconds(10));
  REQUIRE(s.bound_port() != 0);
  const int port = s.bound_port();

  std::atomic<int> failures{0};
  std::vector<std::thread> readers;
  for (int t = 0; t < 4; ++t)
    readers.emplace_back([&] {
      httplib::Client c("127.0.0.1", port);
      for (int i = 0; i < 20; ++i) {
        auto r = c.Get("/api/map.geojson");
        if (!r || r->status != 200) {
          ++failures;
          continue;
        }
        // Every response is one whole version: all cells agree on the naming scheme.
        const auto doc = json::parse(r->body);
        std::set<bool> merged;
        for (const auto& feat : doc["features"])
          merged.insert(feat["properties"]["category"].get<std::string>().rfind("cluster_", 0) != 0);
        if (merged.size() > 1) ++failures;
      }
    });
  {
    httplib::Client c("127.0.0.1", port);
    for (int i = 0; i < 5; ++i) {
      auto r = c.Post("/api/labelmap", R"({"assignments": {"0": "x", "1": "y", "2": "y"}})", "application/json");
      REQUIRE(r);
      CHECK(r->status == 204);
    }
    auto img = c.Get("/api/images/img0");
    REQUIRE(img);
    CHECK(img->get_header_value("Content-Type") == "image/png");
  }
  for (auto& r : readers) r.join();
  CHECK(failures == 0);
  CHECK(s.labelmap_version() == 5);
  s.stop();
  server.join();
}

}  // TEST_SUITE
