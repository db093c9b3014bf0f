#include "ccgp/experiment.hpp"
#include "ccgp/pcva.hpp"
#include "ccgp/rng.hpp"

#include <doctest.h>

#include <algorithm>
#include <filesystem>
#include <fstream>

using namespace ccgp;
using json = nlohmann::json;

namespace {

ProbMatrix random_probs(Rng& rng, Eigen::Index n, Eigen::Index m) {
  ProbMatrix p(n, m);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < m; ++j) p(i, j) = uniform(rng, 0.01, 1.0);
    p.row(i) /= p.row(i).sum();
  }
  return p;
}

std::vector<std::string> ids_for(std::size_t n) {
  std::vector<std::string> ids;
  for (std::size_t i = 0; i < n; ++i) ids.push_back("r" + std::to_string(1000 + i));
  return ids;
}

}  // namespace

TEST_SUITE("pcva") {

TEST_CASE("representatives") {
  SUBCASE("one-hot rows appear only under their cluster") {
    ProbMatrix p = ProbMatrix::Zero(6, 3);
    for (int i = 0; i < 6; ++i) p(i, i % 3) = 1.0;
    const auto reps = representatives(p, ids_for(6), 2);
    for (int c = 0; c < 3; ++c)
      for (const auto& r : reps[static_cast<std::size_t>(c)]) {
        CHECK(static_cast<int>(r.record) % 3 == c);
        CHECK(r.confidence == 1.0);
      }
  }
  SUBCASE("top_n beyond N returns everything") {
    auto rng = make_rng({1});
    const auto p = random_probs(rng, 5, 2);
    CHECK(representatives(p, ids_for(5), 50)[0].size() == 5);
  }
  SUBCASE("matches a full sort") {
    auto rng = make_rng({2});
    const auto p = random_probs(rng, 20, 3);
    const auto ids = ids_for(20);
    const auto reps = representatives(p, ids, 7);
    for (int c = 0; c < 3; ++c) {
      std::vector<std::size_t> order(20);
      std::iota(order.begin(), order.end(), std::size_t{0});
      std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return p(static_cast<Eigen::Index>(a), c) > p(static_cast<Eigen::Index>(b), c); });
      for (std::size_t k = 0; k < 7; ++k) CHECK(reps[static_cast<std::size_t>(c)][k].record == order[k]);
    }
  }
  SUBCASE("bad input") {
    CHECK_THROWS(representatives(ProbMatrix::Zero(3, 2), ids_for(2), 1));
    CHECK_THROWS(representatives(ProbMatrix::Zero(2, 2), ids_for(2), 0));
  }
}

TEST_CASE("label map application") {
  ProbMatrix row(1, 4);
  row << 0.1, 0.2, 0.3, 0.4;
  SUBCASE("identity") { CHECK(apply_label_map(row, LabelMap::identity(4)) == row); }
  SUBCASE("everything to one category") {
    const LabelMap all({{0, "a"}, {1, "a"}, {2, "a"}, {3, "a"}});
    const auto out = apply_label_map(row, all);
    REQUIRE(out.cols() == 1);
    CHECK(out(0, 0) == doctest::Approx(1.0));
  }
  SUBCASE("pairs merge") {
    const LabelMap m({{0, "A"}, {1, "A"}, {2, "B"}, {3, "B"}});
    const auto out = apply_label_map(row, m);
    CHECK(out(0, 0) == doctest::Approx(0.3));
    CHECK(out(0, 1) == doctest::Approx(0.7));
  }
  SUBCASE("unmapped cluster") {
    const LabelMap m({{0, "A"}, {1, "A"}, {2, "B"}});
    CHECK_THROWS(apply_label_map(row, m));
    CHECK_THROWS(m.require_total(4));
    CHECK_THROWS(LabelMap({{0, "A"}, {5, "B"}}).require_total(2));
  }
  SUBCASE("mass is conserved") {
    auto rng = make_rng({3});
    const auto p = random_probs(rng, 300, 10);
    std::map<int, std::string> a;
    for (int c = 0; c < 10; ++c) a[c] = std::string(1, static_cast<char>('a' + uniform_index(rng, 4)));
    const auto out = apply_label_map(p, LabelMap(a));
    CHECK((out.rowwise().sum().array() - 1.0).abs().maxCoeff() < 1e-9);
  }
}

TEST_CASE("label map json") {
  const auto doc = json::parse(R"({"assignments": {"0": "residential", "1": "green", "2": "residential"},
                                   "palette": {"green": "#00ff00"}})");
  const auto m = LabelMap::from_json(doc);
  CHECK(m.categories() == std::vector<std::string>{"green", "residential"});
  CHECK(m.category_of(2) == 1);
  CHECK(m.color_of("green") == "#00ff00");
  CHECK(m.color_of("residential").size() == 7);
  CHECK(LabelMap::from_json(m.to_json()).to_json() == m.to_json());
  CHECK_THROWS(LabelMap::from_json(json::parse(R"({"assignments": {"x": "a"}})")));
  CHECK_THROWS(LabelMap::from_json(json::parse(R"({"assignments": {"0": 3}})")));
  CHECK_THROWS(LabelMap::from_json(json::parse(R"({"assignments": {"0": "a"}, "palette": {"a": "red"}})")));
  CHECK_THROWS(LabelMap::from_json(json::parse(R"({"assignments": {"0": "a"}, "extra": 1})")));
  CHECK_THROWS(LabelMap::from_json(json::parse(R"({"assignments": {}})")));
}

TEST_CASE("grid map") {
  SUBCASE("two records in one cell") {
    const std::vector<ProjectedPoint> pts{{10, 10}, {20, 20}};
    ProbMatrix p(2, 2);
    p << 0.6, 0.4, 0.7, 0.3;
    GridSpec spec{0, 0, 100, 1, 1};
    const auto g = grid_map(pts, p, spec);
    CHECK(g.sums(0, 0) == doctest::Approx(1.3));
    CHECK(g.sums(0, 1) == doctest::Approx(0.7));
    CHECK(g.category[0] == 0);
    CHECK(g.counts[0] == 2);
    CHECK(g.confidence(0) == doctest::Approx(0.65));
  }
  SUBCASE("exact ties go to the lower category") {
    const std::vector<ProjectedPoint> pts{{10, 10}};
    ProbMatrix p(1, 3);
    p << 0.2, 0.4, 0.4;
    CHECK(grid_map(pts, p, GridSpec{0, 0, 100, 1, 1}).category[0] == 1);
  }
  SUBCASE("empty cells are NODATA and cells are half-open") {
    const std::vector<ProjectedPoint> pts{{100, 0}};  // on the boundary: belongs to column 1
    ProbMatrix p(1, 2);
    p << 1, 0;
    const auto g = grid_map(pts, p, GridSpec{0, 0, 100, 3, 1});
    CHECK(g.category == std::vector<int>{kNoData, 0, kNoData});
  }
  SUBCASE("record outside the grid") {
    const std::vector<ProjectedPoint> pts{{350, 0}};
    ProbMatrix p(1, 2);
    p << 1, 0;
    CHECK_THROWS_AS(grid_map(pts, p, GridSpec{0, 0, 100, 3, 1}), std::out_of_range);
  }
  SUBCASE("500 random records equal naive binning, independent of order") {
    auto rng = make_rng({4});
    std::vector<ProjectedPoint> pts(500);
    for (auto& q : pts) q = {uniform(rng, 0, 1000), uniform(rng, 0, 1000)};
    const auto p = random_probs(rng, 500, 3);
    const GridSpec spec{0, 0, 100, 10, 10};
    const auto g = grid_map(pts, p, spec);
    ProbMatrix naive = ProbMatrix::Zero(100, 3);
    for (std::size_t i = 0; i < 500; ++i) {
      const int col = static_cast<int>(pts[i].x / 100), row = static_cast<int>(pts[i].y / 100);
      naive.row(row * 10 + col) += p.row(static_cast<Eigen::Index>(i));
    }
    CHECK((g.sums - naive).cwiseAbs().maxCoeff() < 1e-12);

    std::vector<std::size_t> perm(500);
    std::iota(perm.begin(), perm.end(), std::size_t{0});
    shuffle(perm.begin(), perm.end(), rng);
    std::vector<ProjectedPoint> pts2;
    ProbMatrix p2(500, 3);
    for (std::size_t i = 0; i < 500; ++i) {
      pts2.push_back(pts[perm[i]]);
      p2.row(static_cast<Eigen::Index>(i)) = p.row(static_cast<Eigen::Index>(perm[i]));
    }
    const auto g2 = grid_map(pts2, p2, spec);
    CHECK(g2.category == g.category);
    CHECK((g2.sums - g.sums).cwiseAbs().maxCoeff() < 1e-12);
  }
  SUBCASE("covering grid contains every point") {
    auto rng = make_rng({5});
    std::vector<ProjectedPoint> pts(200);
    for (auto& q : pts) q = {uniform(rng, 950000, 953000), uniform(rng, 6000000, 6003000)};
    const auto spec = GridSpec::covering(pts, 100.0);
    for (const auto& q : pts) CHECK(spec.cell_of(q) >= 0);
    CHECK(std::fmod(spec.origin_x, 100.0) == 0.0);
  }
}

TEST_CASE("geojson export") {
  const auto map = LabelMap::identity(2);
  SUBCASE("empty grid") {
    GridMap g;
    g.spec = GridSpec{0, 0, 100, 0, 0};
    const auto doc = export_geojson(g, map);
    CHECK(doc["type"] == "FeatureCollection");
    CHECK(doc["features"].empty());
  }
  SUBCASE("one occupied cell") {
    const std::vector<ProjectedPoint> pts{{150, 250}};
    ProbMatrix p(1, 2);
    p << 0.25, 0.75;
    const auto g = grid_map(pts, p, GridSpec{0, 0, 100, 3, 3});
    const auto doc = json::parse(export_geojson(g, map).dump());  // round trip through text
    REQUIRE(doc["features"].size() == 1);
    const auto& f = doc["features"][0];
    CHECK(f["type"] == "Feature");
    CHECK(f["geometry"]["type"] == "Polygon");
    const auto& ring = f["geometry"]["coordinates"][0];
    REQUIRE(ring.size() == 5);
    CHECK(ring[0] == ring[4]);
    CHECK(ring[0][0].get<double>() == 100.0);
    CHECK(ring[0][1].get<double>() == 200.0);
    CHECK(ring[2][0].get<double>() == 200.0);
    CHECK(f["properties"]["category"] == "cluster_01");
    CHECK(f["properties"]["confidence"].get<double>() == doctest::Approx(0.75));
    CHECK(f["properties"]["n_images"] == 1);
  }
}

TEST_CASE("assignment table round trip") {
  auto rng = make_rng({6});
  AssignmentTable t;
  t.ids = ids_for(10);
  for (int i = 0; i < 10; ++i) t.points.push_back({uniform(rng, 0, 100), uniform(rng, 0, 100)});
  t.probs = random_probs(rng, 10, 4);
  for (int i = 0; i < 10; ++i) {
    Eigen::Index c;
    t.probs.row(i).maxCoeff(&c);
    t.clusters.push_back(static_cast<int>(c));
  }
  const auto path = std::filesystem::temp_directory_path() / "ccgp_test_assign.jsonl";
  save_assignments(path, t);
  const auto back = load_assignments(path);
  CHECK(back.ids == t.ids);
  CHECK(back.clusters == t.clusters);
  CHECK(back.probs == t.probs);  // shortest round-trip doubles
  CHECK(back.points[3].x == t.points[3].x);
}

TEST_CASE("truth-majority merge never loses accuracy against its own alignment") {
  auto rng = make_rng({7});
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t n = 300;
    std::vector<int> truth(n), clusters(n);
    for (std::size_t i = 0; i < n; ++i) {
      truth[i] = static_cast<int>(uniform_index(rng, 5));
      // Over-clustering: each class split over two clusters, with noise.
      clusters[i] = uniform01(rng) < 0.8 ? 2 * truth[i] + static_cast<int>(uniform_index(rng, 2))
                                         : static_cast<int>(uniform_index(rng, 10));
    }
    const auto map = majority_label_map(clusters, truth, 10, 5);
    std::vector<int> merged(n);
    for (std::size_t i = 0; i < n; ++i) merged[i] = map[static_cast<std::size_t>(clusters[i])];
    const double merged_acc = hungarian_align(merged, truth, 5).acc;
    std::size_t majority_hits = 0;
    for (std::size_t i = 0; i < n; ++i) majority_hits += merged[i] == truth[i];
    CHECK(merged_acc >= static_cast<double>(majority_hits) / n - 1e-12);
    CHECK(merged_acc >= hungarian_align(clusters, truth, 10).acc - 1e-12);
  }
}

TEST_CASE("render_grid colors occupied cells") {
  const std::vector<ProjectedPoint> pts{{50, 50}};
  ProbMatrix p(1, 2);
  p << 1, 0;
  const auto g = grid_map(pts, p, GridSpec{0, 0, 100, 2, 2});
  const auto img = render_grid(g, LabelMap::identity(2), 4);
  CHECK(img.width == 8);
  CHECK(img.height == 8);
  CHECK(img.at(0, 7, 0) < 1.0f);   // bottom-left cell painted (north is up)
  CHECK(img.at(0, 0, 7) == 1.0f);  // empty cell stays white
}

}  // TEST_SUITE
