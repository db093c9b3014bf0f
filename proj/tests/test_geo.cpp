#include "ccgp/geo.hpp"
#include "ccgp/rng.hpp"
#include "oracles.hpp"

#include <doctest.h>

#include <cmath>
#include <set>

using namespace ccgp;

TEST_SUITE("geo") {

TEST_CASE("projection closed forms") {
  const auto o = project({0.0, 0.0});
  CHECK(o.x == doctest::Approx(0.0));
  CHECK(o.y == doctest::Approx(0.0));
  CHECK(project({1.0, 0.0}).x == doctest::Approx(111319.4908).epsilon(1e-10));
  CHECK(project({180.0, 0.0}).x == doctest::Approx(20037508.3428).epsilon(1e-10));
  CHECK(project({1.0, 0.0}).y == doctest::Approx(0.0));
}

TEST_CASE("projection rejects out-of-domain input") {
  CHECK_THROWS_AS(project({0.0, 86.0}), std::domain_error);
  CHECK_THROWS_AS(project({181.0, 0.0}), std::domain_error);
  CHECK_THROWS_AS(project({std::nan(""), 0.0}), std::domain_error);
}

TEST_CASE("project/unproject round trip on 10k points") {
  auto rng = make_rng({11});
  double worst = 0.0;
  for (int i = 0; i < 10000; ++i) {
    const GeoPoint p{uniform(rng, -180.0, 180.0), uniform(rng, -85.0, 85.0)};
    const auto back = unproject(project(p));
    worst = std::max({worst, std::abs(back.lon - p.lon), std::abs(back.lat - p.lat)});
  }
  CHECK(worst < 1e-6);
}

TEST_CASE("knn small cases") {
  const std::vector<ProjectedPoint> line{{0, 0}, {10, 0}, {30, 0}};
  const SpatialIndex idx(line);
  SUBCASE("middle point sees the 10 m neighbor first") {
    const auto row = idx.knn(1, 2, 1e9);
    REQUIRE(row.size() == 2);
    CHECK(row[0].id == 0);
    CHECK(row[0].distance == doctest::Approx(10.0));
    CHECK(row[1].id == 2);
  }
  SUBCASE("K=1, d=15") {
    const auto row = idx.knn(0, 1, 15.0);
    REQUIRE(row.size() == 1);
    CHECK(row[0] == Neighbor{1, 10.0});
  }
  SUBCASE("d=5 yields nothing") { CHECK(idx.knn(0, 1, 5.0).empty()); }
  SUBCASE("distance bound is inclusive") { CHECK(idx.knn(0, 1, 10.0).size() == 1); }
  SUBCASE("unknown id") { CHECK_THROWS_AS(idx.knn(7, 1, 15.0), std::out_of_range); }
}

TEST_CASE("singleton index has no neighbors") {
  const std::vector<ProjectedPoint> one{{5, 5}};
  CHECK(SpatialIndex(one).knn(0, 3, 1e9).empty());
}

TEST_CASE("index construction errors") {
  CHECK_THROWS(SpatialIndex(std::span<const ProjectedPoint>{}));
  const std::vector<ProjectedPoint> pts{{0, 0}, {1, 1}};
  const std::vector<std::uint64_t> ids{4, 4};
  CHECK_THROWS(SpatialIndex(pts, ids));
}

TEST_CASE("ties are broken by ascending id") {
  // Four points at the same distance from the origin query.
  const std::vector<ProjectedPoint> pts{{0, 0}, {0, 5}, {5, 0}, {-5, 0}, {0, -5}};
  const std::vector<std::uint64_t> ids{100, 40, 30, 20, 10};
  const SpatialIndex idx(pts, ids);
  const auto row = idx.knn(100, 3, 10.0);
  REQUIRE(row.size() == 3);
  CHECK(row[0].id == 10);
  CHECK(row[1].id == 20);
  CHECK(row[2].id == 30);
}

void check_against_scan(std::size_t n, std::size_t k, double d, std::uint64_t seed, double extent) {
  auto rng = make_rng({seed});
  std::vector<ProjectedPoint> pts(n);
  for (auto& p : pts) p = {uniform(rng, 0.0, extent), uniform(rng, 0.0, extent)};
  const SpatialIndex idx(pts);
  for (std::size_t q = 0; q < n; ++q) {
    const auto got = idx.knn(q, k, d);
    const auto want = oracle::knn(pts, q, k, d);
    REQUIRE(got.size() == want.size());
    for (std::size_t i = 0; i < got.size(); ++i) {
      CHECK(got[i].id == want[i].first);
      CHECK(got[i].distance == doctest::Approx(want[i].second).epsilon(1e-12));
    }
  }
}

TEST_CASE("knn matches a full scan") {
  check_against_scan(1000, 5, 1e12, 1, 5000.0);
  check_against_scan(500, 3, 200.0, 2, 3000.0);
  check_against_scan(2000, 8, 150.0, 3, 3000.0);
}

TEST_CASE("knn on lattice points with many exact ties matches a full scan") {
  std::vector<ProjectedPoint> pts;
  for (int i = 0; i < 20; ++i)
    for (int j = 0; j < 20; ++j) pts.push_back({10.0 * i, 10.0 * j});
  const SpatialIndex idx(pts);
  for (std::size_t q = 0; q < pts.size(); ++q) {
    const auto got = idx.knn(q, 6, 25.0);
    const auto want = oracle::knn(pts, q, 6, 25.0);
    REQUIRE(got.size() == want.size());
    for (std::size_t i = 0; i < got.size(); ++i) CHECK(got[i].id == want[i].first);
  }
}

TEST_CASE("index is deterministic") {
  auto rng = make_rng({4});
  std::vector<ProjectedPoint> pts(300);
  for (auto& p : pts) p = {uniform(rng, 0.0, 1000.0), uniform(rng, 0.0, 1000.0)};
  const SpatialIndex a(pts), b(pts);
  for (std::size_t q = 0; q < pts.size(); ++q) CHECK(a.knn(q, 4, 120.0) == b.knn(q, 4, 120.0));
}

TEST_CASE("within returns everything in the radius, sorted") {
  auto rng = make_rng({5});
  std::vector<ProjectedPoint> pts(400);
  for (auto& p : pts) p = {uniform(rng, 0.0, 500.0), uniform(rng, 0.0, 500.0)};
  const SpatialIndex idx(pts);
  const ProjectedPoint c{250, 250};
  const auto row = idx.within(c, 60.0);
  std::size_t expected = 0;
  for (const auto& p : pts) expected += std::hypot(p.x - c.x, p.y - c.y) <= 60.0;
  CHECK(row.size() == expected);
  for (std::size_t i = 1; i < row.size(); ++i) CHECK(row[i - 1].distance <= row[i].distance);
}

TEST_CASE("dbscan dedupe examples") {
  SUBCASE("pair 5 m apart collapses") {
    const std::vector<ProjectedPoint> pts{{0, 0}, {5, 0}};
    CHECK(dbscan_dedupe(pts).size() == 1);
  }
  SUBCASE("three points far apart are all kept") {
    const std::vector<ProjectedPoint> pts{{0, 0}, {11, 0}, {0, 11}};
    CHECK(dbscan_dedupe(pts) == std::vector<std::size_t>{0, 1, 2});
  }
  SUBCASE("chain collapses to the member nearest the centroid") {
    const std::vector<ProjectedPoint> pts{{0, 0}, {8, 0}, {16, 0}};
    CHECK(dbscan_dedupe(pts) == std::vector<std::size_t>{1});
  }
  SUBCASE("empty input") { CHECK(dbscan_dedupe(std::span<const ProjectedPoint>{}).empty()); }
}

TEST_CASE("dbscan dedupe output is a subset with no connected pair") {
  auto rng = make_rng({6});
  std::vector<ProjectedPoint> pts(800);
  for (auto& p : pts) p = {uniform(rng, 0.0, 600.0), uniform(rng, 0.0, 600.0)};
  const auto kept = dbscan_dedupe(pts, 10.0);
  const auto comp = dbscan_components(pts, 10.0);
  std::set<std::size_t> seen;
  for (auto k : kept) {
    REQUIRE(k < pts.size());
    CHECK(seen.insert(comp[k]).second);  // one representative per component
  }
  CHECK(seen.size() == std::set<std::size_t>(comp.begin(), comp.end()).size());
  // Components are closed under the eps relation.
  for (std::size_t i = 0; i < pts.size(); ++i)
    for (std::size_t j = i + 1; j < pts.size(); ++j)
      if (std::hypot(pts[i].x - pts[j].x, pts[i].y - pts[j].y) <= 10.0) CHECK(comp[i] == comp[j]);
}

}  // TEST_SUITE
