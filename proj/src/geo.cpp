#include "ccgp/geo.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>
#include <stdexcept>
#include <string>

namespace ccgp {

namespace {

constexpr double kDeg = std::numbers::pi / 180.0;
constexpr std::uint32_t kLeafSize = 8;

bool closer(const Neighbor& a, const Neighbor& b) {
  return a.distance < b.distance || (a.distance == b.distance && a.id < b.id);
}

// Candidates are kept as squared distances until the end of a query.
struct Candidates {
  std::size_t k;
  double max_d2;
  std::vector<Neighbor> best;  // sorted ascending by (d2, id)

  double bound() const { return best.size() < k ? max_d2 : std::min(max_d2, best.back().distance); }

  void offer(std::uint64_t id, double d2) {
    if (d2 > max_d2) return;
    Neighbor n{id, d2};
    if (best.size() == k) {
      if (!closer(n, best.back())) return;
      best.pop_back();
    }
    best.insert(std::upper_bound(best.begin(), best.end(), n, closer), n);
  }

  NeighborRow finish() && {
    for (auto& n : best) n.distance = std::sqrt(n.distance);
    return std::move(best);
  }
};

double box_distance2(double px, double py, double min_x, double min_y, double max_x, double max_y) {
  const double dx = px < min_x ? min_x - px : (px > max_x ? px - max_x : 0.0);
  const double dy = py < min_y ? min_y - py : (py > max_y ? py - max_y : 0.0);
  return dx * dx + dy * dy;
}

}  // namespace

ProjectedPoint project(GeoPoint p) {
  if (!(p.lon >= -180.0 && p.lon <= 180.0))
    throw std::domain_error("longitude out of range: " + std::to_string(p.lon));
  if (!(p.lat > -kMaxMercatorLat && p.lat < kMaxMercatorLat))
    throw std::domain_error("latitude outside Web Mercator range: " + std::to_string(p.lat));
  const double lat = p.lat * kDeg;
  return {kEarthRadius * p.lon * kDeg, kEarthRadius * std::log(std::tan(std::numbers::pi / 4.0 + lat / 2.0))};
}

GeoPoint unproject(ProjectedPoint p) {
  const double lon = p.x / kEarthRadius / kDeg;
  const double lat = (2.0 * std::atan(std::exp(p.y / kEarthRadius)) - std::numbers::pi / 2.0) / kDeg;
  return {lon, lat};
}

SpatialIndex::SpatialIndex(std::span<const ProjectedPoint> points)
    : SpatialIndex(points, [&] {
        std::vector<std::uint64_t> ids(points.size());
        std::iota(ids.begin(), ids.end(), std::uint64_t{0});
        return ids;
      }()) {}

SpatialIndex::SpatialIndex(std::span<const ProjectedPoint> points, std::span<const std::uint64_t> ids)
    : points_(points.begin(), points.end()), ids_(ids.begin(), ids.end()) {
  if (points_.empty()) throw std::invalid_argument("spatial index needs at least one point");
  if (ids_.size() != points_.size()) throw std::invalid_argument("spatial index: ids and points differ in length");
  if (points_.size() >= std::numeric_limits<std::uint32_t>::max())
    throw std::length_error("spatial index: too many points");

  nodes_.reserve(2 * points_.size() / kLeafSize + 2);
  build(0, static_cast<std::uint32_t>(points_.size()));

  std::vector<std::size_t> order(ids_.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return ids_[a] < ids_[b]; });
  sorted_ids_.resize(order.size());
  slot_by_order_ = order;
  for (std::size_t i = 0; i < order.size(); ++i) {
    sorted_ids_[i] = ids_[order[i]];
    if (i > 0 && sorted_ids_[i] == sorted_ids_[i - 1])
      throw std::invalid_argument("spatial index: duplicate id " + std::to_string(sorted_ids_[i]));
  }
}

std::int32_t SpatialIndex::build(std::uint32_t begin, std::uint32_t end) {
  const auto index = static_cast<std::int32_t>(nodes_.size());
  nodes_.emplace_back();
  Node node;
  node.begin = begin;
  node.end = end;
  node.min_x = node.min_y = std::numeric_limits<double>::infinity();
  node.max_x = node.max_y = -std::numeric_limits<double>::infinity();
  for (auto i = begin; i < end; ++i) {
    node.min_x = std::min(node.min_x, points_[i].x);
    node.max_x = std::max(node.max_x, points_[i].x);
    node.min_y = std::min(node.min_y, points_[i].y);
    node.max_y = std::max(node.max_y, points_[i].y);
  }
  if (end - begin > kLeafSize) {
    node.axis = (node.max_x - node.min_x) >= (node.max_y - node.min_y) ? 0 : 1;
    const auto mid = begin + (end - begin) / 2;
    // Permute points and ids together, ordering by (coordinate, id) for determinism.
    std::vector<std::uint32_t> perm(end - begin);
    std::iota(perm.begin(), perm.end(), begin);
    auto key = [&](std::uint32_t i) { return node.axis == 0 ? points_[i].x : points_[i].y; };
    std::nth_element(perm.begin(), perm.begin() + (mid - begin), perm.end(), [&](std::uint32_t a, std::uint32_t b) {
      return key(a) < key(b) || (key(a) == key(b) && ids_[a] < ids_[b]);
    });
    node.split = key(perm[mid - begin]);
    std::vector<ProjectedPoint> pts;
    std::vector<std::uint64_t> ids;
    pts.reserve(perm.size());
    ids.reserve(perm.size());
    for (auto i : perm) {
      pts.push_back(points_[i]);
      ids.push_back(ids_[i]);
    }
    std::copy(pts.begin(), pts.end(), points_.begin() + begin);
    std::copy(ids.begin(), ids.end(), ids_.begin() + begin);
    node.left = build(begin, mid);
    node.right = build(mid, end);
  }
  nodes_[index] = node;
  return index;
}

std::size_t SpatialIndex::slot_of(std::uint64_t id) const {
  const auto it = std::lower_bound(sorted_ids_.begin(), sorted_ids_.end(), id);
  if (it == sorted_ids_.end() || *it != id) throw std::out_of_range("spatial index: unknown id " + std::to_string(id));
  return slot_by_order_[static_cast<std::size_t>(it - sorted_ids_.begin())];
}

ProjectedPoint SpatialIndex::point_of(std::uint64_t id) const { return points_[slot_of(id)]; }

NeighborRow SpatialIndex::knn(std::uint64_t query_id, std::size_t k, double max_distance) const {
  return knn(point_of(query_id), k, max_distance, &query_id);
}

NeighborRow SpatialIndex::knn(ProjectedPoint query, std::size_t k, double max_distance,
                              const std::uint64_t* exclude) const {
  if (k == 0) throw std::invalid_argument("knn: k must be >= 1");
  if (!(max_distance > 0.0)) throw std::invalid_argument("knn: distance bound must be positive");
  Candidates c{k, max_distance * max_distance, {}};
  c.best.reserve(k + 1);

  std::vector<std::int32_t> stack{0};
  while (!stack.empty()) {
    const Node& node = nodes_[static_cast<std::size_t>(stack.back())];
    stack.pop_back();
    if (box_distance2(query.x, query.y, node.min_x, node.min_y, node.max_x, node.max_y) > c.bound()) continue;
    if (node.axis < 0) {
      for (auto i = node.begin; i < node.end; ++i) {
        if (exclude && ids_[i] == *exclude) continue;
        c.offer(ids_[i], squared_distance(query, points_[i]));
      }
      continue;
    }
    const double q = node.axis == 0 ? query.x : query.y;
    // Push the far child first so the near child is explored first.
    if (q < node.split) {
      stack.push_back(node.right);
      stack.push_back(node.left);
    } else {
      stack.push_back(node.left);
      stack.push_back(node.right);
    }
  }
  return std::move(c).finish();
}

NeighborRow SpatialIndex::within(ProjectedPoint query, double radius) const {
  const double r2 = radius * radius;
  NeighborRow out;
  std::vector<std::int32_t> stack{0};
  while (!stack.empty()) {
    const Node& node = nodes_[static_cast<std::size_t>(stack.back())];
    stack.pop_back();
    if (box_distance2(query.x, query.y, node.min_x, node.min_y, node.max_x, node.max_y) > r2) continue;
    if (node.axis < 0) {
      for (auto i = node.begin; i < node.end; ++i) {
        const double d2 = squared_distance(query, points_[i]);
        if (d2 <= r2) out.push_back({ids_[i], d2});
      }
      continue;
    }
    stack.push_back(node.left);
    stack.push_back(node.right);
  }
  std::sort(out.begin(), out.end(), closer);
  for (auto& n : out) n.distance = std::sqrt(n.distance);
  return out;
}

std::vector<std::size_t> dbscan_components(std::span<const ProjectedPoint> points, double eps) {
  constexpr auto kUnset = std::numeric_limits<std::size_t>::max();
  std::vector<std::size_t> cluster(points.size(), kUnset);
  if (points.empty()) return cluster;
  const SpatialIndex index(points);
  std::size_t next = 0;
  std::vector<std::size_t> frontier;
  for (std::size_t seed = 0; seed < points.size(); ++seed) {
    if (cluster[seed] != kUnset) continue;
    // min_pts = 1: every point is a core point, so clusters are the
    // connected components of the eps-neighborhood graph.
    cluster[seed] = next;
    frontier.assign(1, seed);
    while (!frontier.empty()) {
      const auto p = frontier.back();
      frontier.pop_back();
      for (const auto& n : index.within(points[p], eps)) {
        const auto q = static_cast<std::size_t>(n.id);
        if (cluster[q] == kUnset) {
          cluster[q] = next;
          frontier.push_back(q);
        }
      }
    }
    ++next;
  }
  return cluster;
}

std::vector<std::size_t> dbscan_dedupe(std::span<const ProjectedPoint> points, double eps) {
  const auto cluster = dbscan_components(points, eps);
  const std::size_t count = cluster.empty() ? 0 : *std::max_element(cluster.begin(), cluster.end()) + 1;

  std::vector<double> sx(count, 0.0), sy(count, 0.0);
  std::vector<std::size_t> n(count, 0);
  for (std::size_t i = 0; i < points.size(); ++i) {
    sx[cluster[i]] += points[i].x;
    sy[cluster[i]] += points[i].y;
    ++n[cluster[i]];
  }
  constexpr auto kNone = std::numeric_limits<std::size_t>::max();
  std::vector<std::size_t> keep(count, kNone);
  std::vector<double> best(count, std::numeric_limits<double>::infinity());
  for (std::size_t i = 0; i < points.size(); ++i) {
    const auto c = cluster[i];
    const ProjectedPoint centroid{sx[c] / static_cast<double>(n[c]), sy[c] / static_cast<double>(n[c])};
    const double d2 = squared_distance(points[i], centroid);
    if (d2 < best[c]) {
      best[c] = d2;
      keep[c] = i;
    }
  }
  std::sort(keep.begin(), keep.end());
  return keep;
}

}  // namespace ccgp
