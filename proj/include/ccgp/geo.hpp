#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace ccgp {

/// Spherical Web Mercator radius (EPSG:3857), meters.
inline constexpr double kEarthRadius = 6378137.0;
inline constexpr double kMaxMercatorLat = 85.0511287798066;

/// WGS84 longitude/latitude in degrees.
struct GeoPoint {
  double lon = 0.0;
  double lat = 0.0;
};

/// EPSG:3857 coordinates in meters.
struct ProjectedPoint {
  double x = 0.0;
  double y = 0.0;
};

/// Throws std::domain_error for latitudes outside the Mercator band or
/// longitudes outside [-180, 180].
ProjectedPoint project(GeoPoint p);
GeoPoint unproject(ProjectedPoint p);

inline double squared_distance(ProjectedPoint a, ProjectedPoint b) {
  const double dx = a.x - b.x;
  const double dy = a.y - b.y;
  return dx * dx + dy * dy;
}

struct Neighbor {
  std::uint64_t id = 0;
  double distance = 0.0;

  friend bool operator==(const Neighbor&, const Neighbor&) = default;
};

using NeighborRow = std::vector<Neighbor>;

/// Immutable 2-d KD-tree over projected points. Distances are planar
/// Euclidean in projected meters; equal distances are ordered by id.
class SpatialIndex {
 public:
  /// Ids default to the position of each point in `points`.
  explicit SpatialIndex(std::span<const ProjectedPoint> points);
  SpatialIndex(std::span<const ProjectedPoint> points, std::span<const std::uint64_t> ids);

  std::size_t size() const { return points_.size(); }

  /// Up to `k` nearest entries other than `query_id` with distance <= `max_distance`,
  /// ascending. Throws std::out_of_range for an unknown id.
  NeighborRow knn(std::uint64_t query_id, std::size_t k, double max_distance) const;

  /// Same as above for an arbitrary location; `exclude` is skipped if present.
  NeighborRow knn(ProjectedPoint query, std::size_t k, double max_distance,
                  const std::uint64_t* exclude = nullptr) const;

  /// All entries within `radius` (inclusive) of `query`, ordered by (distance, id).
  NeighborRow within(ProjectedPoint query, double radius) const;

  ProjectedPoint point_of(std::uint64_t id) const;

 private:
  struct Node {
    std::uint32_t begin = 0;
    std::uint32_t end = 0;
    std::int32_t left = -1;
    std::int32_t right = -1;
    int axis = -1;  // -1 marks a leaf
    double split = 0.0;
    double min_x = 0.0, min_y = 0.0, max_x = 0.0, max_y = 0.0;
  };

  std::int32_t build(std::uint32_t begin, std::uint32_t end);
  std::size_t slot_of(std::uint64_t id) const;

  std::vector<ProjectedPoint> points_;  // permuted into tree order
  std::vector<std::uint64_t> ids_;      // aligned with points_
  std::vector<std::size_t> slot_by_order_;
  std::vector<std::uint64_t> sorted_ids_;
  std::vector<Node> nodes_;
};

/// DBSCAN with minimum cluster size 1 and neighborhood radius `eps`; keeps the
/// member of each density cluster nearest its centroid (ties toward the earlier
/// point). Returns kept positions in input order.
std::vector<std::size_t> dbscan_dedupe(std::span<const ProjectedPoint> points, double eps = 10.0);

/// Cluster id per point for the same DBSCAN configuration.
std::vector<std::size_t> dbscan_components(std::span<const ProjectedPoint> points, double eps);

}  // namespace ccgp
