#pragma once

#include "ccgp/geo.hpp"
#include "ccgp/image.hpp"

#include <Eigen/Core>
#include <json.hpp>

#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <vector>

namespace ccgp {

using ProbMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Per-record cluster probabilities as written by `predict`.
struct AssignmentTable {
  std::vector<std::string> ids;
  std::vector<ProjectedPoint> points;
  ProbMatrix probs;
  std::vector<int> clusters;  // argmax

  int cluster_count() const { return static_cast<int>(probs.cols()); }
};

/// JSON Lines: {"id", "x", "y", "probs": [...], "cluster"}.
void save_assignments(const std::filesystem::path& path, const AssignmentTable& table);
AssignmentTable load_assignments(const std::filesystem::path& path);

// ---- step 1: representatives ----------------------------------------------

struct Representative {
  std::size_t record = 0;  // row in the assignment table
  double confidence = 0.0;
};

/// For every cluster, the `top_n` records with the highest probability for that
/// cluster, descending; ties go to the smaller record id.
std::vector<std::vector<Representative>> representatives(const ProbMatrix& probs, std::span<const std::string> ids,
                                                          int top_n);

// ---- step 2: label map ------------------------------------------------------

/// Many-to-one cluster -> category mapping. Category indices follow the
/// lexicographic order of category names.
class LabelMap {
 public:
  LabelMap() = default;
  LabelMap(std::map<int, std::string> assignments, std::map<std::string, std::string> palette = {});

  static LabelMap identity(int clusters);
  static LabelMap from_json(const nlohmann::json& doc);
  static LabelMap load(const std::filesystem::path& path);
  nlohmann::json to_json() const;
  void save(const std::filesystem::path& path) const;

  /// Throws unless every cluster in [0, clusters) is mapped and nothing else is.
  void require_total(int clusters) const;

  const std::vector<std::string>& categories() const { return categories_; }
  int category_of(int cluster) const;
  std::string color_of(const std::string& category) const;
  const std::map<int, std::string>& assignments() const { return assignments_; }

 private:
  std::map<int, std::string> assignments_;
  std::map<std::string, std::string> palette_;
  std::vector<std::string> categories_;
};

/// Sums cluster probabilities into category probabilities. Throws for unmapped clusters.
ProbMatrix apply_label_map(const ProbMatrix& probs, const LabelMap& map);

// ---- step 3: grid map ---------------------------------------------------------

struct GridSpec {
  double origin_x = 0.0;  // lower-left corner, projected meters
  double origin_y = 0.0;
  double cell_size = 100.0;
  int cols = 0;
  int rows = 0;

  /// Smallest grid with origin snapped to multiples of `cell_size` that covers `points`.
  static GridSpec covering(std::span<const ProjectedPoint> points, double cell_size = 100.0);
  /// Cell index (row * cols + col) for half-open cells, or -1 outside the grid.
  long cell_of(ProjectedPoint p) const;
};

inline constexpr int kNoData = -1;

struct GridMap {
  GridSpec spec;
  std::vector<int> category;  // per cell, kNoData when empty
  ProbMatrix sums;            // cells x categories
  std::vector<int> counts;    // images per cell

  double confidence(long cell) const;
};

/// Bins records into cells and picks the category with the highest summed
/// probability (ties toward the lower category index).
GridMap grid_map(std::span<const ProjectedPoint> points, const ProbMatrix& category_probs, const GridSpec& spec);

/// FeatureCollection of occupied cells as EPSG:3857 polygons.
nlohmann::json export_geojson(const GridMap& grid, const LabelMap& map);

/// Raster preview, one `scale` x `scale` block per cell, NODATA in white.
Image render_grid(const GridMap& grid, const LabelMap& map, int scale = 4);

}  // namespace ccgp
