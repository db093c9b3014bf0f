#pragma once

#include "ccgp/geo.hpp"

#include <Eigen/Core>
#include <json.hpp>

#include <optional>
#include <span>
#include <vector>

namespace ccgp {

/// Normalized mutual information, normalized by the arithmetic mean of the
/// two entropies. Two single-cluster labelings score 1 if identical, else 0.
double nmi(std::span<const int> pred, std::span<const int> truth);

/// Pair-counting Rand index adjusted for chance.
double ari(std::span<const int> pred, std::span<const int> truth);

/// Rows: predicted cluster, columns: truth class.
Eigen::MatrixXi contingency(std::span<const int> pred, std::span<const int> truth, int rows, int cols);

/// Maximum-weight perfect matching on a square count matrix; returns column per row.
std::vector<int> hungarian_max(const Eigen::MatrixXi& weights);

struct Alignment {
  std::vector<int> mapping;  // cluster -> class
  double acc = 0.0;
  double mf1 = 0.0;
  std::vector<double> per_class_f1;  // indexed by class; classes absent from truth are skipped in mf1
  Eigen::MatrixXi confusion;         // truth class x mapped class
};

/// Optimal one-to-one cluster-to-class assignment. Labels must lie in [0, m).
Alignment hungarian_align(std::span<const int> pred, std::span<const int> truth, int m);

/// Moran's I with inverse-distance weights for 0 < d <= threshold. Throws
/// std::domain_error when the values have zero variance or no pair is in range.
double morans_i(std::span<const double> values, std::span<const ProjectedPoint> coords, double threshold = 100.0);

/// Same statistic from precomputed neighbor lists (positions, distances).
double morans_i(std::span<const double> values, const std::vector<NeighborRow>& neighbors);

/// Inverse-distance neighbor lists within `threshold`, excluding coincident points.
std::vector<NeighborRow> moran_neighbors(std::span<const ProjectedPoint> coords, double threshold);

/// Class-size weighted mean of per-class Moran's I over binarized indicators.
/// Class sizes come from `weight_labels` when given, else from `labels`.
/// Classes whose indicator has zero variance are skipped (with a warning).
double weighted_morans_i(std::span<const int> labels, std::span<const ProjectedPoint> coords, int m,
                         double threshold = 100.0, std::optional<std::span<const int>> weight_labels = std::nullopt);
double weighted_morans_i(std::span<const int> labels, const std::vector<NeighborRow>& neighbors, int m,
                         std::optional<std::span<const int>> weight_labels = std::nullopt);

struct MetricsReport {
  double nmi = 0.0;
  double ari = 0.0;
  double acc = 0.0;
  double mf1 = 0.0;
  std::optional<double> moran_weighted;
  std::vector<double> per_class_f1;
  Eigen::MatrixXi confusion;
  std::vector<int> mapping;

  nlohmann::json to_json() const;
};

MetricsReport evaluate(std::span<const int> pred, std::span<const int> truth, int m,
                       std::span<const ProjectedPoint> coords = {}, double moran_threshold = 100.0,
                       bool moran_weights_from_truth = false);

}  // namespace ccgp
