#pragma once

#include "ccgp/dataset.hpp"
#include "ccgp/geo.hpp"
#include "ccgp/losses.hpp"
#include "ccgp/model.hpp"

#include <Eigen/Core>

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace ccgp {

struct TrainConfig {
  int clusters = 5;
  int neighbors = 1;           // K
  double max_distance = 150.0;  // d, projected meters
  int batch_size = 128;
  int epochs = 40;
  double learning_rate = 2e-4;
  double weight_decay = 0.0;
  std::uint64_t seed = 0;
  LossConfig loss;
  AugmentationPolicy augmentation;
  /// Positives are re-augmentations of the anchor itself (plain contrastive clustering).
  bool cc_baseline_mode = false;
  /// Written after every epoch when set.
  std::optional<std::filesystem::path> checkpoint_dir;

  void validate() const;
};

/// Cached top-K in-range neighbors per record (positions into the dataset).
struct NeighborTable {
  std::vector<NeighborRow> rows;

  std::size_t size() const { return rows.size(); }
  bool neighborless(std::size_t i) const { return rows[i].empty(); }
  std::size_t neighborless_count() const;
};

NeighborTable cache_neighbors(std::span<const ProjectedPoint> points, int k, double max_distance);

/// Views for one optimization step. Rows [0, B) of the stacked batch are
/// anchors and rows [B, 2B) their positives; positives[i] pairs them mutually.
struct Batch {
  std::vector<std::size_t> anchors;
  std::vector<std::size_t> partners;  // sampled neighbor, or the anchor itself on fallback
  std::vector<Image> views;           // 2B views
  PositiveStructure positives;
  int fallback_count = 0;
};

Batch make_batch(std::span<const Image> images, const NeighborTable& table, std::span<const std::size_t> batch_ids,
                 int epoch, const TrainConfig& config);

struct EpochStats {
  double sich = 0.0;
  double scch = 0.0;
  double entropy = 0.0;
  double total = 0.0;
  int fallback_positives = 0;
  int steps = 0;
};

struct TrainReport {
  std::vector<EpochStats> epochs;
  double wall_seconds = 0.0;
  std::optional<std::filesystem::path> checkpoint;
  std::size_t neighborless_records = 0;
};

/// Loss components for one stacked batch of views.
struct StepLoss {
  double sich = 0.0, scch = 0.0, entropy = 0.0, total = 0.0;
};

/// Forward + loss + backward for a batch already packed into a tensor. The
/// model's gradients are zeroed first and hold dL/dtheta on return.
template <typename Scalar>
StepLoss loss_and_gradient(Model<Scalar>& model, const nn::Tensor<Scalar>& views,
                                   const PositiveStructure& positives, const LossConfig& loss);

struct TrainResult {
  Model<float> model;
  TrainReport report;
};

TrainResult train(const TrainConfig& config, const EncoderConfig& encoder, const Dataset& data);

/// N x M cluster probabilities plus argmax labels (ties toward the lower cluster).
struct AssignmentMatrix {
  Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> probs;
  std::vector<int> labels;
};

AssignmentMatrix predict(Model<float>& model, std::span<const Image> images, int chunk = 256);

// ---- checkpoints -----------------------------------------------------------

struct CheckpointMeta {
  EncoderConfig encoder;
  TrainConfig train;
  int epoch = 0;
  std::uint64_t dataset_hash = 0;
  std::string config_hash;
};

/// Writes `weights.bin` (little-endian float64 state) and `metadata.json`.
void save_checkpoint(const std::filesystem::path& dir, Model<float>& model, const CheckpointMeta& meta);
Model<float> load_checkpoint(const std::filesystem::path& dir, CheckpointMeta* meta = nullptr);

}  // namespace ccgp
