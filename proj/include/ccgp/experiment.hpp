#pragma once

#include "ccgp/dataset.hpp"
#include "ccgp/evaluation.hpp"
#include "ccgp/trainer.hpp"

#include <string>
#include <vector>

namespace ccgp {

struct RunResult {
  TrainReport report;
  AssignmentMatrix assignments;
  MetricsReport metrics;
};

/// Trains on the city, predicts every record and scores against the truth
/// categories. Moran's I uses `moran_threshold` meters.
RunResult run_on_city(const SyntheticCity& city, const TrainConfig& train_config, const EncoderConfig& encoder,
                      double moran_threshold = 100.0);

struct KSweepRow {
  int k = 0;
  std::vector<double> acc;  // one per seed
  double mean_acc = 0.0;
  double std_acc = 0.0;  // sample standard deviation across seeds
};

/// Neighbor-count sensitivity: for each K and each seed, trains and records
/// Hungarian-aligned accuracy. The city is regenerated per seed.
std::vector<KSweepRow> k_sweep(const SyntheticCitySpec& city_spec, const TrainConfig& base, const EncoderConfig& encoder,
                               const std::vector<int>& ks, int seeds);

std::string k_sweep_csv(const std::vector<KSweepRow>& rows);

/// Builds the truth-majority label map from clusters to categories: each
/// cluster goes to the truth class most frequent among its argmax members
/// (ties and empty clusters toward the lower class).
std::vector<int> majority_label_map(std::span<const int> clusters, std::span<const int> truth, int m, int classes);

}  // namespace ccgp
