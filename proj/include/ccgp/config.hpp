#pragma once

#include "ccgp/dataset.hpp"
#include "ccgp/model.hpp"
#include "ccgp/trainer.hpp"

#include <json.hpp>

#include <filesystem>
#include <string>

namespace ccgp {

struct EvalConfig {
  double moran_threshold = 100.0;
  /// Source of the class weights n_m: "labels" (the labeling being scored) or "truth".
  std::string moran_weights = "labels";
};

struct MapConfig {
  double cell_size = 100.0;
};

/// Complete pipeline configuration, sections data/model/train/loss/eval/map.
/// One master seed drives every stochastic stage.
struct PipelineConfig {
  std::uint64_t seed = 0;
  SyntheticCitySpec data;
  double dedupe_eps = 10.0;
  AugmentationPolicy augmentation;
  EncoderConfig model;
  TrainConfig train;  // its `loss`, `augmentation` and `seed` are filled from the other sections
  EvalConfig eval;
  MapConfig map;

  TrainConfig resolved_train() const;
  EncoderConfig resolved_encoder() const;
  SyntheticCitySpec resolved_city() const;
  void validate() const;
};

nlohmann::json to_json(const PipelineConfig& config);
/// Starts from defaults and overlays `doc`; unknown keys and type mismatches throw.
PipelineConfig pipeline_config_from_json(const nlohmann::json& doc);
PipelineConfig load_pipeline_config(const std::filesystem::path& path);

/// Applies a dotted override such as "train.epochs=10"; the value is parsed as JSON
/// and falls back to a string.
void apply_override(nlohmann::json& doc, const std::string& assignment);

/// Hex FNV-1a digest of the canonical JSON dump.
std::string config_hash(const nlohmann::json& doc);

nlohmann::json to_json(const EncoderConfig& c);
EncoderConfig encoder_config_from_json(const nlohmann::json& j);
nlohmann::json to_json(const TrainConfig& c);
TrainConfig train_config_from_json(const nlohmann::json& j);
nlohmann::json to_json(const LossConfig& c);
LossConfig loss_config_from_json(const nlohmann::json& j);
nlohmann::json to_json(const AugmentationPolicy& p);
AugmentationPolicy augmentation_from_json(const nlohmann::json& j);
nlohmann::json to_json(const SyntheticCitySpec& s);
SyntheticCitySpec city_spec_from_json(const nlohmann::json& j);

}  // namespace ccgp
