#include "ccgp/config.hpp"

#include <cstdio>
#include <fstream>
#include <stdexcept>

namespace ccgp {

using json = nlohmann::json;

namespace {

// Overlays `patch` on `base`, which must already contain every allowed key.
void overlay(json& base, const json& patch, const std::string& path) {
  if (!patch.is_object()) throw std::invalid_argument("config: '" + path + "' must be an object");
  for (auto it = patch.begin(); it != patch.end(); ++it) {
    const std::string key = path.empty() ? it.key() : path + "." + it.key();
    if (!base.contains(it.key())) throw std::invalid_argument("config: unknown key '" + key + "'");
    json& slot = base[it.key()];
    if (slot.is_object()) {
      overlay(slot, it.value(), key);
      continue;
    }
    const bool ok = (slot.is_number() && it.value().is_number()) || (slot.is_boolean() && it.value().is_boolean()) ||
                    (slot.is_string() && it.value().is_string()) || (slot.is_array() && it.value().is_array());
    if (!ok) throw std::invalid_argument("config: wrong type for '" + key + "'");
    if (slot.is_number_unsigned() && !it.value().is_number_unsigned())
      throw std::invalid_argument("config: '" + key + "' must be a non-negative integer");
    if (slot.is_number_integer() && !it.value().is_number_integer())
      throw std::invalid_argument("config: '" + key + "' must be an integer");
    slot = it.value();
  }
}

const char* entropy_name(EntropyForm f) { return f == EntropyForm::paper ? "paper" : "kl_uniform"; }

EntropyForm entropy_from(const std::string& s) {
  if (s == "paper") return EntropyForm::paper;
  if (s == "kl_uniform") return EntropyForm::kl_uniform;
  throw std::invalid_argument("config: entropy_form must be 'paper' or 'kl_uniform'");
}

}  // namespace

json to_json(const AugmentationPolicy& p) {
  return {{"crop_scale_min", p.crop_scale_min}, {"crop_scale_max", p.crop_scale_max},
          {"crop_ratio_min", p.crop_ratio_min}, {"crop_ratio_max", p.crop_ratio_max},
          {"jitter_prob", p.jitter_prob},       {"jitter_strength", p.jitter_strength},
          {"jitter_hue", p.jitter_hue},         {"grayscale_prob", p.grayscale_prob},
          {"flip_prob", p.flip_prob},           {"blur_prob", p.blur_prob},
          {"blur_sigma_min", p.blur_sigma_min}, {"blur_sigma_max", p.blur_sigma_max}};
}

AugmentationPolicy augmentation_from_json(const json& j) {
  json full = to_json(AugmentationPolicy{});
  overlay(full, j, "augmentation");
  AugmentationPolicy p;
  p.crop_scale_min = full["crop_scale_min"];
  p.crop_scale_max = full["crop_scale_max"];
  p.crop_ratio_min = full["crop_ratio_min"];
  p.crop_ratio_max = full["crop_ratio_max"];
  p.jitter_prob = full["jitter_prob"];
  p.jitter_strength = full["jitter_strength"];
  p.jitter_hue = full["jitter_hue"];
  p.grayscale_prob = full["grayscale_prob"];
  p.flip_prob = full["flip_prob"];
  p.blur_prob = full["blur_prob"];
  p.blur_sigma_min = full["blur_sigma_min"];
  p.blur_sigma_max = full["blur_sigma_max"];
  return p;
}

json to_json(const LossConfig& c) {
  return {{"tau_instance", c.tau_instance}, {"tau_cluster", c.tau_cluster},
          {"lambda", c.lambda},             {"eta", c.eta},
          {"entropy_form", entropy_name(c.entropy_form)}, {"scch_symmetrize", c.scch_symmetrize}};
}

LossConfig loss_config_from_json(const json& j) {
  json full = to_json(LossConfig{});
  overlay(full, j, "loss");
  LossConfig c;
  c.tau_instance = full["tau_instance"];
  c.tau_cluster = full["tau_cluster"];
  c.lambda = full["lambda"];
  c.eta = full["eta"];
  c.entropy_form = entropy_from(full["entropy_form"]);
  c.scch_symmetrize = full["scch_symmetrize"];
  return c;
}

json to_json(const EncoderConfig& c) {
  return {{"architecture", c.architecture}, {"widths", c.widths},         {"projection_dim", c.projection_dim},
          {"clusters", c.clusters},         {"image_size", c.image_size}, {"channels", c.channels}};
}

EncoderConfig encoder_config_from_json(const json& j) {
  json full = to_json(EncoderConfig{});
  overlay(full, j, "model");
  EncoderConfig c;
  c.architecture = full["architecture"];
  c.widths = full["widths"].get<std::vector<int>>();
  c.projection_dim = full["projection_dim"];
  c.clusters = full["clusters"];
  c.image_size = full["image_size"];
  c.channels = full["channels"];
  return c;
}

json to_json(const TrainConfig& c) {
  return {{"clusters", c.clusters},
          {"neighbors", c.neighbors},
          {"max_distance", c.max_distance},
          {"batch_size", c.batch_size},
          {"epochs", c.epochs},
          {"learning_rate", c.learning_rate},
          {"weight_decay", c.weight_decay},
          {"seed", c.seed},
          {"cc_baseline_mode", c.cc_baseline_mode},
          {"loss", to_json(c.loss)},
          {"augmentation", to_json(c.augmentation)}};
}

TrainConfig train_config_from_json(const json& j) {
  json full = to_json(TrainConfig{});
  overlay(full, j, "train");
  TrainConfig c;
  c.clusters = full["clusters"];
  c.neighbors = full["neighbors"];
  c.max_distance = full["max_distance"];
  c.batch_size = full["batch_size"];
  c.epochs = full["epochs"];
  c.learning_rate = full["learning_rate"];
  c.weight_decay = full["weight_decay"];
  c.seed = full["seed"];
  c.cc_baseline_mode = full["cc_baseline_mode"];
  c.loss = loss_config_from_json(full["loss"]);
  c.augmentation = augmentation_from_json(full["augmentation"]);
  return c;
}

json to_json(const SyntheticCitySpec& s) {
  return {{"extent", s.extent},
          {"zones", s.zones},
          {"categories", s.categories},
          {"image_size", s.image_size},
          {"samples_per_zone", s.samples_per_zone},
          {"distractor_prob", s.distractor_prob},
          {"seed", s.seed},
          {"origin_lon", s.origin.lon},
          {"origin_lat", s.origin.lat}};
}

SyntheticCitySpec city_spec_from_json(const json& j) {
  json full = to_json(SyntheticCitySpec{});
  overlay(full, j, "data");
  SyntheticCitySpec s;
  s.extent = full["extent"];
  s.zones = full["zones"];
  s.categories = full["categories"];
  s.image_size = full["image_size"];
  s.samples_per_zone = full["samples_per_zone"];
  s.distractor_prob = full["distractor_prob"];
  s.seed = full["seed"];
  s.origin = {full["origin_lon"], full["origin_lat"]};
  return s;
}

json to_json(const PipelineConfig& c) {
  json data = to_json(c.data);
  data.erase("seed");
  data["dedupe_eps"] = c.dedupe_eps;
  data["augmentation"] = to_json(c.augmentation);
  json model = to_json(c.model);
  model.erase("clusters");
  model.erase("image_size");
  json train = to_json(c.train);
  for (const char* k : {"seed", "loss", "augmentation"}) train.erase(k);
  return {{"seed", c.seed},
          {"data", data},
          {"model", model},
          {"train", train},
          {"loss", to_json(c.train.loss)},
          {"eval", {{"moran_threshold", c.eval.moran_threshold}, {"moran_weights", c.eval.moran_weights}}},
          {"map", {{"cell_size", c.map.cell_size}}}};
}

PipelineConfig pipeline_config_from_json(const json& doc) {
  json full = to_json(PipelineConfig{});
  overlay(full, doc, "");
  PipelineConfig c;
  c.seed = full["seed"];
  json data = full["data"];
  c.dedupe_eps = data["dedupe_eps"];
  c.augmentation = augmentation_from_json(data["augmentation"]);
  for (const char* k : {"dedupe_eps", "augmentation"}) data.erase(k);
  c.data = city_spec_from_json(data);
  c.model = encoder_config_from_json(full["model"]);
  c.train = train_config_from_json(full["train"]);
  c.train.loss = loss_config_from_json(full["loss"]);
  c.eval.moran_threshold = full["eval"]["moran_threshold"];
  c.eval.moran_weights = full["eval"]["moran_weights"];
  c.map.cell_size = full["map"]["cell_size"];
  c.validate();
  return c;
}

PipelineConfig load_pipeline_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config " + path.string());
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error& e) {
    throw std::invalid_argument("config " + path.string() + ": " + e.what());
  }
  return pipeline_config_from_json(doc);
}

void apply_override(json& doc, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0) throw std::invalid_argument("override must look like key.path=value");
  const std::string path = assignment.substr(0, eq), raw = assignment.substr(eq + 1);
  json value;
  try {
    value = json::parse(raw);
  } catch (const json::parse_error&) {
    value = raw;
  }
  json* node = &doc;
  std::size_t start = 0;
  for (;;) {
    const auto dot = path.find('.', start);
    const std::string key = path.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
    if (dot == std::string::npos) {
      (*node)[key] = value;
      return;
    }
    node = &(*node)[key];
    start = dot + 1;
  }
}

std::string config_hash(const json& doc) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : doc.dump()) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

TrainConfig PipelineConfig::resolved_train() const {
  TrainConfig t = train;
  t.seed = seed;
  t.augmentation = augmentation;
  return t;
}

EncoderConfig PipelineConfig::resolved_encoder() const {
  EncoderConfig e = model;
  e.clusters = train.clusters;
  e.image_size = data.image_size;
  return e;
}

SyntheticCitySpec PipelineConfig::resolved_city() const {
  SyntheticCitySpec s = data;
  s.seed = seed;
  return s;
}

void PipelineConfig::validate() const {
  resolved_city().validate();
  resolved_encoder().validate();
  resolved_train().validate();
  if (!(dedupe_eps > 0.0)) throw std::invalid_argument("config: data.dedupe_eps must be positive");
  if (!(eval.moran_threshold > 0.0)) throw std::invalid_argument("config: eval.moran_threshold must be positive");
  if (eval.moran_weights != "labels" && eval.moran_weights != "truth")
    throw std::invalid_argument("config: eval.moran_weights must be 'labels' or 'truth'");
  if (!(map.cell_size > 0.0)) throw std::invalid_argument("config: map.cell_size must be positive");
}

}  // namespace ccgp
