#pragma once

#include "ccgp/geo.hpp"
#include "ccgp/image.hpp"
#include "ccgp/rng.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace ccgp {

/// One geotagged image. `proj` always equals project(geo).
struct GeoImageRecord {
  std::string id;
  std::string image_path;  // relative to the manifest directory
  GeoPoint geo;
  ProjectedPoint proj;
  std::optional<std::string> label;
};

/// Records plus decoded images, aligned by position.
struct Dataset {
  std::vector<GeoImageRecord> records;
  std::vector<Image> images;

  std::size_t size() const { return records.size(); }
  std::vector<ProjectedPoint> points() const;
  /// Integer truth labels (categories sorted by name); -1 where unlabeled.
  std::vector<int> truth_labels(std::vector<std::string>* names = nullptr) const;
  /// FNV-1a over ids, coordinates and image bytes.
  std::uint64_t hash() const;
};

// ---- manifest ------------------------------------------------------------

/// Reads a JSON Lines manifest. Throws std::runtime_error naming the offending
/// line for malformed input and for duplicate ids.
std::vector<GeoImageRecord> load_manifest(const std::filesystem::path& path);
void write_manifest(const std::filesystem::path& path, const std::vector<GeoImageRecord>& records);

/// Decodes every record's image relative to `root`, resizing to height x width
/// when the stored size differs.
std::vector<Image> load_images(const std::vector<GeoImageRecord>& records, const std::filesystem::path& root,
                               int height, int width);

Dataset load_dataset(const std::filesystem::path& manifest, int height, int width);

// ---- synthetic city ------------------------------------------------------

struct SyntheticCitySpec {
  double extent = 3000.0;  // side of the square city, projected meters
  int zones = 20;
  int categories = 5;
  int image_size = 32;
  int samples_per_zone = 100;
  double distractor_prob = 0.4;
  std::uint64_t seed = 0;
  GeoPoint origin{8.54, 47.37};  // south-west corner
  /// Optional explicit zone seeds in local meters [0, extent]^2; random otherwise.
  std::vector<ProjectedPoint> zone_seeds;

  void validate() const;
};

struct RenderedImage {
  Image image;
  bool has_distractor = false;
  int distractor_category = -1;
  std::vector<std::uint8_t> occluder_mask;  // height*width, 1 where the occluder was composited
};

struct SyntheticCity {
  SyntheticCitySpec spec;
  Dataset data;
  std::vector<int> categories;            // truth category per record
  std::vector<bool> has_distractor;       // per record
  std::vector<ProjectedPoint> zone_seeds;  // local meters
  std::vector<int> zone_category;

  /// Nearest-seed zone for a local-meter location (ties toward the lower zone).
  int zone_of(ProjectedPoint local) const;
};

std::string category_name(int category);

/// Category-specific texture and palette with per-image geometric noise. With
/// probability `distractor_prob` a large shape styled as a different category
/// is composited on top. Output is quantized to 8-bit levels.
RenderedImage render_image(int category, int num_categories, std::uint64_t image_seed, double distractor_prob,
                           int size = 32);

SyntheticCity generate_city(const SyntheticCitySpec& spec);

/// Writes `<dir>/manifest.jsonl` and `<dir>/images/<id>.png`.
void materialize_city(const SyntheticCity& city, const std::filesystem::path& dir);

// ---- augmentation --------------------------------------------------------

struct AugmentationPolicy {
  double crop_scale_min = 0.2;
  double crop_scale_max = 1.0;
  double crop_ratio_min = 3.0 / 4.0;
  double crop_ratio_max = 4.0 / 3.0;
  double jitter_prob = 0.8;
  double jitter_strength = 0.4;  // brightness, contrast and saturation
  double jitter_hue = 0.1;
  double grayscale_prob = 0.2;
  double flip_prob = 0.5;
  double blur_prob = 0.5;
  double blur_sigma_min = 0.1;
  double blur_sigma_max = 2.0;

  /// Every transform disabled and crop fixed to the full frame.
  static AugmentationPolicy identity();
};

/// Keys an augmentation draw; equal tuples give bitwise-identical outputs.
struct AugmentSeed {
  std::uint64_t seed = 0;
  std::uint64_t epoch = 0;
  std::uint64_t record = 0;
  std::uint64_t view = 0;
};

/// Resized crop, color jitter, grayscale, horizontal flip and Gaussian blur, in that order.
Image augment(const Image& image, const AugmentationPolicy& policy, Rng& rng);
Image augment(const Image& image, const AugmentationPolicy& policy, const AugmentSeed& key);

}  // namespace ccgp
