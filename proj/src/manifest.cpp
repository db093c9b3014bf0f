#include "ccgp/dataset.hpp"

#include <json.hpp>

#include <algorithm>
#include <cstring>
#include <fstream>
#include <map>
#include <set>
#include <stdexcept>

namespace ccgp {

using json = nlohmann::json;

namespace {

constexpr std::uint64_t kFnvOffset = 0xcbf29ce484222325ULL;
constexpr std::uint64_t kFnvPrime = 0x100000001b3ULL;

void fnv(std::uint64_t& h, const void* data, std::size_t n) {
  const auto* p = static_cast<const unsigned char*>(data);
  for (std::size_t i = 0; i < n; ++i) {
    h ^= p[i];
    h *= kFnvPrime;
  }
}

}  // namespace

std::vector<ProjectedPoint> Dataset::points() const {
  std::vector<ProjectedPoint> out;
  out.reserve(records.size());
  for (const auto& r : records) out.push_back(r.proj);
  return out;
}

std::vector<int> Dataset::truth_labels(std::vector<std::string>* names) const {
  std::set<std::string> distinct;
  for (const auto& r : records)
    if (r.label) distinct.insert(*r.label);
  std::map<std::string, int> index;
  for (const auto& name : distinct) index.emplace(name, static_cast<int>(index.size()));
  std::vector<int> out;
  out.reserve(records.size());
  for (const auto& r : records) out.push_back(r.label ? index.at(*r.label) : -1);
  if (names) names->assign(distinct.begin(), distinct.end());
  return out;
}

std::uint64_t Dataset::hash() const {
  std::uint64_t h = kFnvOffset;
  for (const auto& r : records) {
    fnv(h, r.id.data(), r.id.size());
    fnv(h, &r.geo.lon, sizeof(double));
    fnv(h, &r.geo.lat, sizeof(double));
  }
  for (const auto& img : images) fnv(h, img.data.data(), static_cast<std::size_t>(img.data.size()) * sizeof(float));
  return h;
}

std::vector<GeoImageRecord> load_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open manifest " + path.string());
  std::vector<GeoImageRecord> records;
  std::set<std::string> seen;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    auto fail = [&](const std::string& why) -> std::runtime_error {
      return std::runtime_error(path.string() + ":" + std::to_string(lineno) + ": " + why);
    };
    json obj;
    try {
      obj = json::parse(line);
    } catch (const json::parse_error& e) {
      throw fail(std::string("invalid JSON: ") + e.what());
    }
    if (!obj.is_object()) throw fail("expected a JSON object");
    for (const char* key : {"id", "image_path", "lon", "lat"})
      if (!obj.contains(key)) throw fail(std::string("missing field '") + key + "'");
    if (!obj["id"].is_string() || !obj["image_path"].is_string()) throw fail("'id' and 'image_path' must be strings");
    if (!obj["lon"].is_number() || !obj["lat"].is_number()) throw fail("'lon' and 'lat' must be numbers");

    GeoImageRecord r;
    r.id = obj["id"].get<std::string>();
    r.image_path = obj["image_path"].get<std::string>();
    r.geo = {obj["lon"].get<double>(), obj["lat"].get<double>()};
    if (obj.contains("label") && !obj["label"].is_null()) {
      if (!obj["label"].is_string()) throw fail("'label' must be a string");
      r.label = obj["label"].get<std::string>();
    }
    try {
      r.proj = project(r.geo);
    } catch (const std::domain_error& e) {
      throw fail(e.what());
    }
    if (!seen.insert(r.id).second) throw fail("duplicate id '" + r.id + "'");
    records.push_back(std::move(r));
  }
  return records;
}

void write_manifest(const std::filesystem::path& path, const std::vector<GeoImageRecord>& records) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write manifest " + path.string());
  for (const auto& r : records) {
    json obj = {{"id", r.id}, {"image_path", r.image_path}, {"lon", r.geo.lon}, {"lat", r.geo.lat}};
    if (r.label) obj["label"] = *r.label;
    out << obj.dump() << '\n';
  }
}

std::vector<Image> load_images(const std::vector<GeoImageRecord>& records, const std::filesystem::path& root,
                               int height, int width) {
  std::vector<Image> images;
  images.reserve(records.size());
  for (const auto& r : records) {
    Image img = read_png(root / r.image_path);
    if (img.height != height || img.width != width) img = resize(img, height, width);
    images.push_back(std::move(img));
  }
  return images;
}

Dataset load_dataset(const std::filesystem::path& manifest, int height, int width) {
  Dataset d;
  d.records = load_manifest(manifest);
  d.images = load_images(d.records, manifest.parent_path(), height, width);
  return d;
}

}  // namespace ccgp
