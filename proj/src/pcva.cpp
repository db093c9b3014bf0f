#include "ccgp/pcva.hpp"

#include <algorithm>
#include <cmath>
#include <cctype>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <set>
#include <stdexcept>

namespace ccgp {

using json = nlohmann::json;

void save_assignments(const std::filesystem::path& path, const AssignmentTable& table) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  for (std::size_t i = 0; i < table.ids.size(); ++i) {
    std::vector<double> row(static_cast<std::size_t>(table.probs.cols()));
    for (Eigen::Index c = 0; c < table.probs.cols(); ++c) row[static_cast<std::size_t>(c)] = table.probs(static_cast<Eigen::Index>(i), c);
    out << json{{"id", table.ids[i]},
                {"x", table.points[i].x},
                {"y", table.points[i].y},
                {"probs", row},
                {"cluster", table.clusters[i]}}
               .dump()
        << '\n';
  }
}

AssignmentTable load_assignments(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open assignments " + path.string());
  AssignmentTable t;
  std::vector<std::vector<double>> rows;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      const json obj = json::parse(line);
      t.ids.push_back(obj.at("id").get<std::string>());
      t.points.push_back({obj.at("x").get<double>(), obj.at("y").get<double>()});
      rows.push_back(obj.at("probs").get<std::vector<double>>());
      t.clusters.push_back(obj.at("cluster").get<int>());
      if (rows.back().size() != rows.front().size()) throw std::runtime_error("inconsistent probability length");
    } catch (const std::exception& e) {
      throw std::runtime_error(path.string() + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  const auto m = rows.empty() ? 0 : static_cast<Eigen::Index>(rows.front().size());
  t.probs.resize(static_cast<Eigen::Index>(rows.size()), m);
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (Eigen::Index c = 0; c < m; ++c) t.probs(static_cast<Eigen::Index>(i), c) = rows[i][static_cast<std::size_t>(c)];
  return t;
}

std::vector<std::vector<Representative>> representatives(const ProbMatrix& probs, std::span<const std::string> ids,
                                                          int top_n) {
  if (top_n < 1) throw std::invalid_argument("representatives: top_n must be >= 1");
  if (static_cast<std::size_t>(probs.rows()) != ids.size())
    throw std::invalid_argument("representatives: ids do not match the assignment rows");
  std::vector<std::vector<Representative>> out(static_cast<std::size_t>(probs.cols()));
  std::vector<std::size_t> order(ids.size());
  for (Eigen::Index c = 0; c < probs.cols(); ++c) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    const auto keep = std::min(order.size(), static_cast<std::size_t>(top_n));
    std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(keep), order.end(),
                      [&](std::size_t a, std::size_t b) {
                        const double pa = probs(static_cast<Eigen::Index>(a), c), pb = probs(static_cast<Eigen::Index>(b), c);
                        return pa > pb || (pa == pb && ids[a] < ids[b]);
                      });
    for (std::size_t k = 0; k < keep; ++k)
      out[static_cast<std::size_t>(c)].push_back({order[k], probs(static_cast<Eigen::Index>(order[k]), c)});
  }
  return out;
}

// ---- label map ---------------------------------------------------------------

LabelMap::LabelMap(std::map<int, std::string> assignments, std::map<std::string, std::string> palette)
    : assignments_(std::move(assignments)), palette_(std::move(palette)) {
  std::set<std::string> names;
  for (const auto& [cluster, name] : assignments_) {
    if (cluster < 0) throw std::invalid_argument("label map: negative cluster id");
    if (name.empty()) throw std::invalid_argument("label map: empty category name");
    names.insert(name);
  }
  if (names.empty()) throw std::invalid_argument("label map: at least one category is required");
  categories_.assign(names.begin(), names.end());
  for (const auto& [name, color] : palette_) {
    const bool ok = color.size() == 7 && color[0] == '#' &&
                    std::all_of(color.begin() + 1, color.end(), [](char ch) { return std::isxdigit(static_cast<unsigned char>(ch)); });
    if (!ok) throw std::invalid_argument("label map: palette color for '" + name + "' must be #RRGGBB");
  }
}

LabelMap LabelMap::identity(int clusters) {
  std::map<int, std::string> a;
  char name[32];
  for (int c = 0; c < clusters; ++c) {
    std::snprintf(name, sizeof(name), "cluster_%02d", c);
    a.emplace(c, name);
  }
  return LabelMap(std::move(a));
}

LabelMap LabelMap::from_json(const json& doc) {
  if (!doc.is_object() || !doc.contains("assignments") || !doc["assignments"].is_object())
    throw std::invalid_argument("label map: expected an object with an 'assignments' object");
  for (auto it = doc.begin(); it != doc.end(); ++it)
    if (it.key() != "assignments" && it.key() != "palette")
      throw std::invalid_argument("label map: unknown key '" + it.key() + "'");
  std::map<int, std::string> a;
  for (auto it = doc["assignments"].begin(); it != doc["assignments"].end(); ++it) {
    std::size_t used = 0;
    int id = -1;
    try {
      id = std::stoi(it.key(), &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used != it.key().size() || id < 0) throw std::invalid_argument("label map: bad cluster id '" + it.key() + "'");
    if (!it.value().is_string()) throw std::invalid_argument("label map: category for cluster " + it.key() + " must be a string");
    a.emplace(id, it.value().get<std::string>());
  }
  std::map<std::string, std::string> palette;
  if (doc.contains("palette")) {
    if (!doc["palette"].is_object()) throw std::invalid_argument("label map: 'palette' must be an object");
    for (auto it = doc["palette"].begin(); it != doc["palette"].end(); ++it) {
      if (!it.value().is_string()) throw std::invalid_argument("label map: palette entries must be strings");
      palette.emplace(it.key(), it.value().get<std::string>());
    }
  }
  return LabelMap(std::move(a), std::move(palette));
}

LabelMap LabelMap::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open label map " + path.string());
  return from_json(json::parse(in));
}

json LabelMap::to_json() const {
  json a = json::object();
  for (const auto& [cluster, name] : assignments_) a[std::to_string(cluster)] = name;
  json p = json::object();
  for (const auto& name : categories_) p[name] = color_of(name);
  return {{"assignments", a}, {"palette", p}};
}

void LabelMap::save(const std::filesystem::path& path) const {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write label map " + path.string());
  out << to_json().dump(2) << '\n';
}

void LabelMap::require_total(int clusters) const {
  for (int c = 0; c < clusters; ++c)
    if (!assignments_.contains(c)) throw std::invalid_argument("label map: cluster " + std::to_string(c) + " is unmapped");
  for (const auto& [cluster, name] : assignments_)
    if (cluster >= clusters)
      throw std::invalid_argument("label map: cluster " + std::to_string(cluster) + " does not exist (M = " +
                                  std::to_string(clusters) + ")");
}

int LabelMap::category_of(int cluster) const {
  const auto it = assignments_.find(cluster);
  if (it == assignments_.end()) throw std::invalid_argument("label map: cluster " + std::to_string(cluster) + " is unmapped");
  return static_cast<int>(std::lower_bound(categories_.begin(), categories_.end(), it->second) - categories_.begin());
}

std::string LabelMap::color_of(const std::string& category) const {
  if (const auto it = palette_.find(category); it != palette_.end()) return it->second;
  static const std::map<std::string, std::string> kDefaults = {{"residential", "#e6a532"},
                                                               {"commercial", "#d7301f"},
                                                               {"industrial", "#7a5195"},
                                                               {"transportation", "#636363"},
                                                               {"greenfield", "#31a354"}};
  if (const auto it = kDefaults.find(category); it != kDefaults.end()) return it->second;
  // Stable color from the name.
  std::uint32_t h = 2166136261u;
  for (unsigned char ch : category) h = (h ^ ch) * 16777619u;
  char buf[8];
  std::snprintf(buf, sizeof(buf), "#%02x%02x%02x", 64 + (h & 0x7f), 64 + ((h >> 8) & 0x7f), 64 + ((h >> 16) & 0x7f));
  return buf;
}

ProbMatrix apply_label_map(const ProbMatrix& probs, const LabelMap& map) {
  const auto k = static_cast<Eigen::Index>(map.categories().size());
  ProbMatrix out = ProbMatrix::Zero(probs.rows(), k);
  for (Eigen::Index c = 0; c < probs.cols(); ++c) out.col(map.category_of(static_cast<int>(c))) += probs.col(c);
  return out;
}

// ---- grid ----------------------------------------------------------------------

GridSpec GridSpec::covering(std::span<const ProjectedPoint> points, double cell_size) {
  if (!(cell_size > 0.0)) throw std::invalid_argument("grid: cell size must be positive");
  GridSpec g;
  g.cell_size = cell_size;
  if (points.empty()) return g;
  double min_x = points[0].x, max_x = points[0].x, min_y = points[0].y, max_y = points[0].y;
  for (const auto& p : points) {
    min_x = std::min(min_x, p.x);
    max_x = std::max(max_x, p.x);
    min_y = std::min(min_y, p.y);
    max_y = std::max(max_y, p.y);
  }
  g.origin_x = std::floor(min_x / cell_size) * cell_size;
  g.origin_y = std::floor(min_y / cell_size) * cell_size;
  g.cols = static_cast<int>(std::floor((max_x - g.origin_x) / cell_size)) + 1;
  g.rows = static_cast<int>(std::floor((max_y - g.origin_y) / cell_size)) + 1;
  return g;
}

long GridSpec::cell_of(ProjectedPoint p) const {
  const double fx = std::floor((p.x - origin_x) / cell_size);
  const double fy = std::floor((p.y - origin_y) / cell_size);
  if (fx < 0 || fy < 0 || fx >= cols || fy >= rows) return -1;
  return static_cast<long>(fy) * cols + static_cast<long>(fx);
}

double GridMap::confidence(long cell) const {
  const double total = sums.row(cell).sum();
  return total > 0.0 ? sums.row(cell).maxCoeff() / total : 0.0;
}

GridMap grid_map(std::span<const ProjectedPoint> points, const ProbMatrix& category_probs, const GridSpec& spec) {
  if (static_cast<std::size_t>(category_probs.rows()) != points.size())
    throw std::invalid_argument("grid_map: probabilities do not match the records");
  if (!(spec.cell_size > 0.0) || spec.cols < 0 || spec.rows < 0) throw std::invalid_argument("grid_map: invalid grid");
  GridMap g;
  g.spec = spec;
  const long cells = static_cast<long>(spec.cols) * spec.rows;
  g.sums = ProbMatrix::Zero(cells, category_probs.cols());
  g.counts.assign(static_cast<std::size_t>(cells), 0);
  g.category.assign(static_cast<std::size_t>(cells), kNoData);
  for (std::size_t i = 0; i < points.size(); ++i) {
    const long cell = spec.cell_of(points[i]);
    if (cell < 0) throw std::out_of_range("grid_map: record " + std::to_string(i) + " lies outside the grid");
    g.sums.row(cell) += category_probs.row(static_cast<Eigen::Index>(i));
    ++g.counts[static_cast<std::size_t>(cell)];
  }
  for (long cell = 0; cell < cells; ++cell) {
    if (g.counts[static_cast<std::size_t>(cell)] == 0) continue;
    int best = 0;
    for (Eigen::Index k = 1; k < g.sums.cols(); ++k)
      if (g.sums(cell, k) > g.sums(cell, best)) best = static_cast<int>(k);
    g.category[static_cast<std::size_t>(cell)] = best;
  }
  return g;
}

json export_geojson(const GridMap& grid, const LabelMap& map) {
  json features = json::array();
  const auto& s = grid.spec;
  for (int row = 0; row < s.rows; ++row)
    for (int col = 0; col < s.cols; ++col) {
      const long cell = static_cast<long>(row) * s.cols + col;
      const int category = grid.category[static_cast<std::size_t>(cell)];
      if (category == kNoData) continue;
      const double x0 = s.origin_x + col * s.cell_size, y0 = s.origin_y + row * s.cell_size;
      const double x1 = x0 + s.cell_size, y1 = y0 + s.cell_size;
      const json ring = json::array({json::array({x0, y0}), json::array({x1, y0}), json::array({x1, y1}),
                                     json::array({x0, y1}), json::array({x0, y0})});
      const auto& name = map.categories().at(static_cast<std::size_t>(category));
      features.push_back({{"type", "Feature"},
                          {"geometry", {{"type", "Polygon"}, {"coordinates", json::array({ring})}}},
                          {"properties",
                           {{"category", name},
                            {"color", map.color_of(name)},
                            {"confidence", grid.confidence(cell)},
                            {"n_images", grid.counts[static_cast<std::size_t>(cell)]},
                            {"col", col},
                            {"row", row}}}});
    }
  return {{"type", "FeatureCollection"},
          {"crs", {{"type", "name"}, {"properties", {{"name", "urn:ogc:def:crs:EPSG::3857"}}}}},
          {"features", features}};
}

Image render_grid(const GridMap& grid, const LabelMap& map, int scale) {
  const auto& s = grid.spec;
  Image img(3, std::max(1, s.rows * scale), std::max(1, s.cols * scale));
  img.data.setOnes();
  for (int row = 0; row < s.rows; ++row)
    for (int col = 0; col < s.cols; ++col) {
      const long cell = static_cast<long>(row) * s.cols + col;
      const int category = grid.category[static_cast<std::size_t>(cell)];
      if (category == kNoData) continue;
      const std::string hex = map.color_of(map.categories().at(static_cast<std::size_t>(category)));
      float rgb[3];
      for (int k = 0; k < 3; ++k) rgb[k] = static_cast<float>(std::stoi(hex.substr(1 + 2 * k, 2), nullptr, 16)) / 255.0f;
      // Image rows run north to south.
      const int top = (s.rows - 1 - row) * scale;
      for (int y = top; y < top + scale; ++y)
        for (int x = col * scale; x < (col + 1) * scale; ++x)
          for (int k = 0; k < 3; ++k) img.at(k, y, x) = rgb[k];
    }
  return img;
}

}  // namespace ccgp
