// Command-line driver: every pipeline stage as a subcommand.
#include "ccgp/config.hpp"
#include "ccgp/experiment.hpp"
#include "ccgp/pcva.hpp"
#include "ccgp/service.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>
#include <set>
#include <thread>
#include <unistd.h>

namespace fs = std::filesystem;
using json = nlohmann::json;
using namespace ccgp;

namespace {

// Output staged under a temporary name and renamed into place on success, so a
// failing command never leaves a half-written artifact behind.
class Staged {
 public:
  explicit Staged(fs::path target) : target_(std::move(target)) {
    if (target_.has_parent_path()) fs::create_directories(target_.parent_path());
    tmp_ = target_;
    tmp_ += ".partial-" + std::to_string(::getpid());
    fs::remove_all(tmp_);
  }
  Staged(const Staged&) = delete;
  Staged& operator=(const Staged&) = delete;
  ~Staged() {
    if (!committed_) {
      std::error_code ec;
      fs::remove_all(tmp_, ec);
    }
  }
  const fs::path& path() const { return tmp_; }
  void commit() {
    fs::remove_all(target_);
    fs::rename(tmp_, target_);
    committed_ = true;
  }

 private:
  fs::path target_, tmp_;
  bool committed_ = false;
};

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << text;
  if (!out) throw std::runtime_error("short write to " + path.string());
}

void require_file(const fs::path& path, const char* what) {
  if (!fs::exists(path)) throw std::runtime_error(std::string(what) + " not found: " + path.string());
}

struct Common {
  std::string config_path;
  std::vector<std::string> overrides;
  std::optional<std::uint64_t> seed;

  PipelineConfig resolve() const {
    json doc = json::object();
    if (!config_path.empty()) {
      require_file(config_path, "config");
      std::ifstream in(config_path);
      try {
        doc = json::parse(in);
      } catch (const json::exception& e) {
        throw std::runtime_error("config " + config_path + ": " + e.what());
      }
    }
    for (const auto& o : overrides) apply_override(doc, o);
    if (seed) doc["seed"] = *seed;  // flags win
    PipelineConfig cfg = pipeline_config_from_json(doc);
    cfg.validate();
    return cfg;
  }
};

// Records keyed by id with a label string: "cluster" from assignment files,
// "label" from manifests.
struct LabelFile {
  std::map<std::string, std::string> label;
};

LabelFile read_label_file(const fs::path& path) {
  require_file(path, "label file");
  std::ifstream in(path);
  LabelFile f;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      const json obj = json::parse(line);
      const auto id = obj.at("id").get<std::string>();
      std::string label;
      if (obj.contains("cluster"))
        label = std::to_string(obj["cluster"].get<int>());
      else if (obj.contains("label") && obj["label"].is_string())
        label = obj["label"].get<std::string>();
      else
        throw std::runtime_error("record has neither 'cluster' nor 'label'");
      if (!f.label.emplace(id, label).second) throw std::runtime_error("duplicate id '" + id + "'");
    } catch (const std::exception& e) {
      throw std::runtime_error(path.string() + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  return f;
}

int cmd_synth(const Common& common, const fs::path& out) {
  const auto cfg = common.resolve();
  const auto city = generate_city(cfg.resolved_city());
  Staged stage(out);
  materialize_city(city, stage.path());
  write_text(stage.path() / "config.json", to_json(cfg).dump(2) + "\n");
  stage.commit();
  std::printf("wrote %zu records to %s\n", city.data.size(), out.c_str());
  return 0;
}

int cmd_dedupe(const Common& common, const fs::path& manifest, const fs::path& out, std::optional<double> eps) {
  const auto cfg = common.resolve();
  require_file(manifest, "manifest");
  const auto records = load_manifest(manifest);
  std::vector<ProjectedPoint> pts;
  for (const auto& r : records) pts.push_back(r.proj);
  const auto keep = dbscan_dedupe(pts, eps.value_or(cfg.dedupe_eps));
  const auto in_dir = fs::absolute(manifest).parent_path();
  const auto out_dir = fs::absolute(out).parent_path();
  std::vector<GeoImageRecord> kept;
  for (auto i : keep) {
    auto r = records[i];
    r.image_path = fs::relative(in_dir / r.image_path, out_dir).generic_string();
    kept.push_back(std::move(r));
  }
  Staged stage(out);
  write_manifest(stage.path(), kept);
  stage.commit();
  std::printf("kept %zu of %zu records\n", kept.size(), records.size());
  return 0;
}

int cmd_train(const Common& common, const fs::path& manifest, const fs::path& out) {
  const auto cfg = common.resolve();
  require_file(manifest, "manifest");
  const auto enc = cfg.resolved_encoder();
  const auto data = load_dataset(manifest, enc.image_size, enc.image_size);
  Staged stage(out);
  auto tc = cfg.resolved_train();
  tc.checkpoint_dir = stage.path();
  const auto result = train(tc, enc, data);
  json epochs = json::array();
  for (const auto& e : result.report.epochs)
    epochs.push_back({{"sich", e.sich},
                      {"scch", e.scch},
                      {"entropy", e.entropy},
                      {"total", e.total},
                      {"fallback_positives", e.fallback_positives},
                      {"steps", e.steps}});
  write_text(stage.path() / "train_report.json",
             json{{"epochs", epochs},
                  {"wall_seconds", result.report.wall_seconds},
                  {"neighborless_records", result.report.neighborless_records},
                  {"config", to_json(cfg)}}
                     .dump(2) +
                 "\n");
  stage.commit();
  const auto& last = result.report.epochs.back();
  std::printf("trained %zu epochs in %.1fs, final loss %.4f\n", result.report.epochs.size(), result.report.wall_seconds,
              last.total);
  return 0;
}

int cmd_predict(const fs::path& checkpoint, const fs::path& manifest, const fs::path& out) {
  require_file(checkpoint / "metadata.json", "checkpoint");
  require_file(manifest, "manifest");
  CheckpointMeta meta;
  auto model = load_checkpoint(checkpoint, &meta);
  const auto data = load_dataset(manifest, meta.encoder.image_size, meta.encoder.image_size);
  const auto a = predict(model, data.images);
  AssignmentTable table{{}, data.points(), a.probs, a.labels};
  for (const auto& r : data.records) table.ids.push_back(r.id);
  Staged stage(out);
  save_assignments(stage.path(), table);
  stage.commit();
  std::printf("assigned %zu records to %d clusters\n", table.ids.size(), table.cluster_count());
  return 0;
}

int cmd_evaluate(const Common& common, const fs::path& assignments, const fs::path& truth_path, const fs::path& out) {
  const auto cfg = common.resolve();
  require_file(assignments, "assignments");
  const auto table = load_assignments(assignments);
  const auto truth = read_label_file(truth_path);
  std::set<std::string> names;
  for (const auto& [id, l] : truth.label) names.insert(l);
  const std::vector<std::string> classes(names.begin(), names.end());
  std::vector<int> t;
  for (const auto& id : table.ids) {
    const auto it = truth.label.find(id);
    if (it == truth.label.end()) throw std::runtime_error("record '" + id + "' has no truth label");
    t.push_back(static_cast<int>(std::lower_bound(classes.begin(), classes.end(), it->second) - classes.begin()));
  }
  const int m = std::max(table.cluster_count(), static_cast<int>(classes.size()));
  const auto report = evaluate(table.clusters, t, m, table.points, cfg.eval.moran_threshold,
                               cfg.eval.moran_weights == "truth");
  json doc = report.to_json();
  doc["classes"] = classes;
  doc["records"] = table.ids.size();
  Staged stage(out);
  write_text(stage.path(), doc.dump(2) + "\n");
  stage.commit();
  std::printf("nmi %.4f  ari %.4f  acc %.4f  mf1 %.4f\n", report.nmi, report.ari, report.acc, report.mf1);
  return 0;
}

Image mosaic(const std::vector<Image>& tiles, int per_row) {
  const int n = static_cast<int>(tiles.size());
  if (n == 0) return Image(3, 1, 1);
  const int h = tiles[0].height, w = tiles[0].width, gap = 2;
  const int cols = std::min(n, per_row), rows = (n + per_row - 1) / per_row;
  Image out(3, rows * (h + gap) - gap, cols * (w + gap) - gap);
  out.data.setOnes();
  for (int i = 0; i < n; ++i) {
    const int oy = (i / per_row) * (h + gap), ox = (i % per_row) * (w + gap);
    for (int c = 0; c < 3; ++c)
      for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) out.at(c, oy + y, ox + x) = tiles[static_cast<std::size_t>(i)].at(c, y, x);
  }
  return out;
}

int cmd_representatives(const fs::path& assignments, const fs::path& manifest, int n, const fs::path& out) {
  require_file(assignments, "assignments");
  require_file(manifest, "manifest");
  const auto table = load_assignments(assignments);
  const auto records = load_manifest(manifest);
  std::map<std::string, std::size_t> pos;
  for (std::size_t i = 0; i < records.size(); ++i) pos.emplace(records[i].id, i);
  const auto reps = representatives(table.probs, table.ids, n);
  Staged stage(out);
  fs::create_directories(stage.path());
  json doc = json::array();
  for (std::size_t c = 0; c < reps.size(); ++c) {
    json items = json::array();
    std::vector<Image> tiles;
    for (const auto& r : reps[c]) {
      const auto& id = table.ids[r.record];
      items.push_back({{"record_id", id}, {"confidence", r.confidence}});
      const auto it = pos.find(id);
      if (it == pos.end()) throw std::runtime_error("record '" + id + "' is not in the manifest");
      tiles.push_back(read_png(manifest.parent_path() / records[it->second].image_path));
    }
    char name[32];
    std::snprintf(name, sizeof(name), "cluster_%02zu.png", c);
    write_png(stage.path() / name, mosaic(tiles, 6));
    doc.push_back({{"cluster_id", c}, {"representatives", items}, {"mosaic", name}});
  }
  write_text(stage.path() / "representatives.json", doc.dump(2) + "\n");
  stage.commit();
  std::printf("wrote %zu cluster mosaics to %s\n", reps.size(), out.c_str());
  return 0;
}

int cmd_map(const Common& common, const fs::path& assignments, const fs::path& labelmap, const fs::path& out,
            const fs::path& png, std::optional<double> cell) {
  const auto cfg = common.resolve();
  require_file(assignments, "assignments");
  const auto table = load_assignments(assignments);
  LabelMap map = LabelMap::identity(table.cluster_count());
  if (!labelmap.empty()) {
    require_file(labelmap, "label map");
    map = LabelMap::load(labelmap);
  }
  map.require_total(table.cluster_count());
  const auto spec = GridSpec::covering(table.points, cell.value_or(cfg.map.cell_size));
  const auto grid = grid_map(table.points, apply_label_map(table.probs, map), spec);
  Staged stage(out);
  std::optional<Staged> png_stage;
  if (!png.empty()) {
    png_stage.emplace(png);
    write_png(png_stage->path(), render_grid(grid, map));
  }
  write_text(stage.path(), export_geojson(grid, map).dump() + "\n");
  stage.commit();
  if (png_stage) png_stage->commit();
  std::printf("grid %dx%d cells of %.0f m\n", spec.cols, spec.rows, spec.cell_size);
  return 0;
}

int cmd_ksweep(const Common& common, const std::vector<int>& ks, int seeds, const fs::path& out) {
  const auto cfg = common.resolve();
  if (ks.empty()) throw std::invalid_argument("--k needs at least one value");
  if (seeds < 2) throw std::invalid_argument("--seeds must be >= 2 for a standard deviation");
  const auto rows = k_sweep(cfg.resolved_city(), cfg.resolved_train(), cfg.resolved_encoder(), ks, seeds);
  Staged stage(out);
  write_text(stage.path(), k_sweep_csv(rows));
  stage.commit();
  for (const auto& r : rows) std::printf("K=%d mean_acc %.4f std %.4f\n", r.k, r.mean_acc, r.std_acc);
  return 0;
}

int cmd_serve(const Common& common, const fs::path& assignments, const fs::path& manifest, const fs::path& workdir,
              const std::string& checkpoint, const std::string& host, int port) {
  const auto cfg = common.resolve();
  require_file(assignments, "assignments");
  require_file(manifest, "manifest");
  Service service({assignments, manifest, workdir, checkpoint, cfg.map.cell_size});
  std::thread announce([&] {
    for (int i = 0; i < 200 && service.bound_port() == 0; ++i) std::this_thread::sleep_for(std::chrono::milliseconds(10));
    std::printf("serving on http://%s:%d\n", host.c_str(), service.bound_port());
    std::fflush(stdout);
  });
  const bool ok = service.listen(host, port);
  announce.join();
  if (!ok) throw std::runtime_error("cannot listen on " + host + ":" + std::to_string(port));
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Contrastive clustering with a geographical prior for street-level imagery"};
  app.require_subcommand(1);
  Common common;
  auto add_common = [&](CLI::App* sub) {
    sub->add_option("-c,--config", common.config_path, "JSON pipeline config");
    sub->add_option("--set", common.overrides, "override a config key, e.g. train.epochs=10")->take_all();
    sub->add_option("--seed", common.seed, "master seed (overrides the config)");
  };

  fs::path out, manifest, assignments, truth, checkpoint, labelmap, png, workdir = "serve";
  std::optional<double> eps, cell;
  int top_n = 12, seeds = 5, port = 8080;
  std::vector<int> ks{1, 5, 10, 20, 50};
  std::string host = "127.0.0.1";

  auto* synth = app.add_subcommand("synth", "generate a synthetic city");
  add_common(synth);
  synth->add_option("--out", out, "output directory")->required();

  auto* dedupe = app.add_subcommand("dedupe", "drop near-duplicate locations from a manifest");
  add_common(dedupe);
  dedupe->add_option("--manifest", manifest)->required();
  dedupe->add_option("--out", out, "output manifest")->required();
  dedupe->add_option("--eps", eps, "merge radius in meters");

  auto* trn = app.add_subcommand("train", "train the clustering model");
  add_common(trn);
  trn->add_option("--manifest", manifest)->required();
  trn->add_option("--out", out, "checkpoint directory")->required();

  auto* pred = app.add_subcommand("predict", "assign records to clusters");
  pred->add_option("--checkpoint", checkpoint)->required();
  pred->add_option("--manifest", manifest)->required();
  pred->add_option("--out", out, "assignments (JSON Lines)")->required();

  auto* eval = app.add_subcommand("evaluate", "score assignments against truth labels");
  add_common(eval);
  eval->add_option("--assignments", assignments)->required();
  eval->add_option("--truth", truth, "manifest with labels, or another assignments file")->required();
  eval->add_option("--out", out, "metrics report")->required();

  auto* reps = app.add_subcommand("representatives", "top-n images per cluster");
  reps->add_option("--assignments", assignments)->required();
  reps->add_option("--manifest", manifest)->required();
  reps->add_option("-n", top_n)->check(CLI::PositiveNumber);
  reps->add_option("--out", out, "output directory")->required();

  auto* mp = app.add_subcommand("map", "grid map from assignments and a label map");
  add_common(mp);
  mp->add_option("--assignments", assignments)->required();
  mp->add_option("--labelmap", labelmap, "cluster -> category map (identity when omitted)");
  mp->add_option("--out", out, "GeoJSON output")->required();
  mp->add_option("--png", png, "optional raster preview");
  mp->add_option("--cell-size", cell);

  auto* ksw = app.add_subcommand("ksweep", "neighbor-count sensitivity over seeds");
  add_common(ksw);
  ksw->add_option("--k", ks)->delimiter(',');
  ksw->add_option("--seeds", seeds);
  ksw->add_option("--out", out, "CSV output")->required();

  auto* srv = app.add_subcommand("serve", "HTTP service for the labeling UI");
  add_common(srv);
  srv->add_option("--assignments", assignments)->required();
  srv->add_option("--manifest", manifest)->required();
  srv->add_option("--workdir", workdir, "where labelmap.json and map.geojson are kept");
  srv->add_option("--checkpoint", checkpoint, "reported by /api/status");
  srv->add_option("--host", host);
  srv->add_option("--port", port, "0 picks a free port");

  CLI11_PARSE(app, argc, argv);
  try {
    if (*synth) return cmd_synth(common, out);
    if (*dedupe) return cmd_dedupe(common, manifest, out, eps);
    if (*trn) return cmd_train(common, manifest, out);
    if (*pred) return cmd_predict(checkpoint, manifest, out);
    if (*eval) return cmd_evaluate(common, assignments, truth, out);
    if (*reps) return cmd_representatives(assignments, manifest, top_n, out);
    if (*mp) return cmd_map(common, assignments, labelmap, out, png, cell);
    if (*ksw) return cmd_ksweep(common, ks, seeds, out);
    if (*srv) return cmd_serve(common, assignments, manifest, workdir, checkpoint.string(), host, port);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 1;
}
