#include "ccgp/trainer.hpp"

#include "ccgp/adam.hpp"
#include "ccgp/config.hpp"

#include <algorithm>
#include <bit>
#include <chrono>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numeric>
#include <sstream>
#include <stdexcept>

namespace ccgp {

using json = nlohmann::json;

void TrainConfig::validate() const {
  if (clusters < 2) throw std::invalid_argument("train: clusters must be >= 2");
  if (neighbors < 1) throw std::invalid_argument("train: K must be >= 1");
  if (!(max_distance > 0.0)) throw std::invalid_argument("train: d must be positive");
  if (batch_size < 2) throw std::invalid_argument("train: batch size must be >= 2");
  if (epochs < 1) throw std::invalid_argument("train: epochs must be >= 1");
  if (!(learning_rate > 0.0)) throw std::invalid_argument("train: learning rate must be positive");
  if (!(weight_decay >= 0.0)) throw std::invalid_argument("train: weight decay must be >= 0");
  loss.validate();
}

std::size_t NeighborTable::neighborless_count() const {
  return static_cast<std::size_t>(std::count_if(rows.begin(), rows.end(), [](const auto& r) { return r.empty(); }));
}

NeighborTable cache_neighbors(std::span<const ProjectedPoint> points, int k, double max_distance) {
  if (k < 1) throw std::invalid_argument("cache_neighbors: K must be >= 1");
  NeighborTable table;
  if (points.empty()) return table;
  const SpatialIndex index(points);
  table.rows.reserve(points.size());
  for (std::size_t i = 0; i < points.size(); ++i)
    table.rows.push_back(index.knn(i, static_cast<std::size_t>(k), max_distance));
  return table;
}

Batch make_batch(std::span<const Image> images, const NeighborTable& table, std::span<const std::size_t> batch_ids,
                 int epoch, const TrainConfig& config) {
  const auto b = batch_ids.size();
  Batch batch;
  batch.anchors.assign(batch_ids.begin(), batch_ids.end());
  batch.partners.resize(b);
  batch.views.resize(2 * b);
  batch.positives.resize(2 * b);
  const auto e = static_cast<std::uint64_t>(epoch);
  for (std::size_t i = 0; i < b; ++i) {
    const auto anchor = batch_ids[i];
    if (anchor >= images.size() || anchor >= table.size()) throw std::out_of_range("make_batch: record out of range");
    std::size_t partner = anchor;
    if (!config.cc_baseline_mode && !table.neighborless(anchor)) {
      const auto& row = table.rows[anchor];
      Rng pick(mix_seed({config.seed, e, anchor, 0x5a3b}));
      partner = static_cast<std::size_t>(row[uniform_index(pick, row.size())].id);
    } else {
      ++batch.fallback_count;
    }
    batch.partners[i] = partner;
    // View 0 is the anchor's draw, view 1 the partner's (a second draw when
    // the partner is the anchor itself).
    batch.views[i] = augment(images[anchor], config.augmentation, AugmentSeed{config.seed, e, anchor, 0});
    batch.views[b + i] = augment(images[partner], config.augmentation, AugmentSeed{config.seed, e, anchor, 1});
    batch.positives[i] = {static_cast<int>(b + i)};
    batch.positives[b + i] = {static_cast<int>(i)};
  }
  return batch;
}

template <typename Scalar>
StepLoss loss_and_gradient(Model<Scalar>& model, const nn::Tensor<Scalar>& views, const PositiveStructure& positives,
                           const LossConfig& loss) {
  using M = LossMat<Scalar>;
  const auto out = model.forward(views, true);
  const Eigen::Index b = out.q.rows() / 2;
  M dz, dqa, dqn, dqe;
  StepLoss s;
  s.sich = static_cast<double>(sich_loss<Scalar>(out.z, positives, loss.tau_instance, &dz));
  const M qa = out.q.topRows(b), qn = out.q.bottomRows(b);
  s.scch = static_cast<double>(scch_loss<Scalar>(qa, qn, loss.tau_cluster, loss.scch_symmetrize, &dqa, &dqn));
  s.entropy = static_cast<double>(entropy_reg<Scalar>(out.q, loss.entropy_form, &dqe));
  s.total = total_loss(s.sich, s.scch, s.entropy, loss.lambda, loss.eta);

  M dq = static_cast<Scalar>(loss.eta) * dqe;
  dq.topRows(b) += static_cast<Scalar>(loss.lambda) * dqa;
  dq.bottomRows(b) += static_cast<Scalar>(loss.lambda) * dqn;
  model.zero_grad();
  model.backward(dz, dq);
  return s;
}

template StepLoss loss_and_gradient<float>(Model<float>&, const nn::Tensor<float>&, const PositiveStructure&,
                                           const LossConfig&);
template StepLoss loss_and_gradient<double>(Model<double>&, const nn::Tensor<double>&, const PositiveStructure&,
                                            const LossConfig&);

namespace {

[[noreturn]] void abort_non_finite(const TrainConfig& config, const Dataset& data, const Batch& batch, int epoch,
                                   int step, const std::string& what) {
  json dump = {{"epoch", epoch}, {"step", step}, {"error", what}};
  json ids = json::array();
  for (std::size_t i = 0; i < batch.anchors.size(); ++i)
    ids.push_back({{"anchor", data.records[batch.anchors[i]].id}, {"positive", data.records[batch.partners[i]].id}});
  dump["pairs"] = ids;
  std::string where;
  if (config.checkpoint_dir) {
    std::filesystem::create_directories(*config.checkpoint_dir);
    const auto path = *config.checkpoint_dir / "nonfinite_batch.json";
    std::ofstream(path) << dump.dump(2) << '\n';
    where = " (batch dumped to " + path.string() + ")";
  }
  throw std::runtime_error("training aborted at epoch " + std::to_string(epoch) + ", step " + std::to_string(step) +
                           ": " + what + where);
}

}  // namespace

TrainResult train(const TrainConfig& config, const EncoderConfig& encoder_config, const Dataset& data) {
  config.validate();
  EncoderConfig enc = encoder_config;
  enc.clusters = config.clusters;
  if (data.size() < static_cast<std::size_t>(config.batch_size))
    throw std::invalid_argument("train: dataset has fewer records than one batch");
  if (data.images.size() != data.records.size()) throw std::invalid_argument("train: images not loaded");

  const auto start = std::chrono::steady_clock::now();
  TrainResult result{Model<float>(enc, config.seed), {}};
  Model<float>& model = result.model;
  Adam<float> optimizer(config.learning_rate, config.weight_decay);

  const auto points = data.points();
  const NeighborTable table = cache_neighbors(points, config.neighbors, config.max_distance);
  result.report.neighborless_records = table.neighborless_count();

  const std::uint64_t data_hash = data.hash();
  std::vector<std::size_t> order(data.size());
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng shuffler(mix_seed({config.seed, static_cast<std::uint64_t>(epoch), 0x5b0f}));
    shuffle(order.begin(), order.end(), shuffler);

    EpochStats stats;
    for (std::size_t begin = 0; begin + 1 < order.size(); begin += static_cast<std::size_t>(config.batch_size)) {
      const auto end = std::min(order.size(), begin + static_cast<std::size_t>(config.batch_size));
      if (end - begin < 2) break;
      const std::span<const std::size_t> ids(order.data() + begin, end - begin);
      const Batch batch = make_batch(data.images, table, ids, epoch, config);

      std::vector<const Image*> ptrs;
      ptrs.reserve(batch.views.size());
      for (const auto& v : batch.views) ptrs.push_back(&v);
      StepLoss s;
      try {
        s = loss_and_gradient(model, model.pack(ptrs), batch.positives, config.loss);
      } catch (const std::domain_error& e) {
        abort_non_finite(config, data, batch, epoch, stats.steps, e.what());
      }
      optimizer.step(model.parameters());

      stats.sich += s.sich;
      stats.scch += s.scch;
      stats.entropy += s.entropy;
      stats.total += s.total;
      stats.fallback_positives += batch.fallback_count;
      ++stats.steps;
    }
    if (stats.steps > 0) {
      const double n = stats.steps;
      stats.sich /= n;
      stats.scch /= n;
      stats.entropy /= n;
      stats.total /= n;
    }
    result.report.epochs.push_back(stats);

    if (config.checkpoint_dir) {
      CheckpointMeta meta{enc, config, epoch + 1, data_hash, config_hash(to_json(config))};
      save_checkpoint(*config.checkpoint_dir, model, meta);
      result.report.checkpoint = *config.checkpoint_dir;
    }
  }
  result.report.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return result;
}

AssignmentMatrix predict(Model<float>& model, std::span<const Image> images, int chunk) {
  const int m = model.config().clusters;
  AssignmentMatrix out;
  out.probs.resize(static_cast<Eigen::Index>(images.size()), m);
  out.labels.resize(images.size());
  std::vector<const Image*> ptrs;
  for (std::size_t begin = 0; begin < images.size(); begin += static_cast<std::size_t>(chunk)) {
    const auto end = std::min(images.size(), begin + static_cast<std::size_t>(chunk));
    ptrs.clear();
    for (auto i = begin; i < end; ++i) ptrs.push_back(&images[i]);
    const auto q = model.forward(ptrs, false).q;
    for (auto i = begin; i < end; ++i) {
      const auto r = static_cast<Eigen::Index>(i - begin);
      int best = 0;
      for (int c = 0; c < m; ++c) {
        out.probs(static_cast<Eigen::Index>(i), c) = static_cast<double>(q(r, c));
        if (q(r, c) > q(r, best)) best = c;
      }
      out.labels[i] = best;
    }
  }
  return out;
}

void save_checkpoint(const std::filesystem::path& dir, Model<float>& model, const CheckpointMeta& meta) {
  static_assert(std::endian::native == std::endian::little, "checkpoint format assumes a little-endian host");
  std::filesystem::create_directories(dir);
  const auto state = model.state();
  {
    std::ofstream out(dir / "weights.bin", std::ios::binary);
    if (!out) throw std::runtime_error("cannot write checkpoint to " + dir.string());
    out.write(reinterpret_cast<const char*>(state.data()), static_cast<std::streamsize>(state.size() * sizeof(double)));
  }
  char hash[17];
  std::snprintf(hash, sizeof(hash), "%016llx", static_cast<unsigned long long>(meta.dataset_hash));
  const json doc = {{"config", {{"model", to_json(meta.encoder)}, {"train", to_json(meta.train)}}},
                    {"M", meta.encoder.clusters},
                    {"epoch", meta.epoch},
                    {"dataset_hash", hash},
                    {"seed", meta.train.seed},
                    {"config_hash", meta.config_hash},
                    {"state_size", state.size()}};
  std::ofstream(dir / "metadata.json") << doc.dump(2) << '\n';
}

Model<float> load_checkpoint(const std::filesystem::path& dir, CheckpointMeta* meta) {
  std::ifstream meta_in(dir / "metadata.json");
  if (!meta_in) throw std::runtime_error("no checkpoint metadata in " + dir.string());
  const json doc = json::parse(meta_in);
  CheckpointMeta m;
  m.encoder = encoder_config_from_json(doc.at("config").at("model"));
  m.train = train_config_from_json(doc.at("config").at("train"));
  m.epoch = doc.at("epoch");
  m.dataset_hash = std::stoull(doc.at("dataset_hash").get<std::string>(), nullptr, 16);
  m.config_hash = doc.at("config_hash");

  const auto bytes = read_file_bytes(dir / "weights.bin");
  if (bytes.size() % sizeof(double) != 0) throw std::runtime_error("corrupt checkpoint weights");
  std::vector<double> state(bytes.size() / sizeof(double));
  std::memcpy(state.data(), bytes.data(), bytes.size());
  Model<float> model(m.encoder, m.train.seed);
  model.load_state(state);
  if (meta) *meta = m;
  return model;
}

}  // namespace ccgp
