#include "ccgp/experiment.hpp"

#include <cmath>
#include <cstdio>
#include <sstream>

namespace ccgp {

RunResult run_on_city(const SyntheticCity& city, const TrainConfig& train_config, const EncoderConfig& encoder,
                      double moran_threshold) {
  auto trained = train(train_config, encoder, city.data);
  RunResult r;
  r.report = std::move(trained.report);
  r.assignments = predict(trained.model, city.data.images);
  const auto points = city.data.points();
  const int m = std::max(train_config.clusters, city.spec.categories);
  r.metrics = evaluate(r.assignments.labels, city.categories, m, points, moran_threshold);
  return r;
}

std::vector<KSweepRow> k_sweep(const SyntheticCitySpec& city_spec, const TrainConfig& base, const EncoderConfig& encoder,
                               const std::vector<int>& ks, int seeds) {
  std::vector<KSweepRow> rows;
  for (int k : ks) {
    KSweepRow row;
    row.k = k;
    for (int s = 0; s < seeds; ++s) {
      SyntheticCitySpec spec = city_spec;
      spec.seed = city_spec.seed + static_cast<std::uint64_t>(s);
      const auto city = generate_city(spec);
      TrainConfig cfg = base;
      cfg.neighbors = k;
      cfg.seed = base.seed + static_cast<std::uint64_t>(s);
      row.acc.push_back(run_on_city(city, cfg, encoder).metrics.acc);
    }
    double mean = 0.0;
    for (double a : row.acc) mean += a;
    mean /= static_cast<double>(row.acc.size());
    double var = 0.0;
    for (double a : row.acc) var += (a - mean) * (a - mean);
    row.mean_acc = mean;
    row.std_acc = row.acc.size() > 1 ? std::sqrt(var / static_cast<double>(row.acc.size() - 1)) : 0.0;
    rows.push_back(std::move(row));
  }
  return rows;
}

std::string k_sweep_csv(const std::vector<KSweepRow>& rows) {
  std::ostringstream out;
  out << "k,mean_acc,std_acc,seeds";
  std::size_t max_seeds = 0;
  for (const auto& r : rows) max_seeds = std::max(max_seeds, r.acc.size());
  for (std::size_t s = 0; s < max_seeds; ++s) out << ",acc_seed" << s;
  out << '\n';
  char buf[64];
  for (const auto& r : rows) {
    out << r.k;
    std::snprintf(buf, sizeof(buf), ",%.6f,%.6f,%zu", r.mean_acc, r.std_acc, r.acc.size());
    out << buf;
    for (double a : r.acc) {
      std::snprintf(buf, sizeof(buf), ",%.6f", a);
      out << buf;
    }
    out << '\n';
  }
  return out.str();
}

std::vector<int> majority_label_map(std::span<const int> clusters, std::span<const int> truth, int m, int classes) {
  const Eigen::MatrixXi t = contingency(clusters, truth, m, classes);
  std::vector<int> map(static_cast<std::size_t>(m), 0);
  for (int c = 0; c < m; ++c) {
    Eigen::Index best = 0;
    t.row(c).maxCoeff(&best);
    map[static_cast<std::size_t>(c)] = static_cast<int>(best);
  }
  return map;
}

}  // namespace ccgp
