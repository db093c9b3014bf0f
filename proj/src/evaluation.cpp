#include "ccgp/evaluation.hpp"

#include "ccgp/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

namespace ccgp {

namespace {

void check_pair(std::span<const int> pred, std::span<const int> truth) {
  if (pred.size() != truth.size()) throw std::invalid_argument("label vectors differ in length");
  if (pred.empty()) throw std::invalid_argument("label vectors are empty");
  for (std::size_t i = 0; i < pred.size(); ++i)
    if (pred[i] < 0 || truth[i] < 0) throw std::invalid_argument("labels must be nonnegative");
}

int label_count(std::span<const int> labels) { return *std::max_element(labels.begin(), labels.end()) + 1; }

double comb2(double n) { return n * (n - 1.0) / 2.0; }

}  // namespace

Eigen::MatrixXi contingency(std::span<const int> pred, std::span<const int> truth, int rows, int cols) {
  Eigen::MatrixXi t = Eigen::MatrixXi::Zero(rows, cols);
  for (std::size_t i = 0; i < pred.size(); ++i) {
    if (pred[i] >= rows || truth[i] >= cols) throw std::invalid_argument("label outside contingency table");
    ++t(pred[i], truth[i]);
  }
  return t;
}

double nmi(std::span<const int> pred, std::span<const int> truth) {
  check_pair(pred, truth);
  const Eigen::MatrixXi t = contingency(pred, truth, label_count(pred), label_count(truth));
  const double n = static_cast<double>(pred.size());
  const Eigen::VectorXd a = t.rowwise().sum().cast<double>();
  const Eigen::VectorXd b = t.colwise().sum().transpose().cast<double>();
  auto entropy = [n](const Eigen::VectorXd& counts) {
    double h = 0.0;
    for (double c : counts)
      if (c > 0) h -= c / n * std::log(c / n);
    return h;
  };
  const double ha = entropy(a), hb = entropy(b);
  if (ha == 0.0 && hb == 0.0) return 1.0;
  double mi = 0.0;
  for (Eigen::Index i = 0; i < t.rows(); ++i)
    for (Eigen::Index j = 0; j < t.cols(); ++j)
      if (t(i, j) > 0) {
        const double nij = t(i, j);
        mi += nij / n * std::log(nij * n / (a(i) * b(j)));
      }
  return std::clamp(mi / (0.5 * (ha + hb)), 0.0, 1.0);
}

double ari(std::span<const int> pred, std::span<const int> truth) {
  check_pair(pred, truth);
  const Eigen::MatrixXi t = contingency(pred, truth, label_count(pred), label_count(truth));
  double index = 0.0;
  for (Eigen::Index i = 0; i < t.size(); ++i) index += comb2(t.data()[i]);
  double sa = 0.0, sb = 0.0;
  for (Eigen::Index i = 0; i < t.rows(); ++i) sa += comb2(t.row(i).sum());
  for (Eigen::Index j = 0; j < t.cols(); ++j) sb += comb2(t.col(j).sum());
  const double total = comb2(static_cast<double>(pred.size()));
  const double expected = total > 0 ? sa * sb / total : 0.0;
  const double max_index = 0.5 * (sa + sb);
  if (max_index == expected) return 1.0;
  return (index - expected) / (max_index - expected);
}

std::vector<int> hungarian_max(const Eigen::MatrixXi& weights) {
  const int n = static_cast<int>(weights.rows());
  if (weights.cols() != n) throw std::invalid_argument("hungarian: matrix must be square");
  if (n == 0) return {};
  const long long top = weights.maxCoeff();
  // Shortest augmenting path formulation on costs top - w (1-indexed potentials).
  constexpr long long kInf = std::numeric_limits<long long>::max() / 4;
  std::vector<long long> u(n + 1, 0), v(n + 1, 0), way(n + 1, 0);
  std::vector<int> p(n + 1, 0);
  for (int i = 1; i <= n; ++i) {
    p[0] = i;
    int j0 = 0;
    std::vector<long long> minv(n + 1, kInf);
    std::vector<bool> used(n + 1, false);
    do {
      used[j0] = true;
      const int i0 = p[j0];
      long long delta = kInf;
      int j1 = 0;
      for (int j = 1; j <= n; ++j) {
        if (used[j]) continue;
        const long long cur = (top - weights(i0 - 1, j - 1)) - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (int j = 0; j <= n; ++j) {
        if (used[j]) {
          u[p[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (p[j0] != 0);
    do {
      const int j1 = static_cast<int>(way[j0]);
      p[j0] = p[j1];
      j0 = j1;
    } while (j0 != 0);
  }
  std::vector<int> assignment(static_cast<std::size_t>(n));
  for (int j = 1; j <= n; ++j) assignment[static_cast<std::size_t>(p[j] - 1)] = j - 1;
  return assignment;
}

Alignment hungarian_align(std::span<const int> pred, std::span<const int> truth, int m) {
  check_pair(pred, truth);
  if (label_count(pred) > m || label_count(truth) > m)
    throw std::invalid_argument("hungarian_align: labels exceed M = " + std::to_string(m));
  const Eigen::MatrixXi t = contingency(pred, truth, m, m);
  Alignment out;
  out.mapping = hungarian_max(t);
  std::size_t matched = 0;
  out.confusion = Eigen::MatrixXi::Zero(m, m);
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const int mapped = out.mapping[static_cast<std::size_t>(pred[i])];
    ++out.confusion(truth[i], mapped);
    if (mapped == truth[i]) ++matched;
  }
  out.acc = static_cast<double>(matched) / static_cast<double>(pred.size());
  out.per_class_f1.assign(static_cast<std::size_t>(m), 0.0);
  int present = 0;
  double sum = 0.0;
  for (int c = 0; c < m; ++c) {
    const double tp = out.confusion(c, c);
    const double support = out.confusion.row(c).sum();
    const double predicted = out.confusion.col(c).sum();
    const double f1 = (support + predicted) > 0 ? 2.0 * tp / (support + predicted) : 0.0;
    out.per_class_f1[static_cast<std::size_t>(c)] = f1;
    if (support > 0) {
      sum += f1;
      ++present;
    }
  }
  out.mf1 = present > 0 ? sum / present : 0.0;
  return out;
}

std::vector<NeighborRow> moran_neighbors(std::span<const ProjectedPoint> coords, double threshold) {
  std::vector<NeighborRow> rows(coords.size());
  if (coords.empty()) return rows;
  const SpatialIndex index(coords);
  for (std::size_t i = 0; i < coords.size(); ++i) {
    for (const auto& n : index.within(coords[i], threshold))
      if (n.id != i && n.distance > 0.0) rows[i].push_back(n);
  }
  return rows;
}

double morans_i(std::span<const double> values, const std::vector<NeighborRow>& neighbors) {
  const std::size_t n = values.size();
  if (n < 2) throw std::invalid_argument("Moran's I needs at least two observations");
  if (neighbors.size() != n) throw std::invalid_argument("Moran's I: neighbor lists do not match values");
  double mean = 0.0;
  for (double v : values) mean += v;
  mean /= static_cast<double>(n);
  double den = 0.0;
  for (double v : values) den += (v - mean) * (v - mean);
  if (!(den > 0.0)) throw std::domain_error("undefined Moran's I: values have zero variance");
  double num = 0.0, w_sum = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    double row = 0.0;
    for (const auto& nb : neighbors[i]) {
      const double w = 1.0 / nb.distance;
      w_sum += w;
      row += w * (values[static_cast<std::size_t>(nb.id)] - mean);
    }
    num += (values[i] - mean) * row;
  }
  if (!(w_sum > 0.0)) throw std::domain_error("undefined Moran's I: no pairs within the distance threshold");
  return static_cast<double>(n) / w_sum * num / den;
}

double morans_i(std::span<const double> values, std::span<const ProjectedPoint> coords, double threshold) {
  if (values.size() != coords.size()) throw std::invalid_argument("Moran's I: values and coordinates differ in length");
  return morans_i(values, moran_neighbors(coords, threshold));
}

double weighted_morans_i(std::span<const int> labels, const std::vector<NeighborRow>& neighbors, int m,
                         std::optional<std::span<const int>> weight_labels) {
  const std::size_t n = labels.size();
  if (weight_labels && weight_labels->size() != n) throw std::invalid_argument("weight labels differ in length");
  std::vector<std::size_t> counts(static_cast<std::size_t>(m), 0), weights(static_cast<std::size_t>(m), 0);
  for (std::size_t i = 0; i < n; ++i) {
    if (labels[i] < 0 || labels[i] >= m) throw std::invalid_argument("weighted Moran's I: label outside [0, M)");
    ++counts[static_cast<std::size_t>(labels[i])];
    const int w = weight_labels ? (*weight_labels)[i] : labels[i];
    if (w >= 0 && w < m) ++weights[static_cast<std::size_t>(w)];
  }
  const auto present = std::count_if(counts.begin(), counts.end(), [](std::size_t c) { return c > 0; });
  if (present < 2) throw std::domain_error("weighted Moran's I needs at least two classes present");

  std::vector<double> indicator(n);
  double acc = 0.0, weight_total = 0.0;
  for (int c = 0; c < m; ++c) {
    const auto cnt = counts[static_cast<std::size_t>(c)];
    const double w = static_cast<double>(weights[static_cast<std::size_t>(c)]);
    if (w == 0.0) continue;
    if (cnt == 0 || cnt == n) {
      warn("weighted Moran's I: class " + std::to_string(c) + " has a constant indicator; skipped");
      continue;
    }
    for (std::size_t i = 0; i < n; ++i) indicator[i] = labels[i] == c ? 1.0 : 0.0;
    acc += w * morans_i(indicator, neighbors);
    weight_total += w;
  }
  if (!(weight_total > 0.0)) throw std::domain_error("weighted Moran's I: no class contributed");
  return acc / weight_total;
}

double weighted_morans_i(std::span<const int> labels, std::span<const ProjectedPoint> coords, int m, double threshold,
                         std::optional<std::span<const int>> weight_labels) {
  if (labels.size() != coords.size()) throw std::invalid_argument("labels and coordinates differ in length");
  return weighted_morans_i(labels, moran_neighbors(coords, threshold), m, weight_labels);
}

nlohmann::json MetricsReport::to_json() const {
  nlohmann::json confusion_rows = nlohmann::json::array();
  for (Eigen::Index i = 0; i < confusion.rows(); ++i) {
    std::vector<int> row(static_cast<std::size_t>(confusion.cols()));
    for (Eigen::Index j = 0; j < confusion.cols(); ++j) row[static_cast<std::size_t>(j)] = confusion(i, j);
    confusion_rows.push_back(row);
  }
  return {{"nmi", nmi},
          {"ari", ari},
          {"acc", acc},
          {"mf1", mf1},
          {"moran_weighted", moran_weighted ? nlohmann::json(*moran_weighted) : nlohmann::json(nullptr)},
          {"per_class_f1", per_class_f1},
          {"confusion_matrix", confusion_rows},
          {"mapping", mapping}};
}

MetricsReport evaluate(std::span<const int> pred, std::span<const int> truth, int m,
                       std::span<const ProjectedPoint> coords, double moran_threshold, bool moran_weights_from_truth) {
  MetricsReport r;
  r.nmi = nmi(pred, truth);
  r.ari = ari(pred, truth);
  const Alignment a = hungarian_align(pred, truth, m);
  r.acc = a.acc;
  r.mf1 = a.mf1;
  r.per_class_f1 = a.per_class_f1;
  r.confusion = a.confusion;
  r.mapping = a.mapping;
  if (!coords.empty()) {
    try {
      if (moran_weights_from_truth) {
        // Score the aligned labeling so class ids are comparable with the truth weights.
        std::vector<int> mapped(pred.size());
        for (std::size_t i = 0; i < pred.size(); ++i) mapped[i] = a.mapping[static_cast<std::size_t>(pred[i])];
        r.moran_weighted = weighted_morans_i(mapped, coords, m, moran_threshold, truth);
      } else {
        r.moran_weighted = weighted_morans_i(pred, coords, m, moran_threshold);
      }
    } catch (const std::domain_error& e) {
      warn(std::string("Moran's I not reported: ") + e.what());
    }
  }
  return r;
}

}  // namespace ccgp
