#pragma once
// Slow, literal reference implementations. They deliberately share no code
// with the library: plain loops over std::vector, double precision throughout.

#include "ccgp/geo.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <set>
#include <utility>
#include <vector>

namespace oracle {

using Rows = std::vector<std::vector<double>>;

inline double dot(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) s += a[k] * b[k];
  return s;
}

// For each anchor i: mean over positives p of
//   -log( exp(z_i.z_p / t) / sum_{a != i} exp(z_i.z_a / t) ),
// summed over anchors and divided by the anchor count.
inline double sich(const Rows& z, const std::vector<std::vector<int>>& pos, double t) {
  const std::size_t v = z.size();
  double total = 0.0;
  for (std::size_t i = 0; i < v; ++i) {
    double denom = 0.0;
    for (std::size_t a = 0; a < v; ++a)
      if (a != i) denom += std::exp(dot(z[i], z[a]) / t);
    double anchor = 0.0;
    for (int p : pos[i]) anchor += -std::log(std::exp(dot(z[i], z[static_cast<std::size_t>(p)]) / t) / denom);
    total += anchor / static_cast<double>(pos[i].size());
  }
  return total / static_cast<double>(v);
}

inline Rows unit_columns_as_rows(const Rows& q) {
  const std::size_t b = q.size(), m = q[0].size();
  Rows cols(m, std::vector<double>(b));
  for (std::size_t c = 0; c < m; ++c) {
    double n = 0.0;
    for (std::size_t r = 0; r < b; ++r) n += q[r][c] * q[r][c];
    n = std::sqrt(n);
    for (std::size_t r = 0; r < b; ++r) cols[c][r] = q[r][c] / n;
  }
  return cols;
}

// Column i of A against every column of N; the positive is column i of N.
inline double scch_one_way(const Rows& qa, const Rows& qn, double t) {
  const Rows a = unit_columns_as_rows(qa), n = unit_columns_as_rows(qn);
  const std::size_t m = a.size();
  double total = 0.0;
  for (std::size_t i = 0; i < m; ++i) {
    double denom = 0.0;
    for (std::size_t j = 0; j < m; ++j) denom += std::exp(dot(a[i], n[j]) / t);
    total += -std::log(std::exp(dot(a[i], n[i]) / t) / denom);
  }
  return total / static_cast<double>(m);
}

inline double scch(const Rows& qa, const Rows& qn, double t, bool symmetrize) {
  const double forward = scch_one_way(qa, qn, t);
  return symmetrize ? 0.5 * (forward + scch_one_way(qn, qa, t)) : forward;
}

inline double entropy(const Rows& q, bool paper_form) {
  const std::size_t m = q[0].size();
  std::vector<double> col(m, 0.0);
  double total = 0.0;
  for (const auto& row : q)
    for (std::size_t c = 0; c < m; ++c) {
      col[c] += row[c];
      total += row[c];
    }
  double s = 0.0;
  for (double c : col) {
    const double z = c / total;
    if (z > 0.0) s += z * std::log(z);
  }
  const double log_m = std::log(static_cast<double>(m));
  return paper_form ? log_m - s / static_cast<double>(m) : log_m + s;
}

// Literal Moran's I double loop with w = 1/d for 0 < d <= threshold.
inline double morans_i(const std::vector<double>& x, const std::vector<ccgp::ProjectedPoint>& p, double threshold) {
  const std::size_t n = x.size();
  double mean = 0.0;
  for (double v : x) mean += v;
  mean /= static_cast<double>(n);
  double num = 0.0, w_sum = 0.0, var = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    var += (x[i] - mean) * (x[i] - mean);
    for (std::size_t j = 0; j < n; ++j) {
      if (i == j) continue;
      const double d = std::hypot(p[i].x - p[j].x, p[i].y - p[j].y);
      if (d <= 0.0 || d > threshold) continue;
      const double w = 1.0 / d;
      num += w * (x[i] - mean) * (x[j] - mean);
      w_sum += w;
    }
  }
  return static_cast<double>(n) / w_sum * num / var;
}

// Best accuracy over all injective relabelings pred -> truth (M! permutations).
inline double permutation_acc(const std::vector<int>& pred, const std::vector<int>& truth, int m) {
  std::vector<int> perm(static_cast<std::size_t>(m));
  std::iota(perm.begin(), perm.end(), 0);
  std::size_t best = 0;
  do {
    std::size_t hits = 0;
    for (std::size_t i = 0; i < pred.size(); ++i)
      if (perm[static_cast<std::size_t>(pred[i])] == truth[i]) ++hits;
    best = std::max(best, hits);
  } while (std::next_permutation(perm.begin(), perm.end()));
  return static_cast<double>(best) / static_cast<double>(pred.size());
}

// Adjusted Rand index by explicit enumeration of all point pairs.
inline double pair_counting_ari(const std::vector<int>& a, const std::vector<int>& b) {
  const std::size_t n = a.size();
  double both = 0, only_a = 0, only_b = 0, neither = 0;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) {
      const bool sa = a[i] == a[j], sb = b[i] == b[j];
      if (sa && sb) ++both;
      else if (sa) ++only_a;
      else if (sb) ++only_b;
      else ++neither;
    }
  const double pairs = both + only_a + only_b + neither;
  const double expected = (both + only_a) * (both + only_b) / pairs;
  const double max_index = 0.5 * ((both + only_a) + (both + only_b));
  if (max_index == expected) return 1.0;
  return (both - expected) / (max_index - expected);
}

// Mutual information over the arithmetic mean of the two entropies.
inline double nmi(const std::vector<int>& a, const std::vector<int>& b) {
  const double n = static_cast<double>(a.size());
  std::map<int, double> pa, pb;
  std::map<std::pair<int, int>, double> pab;
  for (std::size_t i = 0; i < a.size(); ++i) {
    pa[a[i]] += 1.0 / n;
    pb[b[i]] += 1.0 / n;
    pab[{a[i], b[i]}] += 1.0 / n;
  }
  double ha = 0, hb = 0, mi = 0;
  for (auto [k, p] : pa) ha -= p * std::log(p);
  for (auto [k, p] : pb) hb -= p * std::log(p);
  for (auto [k, p] : pab) mi += p * std::log(p / (pa[k.first] * pb[k.second]));
  if (ha == 0.0 && hb == 0.0) return 1.0;
  return mi / (0.5 * (ha + hb));
}

// Neighbors of `query` by full scan: within d, self excluded, sorted by
// (distance, position), first k.
inline std::vector<std::pair<std::size_t, double>> knn(const std::vector<ccgp::ProjectedPoint>& p, std::size_t query,
                                                       std::size_t k, double d) {
  std::vector<std::pair<double, std::size_t>> all;
  for (std::size_t j = 0; j < p.size(); ++j) {
    if (j == query) continue;
    const double dist = std::hypot(p[j].x - p[query].x, p[j].y - p[query].y);
    if (dist <= d) all.push_back({dist, j});
  }
  std::sort(all.begin(), all.end());
  std::vector<std::pair<std::size_t, double>> out;
  for (std::size_t i = 0; i < std::min(k, all.size()); ++i) out.push_back({all[i].second, all[i].first});
  return out;
}

}  // namespace oracle
