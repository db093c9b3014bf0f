#pragma once
// Random inputs shared by the unit and acceptance tests.

#include "ccgp/losses.hpp"
#include "ccgp/rng.hpp"
#include "oracles.hpp"

namespace fixture {

using Mat = ccgp::LossMat<double>;

inline oracle::Rows to_rows(const Mat& m) {
  oracle::Rows r(static_cast<std::size_t>(m.rows()), std::vector<double>(static_cast<std::size_t>(m.cols())));
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index j = 0; j < m.cols(); ++j) r[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] = m(i, j);
  return r;
}

inline Mat unit_rows(ccgp::Rng& rng, Eigen::Index v, Eigen::Index d) {
  Mat z(v, d);
  for (Eigen::Index i = 0; i < v; ++i)
    for (Eigen::Index j = 0; j < d; ++j) z(i, j) = ccgp::normal(rng);
  z.rowwise().normalize();
  return z;
}

// Rows on the simplex; larger `sharpness` gives more confident rows.
inline Mat simplex_rows(ccgp::Rng& rng, Eigen::Index b, Eigen::Index m, double sharpness = 2.0) {
  Mat q(b, m);
  for (Eigen::Index i = 0; i < b; ++i) {
    for (Eigen::Index j = 0; j < m; ++j) q(i, j) = std::exp(sharpness * ccgp::normal(rng));
    q.row(i) /= q.row(i).sum();
  }
  return q;
}

// Anchor i pairs with view half+i (as the trainer builds it); with probability
// 1/3 a view also gets extra positives, as with K > 1 or shared neighbors.
inline ccgp::PositiveStructure positives(ccgp::Rng& rng, int v) {
  const int half = v / 2;
  ccgp::PositiveStructure pos(static_cast<std::size_t>(v));
  for (int i = 0; i < half; ++i) {
    pos[static_cast<std::size_t>(i)].push_back(half + i);
    pos[static_cast<std::size_t>(half + i)].push_back(i);
  }
  for (int i = 0; i < v; ++i) {
    if (ccgp::uniform01(rng) > 1.0 / 3.0) continue;
    const int extra = static_cast<int>(ccgp::uniform_index(rng, 3)) + 1;
    for (int e = 0; e < extra; ++e) {
      const int j = static_cast<int>(ccgp::uniform_index(rng, static_cast<std::uint64_t>(v)));
      auto& row = pos[static_cast<std::size_t>(i)];
      if (j != i && std::find(row.begin(), row.end(), j) == row.end()) row.push_back(j);
    }
  }
  return pos;
}

}  // namespace fixture
