#pragma once

// Contrastive clustering objectives with analytic gradients:
//   instance loss over view embeddings with spatial positives,
//   cluster loss over column-normalized assignment matrices,
//   an entropy regularizer over the marginal cluster distribution,
// and their weighted sum.

#include "ccgp/diagnostics.hpp"

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

namespace ccgp {

enum class EntropyForm {
  kl_uniform,  // log M + sum Z log Z: 0 at uniform, log M at collapse
  paper,       // log M - (1/M) sum Z log Z, as printed
};

struct LossConfig {
  double tau_instance = 0.5;
  double tau_cluster = 1.0;
  double lambda = 2.0;
  double eta = 0.2;
  EntropyForm entropy_form = EntropyForm::kl_uniform;
  bool scch_symmetrize = true;

  void validate() const {
    if (!(tau_instance > 0.0) || !(tau_cluster > 0.0)) throw std::invalid_argument("loss temperatures must be > 0");
    if (!(lambda >= 0.0) || !(eta >= 0.0)) throw std::invalid_argument("loss weights must be >= 0");
  }
};

/// positives[i] lists the view indices that are positives of anchor view i.
using PositiveStructure = std::vector<std::vector<int>>;

template <typename Scalar>
using LossMat = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Mean over anchors of the averaged -log softmax of each positive against all
/// other views. `z` holds one unit row per view. When `grad` is non-null it
/// receives dL/dz.
template <typename Scalar>
Scalar sich_loss(const LossMat<Scalar>& z, const PositiveStructure& positives, double tau,
                 LossMat<Scalar>* grad = nullptr) {
  const Eigen::Index v = z.rows();
  if (v < 2) throw std::invalid_argument("sich_loss: need at least two views");
  if (static_cast<Eigen::Index>(positives.size()) != v)
    throw std::invalid_argument("sich_loss: positive structure does not match the view count");
  const Scalar t = static_cast<Scalar>(tau);
  const LossMat<Scalar> s = (z * z.transpose()) / t;
  LossMat<Scalar> g = LossMat<Scalar>::Zero(v, v);
  Scalar total = 0;
  for (Eigen::Index i = 0; i < v; ++i) {
    const auto& pos = positives[static_cast<std::size_t>(i)];
    if (pos.empty()) throw std::invalid_argument("sich_loss: anchor " + std::to_string(i) + " has no positives");
    Scalar mx = -std::numeric_limits<Scalar>::infinity();
    for (Eigen::Index a = 0; a < v; ++a)
      if (a != i) mx = std::max(mx, s(i, a));
    Scalar denom = 0;
    for (Eigen::Index a = 0; a < v; ++a)
      if (a != i) denom += std::exp(s(i, a) - mx);
    const Scalar lse = mx + std::log(denom);
    const Scalar inv_pos = Scalar(1) / static_cast<Scalar>(pos.size());
    for (int j : pos) {
      if (j < 0 || j >= v || j == i) throw std::invalid_argument("sich_loss: invalid positive index");
      total -= inv_pos * (s(i, j) - lse);
      g(i, j) -= inv_pos;
    }
    for (Eigen::Index a = 0; a < v; ++a)
      if (a != i) g(i, a) += std::exp(s(i, a) - lse);
  }
  const Scalar n = static_cast<Scalar>(v);
  if (grad) *grad = ((g + g.transpose()) * z) / (t * n);
  return total / n;
}

namespace detail {

template <typename Scalar>
LossMat<Scalar> normalize_columns(const LossMat<Scalar>& q, Eigen::Matrix<Scalar, 1, Eigen::Dynamic>& norms,
                                  LossMat<Scalar>& shifted) {
  shifted = q;
  for (Eigen::Index c = 0; c < q.cols(); ++c)
    if (q.col(c).squaredNorm() == Scalar(0)) {
      warn("scch_loss: cluster " + std::to_string(c) + " has no mass in this batch");
      shifted.col(c).array() += Scalar(1e-12);
    }
  norms = shifted.colwise().norm();
  return shifted.array().rowwise() / norms.array();
}

// One direction: anchors are columns of `ca`, candidates columns of `cn`.
template <typename Scalar>
Scalar cluster_contrast(const LossMat<Scalar>& ca, const LossMat<Scalar>& cn, Scalar t, LossMat<Scalar>& ds) {
  const Eigen::Index m = ca.cols();
  const LossMat<Scalar> s = (ca.transpose() * cn) / t;
  ds.setZero(m, m);
  Scalar total = 0;
  for (Eigen::Index i = 0; i < m; ++i) {
    const Scalar mx = s.row(i).maxCoeff();
    const Scalar lse = mx + std::log((s.row(i).array() - mx).exp().sum());
    total -= s(i, i) - lse;
    for (Eigen::Index j = 0; j < m; ++j) ds(i, j) = std::exp(s(i, j) - lse) / static_cast<Scalar>(m);
    ds(i, i) -= Scalar(1) / static_cast<Scalar>(m);
  }
  return total / static_cast<Scalar>(m);
}

}  // namespace detail

/// Cluster-level contrast between the columns of the anchor and neighbor
/// assignment matrices. Averages both directions when `symmetrize` is set.
template <typename Scalar>
Scalar scch_loss(const LossMat<Scalar>& qa, const LossMat<Scalar>& qn, double tau, bool symmetrize = true,
                 LossMat<Scalar>* grad_a = nullptr, LossMat<Scalar>* grad_n = nullptr) {
  if (qa.rows() != qn.rows() || qa.cols() != qn.cols()) throw std::invalid_argument("scch_loss: shape mismatch");
  if (qa.cols() < 1 || qa.rows() < 1) throw std::invalid_argument("scch_loss: empty assignment matrix");
  if (qa.rows() < qa.cols()) warn("scch_loss: batch smaller than the cluster count");
  const Scalar t = static_cast<Scalar>(tau);
  Eigen::Matrix<Scalar, 1, Eigen::Dynamic> na, nn;
  LossMat<Scalar> xa, xn;
  const LossMat<Scalar> ca = detail::normalize_columns(qa, na, xa);
  const LossMat<Scalar> cn = detail::normalize_columns(qn, nn, xn);

  LossMat<Scalar> ds;
  Scalar loss = detail::cluster_contrast(ca, cn, t, ds);
  LossMat<Scalar> dca = (cn * ds.transpose()) / t;
  LossMat<Scalar> dcn = (ca * ds) / t;
  if (symmetrize) {
    LossMat<Scalar> ds2;
    loss = (loss + detail::cluster_contrast(cn, ca, t, ds2)) / Scalar(2);
    dcn = (dcn + (ca * ds2.transpose()) / t) / Scalar(2);
    dca = (dca + (cn * ds2) / t) / Scalar(2);
  }
  auto back = [](const LossMat<Scalar>& c, const LossMat<Scalar>& dc, const auto& norms) {
    const auto dots = (c.array() * dc.array()).colwise().sum();
    return LossMat<Scalar>((dc.array() - c.array().rowwise() * dots).rowwise() / norms.array());
  };
  if (grad_a) *grad_a = back(ca, dca, na);
  if (grad_n) *grad_n = back(cn, dcn, nn);
  return loss;
}

/// Regularizer on the marginal cluster distribution of `q` (rows on the simplex).
template <typename Scalar>
Scalar entropy_reg(const LossMat<Scalar>& q, EntropyForm form, LossMat<Scalar>* grad = nullptr) {
  const Eigen::Index m = q.cols();
  if (m < 1 || q.rows() < 1) throw std::invalid_argument("entropy_reg: empty assignment matrix");
  const Eigen::Matrix<Scalar, 1, Eigen::Dynamic> colsum = q.colwise().sum();
  const Scalar total = colsum.sum();
  const Eigen::Matrix<Scalar, 1, Eigen::Dynamic> zl = colsum / total;
  Scalar plogp = 0;
  for (Eigen::Index l = 0; l < m; ++l)
    if (zl(l) > Scalar(0)) plogp += zl(l) * std::log(zl(l));
  const Scalar log_m = std::log(static_cast<Scalar>(m));
  const Scalar value = form == EntropyForm::kl_uniform ? log_m + plogp : log_m - plogp / static_cast<Scalar>(m);
  if (grad) {
    const Scalar scale = form == EntropyForm::kl_uniform ? Scalar(1) : Scalar(-1) / static_cast<Scalar>(m);
    Eigen::Matrix<Scalar, 1, Eigen::Dynamic> dz(m);
    for (Eigen::Index l = 0; l < m; ++l)
      dz(l) = scale * (std::log(std::max(zl(l), std::numeric_limits<Scalar>::min())) + Scalar(1));
    const Scalar mean = dz.dot(zl);
    const Eigen::Matrix<Scalar, 1, Eigen::Dynamic> dc = (dz.array() - mean) / total;
    *grad = LossMat<Scalar>(q.rows(), m);
    grad->rowwise() = dc;
  }
  return value;
}

/// sich + lambda * scch + eta * ent. Throws naming the first non-finite component.
inline double total_loss(double sich, double scch, double ent, double lambda, double eta) {
  if (!std::isfinite(sich)) throw std::domain_error("total_loss: instance loss is not finite");
  if (!std::isfinite(scch)) throw std::domain_error("total_loss: cluster loss is not finite");
  if (!std::isfinite(ent)) throw std::domain_error("total_loss: entropy regularizer is not finite");
  return sich + lambda * scch + eta * ent;
}

}  // namespace ccgp
