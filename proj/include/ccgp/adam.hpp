#pragma once

#include "ccgp/nn.hpp"

#include <cmath>
#include <vector>

namespace ccgp {

/// Adaptive-moment optimizer. Weight decay, when nonzero, is added to the
/// gradient (L2 form).
template <typename Scalar>
class Adam {
 public:
  explicit Adam(double lr, double weight_decay = 0.0, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8)
      : lr_(lr), weight_decay_(weight_decay), beta1_(beta1), beta2_(beta2), eps_(eps) {}

  void step(const std::vector<nn::Param<Scalar>>& params) {
    if (m_.empty())
      for (const auto& p : params) {
        m_.push_back(nn::Mat<Scalar>::Zero(p.value->rows(), p.value->cols()));
        v_.push_back(nn::Mat<Scalar>::Zero(p.value->rows(), p.value->cols()));
      }
    ++t_;
    const auto b1 = static_cast<Scalar>(beta1_), b2 = static_cast<Scalar>(beta2_);
    const auto c1 = static_cast<Scalar>(1.0 - std::pow(beta1_, t_));
    const auto c2 = static_cast<Scalar>(1.0 - std::pow(beta2_, t_));
    const auto lr = static_cast<Scalar>(lr_), eps = static_cast<Scalar>(eps_), wd = static_cast<Scalar>(weight_decay_);
    for (std::size_t i = 0; i < params.size(); ++i) {
      auto& w = *params[i].value;
      nn::Mat<Scalar> g = *params[i].grad;
      if (wd != Scalar(0)) g += wd * w;
      m_[i] = b1 * m_[i] + (Scalar(1) - b1) * g;
      v_[i] = b2 * v_[i] + (Scalar(1) - b2) * g.cwiseProduct(g);
      w.array() -= lr * (m_[i].array() / c1) / ((v_[i].array() / c2).sqrt() + eps);
    }
  }

  long steps() const { return t_; }

 private:
  double lr_, weight_decay_, beta1_, beta2_, eps_;
  long t_ = 0;
  std::vector<nn::Mat<Scalar>> m_, v_;
};

}  // namespace ccgp
