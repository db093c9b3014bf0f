#pragma once

// Minimal layer set with hand-written backward passes. Activations are
// row-major matrices with one row per (sample, y, x) position and one column
// per channel (NHWC), so a convolution is an im2col gather followed by a GEMM.

#include "ccgp/rng.hpp"

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

namespace ccgp::nn {

template <typename Scalar>
using Mat = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename Scalar>
using RowVec = Eigen::Matrix<Scalar, 1, Eigen::Dynamic>;

template <typename Scalar>
struct Tensor {
  Mat<Scalar> v;
  int batch = 0;
  int height = 1;
  int width = 1;

  int channels() const { return static_cast<int>(v.cols()); }
  /// Same geometry, no data.
  Tensor shape() const { return {Mat<Scalar>(), batch, height, width}; }
};

/// Trainable tensor and its gradient; both are owned by the layer.
template <typename Scalar>
struct Param {
  std::string name;
  Mat<Scalar>* value;
  Mat<Scalar>* grad;
};

/// Non-trainable state saved with checkpoints (batch-norm running statistics).
template <typename Scalar>
struct Buffer {
  std::string name;
  Mat<Scalar>* value;
};

template <typename Scalar>
class Layer {
 public:
  virtual ~Layer() = default;
  virtual Tensor<Scalar> forward(const Tensor<Scalar>& x, bool training) = 0;
  /// Consumes dL/dy, accumulates parameter gradients, returns dL/dx.
  virtual Tensor<Scalar> backward(const Tensor<Scalar>& grad) = 0;
  virtual void collect(std::vector<Param<Scalar>>&, const std::string&) {}
  virtual void collect(std::vector<Buffer<Scalar>>&, const std::string&) {}
  /// Appends the on/off state of every ReLU from the last forward pass.
  virtual void activation_pattern(std::vector<bool>&) const {}
};

template <typename Scalar>
void kaiming_init(Mat<Scalar>& w, int fan_in, Rng& rng) {
  const double std = std::sqrt(2.0 / fan_in);
  for (Eigen::Index i = 0; i < w.size(); ++i) w.data()[i] = static_cast<Scalar>(std * normal(rng));
}

template <typename Scalar>
class Conv2d final : public Layer<Scalar> {
 public:
  Conv2d(int in, int out, int kernel, int stride, Rng& rng)
      : in_(in), out_(out), k_(kernel), stride_(stride), pad_(kernel / 2),
        w_(Mat<Scalar>(kernel * kernel * in, out)), dw_(Mat<Scalar>::Zero(kernel * kernel * in, out)) {
    kaiming_init(w_, kernel * kernel * in, rng);
  }

  Tensor<Scalar> forward(const Tensor<Scalar>& x, bool) override {
    if (x.channels() != in_) throw std::invalid_argument("conv2d: channel mismatch");
    in_shape_ = x.shape();
    const int ho = (x.height + 2 * pad_ - k_) / stride_ + 1;
    const int wo = (x.width + 2 * pad_ - k_) / stride_ + 1;
    col_.setZero(Eigen::Index{x.batch} * ho * wo, Eigen::Index{k_} * k_ * in_);
    for (int b = 0; b < x.batch; ++b)
      for (int oy = 0; oy < ho; ++oy)
        for (int ox = 0; ox < wo; ++ox) {
          const Eigen::Index row = (Eigen::Index{b} * ho + oy) * wo + ox;
          Scalar* dst = col_.row(row).data();
          for (int ky = 0; ky < k_; ++ky) {
            const int iy = oy * stride_ - pad_ + ky;
            if (iy < 0 || iy >= x.height) continue;
            for (int kx = 0; kx < k_; ++kx) {
              const int ix = ox * stride_ - pad_ + kx;
              if (ix < 0 || ix >= x.width) continue;
              const Scalar* src = x.v.row((Eigen::Index{b} * x.height + iy) * x.width + ix).data();
              std::memcpy(dst + (ky * k_ + kx) * in_, src, sizeof(Scalar) * static_cast<std::size_t>(in_));
            }
          }
        }
    Tensor<Scalar> y;
    y.batch = x.batch;
    y.height = ho;
    y.width = wo;
    y.v.noalias() = col_ * w_;
    return y;
  }

  Tensor<Scalar> backward(const Tensor<Scalar>& g) override {
    dw_.noalias() += col_.transpose() * g.v;
    const Mat<Scalar> dcol = g.v * w_.transpose();
    Tensor<Scalar> dx = in_shape_;
    dx.v.setZero(Eigen::Index{dx.batch} * dx.height * dx.width, in_);
    for (int b = 0; b < dx.batch; ++b)
      for (int oy = 0; oy < g.height; ++oy)
        for (int ox = 0; ox < g.width; ++ox) {
          const Eigen::Index row = (Eigen::Index{b} * g.height + oy) * g.width + ox;
          const Scalar* src = dcol.row(row).data();
          for (int ky = 0; ky < k_; ++ky) {
            const int iy = oy * stride_ - pad_ + ky;
            if (iy < 0 || iy >= dx.height) continue;
            for (int kx = 0; kx < k_; ++kx) {
              const int ix = ox * stride_ - pad_ + kx;
              if (ix < 0 || ix >= dx.width) continue;
              Scalar* dst = dx.v.row((Eigen::Index{b} * dx.height + iy) * dx.width + ix).data();
              const Scalar* s = src + (ky * k_ + kx) * in_;
              for (int c = 0; c < in_; ++c) dst[c] += s[c];
            }
          }
        }
    col_.resize(0, 0);
    return dx;
  }

  void collect(std::vector<Param<Scalar>>& out, const std::string& prefix) override {
    out.push_back({prefix + "weight", &w_, &dw_});
  }

 private:
  int in_, out_, k_, stride_, pad_;
  Mat<Scalar> w_, dw_;
  Mat<Scalar> col_;
  Tensor<Scalar> in_shape_;
};

template <typename Scalar>
class BatchNorm final : public Layer<Scalar> {
 public:
  explicit BatchNorm(int channels, double momentum = 0.1, double eps = 1e-5)
      : momentum_(static_cast<Scalar>(momentum)), eps_(static_cast<Scalar>(eps)),
        gamma_(Mat<Scalar>::Ones(1, channels)), beta_(Mat<Scalar>::Zero(1, channels)),
        dgamma_(Mat<Scalar>::Zero(1, channels)), dbeta_(Mat<Scalar>::Zero(1, channels)),
        running_mean_(Mat<Scalar>::Zero(1, channels)), running_var_(Mat<Scalar>::Ones(1, channels)) {}

  Tensor<Scalar> forward(const Tensor<Scalar>& x, bool training) override {
    Tensor<Scalar> y = x.shape();
    const auto n = static_cast<Scalar>(x.v.rows());
    RowVec<Scalar> mean, var;
    if (training) {
      mean = x.v.colwise().sum() / n;
      var = (x.v.rowwise() - mean).array().square().colwise().sum().matrix() / n;
      running_mean_ = (Scalar(1) - momentum_) * running_mean_ + momentum_ * mean;
      const Scalar unbias = n > 1 ? n / (n - 1) : Scalar(1);
      running_var_ = (Scalar(1) - momentum_) * running_var_ + momentum_ * unbias * var;
    } else {
      mean = running_mean_;
      var = running_var_;
    }
    inv_std_ = (var.array() + eps_).rsqrt().matrix();
    xhat_ = (x.v.rowwise() - mean).array().rowwise() * inv_std_.array();
    y.v = (xhat_.array().rowwise() * gamma_.row(0).array()).rowwise() + beta_.row(0).array();
    return y;
  }

  Tensor<Scalar> backward(const Tensor<Scalar>& g) override {
    const auto n = static_cast<Scalar>(g.v.rows());
    dgamma_ += (g.v.array() * xhat_.array()).colwise().sum().matrix();
    dbeta_ += g.v.colwise().sum();
    const Mat<Scalar> dxhat = g.v.array().rowwise() * gamma_.row(0).array();
    const RowVec<Scalar> sum_dxhat = dxhat.colwise().sum();
    const RowVec<Scalar> sum_dxhat_xhat = (dxhat.array() * xhat_.array()).colwise().sum();
    Tensor<Scalar> dx = g.shape();
    dx.v = ((dxhat * n).rowwise() - sum_dxhat).array() - (xhat_.array().rowwise() * sum_dxhat_xhat.array());
    dx.v = dx.v.array().rowwise() * (inv_std_.array() / n);
    xhat_.resize(0, 0);
    return dx;
  }

  void collect(std::vector<Param<Scalar>>& out, const std::string& prefix) override {
    out.push_back({prefix + "gamma", &gamma_, &dgamma_});
    out.push_back({prefix + "beta", &beta_, &dbeta_});
  }
  void collect(std::vector<Buffer<Scalar>>& out, const std::string& prefix) override {
    out.push_back({prefix + "running_mean", &running_mean_});
    out.push_back({prefix + "running_var", &running_var_});
  }

 private:
  Scalar momentum_, eps_;
  Mat<Scalar> gamma_, beta_, dgamma_, dbeta_, running_mean_, running_var_;
  RowVec<Scalar> inv_std_;
  Mat<Scalar> xhat_;
};

template <typename Scalar>
class Relu final : public Layer<Scalar> {
 public:
  Tensor<Scalar> forward(const Tensor<Scalar>& x, bool) override {
    Tensor<Scalar> y = x.shape();
    y.v = x.v.cwiseMax(Scalar(0));
    mask_ = (x.v.array() > Scalar(0)).template cast<Scalar>();
    return y;
  }
  Tensor<Scalar> backward(const Tensor<Scalar>& g) override {
    Tensor<Scalar> dx = g.shape();
    dx.v = g.v.cwiseProduct(mask_);
    return dx;
  }
  void activation_pattern(std::vector<bool>& out) const override {
    for (Eigen::Index i = 0; i < mask_.size(); ++i) out.push_back(mask_.data()[i] > Scalar(0));
  }

 private:
  Mat<Scalar> mask_;
};

/// 2x2 average pooling, stride 2 (trailing odd row/column dropped).
template <typename Scalar>
class AvgPool2 final : public Layer<Scalar> {
 public:
  Tensor<Scalar> forward(const Tensor<Scalar>& x, bool) override {
    in_ = x.shape();
    Tensor<Scalar> y;
    y.batch = x.batch;
    y.height = x.height / 2;
    y.width = x.width / 2;
    y.v.setZero(Eigen::Index{y.batch} * y.height * y.width, x.channels());
    for (int b = 0; b < x.batch; ++b)
      for (int oy = 0; oy < y.height; ++oy)
        for (int ox = 0; ox < y.width; ++ox) {
          auto out = y.v.row((Eigen::Index{b} * y.height + oy) * y.width + ox);
          for (int dy = 0; dy < 2; ++dy)
            for (int dx = 0; dx < 2; ++dx)
              out += x.v.row((Eigen::Index{b} * x.height + 2 * oy + dy) * x.width + 2 * ox + dx);
          out *= Scalar(0.25);
        }
    return y;
  }
  Tensor<Scalar> backward(const Tensor<Scalar>& g) override {
    Tensor<Scalar> dx = in_;
    dx.v.setZero(Eigen::Index{in_.batch} * in_.height * in_.width, g.channels());
    for (int b = 0; b < g.batch; ++b)
      for (int oy = 0; oy < g.height; ++oy)
        for (int ox = 0; ox < g.width; ++ox) {
          const auto src = g.v.row((Eigen::Index{b} * g.height + oy) * g.width + ox) * Scalar(0.25);
          for (int dy = 0; dy < 2; ++dy)
            for (int ddx = 0; ddx < 2; ++ddx)
              dx.v.row((Eigen::Index{b} * in_.height + 2 * oy + dy) * in_.width + 2 * ox + ddx) = src;
        }
    return dx;
  }

 private:
  Tensor<Scalar> in_;
};

/// Averages over spatial positions: (B*H*W) x C -> B x C.
template <typename Scalar>
class GlobalAvgPool final : public Layer<Scalar> {
 public:
  Tensor<Scalar> forward(const Tensor<Scalar>& x, bool) override {
    in_ = x.shape();
    const int hw = x.height * x.width;
    Tensor<Scalar> y;
    y.batch = x.batch;
    y.v.resize(x.batch, x.channels());
    for (int b = 0; b < x.batch; ++b)
      y.v.row(b) = x.v.middleRows(Eigen::Index{b} * hw, hw).colwise().sum() / static_cast<Scalar>(hw);
    return y;
  }
  Tensor<Scalar> backward(const Tensor<Scalar>& g) override {
    const int hw = in_.height * in_.width;
    Tensor<Scalar> dx = in_;
    dx.v.resize(Eigen::Index{in_.batch} * hw, g.channels());
    for (int b = 0; b < in_.batch; ++b)
      dx.v.middleRows(Eigen::Index{b} * hw, hw).rowwise() = g.v.row(b) / static_cast<Scalar>(hw);
    return dx;
  }

 private:
  Tensor<Scalar> in_;
};

template <typename Scalar>
class Linear final : public Layer<Scalar> {
 public:
  Linear(int in, int out, Rng& rng)
      : w_(Mat<Scalar>(in, out)), b_(Mat<Scalar>::Zero(1, out)), dw_(Mat<Scalar>::Zero(in, out)),
        db_(Mat<Scalar>::Zero(1, out)) {
    kaiming_init(w_, in, rng);
  }

  Tensor<Scalar> forward(const Tensor<Scalar>& x, bool) override {
    x_ = x.v;
    Tensor<Scalar> y;
    y.batch = x.batch;
    y.v.noalias() = x.v * w_;
    y.v.rowwise() += b_.row(0);
    return y;
  }
  Tensor<Scalar> backward(const Tensor<Scalar>& g) override {
    dw_.noalias() += x_.transpose() * g.v;
    db_ += g.v.colwise().sum();
    Tensor<Scalar> dx;
    dx.batch = g.batch;
    dx.v.noalias() = g.v * w_.transpose();
    return dx;
  }
  void collect(std::vector<Param<Scalar>>& out, const std::string& prefix) override {
    out.push_back({prefix + "weight", &w_, &dw_});
    out.push_back({prefix + "bias", &b_, &db_});
  }

 private:
  Mat<Scalar> w_, b_, dw_, db_;
  Mat<Scalar> x_;
};

/// Ordered chain of layers.
template <typename Scalar>
class Sequential final : public Layer<Scalar> {
 public:
  template <typename L, typename... Args>
  L& add(Args&&... args) {
    layers_.push_back(std::make_unique<L>(std::forward<Args>(args)...));
    return static_cast<L&>(*layers_.back());
  }
  void add_layer(std::unique_ptr<Layer<Scalar>> layer) { layers_.push_back(std::move(layer)); }

  Tensor<Scalar> forward(const Tensor<Scalar>& x, bool training) override {
    Tensor<Scalar> h = x;
    for (auto& l : layers_) h = l->forward(h, training);
    return h;
  }
  Tensor<Scalar> backward(const Tensor<Scalar>& g) override {
    Tensor<Scalar> d = g;
    for (auto it = layers_.rbegin(); it != layers_.rend(); ++it) d = (*it)->backward(d);
    return d;
  }
  void collect(std::vector<Param<Scalar>>& out, const std::string& prefix) override {
    for (std::size_t i = 0; i < layers_.size(); ++i) layers_[i]->collect(out, prefix + std::to_string(i) + ".");
  }
  void collect(std::vector<Buffer<Scalar>>& out, const std::string& prefix) override {
    for (std::size_t i = 0; i < layers_.size(); ++i) layers_[i]->collect(out, prefix + std::to_string(i) + ".");
  }
  void activation_pattern(std::vector<bool>& out) const override {
    for (const auto& l : layers_) l->activation_pattern(out);
  }

 private:
  std::vector<std::unique_ptr<Layer<Scalar>>> layers_;
};

/// Basic residual block: conv-bn-relu-conv-bn plus (projected) shortcut, then relu.
template <typename Scalar>
class ResidualBlock final : public Layer<Scalar> {
 public:
  ResidualBlock(int in, int out, int stride, Rng& rng) {
    main_.template add<Conv2d<Scalar>>(in, out, 3, stride, rng);
    main_.template add<BatchNorm<Scalar>>(out);
    main_.template add<Relu<Scalar>>();
    main_.template add<Conv2d<Scalar>>(out, out, 3, 1, rng);
    main_.template add<BatchNorm<Scalar>>(out);
    if (stride != 1 || in != out) {
      shortcut_ = std::make_unique<Sequential<Scalar>>();
      shortcut_->template add<Conv2d<Scalar>>(in, out, 1, stride, rng);
      shortcut_->template add<BatchNorm<Scalar>>(out);
    }
  }

  Tensor<Scalar> forward(const Tensor<Scalar>& x, bool training) override {
    Tensor<Scalar> y = main_.forward(x, training);
    y.v += shortcut_ ? shortcut_->forward(x, training).v : x.v;
    return relu_.forward(y, training);
  }
  Tensor<Scalar> backward(const Tensor<Scalar>& g) override {
    const Tensor<Scalar> d = relu_.backward(g);
    Tensor<Scalar> dx = main_.backward(d);
    dx.v += shortcut_ ? shortcut_->backward(d).v : d.v;
    return dx;
  }
  void collect(std::vector<Param<Scalar>>& out, const std::string& prefix) override {
    main_.collect(out, prefix + "main.");
    if (shortcut_) shortcut_->collect(out, prefix + "shortcut.");
  }
  void collect(std::vector<Buffer<Scalar>>& out, const std::string& prefix) override {
    main_.collect(out, prefix + "main.");
    if (shortcut_) shortcut_->collect(out, prefix + "shortcut.");
  }
  void activation_pattern(std::vector<bool>& out) const override {
    main_.activation_pattern(out);
    relu_.activation_pattern(out);
  }

 private:
  Sequential<Scalar> main_;
  std::unique_ptr<Sequential<Scalar>> shortcut_;
  Relu<Scalar> relu_;
};

}  // namespace ccgp::nn
