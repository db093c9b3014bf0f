#pragma once

#include "ccgp/image.hpp"
#include "ccgp/nn.hpp"

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace ccgp {

struct EncoderConfig {
  /// "tiny-conv" (4 conv blocks) or "resnet18-style" (basic residual blocks, [2,2,2,2]).
  std::string architecture = "tiny-conv";
  /// Block widths for tiny-conv, stage widths for resnet18-style. The last entry is the feature dim.
  std::vector<int> widths = {16, 32, 64, 64};
  int projection_dim = 128;
  int clusters = 5;
  int image_size = 32;
  int channels = 3;

  int feature_dim() const { return widths.empty() ? 0 : widths.back(); }
  void validate() const;

  static EncoderConfig resnet18(int clusters, int image_size = 32);
};

/// Shared encoder with an instance projection head (unit-norm rows) and a
/// cluster assignment head (softmax rows).
template <typename Scalar>
class Model {
 public:
  using Mat = nn::Mat<Scalar>;

  struct Output {
    Mat z;  // B x projection_dim, unit rows
    Mat q;  // B x clusters, rows on the simplex
  };

  Model(const EncoderConfig& config, std::uint64_t seed);

  /// Packs images into an NHWC tensor, normalized to roughly zero mean.
  nn::Tensor<Scalar> pack(std::span<const Image* const> images) const;

  Output forward(const nn::Tensor<Scalar>& input, bool training);
  Output forward(std::span<const Image* const> images, bool training) { return forward(pack(images), training); }

  /// Backpropagates dL/dz and dL/dq from the last training forward; gradients accumulate.
  void backward(const Mat& dz, const Mat& dq);

  void zero_grad();
  std::vector<nn::Param<Scalar>> parameters();
  std::vector<nn::Buffer<Scalar>> buffers();
  std::size_t parameter_count();

  /// Parameters followed by buffers, flattened in collection order.
  std::vector<double> state();
  void load_state(std::span<const double> flat);

  const EncoderConfig& config() const { return config_; }

  /// ReLU on/off states of the last forward; a finite difference whose two
  /// evaluations disagree here straddles a kink.
  std::vector<bool> activation_pattern() const {
    std::vector<bool> out;
    encoder_.activation_pattern(out);
    instance_head_.activation_pattern(out);
    cluster_head_.activation_pattern(out);
    return out;
  }

 private:
  EncoderConfig config_;
  nn::Sequential<Scalar> encoder_;
  nn::Sequential<Scalar> instance_head_;
  nn::Sequential<Scalar> cluster_head_;
  Mat z_raw_norm_;  // row norms before normalization
  Mat z_;
  Mat q_;
};

/// Copies every parameter and buffer into a model of another scalar type.
template <typename To, typename From>
Model<To> convert_model(Model<From>& from, std::uint64_t seed = 0) {
  Model<To> to(from.config(), seed);
  const auto flat = from.state();
  to.load_state(flat);
  return to;
}

extern template class Model<float>;
extern template class Model<double>;

}  // namespace ccgp
