#include "ccgp/model.hpp"

#include <stdexcept>

namespace ccgp {

void EncoderConfig::validate() const {
  if (architecture != "tiny-conv" && architecture != "resnet18-style")
    throw std::invalid_argument("unknown architecture '" + architecture + "'");
  if (widths.empty()) throw std::invalid_argument("encoder widths must not be empty");
  if (architecture == "tiny-conv" && widths.size() != 4)
    throw std::invalid_argument("tiny-conv expects exactly 4 block widths");
  if (architecture == "resnet18-style" && widths.size() != 4)
    throw std::invalid_argument("resnet18-style expects exactly 4 stage widths");
  for (int w : widths)
    if (w < 1) throw std::invalid_argument("encoder widths must be positive");
  if (clusters < 2) throw std::invalid_argument("cluster count must be >= 2");
  if (projection_dim < 1) throw std::invalid_argument("projection dim must be >= 1");
  if (image_size < 4) throw std::invalid_argument("image size must be >= 4");
  if (channels < 1) throw std::invalid_argument("channel count must be >= 1");
}

EncoderConfig EncoderConfig::resnet18(int clusters, int image_size) {
  EncoderConfig c;
  c.architecture = "resnet18-style";
  c.widths = {64, 128, 256, 512};
  c.clusters = clusters;
  c.image_size = image_size;
  return c;
}

template <typename Scalar>
Model<Scalar>::Model(const EncoderConfig& config, std::uint64_t seed) : config_(config) {
  config_.validate();
  Rng rng(mix_seed({seed, 0x30de1}));
  const auto& w = config_.widths;
  if (config_.architecture == "tiny-conv") {
    int in = config_.channels;
    for (std::size_t i = 0; i < w.size(); ++i) {
      encoder_.template add<nn::Conv2d<Scalar>>(in, w[i], 3, i == 0 ? 2 : 1, rng);
      encoder_.template add<nn::BatchNorm<Scalar>>(w[i]);
      encoder_.template add<nn::Relu<Scalar>>();
      if (i == 1 || i == 2) encoder_.template add<nn::AvgPool2<Scalar>>();
      in = w[i];
    }
  } else {
    encoder_.template add<nn::Conv2d<Scalar>>(config_.channels, w[0], 3, 1, rng);
    encoder_.template add<nn::BatchNorm<Scalar>>(w[0]);
    encoder_.template add<nn::Relu<Scalar>>();
    int in = w[0];
    for (std::size_t stage = 0; stage < w.size(); ++stage)
      for (int block = 0; block < 2; ++block) {
        const int stride = (stage > 0 && block == 0) ? 2 : 1;
        encoder_.template add<nn::ResidualBlock<Scalar>>(in, w[stage], stride, rng);
        in = w[stage];
      }
  }
  encoder_.template add<nn::GlobalAvgPool<Scalar>>();

  const int h = config_.feature_dim();
  instance_head_.template add<nn::Linear<Scalar>>(h, h, rng);
  instance_head_.template add<nn::Relu<Scalar>>();
  instance_head_.template add<nn::Linear<Scalar>>(h, config_.projection_dim, rng);
  cluster_head_.template add<nn::Linear<Scalar>>(h, h, rng);
  cluster_head_.template add<nn::Relu<Scalar>>();
  cluster_head_.template add<nn::Linear<Scalar>>(h, config_.clusters, rng);
}

template <typename Scalar>
nn::Tensor<Scalar> Model<Scalar>::pack(std::span<const Image* const> images) const {
  if (images.empty()) throw std::invalid_argument("model: empty batch");
  const int s = config_.image_size, c = config_.channels;
  nn::Tensor<Scalar> t;
  t.batch = static_cast<int>(images.size());
  t.height = s;
  t.width = s;
  t.v.resize(Eigen::Index{t.batch} * s * s, c);
  for (int b = 0; b < t.batch; ++b) {
    const Image& img = *images[static_cast<std::size_t>(b)];
    if (img.height != s || img.width != s || img.channels != c)
      throw std::invalid_argument("model: image shape does not match the configured input size");
    for (int y = 0; y < s; ++y)
      for (int x = 0; x < s; ++x)
        for (int ch = 0; ch < c; ++ch)
          t.v((Eigen::Index{b} * s + y) * s + x, ch) = static_cast<Scalar>((img.at(ch, y, x) - 0.5f) * 4.0f);
  }
  return t;
}

template <typename Scalar>
typename Model<Scalar>::Output Model<Scalar>::forward(const nn::Tensor<Scalar>& input, bool training) {
  if (input.batch < 1) throw std::invalid_argument("model: empty batch");
  if (input.height != config_.image_size || input.width != config_.image_size || input.channels() != config_.channels)
    throw std::invalid_argument("model: input shape mismatch");
  if (!training && input.batch > 1) {
    // One sample at a time, so a row never depends on its batch position or on
    // the batch size (GEMM blocking changes the summation order at the edges).
    const auto rows = static_cast<Eigen::Index>(input.height) * input.width;
    Mat z(input.batch, config_.projection_dim), q(input.batch, config_.clusters), norms(input.batch, 1);
    nn::Tensor<Scalar> one{Mat(), 1, input.height, input.width};
    for (int b = 0; b < input.batch; ++b) {
      one.v = input.v.middleRows(b * rows, rows);
      const auto out = forward(one, false);
      z.row(b) = out.z;
      q.row(b) = out.q;
      norms(b, 0) = z_raw_norm_(0, 0);
    }
    z_raw_norm_ = std::move(norms);
    z_ = z;
    q_ = q;
    return {std::move(z), std::move(q)};
  }
  const nn::Tensor<Scalar> features = encoder_.forward(input, training);

  const Mat u = instance_head_.forward(features, training).v;
  z_raw_norm_ = u.rowwise().norm().cwiseMax(Scalar(1e-12));
  z_ = u.array().colwise() / z_raw_norm_.col(0).array();

  Mat logits = cluster_head_.forward(features, training).v;
  logits.colwise() -= logits.rowwise().maxCoeff();
  q_ = logits.array().exp();
  q_.array().colwise() /= q_.rowwise().sum().array();
  return {z_, q_};
}

template <typename Scalar>
void Model<Scalar>::backward(const Mat& dz, const Mat& dq) {
  nn::Tensor<Scalar> du;
  du.batch = static_cast<int>(dz.rows());
  const auto dot_z = (dz.array() * z_.array()).rowwise().sum();
  du.v = (dz.array() - z_.array().colwise() * dot_z).colwise() / z_raw_norm_.col(0).array();

  nn::Tensor<Scalar> ds;
  ds.batch = du.batch;
  const auto dot_q = (dq.array() * q_.array()).rowwise().sum();
  ds.v = q_.array() * (dq.array().colwise() - dot_q);

  nn::Tensor<Scalar> dfeat = instance_head_.backward(du);
  dfeat.v += cluster_head_.backward(ds).v;
  encoder_.backward(dfeat);
}

template <typename Scalar>
std::vector<nn::Param<Scalar>> Model<Scalar>::parameters() {
  std::vector<nn::Param<Scalar>> out;
  encoder_.collect(out, "encoder.");
  instance_head_.collect(out, "instance_head.");
  cluster_head_.collect(out, "cluster_head.");
  return out;
}

template <typename Scalar>
std::vector<nn::Buffer<Scalar>> Model<Scalar>::buffers() {
  std::vector<nn::Buffer<Scalar>> out;
  encoder_.collect(out, "encoder.");
  instance_head_.collect(out, "instance_head.");
  cluster_head_.collect(out, "cluster_head.");
  return out;
}

template <typename Scalar>
void Model<Scalar>::zero_grad() {
  for (auto& p : parameters()) p.grad->setZero();
}

template <typename Scalar>
std::size_t Model<Scalar>::parameter_count() {
  std::size_t n = 0;
  for (auto& p : parameters()) n += static_cast<std::size_t>(p.value->size());
  return n;
}

template <typename Scalar>
std::vector<double> Model<Scalar>::state() {
  std::vector<double> flat;
  for (auto& p : parameters()) flat.insert(flat.end(), p.value->data(), p.value->data() + p.value->size());
  for (auto& b : buffers()) flat.insert(flat.end(), b.value->data(), b.value->data() + b.value->size());
  return flat;
}

template <typename Scalar>
void Model<Scalar>::load_state(std::span<const double> flat) {
  std::size_t offset = 0;
  auto take = [&](nn::Mat<Scalar>& m) {
    if (offset + static_cast<std::size_t>(m.size()) > flat.size()) throw std::invalid_argument("model state too short");
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = static_cast<Scalar>(flat[offset + static_cast<std::size_t>(i)]);
    offset += static_cast<std::size_t>(m.size());
  };
  for (auto& p : parameters()) take(*p.value);
  for (auto& b : buffers()) take(*b.value);
  if (offset != flat.size()) throw std::invalid_argument("model state size mismatch");
}

template class Model<float>;
template class Model<double>;

}  // namespace ccgp
