#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace ccgp {

/// Planar RGB image with values in [0, 1], stored channel-major (CHW).
struct Image {
  int channels = 3;
  int height = 0;
  int width = 0;
  Eigen::ArrayXf data;

  Image() = default;
  Image(int c, int h, int w) : channels(c), height(h), width(w), data(Eigen::ArrayXf::Zero(Eigen::Index{c} * h * w)) {}

  float& at(int c, int y, int x) { return data[(Eigen::Index{c} * height + y) * width + x]; }
  float at(int c, int y, int x) const { return data[(Eigen::Index{c} * height + y) * width + x]; }

  bool same_shape(const Image& o) const { return channels == o.channels && height == o.height && width == o.width; }
  friend bool operator==(const Image& a, const Image& b) {
    return a.same_shape(b) && (a.data == b.data).all();
  }
};

/// Bilinear sample of the crop [x0, x0+cw) x [y0, y0+ch) resized to out_h x out_w.
/// Sampling is pixel-center aligned, so a full-size crop at the same size is exact.
Image resize_crop(const Image& src, double x0, double y0, double cw, double ch, int out_h, int out_w);

inline Image resize(const Image& src, int out_h, int out_w) {
  return resize_crop(src, 0.0, 0.0, src.width, src.height, out_h, out_w);
}

/// 8-bit RGB PNG encode/decode.
std::vector<std::uint8_t> encode_png(const Image& img);
Image decode_png(const std::vector<std::uint8_t>& bytes);
void write_png(const std::filesystem::path& path, const Image& img);
Image read_png(const std::filesystem::path& path);

std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path);

}  // namespace ccgp
