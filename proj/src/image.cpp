#include "ccgp/image.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <stdexcept>

namespace ccgp {

Image resize_crop(const Image& src, double x0, double y0, double cw, double ch, int out_h, int out_w) {
  Image out(src.channels, out_h, out_w);
  const double sx = cw / out_w;
  const double sy = ch / out_h;
  for (int y = 0; y < out_h; ++y) {
    const double fy = std::clamp(y0 + (y + 0.5) * sy - 0.5, 0.0, src.height - 1.0);
    const int iy = static_cast<int>(std::floor(fy));
    const int iy1 = std::min(iy + 1, src.height - 1);
    const float ty = static_cast<float>(fy - iy);
    for (int x = 0; x < out_w; ++x) {
      const double fx = std::clamp(x0 + (x + 0.5) * sx - 0.5, 0.0, src.width - 1.0);
      const int ix = static_cast<int>(std::floor(fx));
      const int ix1 = std::min(ix + 1, src.width - 1);
      const float tx = static_cast<float>(fx - ix);
      for (int c = 0; c < src.channels; ++c) {
        const float top = src.at(c, iy, ix) + tx * (src.at(c, iy, ix1) - src.at(c, iy, ix));
        const float bottom = src.at(c, iy1, ix) + tx * (src.at(c, iy1, ix1) - src.at(c, iy1, ix));
        out.at(c, y, x) = top + ty * (bottom - top);
      }
    }
  }
  return out;
}

namespace {

struct PngReadBuffer {
  const std::vector<std::uint8_t>* bytes;
  std::size_t offset;
};

void png_read_callback(png_structp png, png_bytep out, png_size_t n) {
  auto* buf = static_cast<PngReadBuffer*>(png_get_io_ptr(png));
  if (buf->offset + n > buf->bytes->size()) png_error(png, "truncated PNG data");
  std::memcpy(out, buf->bytes->data() + buf->offset, n);
  buf->offset += n;
}

void png_write_callback(png_structp png, png_bytep data, png_size_t n) {
  auto* out = static_cast<std::vector<std::uint8_t>*>(png_get_io_ptr(png));
  out->insert(out->end(), data, data + n);
}

void png_error_callback(png_structp, png_const_charp msg) { throw std::runtime_error(std::string("png: ") + msg); }

void png_warning_callback(png_structp, png_const_charp) {}

}  // namespace

std::vector<std::uint8_t> encode_png(const Image& img) {
  if (img.channels != 3 && img.channels != 1) throw std::invalid_argument("encode_png: expected 1 or 3 channels");
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, png_error_callback, png_warning_callback);
  png_infop info = png_create_info_struct(png);
  std::vector<std::uint8_t> out;
  std::vector<png_byte> row(static_cast<std::size_t>(img.width) * 3);
  try {
    png_set_write_fn(png, &out, png_write_callback, nullptr);
    png_set_IHDR(png, info, static_cast<png_uint_32>(img.width), static_cast<png_uint_32>(img.height), 8,
                 PNG_COLOR_TYPE_RGB, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);
    for (int y = 0; y < img.height; ++y) {
      for (int x = 0; x < img.width; ++x)
        for (int c = 0; c < 3; ++c) {
          const float v = img.at(img.channels == 3 ? c : 0, y, x);
          row[static_cast<std::size_t>(x) * 3 + c] = static_cast<png_byte>(std::lround(std::clamp(v, 0.0f, 1.0f) * 255.0f));
        }
      png_write_row(png, row.data());
    }
    png_write_end(png, nullptr);
  } catch (...) {
    png_destroy_write_struct(&png, &info);
    throw;
  }
  png_destroy_write_struct(&png, &info);
  return out;
}

Image decode_png(const std::vector<std::uint8_t>& bytes) {
  if (bytes.size() < 8 || png_sig_cmp(bytes.data(), 0, 8) != 0) throw std::runtime_error("not a PNG file");
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, png_error_callback, png_warning_callback);
  png_infop info = png_create_info_struct(png);
  PngReadBuffer buf{&bytes, 0};
  Image img;
  try {
    png_set_read_fn(png, &buf, png_read_callback);
    png_read_info(png, info);
    png_set_expand(png);
    png_set_strip_16(png);
    png_set_strip_alpha(png);
    png_set_gray_to_rgb(png);
    png_read_update_info(png, info);
    const int w = static_cast<int>(png_get_image_width(png, info));
    const int h = static_cast<int>(png_get_image_height(png, info));
    if (png_get_channels(png, info) != 3) throw std::runtime_error("png: unsupported channel layout");
    img = Image(3, h, w);
    std::vector<png_byte> row(static_cast<std::size_t>(w) * 3);
    for (int y = 0; y < h; ++y) {
      png_read_row(png, row.data(), nullptr);
      for (int x = 0; x < w; ++x)
        for (int c = 0; c < 3; ++c) img.at(c, y, x) = row[static_cast<std::size_t>(x) * 3 + c] / 255.0f;
    }
  } catch (...) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw;
  }
  png_destroy_read_struct(&png, &info, nullptr);
  return img;
}

std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_png(const std::filesystem::path& path, const Image& img) {
  const auto bytes = encode_png(img);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

Image read_png(const std::filesystem::path& path) { return decode_png(read_file_bytes(path)); }

}  // namespace ccgp
