#include "ccgp/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

namespace ccgp {

namespace {

void clamp01(Image& img) { img.data = img.data.max(0.0f).min(1.0f); }

float luma(const Image& img, int y, int x) {
  return 0.299f * img.at(0, y, x) + 0.587f * img.at(1, y, x) + 0.114f * img.at(2, y, x);
}

void rgb_to_hsv(float r, float g, float b, float& h, float& s, float& v) {
  const float mx = std::max({r, g, b}), mn = std::min({r, g, b});
  const float d = mx - mn;
  v = mx;
  s = mx > 0.0f ? d / mx : 0.0f;
  if (d <= 0.0f) {
    h = 0.0f;
  } else if (mx == r) {
    h = (g - b) / d;
    if (h < 0.0f) h += 6.0f;
  } else if (mx == g) {
    h = (b - r) / d + 2.0f;
  } else {
    h = (r - g) / d + 4.0f;
  }
  h /= 6.0f;
}

void hsv_to_rgb(float h, float s, float v, float& r, float& g, float& b) {
  h = (h - std::floor(h)) * 6.0f;
  const int sector = static_cast<int>(h) % 6;
  const float f = h - std::floor(h);
  const float p = v * (1 - s), q = v * (1 - s * f), t = v * (1 - s * (1 - f));
  switch (sector) {
    case 0: r = v, g = t, b = p; break;
    case 1: r = q, g = v, b = p; break;
    case 2: r = p, g = v, b = t; break;
    case 3: r = p, g = q, b = v; break;
    case 4: r = t, g = p, b = v; break;
    default: r = v, g = p, b = q; break;
  }
}

Image random_resized_crop(const Image& img, const AugmentationPolicy& p, Rng& rng) {
  const double area = static_cast<double>(img.height) * img.width;
  const double log_lo = std::log(p.crop_ratio_min), log_hi = std::log(p.crop_ratio_max);
  for (int attempt = 0; attempt < 10; ++attempt) {
    const double target = area * uniform(rng, p.crop_scale_min, p.crop_scale_max);
    const double ratio = std::exp(uniform(rng, log_lo, log_hi));
    const int w = static_cast<int>(std::lround(std::sqrt(target * ratio)));
    const int h = static_cast<int>(std::lround(std::sqrt(target / ratio)));
    if (w > 0 && h > 0 && w <= img.width && h <= img.height) {
      const int y0 = static_cast<int>(uniform_index(rng, static_cast<std::uint64_t>(img.height - h + 1)));
      const int x0 = static_cast<int>(uniform_index(rng, static_cast<std::uint64_t>(img.width - w + 1)));
      return resize_crop(img, x0, y0, w, h, img.height, img.width);
    }
  }
  // Center crop at the closest admissible aspect ratio.
  const double in_ratio = static_cast<double>(img.width) / img.height;
  int w = img.width, h = img.height;
  if (in_ratio < p.crop_ratio_min) {
    h = static_cast<int>(std::lround(w / p.crop_ratio_min));
  } else if (in_ratio > p.crop_ratio_max) {
    w = static_cast<int>(std::lround(h * p.crop_ratio_max));
  }
  return resize_crop(img, (img.width - w) / 2, (img.height - h) / 2, w, h, img.height, img.width);
}

void color_jitter(Image& img, const AugmentationPolicy& p, Rng& rng) {
  const double s = p.jitter_strength;
  const auto brightness = static_cast<float>(uniform(rng, std::max(0.0, 1.0 - s), 1.0 + s));
  const auto contrast = static_cast<float>(uniform(rng, std::max(0.0, 1.0 - s), 1.0 + s));
  const auto saturation = static_cast<float>(uniform(rng, std::max(0.0, 1.0 - s), 1.0 + s));
  const auto hue = static_cast<float>(uniform(rng, -p.jitter_hue, p.jitter_hue));

  img.data *= brightness;
  clamp01(img);

  float mean = 0.0f;
  for (int y = 0; y < img.height; ++y)
    for (int x = 0; x < img.width; ++x) mean += luma(img, y, x);
  mean /= static_cast<float>(img.height * img.width);
  img.data = (img.data - mean) * contrast + mean;
  clamp01(img);

  for (int y = 0; y < img.height; ++y)
    for (int x = 0; x < img.width; ++x) {
      const float g = luma(img, y, x);
      for (int c = 0; c < 3; ++c) img.at(c, y, x) = (img.at(c, y, x) - g) * saturation + g;
    }
  clamp01(img);

  for (int y = 0; y < img.height; ++y)
    for (int x = 0; x < img.width; ++x) {
      float h, sat, v;
      rgb_to_hsv(img.at(0, y, x), img.at(1, y, x), img.at(2, y, x), h, sat, v);
      hsv_to_rgb(h + hue, sat, v, img.at(0, y, x), img.at(1, y, x), img.at(2, y, x));
    }
  clamp01(img);
}

void grayscale(Image& img) {
  for (int y = 0; y < img.height; ++y)
    for (int x = 0; x < img.width; ++x) {
      const float g = luma(img, y, x);
      for (int c = 0; c < img.channels; ++c) img.at(c, y, x) = g;
    }
}

void hflip(Image& img) {
  for (int c = 0; c < img.channels; ++c)
    for (int y = 0; y < img.height; ++y)
      for (int x = 0; x < img.width / 2; ++x) std::swap(img.at(c, y, x), img.at(c, y, img.width - 1 - x));
}

int reflect(int i, int n) {
  if (n == 1) return 0;
  while (i < 0 || i >= n) i = i < 0 ? -i : 2 * (n - 1) - i;
  return i;
}

void gaussian_blur(Image& img, double sigma) {
  const int radius = std::max(1, img.width / 20);
  std::vector<float> kernel(static_cast<std::size_t>(2 * radius + 1));
  float total = 0.0f;
  for (int k = -radius; k <= radius; ++k) {
    kernel[static_cast<std::size_t>(k + radius)] = static_cast<float>(std::exp(-0.5 * k * k / (sigma * sigma)));
    total += kernel[static_cast<std::size_t>(k + radius)];
  }
  for (auto& k : kernel) k /= total;
  Image tmp = img;
  for (int c = 0; c < img.channels; ++c)
    for (int y = 0; y < img.height; ++y)
      for (int x = 0; x < img.width; ++x) {
        float acc = 0.0f;
        for (int k = -radius; k <= radius; ++k)
          acc += kernel[static_cast<std::size_t>(k + radius)] * img.at(c, y, reflect(x + k, img.width));
        tmp.at(c, y, x) = acc;
      }
  for (int c = 0; c < img.channels; ++c)
    for (int y = 0; y < img.height; ++y)
      for (int x = 0; x < img.width; ++x) {
        float acc = 0.0f;
        for (int k = -radius; k <= radius; ++k)
          acc += kernel[static_cast<std::size_t>(k + radius)] * tmp.at(c, reflect(y + k, img.height), x);
        img.at(c, y, x) = acc;
      }
}

}  // namespace

AugmentationPolicy AugmentationPolicy::identity() {
  AugmentationPolicy p;
  p.crop_scale_min = p.crop_scale_max = 1.0;
  p.crop_ratio_min = p.crop_ratio_max = 1.0;
  p.jitter_prob = p.grayscale_prob = p.flip_prob = p.blur_prob = 0.0;
  return p;
}

Image augment(const Image& image, const AugmentationPolicy& policy, Rng& rng) {
  Image out = random_resized_crop(image, policy, rng);
  if (bernoulli(rng, policy.jitter_prob) && out.channels == 3) color_jitter(out, policy, rng);
  if (bernoulli(rng, policy.grayscale_prob) && out.channels == 3) grayscale(out);
  if (bernoulli(rng, policy.flip_prob)) hflip(out);
  if (bernoulli(rng, policy.blur_prob)) gaussian_blur(out, uniform(rng, policy.blur_sigma_min, policy.blur_sigma_max));
  clamp01(out);
  return out;
}

Image augment(const Image& image, const AugmentationPolicy& policy, const AugmentSeed& key) {
  Rng rng(mix_seed({key.seed, key.epoch, key.record, key.view, 0xa06}));
  return augment(image, policy, rng);
}

}  // namespace ccgp
