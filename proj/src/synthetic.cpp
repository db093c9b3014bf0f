#include "ccgp/dataset.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <stdexcept>

namespace ccgp {

namespace {

constexpr double kGolden = 0.6180339887498949;

double frac(double x) { return x - std::floor(x); }

using Rgb = std::array<float, 3>;

Rgb hsv_to_rgb(double h, double s, double v) {
  h = frac(h) * 6.0;
  const int sector = static_cast<int>(h) % 6;
  const double f = h - std::floor(h);
  const double p = v * (1 - s), q = v * (1 - s * f), t = v * (1 - s * (1 - f));
  double r = 0, g = 0, b = 0;
  switch (sector) {
    case 0: r = v, g = t, b = p; break;
    case 1: r = q, g = v, b = p; break;
    case 2: r = p, g = v, b = t; break;
    case 3: r = p, g = q, b = v; break;
    case 4: r = t, g = p, b = v; break;
    default: r = v, g = p, b = q; break;
  }
  return {static_cast<float>(r), static_cast<float>(g), static_cast<float>(b)};
}

struct Style {
  double theta;
  double freq;  // cycles across the image
  int pattern;  // 0 stripes, 1 checker, 2 dots
  Rgb light;
  Rgb dark;
};

Style style_of(int category) {
  const double hue = frac(0.07 + category * kGolden);
  return {frac(category * kGolden) * std::numbers::pi, 2.0 + 3.0 * frac(category * (1.0 - kGolden) + 0.2),
          category % 3, hsv_to_rgb(hue, 0.65, 0.9), hsv_to_rgb(hue + 0.05, 0.8, 0.35)};
}

// Per-image variation of a category style.
struct Texture {
  Style style;
  double phase_a, phase_b, gain;

  Texture(int category, Rng& rng) : style(style_of(category)) {
    style.theta += uniform(rng, -0.17, 0.17);
    style.freq *= uniform(rng, 0.85, 1.15);
    phase_a = uniform(rng, 0.0, 2.0 * std::numbers::pi);
    phase_b = uniform(rng, 0.0, 2.0 * std::numbers::pi);
    gain = uniform(rng, 0.85, 1.15);
  }

  Rgb at(double u, double v) const {
    const double c = std::cos(style.theta), s = std::sin(style.theta);
    const double a = u * c + v * s, b = -u * s + v * c;
    const double w = 2.0 * std::numbers::pi * style.freq;
    const double sa = std::sin(w * a + phase_a), sb = std::sin(w * b + phase_b);
    double t = 0.0;
    switch (style.pattern) {
      case 0: t = 0.5 + 0.5 * sa; break;
      case 1: t = 0.5 + 0.5 * std::tanh(3.0 * sa * sb); break;
      default: t = std::clamp(0.5 * (sa + sb), 0.0, 1.0); break;
    }
    Rgb out;
    for (int k = 0; k < 3; ++k)
      out[k] = static_cast<float>(gain * (style.dark[k] + t * (style.light[k] - style.dark[k])));
    return out;
  }
};

}  // namespace

std::string category_name(int category) {
  static const std::array<const char*, 5> kNames = {"residential", "commercial", "industrial", "transportation",
                                                    "greenfield"};
  if (category >= 0 && category < static_cast<int>(kNames.size())) return kNames[static_cast<std::size_t>(category)];
  return "category_" + std::to_string(category);
}

RenderedImage render_image(int category, int num_categories, std::uint64_t image_seed, double distractor_prob,
                           int size) {
  if (category < 0 || category >= num_categories) throw std::invalid_argument("render_image: invalid category");
  Rng rng(mix_seed({image_seed, 0x1a5e}));
  RenderedImage out;
  out.image = Image(3, size, size);
  const Texture base(category, rng);
  for (int y = 0; y < size; ++y)
    for (int x = 0; x < size; ++x) {
      const auto rgb = base.at((x + 0.5) / size, (y + 0.5) / size);
      for (int c = 0; c < 3; ++c) out.image.at(c, y, x) = rgb[static_cast<std::size_t>(c)];
    }

  // Small clutter rectangles.
  const int clutter = 3 + static_cast<int>(uniform_index(rng, 4));
  for (int k = 0; k < clutter; ++k) {
    const int w = 2 + static_cast<int>(uniform_index(rng, 4)), h = 2 + static_cast<int>(uniform_index(rng, 4));
    const int x0 = static_cast<int>(uniform_index(rng, static_cast<std::uint64_t>(size - w + 1)));
    const int y0 = static_cast<int>(uniform_index(rng, static_cast<std::uint64_t>(size - h + 1)));
    const Rgb color = hsv_to_rgb(uniform01(rng), uniform(rng, 0.0, 0.6), uniform(rng, 0.2, 1.0));
    for (int y = y0; y < y0 + h; ++y)
      for (int x = x0; x < x0 + w; ++x)
        for (int c = 0; c < 3; ++c) out.image.at(c, y, x) = color[static_cast<std::size_t>(c)];
  }

  out.occluder_mask.assign(static_cast<std::size_t>(size) * size, 0);
  if (num_categories > 1 && bernoulli(rng, distractor_prob)) {
    int other = static_cast<int>(uniform_index(rng, static_cast<std::uint64_t>(num_categories - 1)));
    if (other >= category) ++other;
    const Texture occluder(other, rng);
    const double area = uniform(rng, 0.35, 0.5);
    const double aspect = uniform(rng, 0.7, 1.4);
    const bool ellipse = bernoulli(rng, 0.5);
    // Half extents in normalized units; ellipse area is pi*a*b, rectangle 4*a*b.
    const double ab = ellipse ? area / std::numbers::pi : area / 4.0;
    const double ha = std::sqrt(ab * aspect), hb = std::sqrt(ab / aspect);
    const double cx = uniform(rng, std::min(ha, 0.5), std::max(1.0 - ha, 0.5));
    const double cy = uniform(rng, std::min(hb, 0.5), std::max(1.0 - hb, 0.5));
    for (int y = 0; y < size; ++y)
      for (int x = 0; x < size; ++x) {
        const double u = (x + 0.5) / size, v = (y + 0.5) / size;
        const double du = (u - cx) / ha, dv = (v - cy) / hb;
        const bool inside = ellipse ? du * du + dv * dv <= 1.0 : std::abs(du) <= 1.0 && std::abs(dv) <= 1.0;
        if (!inside) continue;
        out.occluder_mask[static_cast<std::size_t>(y) * size + x] = 1;
        const auto rgb = occluder.at(u, v);
        for (int c = 0; c < 3; ++c) out.image.at(c, y, x) = rgb[static_cast<std::size_t>(c)];
      }
    out.has_distractor = true;
    out.distractor_category = other;
  }

  for (auto& v : out.image.data) {
    v += static_cast<float>(0.03 * normal(rng));
    v = std::round(std::clamp(v, 0.0f, 1.0f) * 255.0f) / 255.0f;
  }
  return out;
}

void SyntheticCitySpec::validate() const {
  if (zones < 1) throw std::invalid_argument("synthetic city: need at least one zone");
  if (categories < 1 || categories > zones)
    throw std::invalid_argument("synthetic city: categories must be in [1, zones]");
  if (!(extent > 0.0)) throw std::invalid_argument("synthetic city: extent must be positive");
  if (image_size < 4) throw std::invalid_argument("synthetic city: image size too small");
  if (samples_per_zone < 1) throw std::invalid_argument("synthetic city: samples per zone must be >= 1");
  if (!(distractor_prob >= 0.0 && distractor_prob <= 1.0))
    throw std::invalid_argument("synthetic city: distractor probability must be in [0, 1]");
  if (!zone_seeds.empty() && zone_seeds.size() != static_cast<std::size_t>(zones))
    throw std::invalid_argument("synthetic city: explicit zone seeds must match the zone count");
}

int SyntheticCity::zone_of(ProjectedPoint local) const {
  int best = 0;
  double best_d2 = squared_distance(local, zone_seeds[0]);
  for (std::size_t z = 1; z < zone_seeds.size(); ++z) {
    const double d2 = squared_distance(local, zone_seeds[z]);
    if (d2 < best_d2) {
      best_d2 = d2;
      best = static_cast<int>(z);
    }
  }
  return best;
}

SyntheticCity generate_city(const SyntheticCitySpec& spec) {
  spec.validate();
  SyntheticCity city;
  city.spec = spec;
  Rng rng(mix_seed({spec.seed, 0xc17e}));

  const double e = spec.extent;
  city.zone_seeds = spec.zone_seeds;
  if (city.zone_seeds.empty())
    for (int z = 0; z < spec.zones; ++z) {
      const double x = uniform(rng, 0.0, e);
      city.zone_seeds.push_back({x, uniform(rng, 0.0, e)});
    }

  // Zone z gets category order[z] % C, so categories cover zones evenly.
  std::vector<int> order(static_cast<std::size_t>(spec.zones));
  for (int z = 0; z < spec.zones; ++z) order[static_cast<std::size_t>(z)] = z;
  if (spec.zone_seeds.empty()) shuffle(order.begin(), order.end(), rng);
  for (int z = 0; z < spec.zones; ++z) city.zone_category.push_back(order[static_cast<std::size_t>(z)] % spec.categories);

  // Jittered candidate grid, refined until every zone can supply its quota.
  const auto needed = static_cast<double>(spec.zones) * spec.samples_per_zone;
  double spacing = e / std::ceil(std::sqrt(4.0 * needed));
  std::vector<ProjectedPoint> candidates;
  std::vector<std::vector<std::size_t>> by_zone;
  for (int attempt = 0;; ++attempt) {
    const int cells = static_cast<int>(std::round(e / spacing));
    Rng grid_rng(mix_seed({spec.seed, 0x961d, static_cast<std::uint64_t>(attempt)}));
    candidates.clear();
    by_zone.assign(static_cast<std::size_t>(spec.zones), {});
    for (int gy = 0; gy < cells; ++gy)
      for (int gx = 0; gx < cells; ++gx) {
        const double x = (gx + 0.5 + uniform(grid_rng, -0.35, 0.35)) * spacing;
        const double y = (gy + 0.5 + uniform(grid_rng, -0.35, 0.35)) * spacing;
        by_zone[static_cast<std::size_t>(city.zone_of({x, y}))].push_back(candidates.size());
        candidates.push_back({x, y});
      }
    const bool enough = std::all_of(by_zone.begin(), by_zone.end(), [&](const auto& members) {
      return members.size() >= static_cast<std::size_t>(spec.samples_per_zone);
    });
    if (enough) break;
    if (attempt >= 8) throw std::runtime_error("synthetic city: a zone is too small for its sample quota");
    spacing /= 2.0;
  }

  std::vector<std::pair<std::size_t, int>> chosen;  // (candidate, zone)
  for (int z = 0; z < spec.zones; ++z) {
    auto members = by_zone[static_cast<std::size_t>(z)];
    shuffle(members.begin(), members.end(), rng);
    for (int k = 0; k < spec.samples_per_zone; ++k) chosen.emplace_back(members[static_cast<std::size_t>(k)], z);
  }
  std::sort(chosen.begin(), chosen.end());

  const ProjectedPoint origin = project(spec.origin);
  for (std::size_t i = 0; i < chosen.size(); ++i) {
    const auto [cand, zone] = chosen[i];
    const int category = city.zone_category[static_cast<std::size_t>(zone)];
    char id[32];
    std::snprintf(id, sizeof(id), "r%06zu", i);
    GeoImageRecord r;
    r.id = id;
    r.image_path = "images/" + r.id + ".png";
    r.geo = unproject({origin.x + candidates[cand].x, origin.y + candidates[cand].y});
    r.proj = project(r.geo);
    r.label = category_name(category);
    auto rendered = render_image(category, spec.categories, mix_seed({spec.seed, 0x1a9e, i}), spec.distractor_prob,
                                 spec.image_size);
    city.data.records.push_back(std::move(r));
    city.data.images.push_back(std::move(rendered.image));
    city.categories.push_back(category);
    city.has_distractor.push_back(rendered.has_distractor);
  }
  return city;
}

void materialize_city(const SyntheticCity& city, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir / "images");
  for (std::size_t i = 0; i < city.data.size(); ++i)
    write_png(dir / city.data.records[i].image_path, city.data.images[i]);
  write_manifest(dir / "manifest.jsonl", city.data.records);
}

}  // namespace ccgp
