#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>

#include "gocard/data.hpp"
#include "gocard/errors.hpp"

namespace gocard {

namespace {

struct Color {
  int r, g, b;
};

std::uint8_t clamp_channel(double v) {
  return static_cast<std::uint8_t>(std::clamp(v, 0.0, 255.0));
}

Color shade(const Color& c, double brightness, int jitter_r, int jitter_g, int jitter_b) {
  return {static_cast<int>(clamp_channel((c.r + jitter_r) * brightness)),
          static_cast<int>(clamp_channel((c.g + jitter_g) * brightness)),
          static_cast<int>(clamp_channel((c.b + jitter_b) * brightness))};
}

void put(Image& img, int y, int x, const Color& c) {
  if (y < 0 || y >= img.height || x < 0 || x >= img.width) return;
  std::uint8_t* px = img.at(y, x);
  px[0] = static_cast<std::uint8_t>(c.r);
  px[1] = static_cast<std::uint8_t>(c.g);
  px[2] = static_cast<std::uint8_t>(c.b);
}

void fill_rect(Image& img, int y0, int x0, int y1, int x1, const Color& c) {
  for (int y = y0; y < y1; ++y) {
    for (int x = x0; x < x1; ++x) put(img, y, x, c);
  }
}

void fill_disc(Image& img, double cy, double cx, double ry, double rx, const Color& c) {
  for (int y = static_cast<int>(cy - ry); y <= static_cast<int>(cy + ry) + 1; ++y) {
    for (int x = static_cast<int>(cx - rx); x <= static_cast<int>(cx + rx) + 1; ++x) {
      const double dy = (y + 0.5 - cy) / ry, dx = (x + 0.5 - cx) / rx;
      if (dy * dy + dx * dx <= 1.0) put(img, y, x, c);
    }
  }
}

void fill_ring(Image& img, double cy, double cx, double router, double rinner, const Color& c) {
  for (int y = static_cast<int>(cy - router); y <= static_cast<int>(cy + router) + 1; ++y) {
    for (int x = static_cast<int>(cx - router); x <= static_cast<int>(cx + router) + 1; ++x) {
      const double dy = y + 0.5 - cy, dx = x + 0.5 - cx;
      const double d = std::sqrt(dy * dy + dx * dx);
      if (d <= router && d >= rinner) put(img, y, x, c);
    }
  }
}

// Vertices in (y, x); filled via edge-sign tests.
void fill_triangle(Image& img, std::array<double, 2> a, std::array<double, 2> b,
                   std::array<double, 2> c, const Color& color) {
  const double ymin = std::min({a[0], b[0], c[0]}), ymax = std::max({a[0], b[0], c[0]});
  const double xmin = std::min({a[1], b[1], c[1]}), xmax = std::max({a[1], b[1], c[1]});
  auto edge = [](const std::array<double, 2>& p, const std::array<double, 2>& q, double y,
                 double x) { return (q[1] - p[1]) * (y - p[0]) - (q[0] - p[0]) * (x - p[1]); };
  for (int y = static_cast<int>(ymin); y <= static_cast<int>(ymax) + 1; ++y) {
    for (int x = static_cast<int>(xmin); x <= static_cast<int>(xmax) + 1; ++x) {
      const double py = y + 0.5, px = x + 0.5;
      const double e0 = edge(a, b, py, px), e1 = edge(b, c, py, px), e2 = edge(c, a, py, px);
      if ((e0 >= 0 && e1 >= 0 && e2 >= 0) || (e0 <= 0 && e1 <= 0 && e2 <= 0)) {
        put(img, y, x, color);
      }
    }
  }
}

constexpr std::array<Color, 8> kPalette = {{{52, 52, 60},
                                            {158, 64, 54},
                                            {70, 76, 84},
                                            {235, 218, 130},
                                            {92, 112, 142},
                                            {176, 176, 186},
                                            {58, 96, 64},
                                            {102, 160, 202}}};

// Draws archetype `cls` inside the pixel box [y0, y1) x [x0, x1).
void draw_part(Image& img, int cls, int y0, int x0, int y1, int x1, const Color& c) {
  const double cy = (y0 + y1) / 2.0, cx = (x0 + x1) / 2.0;
  const int h = y1 - y0, w = x1 - x0;
  const double r = std::min(h, w) / 2.0;
  switch (cls) {
    case 0: {  // wheel disc with a lighter hub
      fill_disc(img, cy, cx, r, r, c);
      const Color hub = {std::min(255, c.r + 70), std::min(255, c.g + 70),
                         std::min(255, c.b + 72)};
      fill_disc(img, cy, cx, r / 3.0, r / 3.0, hub);
      break;
    }
    case 1: {  // door panel, darker frame plus handle notch
      fill_rect(img, y0, x0, y1, x1, {c.r / 2, c.g / 2, c.b / 2});
      fill_rect(img, y0 + 1, x0 + 1, y1 - 1, x1 - 1, c);
      fill_rect(img, y0 + h / 4, x0 + w / 4, y0 + h / 4 + std::max(1, h / 10), x1 - 1,
                {c.r / 2, c.g / 2, c.b / 2});
      break;
    }
    case 2: {  // grille, alternating horizontal slats
      fill_rect(img, y0, x0, y1, x1, c);
      const Color slat = {std::min(255, c.r + 74), std::min(255, c.g + 74),
                          std::min(255, c.b + 70)};
      for (int y = y0 + 1; y < y1; y += 3) fill_rect(img, y, x0 + 1, y + 1, x1 - 1, slat);
      break;
    }
    case 3:  // headlight
      fill_disc(img, cy, cx, h / 2.0, w / 2.0, c);
      break;
    case 4:  // wing mirror
      fill_triangle(img, {static_cast<double>(y1), static_cast<double>(x0)},
                    {static_cast<double>(y1), static_cast<double>(x1)},
                    {static_cast<double>(y0), cx}, c);
      break;
    case 5:  // exhaust tip
      fill_ring(img, cy, cx, r, r / 2.0, c);
      break;
    case 6: {  // door handle, bar with end nubs
      const int bar_h = std::max(1, h / 3);
      fill_rect(img, static_cast<int>(cy) - bar_h / 2, x0, static_cast<int>(cy) + (bar_h + 1) / 2,
                x1, c);
      fill_rect(img, y0, x0, y1, x0 + std::max(1, w / 6), c);
      fill_rect(img, y0, x1 - std::max(1, w / 6), y1, x1, c);
      break;
    }
    case 7: {  // side window, trapezoid narrowing upward
      const double inset = w / 4.0;
      for (int y = y0; y < y1; ++y) {
        const double t = (y - y0 + 0.5) / h;  // 0 at the top edge
        const int left = static_cast<int>(x0 + inset * (1.0 - t));
        const int right = static_cast<int>(x1 - inset * (1.0 - t));
        fill_rect(img, y, left, y + 1, right, c);
      }
      break;
    }
    default:
      throw ConfigError("no archetype for class " + std::to_string(cls));
  }
}

}  // namespace

const std::vector<std::string>& synth_class_names() {
  static const std::vector<std::string> names = {
      "wheel_disc",    "door_rect",    "grille_stripes", "light_ellipse",
      "mirror_triangle", "exhaust_ring", "handle_bar",     "window_trapezoid"};
  return names;
}

DomainDataset synth_generate(SynthDomain domain, int n, int num_classes, int image_size,
                             std::uint64_t seed, const SynthOptions& options) {
  const int vocab = static_cast<int>(synth_class_names().size());
  if (n < 0) throw ConfigError("sample count must be >= 0");
  if (num_classes < 1 || num_classes > vocab) {
    throw ConfigError("num_classes must lie in [1, " + std::to_string(vocab) + "]");
  }
  if (options.min_parts < 1 || options.max_parts < options.min_parts) {
    throw ConfigError("parts range is empty");
  }
  if (image_size < 24) {
    throw GeometryError("image size " + std::to_string(image_size) +
                        " is too small to place parts");
  }

  const bool occluded = domain == SynthDomain::kOccluded;
  DomainDataset dataset;
  dataset.domain_id = occluded ? "occluded" : "clean";
  dataset.class_names.assign(synth_class_names().begin(),
                             synth_class_names().begin() + num_classes);

  Rng rng(seed);
  for (int i = 0; i < n; ++i) {
    Sample s;
    char id[32];
    std::snprintf(id, sizeof(id), "%s_%06d", dataset.domain_id.c_str(), i);
    s.id = id;
    s.domain = dataset.domain_id;
    const double brightness =
        occluded ? rng.uniform(0.7, 1.3) : rng.uniform(0.9, 1.1);
    const std::uint8_t bg = clamp_channel(168.0 * brightness);
    s.image = Image::filled(image_size, image_size, bg, bg, clamp_channel(172.0 * brightness));

    const int parts = rng.uniform_int(options.min_parts, options.max_parts);
    struct Placed {
      int y0, x0, y1, x1;
    };
    std::vector<Placed> placed;
    for (int p = 0; p < parts; ++p) {
      const int cls = rng.uniform_int(0, num_classes - 1);
      const int w = rng.uniform_int(image_size / 6, image_size / 3);
      const int h = rng.uniform_int(image_size / 6, image_size / 3);
      const int x0 = rng.uniform_int(1, image_size - w - 1);
      const int y0 = rng.uniform_int(1, image_size - h - 1);
      const Color c = shade(kPalette[static_cast<std::size_t>(cls)], brightness,
                            rng.uniform_int(-10, 10), rng.uniform_int(-10, 10),
                            rng.uniform_int(-10, 10));
      draw_part(s.image, cls, y0, x0, y0 + h, x0 + w, c);
      placed.push_back({y0, x0, y0 + h, x0 + w});
      GroundTruthBox b;
      b.class_id = cls;
      b.cx = (x0 + w / 2.0) / image_size;
      b.cy = (y0 + h / 2.0) / image_size;
      b.w = static_cast<double>(w) / image_size;
      b.h = static_cast<double>(h) / image_size;
      s.boxes.push_back(b);
    }

    if (occluded) {
      const int strokes = rng.uniform_int(1, 3);
      for (int k = 0; k < strokes; ++k) {
        const auto& target = placed[static_cast<std::size_t>(
            rng.uniform_int(0, static_cast<int>(placed.size()) - 1))];
        const int bw = target.x1 - target.x0;
        const int lo = std::max(1, (bw + 9) / 10);       // ceil(0.1 w)
        const int hi = std::max(lo, bw / 2);             // floor(0.5 w)
        const int stroke_w = rng.uniform_int(lo, hi);
        const int sx = rng.uniform_int(target.x0, target.x1 - stroke_w);
        const int reach = (target.y1 - target.y0) / 4;
        const Color limb = shade({96, 72, 58}, 1.0, rng.uniform_int(-8, 8),
                                 rng.uniform_int(-8, 8), rng.uniform_int(-8, 8));
        fill_rect(s.image, target.y0 - reach, sx, target.y1 + reach, sx + stroke_w, limb);
      }
    }
    dataset.samples.push_back(std::move(s));
  }
  return dataset;
}

}  // namespace gocard
