#pragma once

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

#include "mrsde/image.hpp"
#include "mrsde/rng.hpp"

namespace mrsde {

// ---- mask generation ----

enum class MaskKind { Rect, Strokes };

struct MaskSpec {
  MaskKind kind = MaskKind::Strokes;
  int height = 32;
  int width = 32;
  double r_lo = 0.2;  // target masked-ratio range
  double r_hi = 0.4;
  // Explicit rectangle (Rect kind). Negative x0 means "derive from ratio".
  int rect_x0 = -1, rect_y0 = -1, rect_w = 0, rect_h = 0;
};

namespace detail {

inline void stamp_disk(Mask& m, double cy, double cx, double radius) {
  const int r = static_cast<int>(std::ceil(radius));
  const int y0 = std::max(0, static_cast<int>(cy) - r);
  const int y1 = std::min(m.height - 1, static_cast<int>(cy) + r);
  const int x0 = std::max(0, static_cast<int>(cx) - r);
  const int x1 = std::min(m.width - 1, static_cast<int>(cx) + r);
  for (int y = y0; y <= y1; ++y)
    for (int x = x0; x <= x1; ++x) {
      const double dy = y - cy, dx = x - cx;
      if (dy * dy + dx * dx <= radius * radius) m.at(y, x) = 0.0;
    }
}

// One random-walk brush stroke with momentum.
inline void draw_stroke(Mask& m, Rng& rng) {
  double y = rng.uniform() * m.height;
  double x = rng.uniform() * m.width;
  double angle = rng.uniform() * 6.283185307179586;
  const int steps = rng.uniform_int(m.height / 4 + 1, m.height);
  const double radius = 0.5 + rng.uniform() * std::max(1.0, m.height / 16.0);
  for (int i = 0; i < steps; ++i) {
    stamp_disk(m, y, x, radius);
    angle += (rng.uniform() - 0.5) * 1.0;
    y += std::sin(angle) * radius;
    x += std::cos(angle) * radius;
    y = std::clamp(y, 0.0, m.height - 1.0);
    x = std::clamp(x, 0.0, m.width - 1.0);
  }
}

}  // namespace detail

struct MaskGenerationError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

inline Mask gen_mask(const MaskSpec& spec, Rng& rng) {
  if (!(spec.r_lo > 0.0 && spec.r_hi < 1.0 && spec.r_lo <= spec.r_hi))
    throw std::invalid_argument("gen_mask: ratio range must be within (0,1)");
  if (spec.kind == MaskKind::Rect) {
    Mask m(spec.height, spec.width, 1.0);
    int x0 = spec.rect_x0, y0 = spec.rect_y0, w = spec.rect_w, h = spec.rect_h;
    if (x0 < 0) {
      // random rectangle with area ratio drawn from the target range
      const double r = spec.r_lo + rng.uniform() * (spec.r_hi - spec.r_lo);
      h = std::clamp(static_cast<int>(std::lround(std::sqrt(r) * spec.height)), 1,
                     spec.height);
      w = std::clamp(static_cast<int>(std::lround(r * spec.height * spec.width / h)), 1,
                     spec.width);
      y0 = rng.uniform_int(0, spec.height - h);
      x0 = rng.uniform_int(0, spec.width - w);
    }
    if (x0 + w > spec.width || y0 + h > spec.height || w <= 0 || h <= 0)
      throw std::invalid_argument("gen_mask: rectangle out of bounds");
    for (int y = y0; y < y0 + h; ++y)
      for (int x = x0; x < x0 + w; ++x) m.at(y, x) = 0.0;
    return m;
  }
  // Strokes: accumulate brush strokes until the ratio lands in range;
  // restart on overshoot, bounded retries.
  constexpr int kMaxAttempts = 200;
  for (int attempt = 0; attempt < kMaxAttempts; ++attempt) {
    Mask m(spec.height, spec.width, 1.0);
    while (m.masked_ratio() < spec.r_lo) detail::draw_stroke(m, rng);
    const double r = m.masked_ratio();
    if (r >= spec.r_lo && r <= spec.r_hi) return m;
  }
  throw MaskGenerationError("gen_mask: could not hit target ratio range");
}

// ---- synthetic test images ----

enum class ImageKind { Gradient, Checkerboard, Blobs };

struct ImageSpec {
  ImageKind kind = ImageKind::Blobs;
  int height = 32;
  int width = 32;
  int channels = 3;
  int period = 1;    // checkerboard
  int num_blobs = 8; // blobs
};

inline ImageGrid gen_synthetic(const ImageSpec& spec, Rng& rng) {
  ImageGrid img(spec.height, spec.width, spec.channels);
  switch (spec.kind) {
    case ImageKind::Gradient: {
      for (int y = 0; y < img.height; ++y)
        for (int x = 0; x < img.width; ++x) {
          const double v = (img.width > 1) ? static_cast<double>(x) / (img.width - 1) : 0.0;
          for (int c = 0; c < img.channels; ++c) img.at(y, x, c) = v;
        }
      return img;
    }
    case ImageKind::Checkerboard: {
      if (spec.period < 1) throw std::invalid_argument("checkerboard: period >= 1");
      for (int y = 0; y < img.height; ++y)
        for (int x = 0; x < img.width; ++x) {
          const double v = ((y / spec.period + x / spec.period) % 2 == 0) ? 0.0 : 1.0;
          for (int c = 0; c < img.channels; ++c) img.at(y, x, c) = v;
        }
      return img;
    }
    case ImageKind::Blobs: {
      // Smooth background plus hard-edged random disks: piecewise-smooth
      // regions with distinct edges, so edge extraction is non-trivial.
      for (int y = 0; y < img.height; ++y)
        for (int x = 0; x < img.width; ++x) {
          const double v = 0.3 + 0.25 * (static_cast<double>(y) / std::max(1, img.height - 1))
                           + 0.15 * (static_cast<double>(x) / std::max(1, img.width - 1));
          for (int c = 0; c < img.channels; ++c) img.at(y, x, c) = v;
        }
      for (int b = 0; b < spec.num_blobs; ++b) {
        const double cy = rng.uniform() * img.height;
        const double cx = rng.uniform() * img.width;
        const double radius = (0.08 + 0.2 * rng.uniform()) * std::min(img.height, img.width);
        double color[3];
        for (int c = 0; c < 3; ++c) color[c] = 0.05 + 0.9 * rng.uniform();
        for (int y = 0; y < img.height; ++y)
          for (int x = 0; x < img.width; ++x) {
            const double dy = y - cy, dx = x - cx;
            if (dy * dy + dx * dx <= radius * radius)
              for (int c = 0; c < img.channels; ++c)
                img.at(y, x, c) = color[img.channels == 3 ? c : 0];
          }
      }
      return img;
    }
  }
  throw std::invalid_argument("gen_synthetic: unknown kind");
}

}  // namespace mrsde
