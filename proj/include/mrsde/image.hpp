#pragma once

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace mrsde {

// H x W x C grid of reals, row-major with interleaved channels.
// Clean images live in [0,1]; diffused states may exceed that range.
struct ImageGrid {
  int height = 0;
  int width = 0;
  int channels = 1;
  std::vector<double> data;

  ImageGrid() = default;
  ImageGrid(int h, int w, int c, double fill = 0.0)
      : height(h), width(w), channels(c),
        data(static_cast<std::size_t>(h) * w * c, fill) {
    if (h <= 0 || w <= 0 || c < 1)
      throw std::invalid_argument("ImageGrid: bad dimensions");
  }

  double& at(int y, int x, int c = 0) {
    return data[(static_cast<std::size_t>(y) * width + x) * channels + c];
  }
  double at(int y, int x, int c = 0) const {
    return data[(static_cast<std::size_t>(y) * width + x) * channels + c];
  }
  std::size_t size() const { return data.size(); }
  bool same_shape(const ImageGrid& o) const {
    return height == o.height && width == o.width && channels == o.channels;
  }
};

// Binary mask: 0 = masked region (to inpaint), 1 = unmasked.
struct Mask {
  int height = 0;
  int width = 0;
  std::vector<double> data;

  Mask() = default;
  Mask(int h, int w, double fill = 1.0)
      : height(h), width(w), data(static_cast<std::size_t>(h) * w, fill) {
    if (h <= 0 || w <= 0) throw std::invalid_argument("Mask: bad dimensions");
    if (fill != 0.0 && fill != 1.0)
      throw std::invalid_argument("Mask: values must be 0 or 1");
  }

  double& at(int y, int x) { return data[static_cast<std::size_t>(y) * width + x]; }
  double at(int y, int x) const { return data[static_cast<std::size_t>(y) * width + x]; }

  // Fraction of masked (zero) pixels.
  double masked_ratio() const {
    std::size_t zeros = 0;
    for (double v : data) zeros += (v == 0.0);
    return static_cast<double>(zeros) / static_cast<double>(data.size());
  }
};

inline void check_same_shape(const ImageGrid& a, const ImageGrid& b) {
  if (!a.same_shape(b)) throw std::invalid_argument("image shape mismatch");
}

inline void check_mask_shape(const ImageGrid& a, const Mask& m) {
  if (a.height != m.height || a.width != m.width)
    throw std::invalid_argument("mask shape mismatch");
}

// ITU-R BT.601 luminance.
inline ImageGrid to_grayscale(const ImageGrid& img) {
  if (img.channels != 3)
    throw std::invalid_argument("to_grayscale: expected 3 channels");
  ImageGrid out(img.height, img.width, 1);
  for (int y = 0; y < img.height; ++y)
    for (int x = 0; x < img.width; ++x)
      out.at(y, x) =
          0.299 * img.at(y, x, 0) + 0.587 * img.at(y, x, 1) + 0.114 * img.at(y, x, 2);
  return out;
}

// Grayscale view: pass-through for 1-channel images.
inline ImageGrid luminance_of(const ImageGrid& img) {
  return img.channels == 1 ? img : to_grayscale(img);
}

namespace detail {

// Sobel gradient magnitude normalized by the theoretical maximum for
// values in [0,1], i.e. 4*sqrt(2). Replicate padding at the borders.
inline ImageGrid sobel_magnitude(const ImageGrid& img) {
  if (img.height < 3 || img.width < 3)
    throw std::invalid_argument("sobel: image smaller than 3x3");
  const ImageGrid g = luminance_of(img);
  ImageGrid out(g.height, g.width, 1);
  auto px = [&](int y, int x) {
    y = std::clamp(y, 0, g.height - 1);
    x = std::clamp(x, 0, g.width - 1);
    return g.at(y, x);
  };
  const double norm = 4.0 * std::sqrt(2.0);
  for (int y = 0; y < g.height; ++y) {
    for (int x = 0; x < g.width; ++x) {
      const double gx = -px(y - 1, x - 1) + px(y - 1, x + 1)
                        - 2 * px(y, x - 1) + 2 * px(y, x + 1)
                        - px(y + 1, x - 1) + px(y + 1, x + 1);
      const double gy = -px(y - 1, x - 1) - 2 * px(y - 1, x) - px(y - 1, x + 1)
                        + px(y + 1, x - 1) + 2 * px(y + 1, x) + px(y + 1, x + 1);
      out.at(y, x) = std::sqrt(gx * gx + gy * gy) / norm;
    }
  }
  return out;
}

}  // namespace detail

// Binary edge map: normalized Sobel magnitude thresholded at tau_edge.
inline ImageGrid edge_map(const ImageGrid& img, double tau_edge = 0.2) {
  ImageGrid mag = detail::sobel_magnitude(img);
  for (double& v : mag.data) v = (v > tau_edge) ? 1.0 : 0.0;
  return mag;
}

// I ⊙ M, mask broadcast over channels.
inline ImageGrid apply_mask(const ImageGrid& img, const Mask& m) {
  check_mask_shape(img, m);
  ImageGrid out = img;
  for (int y = 0; y < img.height; ++y)
    for (int x = 0; x < img.width; ++x)
      for (int c = 0; c < img.channels; ++c) out.at(y, x, c) *= m.at(y, x);
  return out;
}

// denoised ⊙ (1-M) + gt_masked: unmasked pixels come verbatim from gt_masked.
inline ImageGrid merge_result(const ImageGrid& denoised, const ImageGrid& gt_masked,
                              const Mask& m) {
  check_same_shape(denoised, gt_masked);
  check_mask_shape(denoised, m);
  ImageGrid out = denoised;
  for (int y = 0; y < m.height; ++y)
    for (int x = 0; x < m.width; ++x) {
      if (m.at(y, x) == 1.0)
        for (int c = 0; c < out.channels; ++c) out.at(y, x, c) = gt_masked.at(y, x, c);
      // masked pixels keep the denoised value
    }
  return out;
}

// ---- binary PPM (P6) / PGM (P5) I/O, 8-bit, linear [0,1] <-> [0,255] ----

namespace detail {

inline std::uint8_t quantize8(double v) {
  const double q = std::lround(std::clamp(v, 0.0, 1.0) * 255.0);
  return static_cast<std::uint8_t>(q);
}

inline void skip_pnm_ws(std::istream& in) {
  int c;
  while ((c = in.peek()) != EOF) {
    if (c == '#') {
      std::string line;
      std::getline(in, line);
    } else if (std::isspace(c)) {
      in.get();
    } else {
      break;
    }
  }
}

inline int read_pnm_int(std::istream& in) {
  skip_pnm_ws(in);
  int v;
  if (!(in >> v)) throw std::runtime_error("pnm: malformed header");
  return v;
}

}  // namespace detail

inline void write_pnm(const ImageGrid& img, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open for writing: " + path);
  if (img.channels != 1 && img.channels != 3)
    throw std::invalid_argument("write_pnm: only 1- or 3-channel images");
  out << (img.channels == 3 ? "P6" : "P5") << "\n"
      << img.width << " " << img.height << "\n255\n";
  std::vector<std::uint8_t> buf;
  buf.reserve(img.size());
  for (double v : img.data) buf.push_back(detail::quantize8(v));
  out.write(reinterpret_cast<const char*>(buf.data()),
            static_cast<std::streamsize>(buf.size()));
  if (!out) throw std::runtime_error("write failed: " + path);
}

inline ImageGrid read_pnm(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open: " + path);
  std::string magic;
  in >> magic;
  if (magic != "P5" && magic != "P6") throw std::runtime_error("pnm: bad magic");
  const int w = detail::read_pnm_int(in);
  const int h = detail::read_pnm_int(in);
  const int maxval = detail::read_pnm_int(in);
  if (maxval != 255) throw std::runtime_error("pnm: only 8-bit supported");
  in.get();  // single whitespace after header
  const int c = (magic == "P6") ? 3 : 1;
  ImageGrid img(h, w, c);
  std::vector<std::uint8_t> buf(img.size());
  in.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
  if (!in) throw std::runtime_error("pnm: truncated pixel data");
  for (std::size_t i = 0; i < buf.size(); ++i) img.data[i] = buf[i] / 255.0;
  return img;
}

// Masks persist as PGM with {0, 255}.
inline void write_mask(const Mask& m, const std::string& path) {
  ImageGrid img(m.height, m.width, 1);
  img.data = m.data;
  write_pnm(img, path);
}

inline Mask read_mask(const std::string& path) {
  const ImageGrid img = read_pnm(path);
  if (img.channels != 1) throw std::runtime_error("mask: expected PGM");
  Mask m(img.height, img.width);
  for (std::size_t i = 0; i < img.data.size(); ++i) {
    if (img.data[i] != 0.0 && img.data[i] != 1.0)
      throw std::runtime_error("mask: non-binary pixel");
    m.data[i] = img.data[i];
  }
  return m;
}

}  // namespace mrsde
