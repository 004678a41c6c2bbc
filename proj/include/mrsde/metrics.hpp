#pragma once

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include "mrsde/image.hpp"
#include "mrsde/sde.hpp"

namespace mrsde {

constexpr double kPsnrCap = 99.0;

enum class Region { Whole, Masked, Unmasked };

struct RegionReport {
  std::string metric_name;
  double masked_value = 0.0;
  double unmasked_value = 0.0;
  int t = -1;

  double gap() const { return std::abs(masked_value - unmasked_value); }
};

namespace detail {

inline bool in_region(const Mask* m, int y, int x, Region r) {
  if (r == Region::Whole || m == nullptr) return true;
  const bool masked = (m->at(y, x) == 0.0);
  return (r == Region::Masked) ? masked : !masked;
}

inline double region_mse_value(const ImageGrid& a, const ImageGrid& b, const Mask* m,
                               Region r) {
  check_same_shape(a, b);
  if (m) check_mask_shape(a, *m);
  double acc = 0.0;
  std::size_t n = 0;
  for (int y = 0; y < a.height; ++y)
    for (int x = 0; x < a.width; ++x)
      if (in_region(m, y, x, r))
        for (int c = 0; c < a.channels; ++c) {
          const double d = a.at(y, x, c) - b.at(y, x, c);
          acc += d * d;
          ++n;
        }
  if (n == 0) throw std::invalid_argument("metrics: empty region");
  return acc / static_cast<double>(n);
}

}  // namespace detail

// 10 log10(1 / MSE) on unit peak; zero MSE capped at 99 dB.
inline double psnr(const ImageGrid& a, const ImageGrid& b, const Mask* region = nullptr,
                   Region r = Region::Whole) {
  const double mse = detail::region_mse_value(a, b, region, r);
  if (mse <= 0.0) return kPsnrCap;
  return std::min(kPsnrCap, 10.0 * std::log10(1.0 / mse));
}

// Mean local SSIM with a Gaussian window (11x11, sigma 1.5 on unit dynamic
// range; the window shrinks to the largest odd size that fits images between
// 8 and 11 pixels). Channels are averaged.
inline double ssim(const ImageGrid& a, const ImageGrid& b) {
  check_same_shape(a, b);
  const int min_dim = std::min(a.height, a.width);
  if (min_dim < 8) throw std::invalid_argument("ssim: image below window size");
  int window = std::min(11, min_dim);
  if (window % 2 == 0) --window;
  const double sigma = 1.5;
  const double c1 = 0.01 * 0.01;
  const double c2 = 0.03 * 0.03;

  std::vector<double> kernel(static_cast<std::size_t>(window) * window);
  {
    const int r = window / 2;
    double sum = 0.0;
    for (int dy = -r; dy <= r; ++dy)
      for (int dx = -r; dx <= r; ++dx) {
        const double w = std::exp(-(dy * dy + dx * dx) / (2.0 * sigma * sigma));
        kernel[static_cast<std::size_t>(dy + r) * window + (dx + r)] = w;
        sum += w;
      }
    for (double& w : kernel) w /= sum;
  }

  const int r = window / 2;
  double total = 0.0;
  std::size_t count = 0;
  for (int c = 0; c < a.channels; ++c)
    for (int y = r; y < a.height - r; ++y)
      for (int x = r; x < a.width - r; ++x) {
        double ma = 0.0, mb = 0.0;
        for (int dy = -r; dy <= r; ++dy)
          for (int dx = -r; dx <= r; ++dx) {
            const double w = kernel[static_cast<std::size_t>(dy + r) * window + (dx + r)];
            ma += w * a.at(y + dy, x + dx, c);
            mb += w * b.at(y + dy, x + dx, c);
          }
        double va = 0.0, vb = 0.0, cov = 0.0;
        for (int dy = -r; dy <= r; ++dy)
          for (int dx = -r; dx <= r; ++dx) {
            const double w = kernel[static_cast<std::size_t>(dy + r) * window + (dx + r)];
            const double da = a.at(y + dy, x + dx, c) - ma;
            const double db = b.at(y + dy, x + dx, c) - mb;
            va += w * da * da;
            vb += w * db * db;
            cov += w * da * db;
          }
        const double num = (2.0 * ma * mb + c1) * (2.0 * cov + c2);
        const double den = (ma * ma + mb * mb + c1) * (va + vb + c2);
        total += num / den;
        ++count;
      }
  return total / static_cast<double>(count);
}

namespace detail {

// Laplace-smoothed intensity histogram over [0,1].
inline std::vector<double> smoothed_histogram(const ImageGrid& img, const Mask* m, Region r,
                                              int bins) {
  std::vector<double> counts(static_cast<std::size_t>(bins), 0.0);
  std::size_t n = 0;
  for (int y = 0; y < img.height; ++y)
    for (int x = 0; x < img.width; ++x)
      if (in_region(m, y, x, r))
        for (int c = 0; c < img.channels; ++c) {
          const double v = std::clamp(img.at(y, x, c), 0.0, 1.0);
          int idx = static_cast<int>(v * bins);
          if (idx >= bins) idx = bins - 1;
          counts[static_cast<std::size_t>(idx)] += 1.0;
          ++n;
        }
  if (n == 0) throw std::invalid_argument("region_kl: empty region");
  const double denom = static_cast<double>(n) + bins;
  for (double& v : counts) v = (v + 1.0) / denom;
  return counts;
}

inline double kl_divergence(const std::vector<double>& p, const std::vector<double>& q) {
  double acc = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) acc += p[i] * std::log(p[i] / q[i]);
  return acc;
}

}  // namespace detail

// KL(P_region(img) || P(gt)) for the masked and unmasked pixel sets, with the
// reference distribution taken over the whole ground-truth image.
inline RegionReport region_kl(const ImageGrid& img, const ImageGrid& gt, const Mask& m,
                              int bins = 64) {
  if (bins < 2) throw std::invalid_argument("region_kl: bins must be >= 2");
  check_same_shape(img, gt);
  check_mask_shape(img, m);
  const std::vector<double> q = detail::smoothed_histogram(gt, nullptr, Region::Whole, bins);
  RegionReport rep;
  rep.metric_name = "kl";
  rep.masked_value =
      detail::kl_divergence(detail::smoothed_histogram(img, &m, Region::Masked, bins), q);
  rep.unmasked_value =
      detail::kl_divergence(detail::smoothed_histogram(img, &m, Region::Unmasked, bins), q);
  return rep;
}

enum class CurveMetric { Psnr, Kl };

// Per-timestep masked/unmasked metric values for a reverse chain; the gap
// |masked - unmasked| is the discrepancy analog.
inline std::vector<RegionReport> discrepancy_curve(const std::vector<ImageGrid>& chain,
                                                   const std::vector<int>& timesteps,
                                                   const ImageGrid& gt, const Mask& m,
                                                   CurveMetric metric, int kl_bins = 64) {
  if (chain.size() != timesteps.size())
    throw std::invalid_argument("discrepancy_curve: length mismatch");
  std::vector<RegionReport> out;
  out.reserve(chain.size());
  for (std::size_t i = 0; i < chain.size(); ++i) {
    RegionReport rep;
    if (metric == CurveMetric::Psnr) {
      rep.metric_name = "psnr";
      rep.masked_value = psnr(chain[i], gt, &m, Region::Masked);
      rep.unmasked_value = psnr(chain[i], gt, &m, Region::Unmasked);
    } else {
      rep = region_kl(chain[i], gt, m, kl_bins);
    }
    rep.t = timesteps[i];
    out.push_back(rep);
  }
  return out;
}

inline std::vector<RegionReport> discrepancy_curve(const std::vector<DiffusionState>& chain,
                                                   const ImageGrid& gt, const Mask& m,
                                                   CurveMetric metric, int kl_bins = 64) {
  std::vector<ImageGrid> values;
  std::vector<int> ts;
  values.reserve(chain.size());
  ts.reserve(chain.size());
  for (const DiffusionState& st : chain) {
    values.push_back(st.value);
    ts.push_back(st.t);
  }
  return discrepancy_curve(values, ts, gt, m, metric, kl_bins);
}

}  // namespace mrsde
