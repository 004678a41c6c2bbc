#pragma once

#include <algorithm>
#include <cmath>
#include <memory>
#include <stdexcept>

#include "mrsde/image.hpp"

namespace mrsde {

constexpr double kScoreClamp = 1e-6;

// Correlation score between a denoised texture and structure, in (0,1).
class Scorer {
 public:
  virtual ~Scorer() = default;
  virtual double score(const ImageGrid& y, const ImageGrid& x, int t) const = 0;

 protected:
  static double clamp_score(double s) {
    return std::clamp(s, kScoreClamp, 1.0 - kScoreClamp);
  }
};

// y_bar = y_{t-1} ⊙ M + y_t ⊙ (1-M): unmasked regions from the current step,
// masked regions from the previous one.
inline ImageGrid composite_bar_y(const ImageGrid& y_prev, const ImageGrid& y_cur,
                                 const Mask& m) {
  check_same_shape(y_prev, y_cur);
  check_mask_shape(y_prev, m);
  ImageGrid out = y_prev;
  for (int y = 0; y < m.height; ++y)
    for (int x = 0; x < m.width; ++x)
      if (m.at(y, x) == 0.0)
        for (int c = 0; c < out.channels; ++c) out.at(y, x, c) = y_cur.at(y, x, c);
  return out;
}

// -log(s_pos) - log(1 - s_neg).
inline double loss_dis(double s_pos, double s_neg) {
  if (!(s_pos > 0.0 && s_pos < 1.0 && s_neg > 0.0 && s_neg < 1.0))
    throw std::invalid_argument("loss_dis: scores must lie in (0,1)");
  return -std::log(s_pos) - std::log(1.0 - s_neg);
}

// max(|s_bar - s_pos| - |s_bar - s_neg| + alpha, 0).
inline double loss_tri(double s_bar, double s_pos, double s_neg, double alpha) {
  if (alpha < 0.0) throw std::invalid_argument("loss_tri: alpha must be nonnegative");
  return std::max(std::abs(s_bar - s_pos) - std::abs(s_bar - s_neg) + alpha, 0.0);
}

inline double loss_total(double ld, double lt, double lambda_tri = 1.0) {
  return ld + lambda_tri * lt;
}

namespace detail {

// Box-filtered map, replicate padding.
inline ImageGrid box_filter(const ImageGrid& img, int window) {
  const int r = window / 2;
  ImageGrid out(img.height, img.width, 1);
  for (int y = 0; y < img.height; ++y)
    for (int x = 0; x < img.width; ++x) {
      double acc = 0.0;
      for (int dy = -r; dy <= r; ++dy)
        for (int dx = -r; dx <= r; ++dx) {
          const int sy = std::clamp(y + dy, 0, img.height - 1);
          const int sx = std::clamp(x + dx, 0, img.width - 1);
          acc += img.at(sy, sx);
        }
      out.at(y, x) = acc / (window * window);
    }
  return out;
}

// Standardize over the selected pixels (all pixels when mask is null,
// masked region otherwise).
inline void standardize(ImageGrid& img, const Mask* m) {
  double mean = 0.0;
  std::size_t n = 0;
  for (int y = 0; y < img.height; ++y)
    for (int x = 0; x < img.width; ++x)
      if (!m || m->at(y, x) == 0.0) {
        mean += img.at(y, x);
        ++n;
      }
  if (n == 0) throw std::invalid_argument("statistic_scorer: empty region");
  mean /= static_cast<double>(n);
  double var = 0.0;
  for (int y = 0; y < img.height; ++y)
    for (int x = 0; x < img.width; ++x)
      if (!m || m->at(y, x) == 0.0) {
        const double d = img.at(y, x) - mean;
        var += d * d;
      }
  const double sd = std::sqrt(var / static_cast<double>(n)) + 1e-9;
  for (double& v : img.data) v = (v - mean) / sd;
}

}  // namespace detail

// Deterministic, non-learned correlation scorer: compares box-averaged
// Sobel gradient-magnitude layouts of texture and structure over the masked
// region (whole image when no mask is given). The per-pixel discrepancy of
// the standardized layouts is centered and squashed through a logistic, so
// well-aligned pairs score above 0.5 and unrelated pairs below.
class StatisticScorer final : public Scorer {
 public:
  StatisticScorer(int window, double sharpness, const Mask* mask = nullptr)
      : window_(window), sharpness_(sharpness), mask_(mask) {
    if (window < 3 || window % 2 == 0)
      throw std::invalid_argument("statistic_scorer: window must be odd and >= 3");
    if (sharpness <= 0.0)
      throw std::invalid_argument("statistic_scorer: sharpness must be positive");
  }

  double score(const ImageGrid& y, const ImageGrid& x, int /*t*/) const override {
    if (window_ > y.height || window_ > y.width)
      throw std::invalid_argument("statistic_scorer: window larger than image");
    ImageGrid gy = detail::box_filter(detail::sobel_magnitude(y), window_);
    ImageGrid gx = detail::box_filter(detail::sobel_magnitude(x), window_);
    detail::standardize(gy, mask_);
    detail::standardize(gx, mask_);
    double mad = 0.0;
    std::size_t n = 0;
    for (int yy = 0; yy < gy.height; ++yy)
      for (int xx = 0; xx < gy.width; ++xx)
        if (!mask_ || mask_->at(yy, xx) == 0.0) {
          mad += std::abs(gy.at(yy, xx) - gx.at(yy, xx));
          ++n;
        }
    mad /= static_cast<double>(n);
    // Two independent standardized layouts differ by ~1.13 on average;
    // centering there makes "agree" land above 0.5 and "disagree" below.
    constexpr double kCenter = 0.9;
    return clamp_score(1.0 / (1.0 + std::exp(sharpness_ * (mad - kCenter))));
  }

 private:
  int window_;
  double sharpness_;
  const Mask* mask_;
};

inline std::unique_ptr<Scorer> statistic_scorer(int window, double sharpness,
                                                const Mask* mask = nullptr) {
  return std::make_unique<StatisticScorer>(window, sharpness, mask);
}

}  // namespace mrsde
