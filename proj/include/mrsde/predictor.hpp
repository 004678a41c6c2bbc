#pragma once

#include <cmath>
#include <optional>
#include <stdexcept>
#include <vector>

#include "mrsde/image.hpp"
#include "mrsde/schedule.hpp"
#include "mrsde/sde.hpp"

namespace mrsde {

// Analytic stand-in for the trained noise network: returns the increment
// y_t - target so that the denoised state equals the closed-form optimum.
// Unguided targets come from the one-process posterior; guided targets from
// the structure-guided ideal state, evaluated from the supplied x_{t-1}.
class OraclePredictor final : public Predictor {
 public:
  // Unguided (texture-only or structure-side) oracle.
  OraclePredictor(ImageGrid init, ImageGrid mean, const Schedule& sched)
      : init_(std::move(init)), mean_(std::move(mean)), sched_(&sched) {}

  // Guided texture oracle.
  OraclePredictor(ImageGrid y_init, ImageGrid y_mean, const Schedule& sched_y,
                  ImageGrid x_init, ImageGrid x_mean, const Schedule& sched_x)
      : init_(std::move(y_init)), mean_(std::move(y_mean)), sched_(&sched_y),
        x_init_(std::move(x_init)), x_mean_(std::move(x_mean)), sched_x_(&sched_x) {
    if (!x_init_->same_shape(init_) || !x_mean_->same_shape(init_))
      throw std::invalid_argument("oracle_predictor: structure anchor shape mismatch");
  }

  bool guided() const override { return sched_x_ != nullptr; }

  ImageGrid predict(const ImageGrid& value, const ImageGrid* guidance, int t) const override {
    check_same_shape(value, init_);
    ImageGrid target;
    if (guided()) {
      if (guidance == nullptr)
        throw std::invalid_argument("oracle_predictor: guided oracle needs x_{t-1}");
      target = guided_target_from_structure(*guidance, *x_init_, *x_mean_, *sched_x_,
                                            init_, mean_, *sched_, t);
    } else {
      target = posterior_mean(value, init_, mean_, *sched_, t);
    }
    ImageGrid inc = value;
    for (std::size_t i = 0; i < inc.size(); ++i) inc.data[i] -= target.data[i];
    return inc;
  }

 private:
  ImageGrid init_, mean_;
  const Schedule* sched_;
  std::optional<ImageGrid> x_init_, x_mean_;
  const Schedule* sched_x_ = nullptr;
};

// ---- training objective ----

struct LossWeights {
  std::vector<double> beta;  // 1-based weight t at [t-1]
  int p = 1;                 // norm order, 1 or 2

  static LossWeights uniform(int T, double value = 1.0, int p = 1) {
    if (T < 1 || value <= 0.0) throw std::invalid_argument("LossWeights: bad parameters");
    if (p != 1 && p != 2) throw std::invalid_argument("LossWeights: p must be 1 or 2");
    return {std::vector<double>(static_cast<std::size_t>(T), value), p};
  }
};

struct TrainingSample {
  ImageGrid y_t;
  ImageGrid target;                  // y*_{t-1} or y~*_{t-1}
  std::optional<ImageGrid> x_guid;   // x_{t-1} for guided predictors
  int t = 1;
};

namespace detail {

// Per-pixel l_p mean norm: (sum |r_i|^p / N)^{1/p}.
inline double mean_lp_norm(const ImageGrid& r, int p) {
  double acc = 0.0;
  for (double v : r.data) acc += (p == 1) ? std::abs(v) : v * v;
  acc /= static_cast<double>(r.size());
  return (p == 1) ? acc : std::sqrt(acc);
}

}  // namespace detail

// sum_t beta_t * mean over the batch items at t of || (y_t - predict) - target ||_p.
inline double training_loss(const Predictor& pred, const std::vector<TrainingSample>& batch,
                            const LossWeights& w) {
  if (batch.empty()) throw std::invalid_argument("training_loss: empty batch");
  if (w.p != 1 && w.p != 2) throw std::invalid_argument("training_loss: p must be 1 or 2");
  for (double b : w.beta)
    if (b <= 0.0) throw std::invalid_argument("training_loss: weights must be positive");
  const int T = static_cast<int>(w.beta.size());
  std::vector<double> norm_sum(static_cast<std::size_t>(T), 0.0);
  std::vector<int> counts(static_cast<std::size_t>(T), 0);
  for (const TrainingSample& s : batch) {
    if (s.t < 1 || s.t > T) throw std::invalid_argument("training_loss: sample t out of range");
    check_same_shape(s.y_t, s.target);
    const ImageGrid inc =
        pred.predict(s.y_t, s.x_guid ? &*s.x_guid : nullptr, s.t);
    ImageGrid resid = s.y_t;
    for (std::size_t i = 0; i < resid.size(); ++i)
      resid.data[i] -= inc.data[i] + s.target.data[i];
    norm_sum[static_cast<std::size_t>(s.t) - 1] += detail::mean_lp_norm(resid, w.p);
    counts[static_cast<std::size_t>(s.t) - 1] += 1;
  }
  double loss = 0.0;
  for (int t = 1; t <= T; ++t) {
    const std::size_t i = static_cast<std::size_t>(t) - 1;
    if (counts[i] > 0) loss += w.beta[i] * norm_sum[i] / counts[i];
  }
  return loss;
}

// ---- spatially adaptive normalization ----

struct PositionalStats {
  ImageGrid mu;     // H x W cross-channel mean
  ImageGrid sigma;  // H x W cross-channel population std
};

inline PositionalStats positional_stats(const ImageGrid& f) {
  PositionalStats st{ImageGrid(f.height, f.width, 1), ImageGrid(f.height, f.width, 1)};
  for (int y = 0; y < f.height; ++y)
    for (int x = 0; x < f.width; ++x) {
      double mean = 0.0;
      for (int c = 0; c < f.channels; ++c) mean += f.at(y, x, c);
      mean /= f.channels;
      double var = 0.0;
      for (int c = 0; c < f.channels; ++c) {
        const double d = f.at(y, x, c) - mean;
        var += d * d;
      }
      st.mu.at(y, x) = mean;
      st.sigma.at(y, x) = std::sqrt(var / f.channels);
    }
  return st;
}

// F~(c,h,w) = gamma(h,w) * (F(c,h,w) - mu(h,w)) / (sigma(h,w) + eps) + beta(h,w).
inline ImageGrid spade_normalize(const ImageGrid& f, const ImageGrid& gamma,
                                 const ImageGrid& beta_map, double eps = 1e-5) {
  if (eps <= 0.0) throw std::invalid_argument("spade_normalize: eps must be positive");
  if (gamma.height != f.height || gamma.width != f.width || gamma.channels != 1 ||
      beta_map.height != f.height || beta_map.width != f.width || beta_map.channels != 1)
    throw std::invalid_argument("spade_normalize: map shape mismatch");
  const PositionalStats st = positional_stats(f);
  ImageGrid out = f;
  for (int y = 0; y < f.height; ++y)
    for (int x = 0; x < f.width; ++x) {
      const double inv = 1.0 / (st.sigma.at(y, x) + eps);
      for (int c = 0; c < f.channels; ++c)
        out.at(y, x, c) =
            gamma.at(y, x) * (f.at(y, x, c) - st.mu.at(y, x)) * inv + beta_map.at(y, x);
    }
  return out;
}

// Default map provider for the scale/bias maps: nearest-neighbor resampled
// structure intensity as gamma offsets around 1, zero bias.
struct SpadeMaps {
  ImageGrid gamma;
  ImageGrid beta;
};

inline SpadeMaps spade_maps_from_structure(const ImageGrid& structure, int height, int width) {
  const ImageGrid g = luminance_of(structure);
  SpadeMaps maps{ImageGrid(height, width, 1), ImageGrid(height, width, 1)};
  for (int y = 0; y < height; ++y)
    for (int x = 0; x < width; ++x) {
      const int sy = std::min(g.height - 1, y * g.height / height);
      const int sx = std::min(g.width - 1, x * g.width / width);
      maps.gamma.at(y, x) = 1.0 + g.at(sy, sx);
      maps.beta.at(y, x) = 0.0;
    }
  return maps;
}

}  // namespace mrsde
