#pragma once

#include <cmath>
#include <cstdio>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "mrsde/correlation.hpp"
#include "mrsde/image.hpp"
#include "mrsde/rng.hpp"
#include "mrsde/schedule.hpp"
#include "mrsde/sde.hpp"

namespace mrsde {

// Which comparison adopts a resampled pair: the algorithm listing adopts on
// S < delta; AdoptOn::Gt exposes the prose reading (resample to improve a
// low-correlation pair).
enum class AdoptOn { Lt, Gt };

struct ResampleConfig {
  int max_iterations = 5;  // U
  const Scorer* scorer = nullptr;
  int snapshot_every = 0;  // 0 = no snapshots
  AdoptOn adopt_on = AdoptOn::Lt;
};

struct StepRecord {
  int t = 0;
  double delta = 0.0;
  int inner_iters = 0;     // inner-loop iterations attempted
  double final_score = 0.0;
  double masked_mse = 0.0;
  double unmasked_mse = 0.0;
  int adopted = 0;         // resampled pairs actually adopted (not serialized)
};

struct RunRecord {
  std::vector<StepRecord> steps;

  int total_inner_iterations() const {
    int n = 0;
    for (const StepRecord& s : steps) n += s.inner_iters;
    return n;
  }
  int total_adopted() const {
    int n = 0;
    for (const StepRecord& s : steps) n += s.adopted;
    return n;
  }
};

inline void write_run_record_csv(const RunRecord& rec, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open for writing: " + path);
  out << "t,delta,inner_iters,final_score,masked_mse,unmasked_mse\n";
  char buf[256];
  for (const StepRecord& s : rec.steps) {
    std::snprintf(buf, sizeof(buf), "%d,%.12g,%d,%.12g,%.12g,%.12g\n", s.t, s.delta,
                  s.inner_iters, s.final_score, s.masked_mse, s.unmasked_mse);
    out << buf;
  }
}

// One forward Euler step of the structure SDE from t-1 back up to t:
//   x~_t = x_{t-1} + delta'_t (mu_x - x_{t-1}) + sqrt(2 lambda^2 delta'_t) eps,
// where delta'_t is the schedule step spanning [t-1, t].
inline DiffusionState renoise_structure(const DiffusionState& x_prev, Rng& rng) {
  const Schedule& s = *x_prev.schedule;
  const int t = x_prev.t + 1;
  if (t < 1 || t > s.T) throw std::invalid_argument("renoise_structure: t out of range");
  const double d = s.step(t);
  const double sd = std::sqrt(2.0 * s.lambda * s.lambda * d);
  DiffusionState out = x_prev;
  out.t = t;
  for (std::size_t i = 0; i < out.value.size(); ++i)
    out.value.data[i] = x_prev.value.data[i]
                        + d * (x_prev.anchor_mean.data[i] - x_prev.value.data[i])
                        + sd * rng.normal();
  return out;
}

struct InferenceResult {
  ImageGrid output;                  // merged final result
  RunRecord record;
  std::vector<ImageGrid> y_chain;    // texture states, index t (0..T)
  std::vector<ImageGrid> x_chain;    // structure states, index t (0..T)
};

namespace detail {

inline void region_mse(const ImageGrid& a, const ImageGrid& b, const Mask& m,
                       double* masked, double* unmasked) {
  double acc_m = 0.0, acc_u = 0.0;
  std::size_t n_m = 0, n_u = 0;
  for (int y = 0; y < m.height; ++y)
    for (int x = 0; x < m.width; ++x)
      for (int c = 0; c < a.channels; ++c) {
        const double d = a.at(y, x, c) - b.at(y, x, c);
        if (m.at(y, x) == 0.0) {
          acc_m += d * d;
          ++n_m;
        } else {
          acc_u += d * d;
          ++n_u;
        }
      }
  *masked = n_m ? acc_m / static_cast<double>(n_m) : 0.0;
  *unmasked = n_u ? acc_u / static_cast<double>(n_u) : 0.0;
}

}  // namespace detail

// Adaptive-resampling inference: per timestep, denoise structure then texture,
// record the pre-resampling score as the threshold delta, then up to U times
// re-noise and re-denoise the structure, re-denoise the texture, and adopt the
// updated pair while the comparison against delta holds. The reference for the
// MSE columns is the texture anchor_init (ground truth in desk runs).
inline InferenceResult run_inference(const DiffusionState& y_terminal,
                                     const DiffusionState& x_terminal,
                                     const Predictor& pred_y, const Predictor& pred_x,
                                     const ResampleConfig& cfg, const Mask& mask, Rng& rng) {
  const Schedule& sy = *y_terminal.schedule;
  const Schedule& sx = *x_terminal.schedule;
  if (sy.T != sx.T) throw std::invalid_argument("run_inference: schedule length mismatch");
  if (y_terminal.t != sy.T || x_terminal.t != sx.T)
    throw std::invalid_argument("run_inference: chains must start at t = T");
  if (cfg.scorer == nullptr) throw std::invalid_argument("run_inference: scorer required");
  if (cfg.max_iterations < 0) throw std::invalid_argument("run_inference: U must be >= 0");
  check_mask_shape(y_terminal.value, mask);

  InferenceResult res;
  res.y_chain.assign(static_cast<std::size_t>(sy.T) + 1, ImageGrid());
  res.x_chain.assign(static_cast<std::size_t>(sx.T) + 1, ImageGrid());
  res.y_chain[static_cast<std::size_t>(sy.T)] = y_terminal.value;
  res.x_chain[static_cast<std::size_t>(sx.T)] = x_terminal.value;

  ImageGrid y_cur = y_terminal.value;
  DiffusionState x_cur = x_terminal;
  auto denoise = [](const Predictor& p, const ImageGrid& v, const ImageGrid* g, int t) {
    const ImageGrid inc = p.predict(v, g, t);
    ImageGrid out = v;
    for (std::size_t i = 0; i < out.size(); ++i) out.data[i] -= inc.data[i];
    return out;
  };

  for (int t = sy.T; t >= 1; --t) {
    ImageGrid x_prev = denoise(pred_x, x_cur.value, nullptr, t);
    ImageGrid y_prev = denoise(pred_y, y_cur, pred_y.guided() ? &x_prev : nullptr, t);
    const double delta = cfg.scorer->score(y_prev, x_prev, t - 1);

    StepRecord rec;
    rec.t = t;
    rec.delta = delta;
    rec.final_score = delta;
    for (int u = 1; u <= cfg.max_iterations; ++u) {
      rec.inner_iters += 1;
      DiffusionState x_prev_state = x_cur;
      x_prev_state.t = t - 1;
      x_prev_state.value = x_prev;
      const DiffusionState x_renoised = renoise_structure(x_prev_state, rng);
      ImageGrid x_tilde = denoise(pred_x, x_renoised.value, nullptr, t);
      ImageGrid y_tilde = denoise(pred_y, y_cur, pred_y.guided() ? &x_tilde : nullptr, t);
      const double s = cfg.scorer->score(y_tilde, x_tilde, t - 1);
      rec.final_score = s;
      const bool adopt = (cfg.adopt_on == AdoptOn::Lt) ? (s < delta) : (s > delta);
      if (adopt) {
        x_prev = std::move(x_tilde);
        y_prev = std::move(y_tilde);
        rec.adopted += 1;
      } else {
        break;
      }
    }

    detail::region_mse(y_prev, y_terminal.anchor_init, mask, &rec.masked_mse,
                       &rec.unmasked_mse);
    res.record.steps.push_back(rec);
    y_cur = std::move(y_prev);
    x_cur.t = t - 1;
    x_cur.value = std::move(x_prev);
    res.y_chain[static_cast<std::size_t>(t) - 1] = y_cur;
    res.x_chain[static_cast<std::size_t>(t) - 1] = x_cur.value;
  }

  res.output = merge_result(y_cur, y_terminal.anchor_mean, mask);
  return res;
}

}  // namespace mrsde
