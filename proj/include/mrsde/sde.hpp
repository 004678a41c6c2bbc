#pragma once

#include <cmath>
#include <functional>
#include <stdexcept>
#include <vector>

#include "mrsde/image.hpp"
#include "mrsde/rng.hpp"
#include "mrsde/schedule.hpp"

namespace mrsde {

// A texture or structure sample at timestep t, carrying its anchors:
// the clean initial state and the mean-reversion target.
struct DiffusionState {
  int t = 0;
  ImageGrid value;
  ImageGrid anchor_init;  // y_0 / x_0
  ImageGrid anchor_mean;  // mu_y / mu_x
  const Schedule* schedule = nullptr;
};

inline DiffusionState make_clean_state(const ImageGrid& init, const ImageGrid& mean,
                                       const Schedule& s) {
  check_same_shape(init, mean);
  return {0, init, init, mean, &s};
}

// Terminal state y_T = mean + lambda * eps. When the clean image is unknown
// (inference), the anchor_init defaults to the mean.
inline DiffusionState terminal_state(const ImageGrid& mean, const Schedule& s, Rng& rng,
                                     const ImageGrid* init = nullptr) {
  DiffusionState st;
  st.t = s.T;
  st.value = mean;
  for (double& v : st.value.data) v += s.lambda * rng.normal();
  st.anchor_init = init ? *init : mean;
  st.anchor_mean = mean;
  st.schedule = &s;
  return st;
}

// Closed-form marginal: value = mu + (s0 - mu) e^{-theta_bar_t} + sqrt(v_t) eps.
inline DiffusionState forward_marginal_sample(const DiffusionState& state0, int t, Rng& rng) {
  if (state0.t != 0) throw std::invalid_argument("forward_marginal_sample: state must be at t=0");
  const Schedule& s = *state0.schedule;
  if (t < 1 || t > s.T) throw std::invalid_argument("forward_marginal_sample: t out of range");
  const double b = s.mean_decay(t);
  const double sd = std::sqrt(s.marginal_var(t));
  DiffusionState out = state0;
  out.t = t;
  for (std::size_t i = 0; i < out.value.size(); ++i) {
    const double mu = state0.anchor_mean.data[i];
    out.value.data[i] = mu + (state0.anchor_init.data[i] - mu) * b + sd * rng.normal();
  }
  return out;
}

// Euler-Maruyama path over all T unit timesteps, `substeps` sub-iterations
// each: s <- s + theta (mu - s) h + sqrt(eta^2 h) eps, h = 1/substeps.
// Returns states at t = 1..T.
inline std::vector<DiffusionState> forward_em_path(const DiffusionState& state0, int substeps,
                                                   Rng& rng) {
  if (state0.t != 0) throw std::invalid_argument("forward_em_path: state must be at t=0");
  if (substeps < 1) throw std::invalid_argument("forward_em_path: substeps must be >= 1");
  const Schedule& s = *state0.schedule;
  const double h = 1.0 / substeps;
  std::vector<DiffusionState> path;
  path.reserve(static_cast<std::size_t>(s.T));
  ImageGrid cur = state0.value;
  for (int t = 1; t <= s.T; ++t) {
    const double theta = s.step(t);
    const double noise_sd = std::sqrt(s.eta_sq[static_cast<std::size_t>(t) - 1] * h);
    for (int k = 0; k < substeps; ++k)
      for (std::size_t i = 0; i < cur.size(); ++i)
        cur.data[i] += theta * (state0.anchor_mean.data[i] - cur.data[i]) * h
                       + noise_sd * rng.normal();
    DiffusionState st = state0;
    st.t = t;
    st.value = cur;
    path.push_back(std::move(st));
  }
  return path;
}

namespace detail {

struct PosteriorCoeffs {
  double c_cur;   // multiplies (s_t - mu)
  double c_init;  // multiplies (s_0 - mu)
};

// Coefficients of the closed-form optimal reverse state
//   s*_{t-1} = c_cur (s_t - mu) + c_init (s_0 - mu) + mu.
inline PosteriorCoeffs posterior_coeffs(const Schedule& s, int t) {
  if (t < 1 || t > s.T) throw std::invalid_argument("posterior: t out of range");
  const double denom = 1.0 - std::exp(-2.0 * s.cum(t));
  const double c_cur = (1.0 - std::exp(-2.0 * s.cum(t - 1))) / denom * std::exp(-s.step(t));
  const double c_init =
      (1.0 - std::exp(-2.0 * s.step(t))) / denom * std::exp(-s.cum(t - 1));
  return {c_cur, c_init};
}

}  // namespace detail

// Variance of the one-step reverse posterior (product of the step transition
// and the t-1 marginal, both Gaussian).
inline double posterior_variance(const Schedule& s, int t) {
  if (t < 1 || t > s.T) throw std::invalid_argument("posterior_variance: t out of range");
  const double p = 1.0 - std::exp(-2.0 * s.step(t));
  const double a = 1.0 - std::exp(-2.0 * s.cum(t - 1));
  const double b = 1.0 - std::exp(-2.0 * s.cum(t));
  return s.lambda * s.lambda * p * a / b;
}

inline ImageGrid posterior_mean(const ImageGrid& value, const ImageGrid& init,
                                const ImageGrid& mean, const Schedule& s, int t) {
  const auto [c_cur, c_init] = detail::posterior_coeffs(s, t);
  ImageGrid out = value;
  for (std::size_t i = 0; i < out.size(); ++i) {
    const double mu = mean.data[i];
    out.data[i] = c_cur * (value.data[i] - mu) + c_init * (init.data[i] - mu) + mu;
  }
  return out;
}

// Optimal reverse texture state y*_{t-1} given (y_t, y_0, mu_y).
inline ImageGrid posterior_texture(const DiffusionState& y_t, int t) {
  if (t < 1) throw std::invalid_argument("posterior_texture: t must be >= 1");
  if (y_t.t != t) throw std::invalid_argument("posterior_texture: state/timestep mismatch");
  return posterior_mean(y_t.value, y_t.anchor_init, y_t.anchor_mean, *y_t.schedule, t);
}

// Same closed form on the structure side.
inline ImageGrid posterior_structure(const DiffusionState& x_t, int t) {
  if (t < 1) throw std::invalid_argument("posterior_structure: t must be >= 1");
  if (x_t.t != t) throw std::invalid_argument("posterior_structure: state/timestep mismatch");
  return posterior_mean(x_t.value, x_t.anchor_init, x_t.anchor_mean, *x_t.schedule, t);
}

// The four addends of the structure-guided ideal reverse state.
struct GuidedParts {
  ImageGrid consistency;  // C (x_t - mu_x)
  ImageGrid balance;      // -C e^{-delta_bar_t} (x_0 - mu_x)
  ImageGrid semantics;    // e^{-theta_bar_{t-1}} (y_0 - mu_y)
  ImageGrid unmasked;     // mu_y
  ImageGrid total;
};

// Structure-guided ideal reverse texture state
//   y~*_{t-1} = C (x_t - mu_x) - C e^{-delta_bar_t} (x_0 - mu_x)
//             + e^{-theta_bar_{t-1}} (y_0 - mu_y) + mu_y,
//   C = (1 - e^{-2 theta_bar_{t-1}}) / (1 - e^{-2 delta_bar_t}) e^{-delta'_t}.
inline GuidedParts guided_ideal_state(const DiffusionState& x_t, const ImageGrid& y_init,
                                      const ImageGrid& y_mean, const Schedule& sched_y,
                                      int t) {
  if (t < 1) throw std::invalid_argument("guided_ideal_state: t must be >= 1");
  if (x_t.t != t) throw std::invalid_argument("guided_ideal_state: state/timestep mismatch");
  const Schedule& sd = *x_t.schedule;
  if (sd.T != sched_y.T) throw std::invalid_argument("guided_ideal_state: schedule length mismatch");
  check_same_shape(y_init, y_mean);
  check_same_shape(x_t.value, y_init);
  const double coeff = (1.0 - std::exp(-2.0 * sched_y.cum(t - 1)))
                       / (1.0 - std::exp(-2.0 * sd.cum(t))) * std::exp(-sd.step(t));
  const double bal = coeff * std::exp(-sd.cum(t));
  const double sem = sched_y.mean_decay(t - 1);
  GuidedParts parts;
  const int h = y_init.height, w = y_init.width, c = y_init.channels;
  parts.consistency = ImageGrid(h, w, c);
  parts.balance = ImageGrid(h, w, c);
  parts.semantics = ImageGrid(h, w, c);
  parts.unmasked = y_mean;
  parts.total = ImageGrid(h, w, c);
  for (std::size_t i = 0; i < parts.total.size(); ++i) {
    const double mx = x_t.anchor_mean.data[i];
    parts.consistency.data[i] = coeff * (x_t.value.data[i] - mx);
    parts.balance.data[i] = -bal * (x_t.anchor_init.data[i] - mx);
    parts.semantics.data[i] = sem * (y_init.data[i] - y_mean.data[i]);
    parts.total.data[i] = parts.consistency.data[i] + parts.balance.data[i]
                          + parts.semantics.data[i] + y_mean.data[i];
  }
  return parts;
}

// The same ideal state expressed in terms of the denoised structure x_{t-1}
// instead of x_t (the pre-simplification form of the derivation):
//   y~*_{t-1} = K (x_{t-1} - mu_x) - K e^{-delta_bar_{t-1}} (x_0 - mu_x)
//             + e^{-theta_bar_{t-1}} (y_0 - mu_y) + mu_y,
//   K = (1 - e^{-2 theta_bar_{t-1}}) / (1 - e^{-2 delta_bar_{t-1}}).
// At t = 1 both cumulative integrals vanish and the structure terms drop out,
// leaving exactly y_0; K is defined as 0 there.
inline ImageGrid guided_target_from_structure(const ImageGrid& x_prev, const ImageGrid& x_init,
                                              const ImageGrid& x_mean, const Schedule& sched_x,
                                              const ImageGrid& y_init, const ImageGrid& y_mean,
                                              const Schedule& sched_y, int t) {
  if (t < 1) throw std::invalid_argument("guided_target_from_structure: t must be >= 1");
  if (sched_x.T != sched_y.T)
    throw std::invalid_argument("guided_target_from_structure: schedule length mismatch");
  check_same_shape(x_prev, y_init);
  const double k = (t == 1) ? 0.0
                            : (1.0 - std::exp(-2.0 * sched_y.cum(t - 1)))
                                  / (1.0 - std::exp(-2.0 * sched_x.cum(t - 1)));
  const double bal = k * sched_x.mean_decay(t - 1);
  const double sem = sched_y.mean_decay(t - 1);
  ImageGrid out(y_init.height, y_init.width, y_init.channels);
  for (std::size_t i = 0; i < out.size(); ++i) {
    const double mx = x_mean.data[i];
    out.data[i] = k * (x_prev.data[i] - mx) - bal * (x_init.data[i] - mx)
                  + sem * (y_init.data[i] - y_mean.data[i]) + y_mean.data[i];
  }
  return out;
}

// ---- reverse chain ----

enum class ReverseMode { DeterministicMean, PosteriorNoise };

// Reverse-increment estimator: denoised s_{t-1} = s_t - predict(s_t, guidance, t).
class Predictor {
 public:
  virtual ~Predictor() = default;
  virtual ImageGrid predict(const ImageGrid& value, const ImageGrid* guidance, int t) const = 0;
  virtual bool guided() const = 0;
};

// Runs the full reverse chain t = T..0. `guidance` supplies x_{t-1} for
// guided predictors (may be null for unguided ones). PosteriorNoise mode adds
// N(0, v_post) per step and requires an rng.
inline std::vector<DiffusionState> reverse_chain(
    const DiffusionState& terminal, const Predictor& predictor,
    const std::function<const ImageGrid*(int)>& guidance = nullptr,
    ReverseMode mode = ReverseMode::DeterministicMean, Rng* rng = nullptr) {
  const Schedule& s = *terminal.schedule;
  if (terminal.t != s.T) throw std::invalid_argument("reverse_chain: must start at t = T");
  if (mode == ReverseMode::PosteriorNoise && rng == nullptr)
    throw std::invalid_argument("reverse_chain: posterior-noise mode needs an rng");
  std::vector<DiffusionState> chain;
  chain.reserve(static_cast<std::size_t>(s.T) + 1);
  chain.push_back(terminal);
  DiffusionState cur = terminal;
  for (int t = s.T; t >= 1; --t) {
    const ImageGrid* guid = guidance ? guidance(t) : nullptr;
    const ImageGrid inc = predictor.predict(cur.value, guid, t);
    if (!inc.same_shape(cur.value))
      throw std::invalid_argument("reverse_chain: predictor shape mismatch");
    for (std::size_t i = 0; i < cur.value.size(); ++i) cur.value.data[i] -= inc.data[i];
    if (mode == ReverseMode::PosteriorNoise && t > 1) {
      const double sd = std::sqrt(posterior_variance(s, t));
      for (double& v : cur.value.data) v += sd * rng->normal();
    }
    cur.t = t - 1;
    chain.push_back(cur);
  }
  return chain;
}

}  // namespace mrsde
