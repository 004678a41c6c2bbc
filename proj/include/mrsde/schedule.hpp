#pragma once

#include <cmath>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

namespace mrsde {

// Time-discretized noise schedule for a mean-reverting SDE
//   d s = theta_t (mu - s) dt + eta_t dw,   eta_t^2 / theta_t = 2 lambda^2.
// Unit timestep: theta_step[t] is the integral of theta over [t-1, t],
// theta_cum[t] the integral over [0, t].
struct Schedule {
  int T = 0;
  double lambda = 1.0;
  std::vector<double> theta_step;  // 1-based step t stored at [t-1], size T
  std::vector<double> theta_cum;   // size T+1, theta_cum[0] = 0
  std::vector<double> eta_sq;      // eta_t^2 = 2 lambda^2 theta_step[t]

  double step(int t) const { return theta_step[static_cast<std::size_t>(t) - 1]; }
  double cum(int t) const { return theta_cum[static_cast<std::size_t>(t)]; }

  // e^{-theta_bar_t}: cumulative mean decay, valid for t in [0, T].
  double mean_decay(int t) const { return std::exp(-cum(t)); }
  // lambda^2 (1 - e^{-2 theta_bar_t}): marginal variance given the initial state.
  double marginal_var(int t) const {
    return lambda * lambda * (1.0 - std::exp(-2.0 * cum(t)));
  }
};

enum class ScheduleKind { Constant, Geometric };

inline std::string to_string(ScheduleKind k) {
  return k == ScheduleKind::Constant ? "constant" : "geometric";
}

inline ScheduleKind schedule_kind_from_string(const std::string& s) {
  if (s == "constant") return ScheduleKind::Constant;
  if (s == "geometric") return ScheduleKind::Geometric;
  throw std::invalid_argument("unknown schedule kind: " + s);
}

// Builds a schedule from explicit per-step integrals; the entry point for
// injected custom schedules.
inline Schedule schedule_from_steps(double lambda, std::vector<double> steps) {
  if (lambda <= 0.0) throw std::invalid_argument("schedule: lambda must be positive");
  if (steps.empty()) throw std::invalid_argument("schedule: T must be >= 1");
  Schedule s;
  s.T = static_cast<int>(steps.size());
  s.lambda = lambda;
  s.theta_step = std::move(steps);
  s.theta_cum.resize(s.theta_step.size() + 1);
  s.theta_cum[0] = 0.0;
  s.eta_sq.resize(s.theta_step.size());
  for (std::size_t i = 0; i < s.theta_step.size(); ++i) {
    if (s.theta_step[i] <= 0.0)
      throw std::invalid_argument("schedule: theta steps must be positive");
    s.theta_cum[i + 1] = s.theta_cum[i] + s.theta_step[i];
    s.eta_sq[i] = 2.0 * lambda * lambda * s.theta_step[i];
  }
  return s;
}

// params: constant -> {theta}; geometric -> {theta_min, theta_max},
// log-linear interpolation across the T steps.
inline Schedule make_schedule(ScheduleKind kind, int T, double lambda,
                              const std::vector<double>& params) {
  if (T < 1) throw std::invalid_argument("make_schedule: T must be >= 1");
  std::vector<double> steps(static_cast<std::size_t>(T));
  switch (kind) {
    case ScheduleKind::Constant: {
      if (params.size() != 1 || params[0] <= 0.0)
        throw std::invalid_argument("constant schedule: needs theta > 0");
      for (double& v : steps) v = params[0];
      break;
    }
    case ScheduleKind::Geometric: {
      if (params.size() != 2 || params[0] <= 0.0 || params[1] <= 0.0)
        throw std::invalid_argument("geometric schedule: needs theta_min, theta_max > 0");
      const double lmin = std::log(params[0]);
      const double lmax = std::log(params[1]);
      for (int t = 1; t <= T; ++t) {
        const double frac = (T > 1) ? static_cast<double>(t - 1) / (T - 1) : 0.0;
        steps[static_cast<std::size_t>(t) - 1] = std::exp(lmin + (lmax - lmin) * frac);
      }
      break;
    }
  }
  return schedule_from_steps(lambda, std::move(steps));
}

struct TransitionCoeffs {
  double a;  // e^{-theta'_t}: one-step mean decay
  double b;  // e^{-theta_bar_t}: cumulative mean decay
  double v;  // lambda^2 (1 - e^{-2 theta_bar_t}): marginal variance
};

inline TransitionCoeffs transition_coeffs(const Schedule& s, int t) {
  if (t < 1 || t > s.T) throw std::invalid_argument("transition_coeffs: t out of range");
  return {std::exp(-s.step(t)), s.mean_decay(t), s.marginal_var(t)};
}

// ---- flat key-value (de)serialization ----

inline std::map<std::string, std::string> schedule_to_config(ScheduleKind kind, int T,
                                                             double lambda,
                                                             const std::vector<double>& params) {
  std::map<std::string, std::string> kv;
  kv["kind"] = to_string(kind);
  kv["T"] = std::to_string(T);
  kv["lambda"] = std::to_string(lambda);
  if (kind == ScheduleKind::Constant) {
    kv["theta"] = std::to_string(params.at(0));
  } else {
    kv["theta_min"] = std::to_string(params.at(0));
    kv["theta_max"] = std::to_string(params.at(1));
  }
  return kv;
}

inline Schedule schedule_from_config(const std::map<std::string, std::string>& kv) {
  const ScheduleKind kind = schedule_kind_from_string(kv.at("kind"));
  const int T = std::stoi(kv.at("T"));
  const double lambda = std::stod(kv.at("lambda"));
  std::vector<double> params;
  if (kind == ScheduleKind::Constant) {
    params.push_back(std::stod(kv.at("theta")));
  } else {
    params.push_back(std::stod(kv.at("theta_min")));
    params.push_back(std::stod(kv.at("theta_max")));
  }
  return make_schedule(kind, T, lambda, params);
}

}  // namespace mrsde
