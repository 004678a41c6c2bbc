#pragma once

#include <cstdint>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "mrsde/resampler.hpp"
#include "mrsde/schedule.hpp"
#include "mrsde/synth.hpp"

namespace mrsde {

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct InvalidPresetError : ConfigError {
  using ConfigError::ConfigError;
};

// Flat `key = value` text config; '#' starts a comment.
using KeyValueMap = std::map<std::string, std::string>;

namespace detail {

inline std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

}  // namespace detail

inline KeyValueMap parse_key_values(std::istream& in) {
  KeyValueMap kv;
  std::string line;
  while (std::getline(in, line)) {
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = detail::trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError("config: expected 'key = value': " + line);
    kv[detail::trim(line.substr(0, eq))] = detail::trim(line.substr(eq + 1));
  }
  return kv;
}

inline KeyValueMap load_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file: " + path);
  return parse_key_values(in);
}

enum class Preset { TextureOnly, Gray2Edge, Gray2Gray, Edge2Edge, Edge2Gray };

inline std::string to_string(Preset p) {
  switch (p) {
    case Preset::TextureOnly: return "texture-only";
    case Preset::Gray2Edge: return "gray2edge";
    case Preset::Gray2Gray: return "gray2gray";
    case Preset::Edge2Edge: return "edge2edge";
    case Preset::Edge2Gray: return "edge2gray";
  }
  throw InvalidPresetError("unknown preset");
}

inline Preset preset_from_string(const std::string& s) {
  if (s == "texture-only") return Preset::TextureOnly;
  if (s == "gray2edge") return Preset::Gray2Edge;
  if (s == "gray2gray") return Preset::Gray2Gray;
  if (s == "edge2edge") return Preset::Edge2Edge;
  if (s == "edge2gray") return Preset::Edge2Gray;
  throw InvalidPresetError("invalid preset: " + s);
}

struct ScheduleSpec {
  ScheduleKind kind = ScheduleKind::Constant;
  int T = 100;
  double lambda = 0.5;
  std::vector<double> params = {0.04};

  Schedule build() const { return make_schedule(kind, T, lambda, params); }
};

struct ExperimentConfig {
  Preset preset = Preset::Gray2Edge;
  ImageSpec image;
  MaskSpec mask;
  ScheduleSpec sched_texture;
  ScheduleSpec sched_structure;
  int resample_u = 5;
  int scorer_window = 5;
  double scorer_sharpness = 4.0;
  AdoptOn adopt_on = AdoptOn::Lt;
  int snapshot_every = 25;
  int kl_bins = 64;
  std::uint64_t seed = 1;
  std::string out_dir = "out";
};

namespace detail {

inline std::string get_or(const KeyValueMap& kv, const std::string& key,
                          const std::string& fallback) {
  const auto it = kv.find(key);
  return it == kv.end() ? fallback : it->second;
}

inline int get_int(const KeyValueMap& kv, const std::string& key, int fallback) {
  const auto it = kv.find(key);
  if (it == kv.end()) return fallback;
  try {
    return std::stoi(it->second);
  } catch (const std::exception&) {
    throw ConfigError("config: bad integer for " + key + ": " + it->second);
  }
}

inline double get_double(const KeyValueMap& kv, const std::string& key, double fallback) {
  const auto it = kv.find(key);
  if (it == kv.end()) return fallback;
  try {
    return std::stod(it->second);
  } catch (const std::exception&) {
    throw ConfigError("config: bad number for " + key + ": " + it->second);
  }
}

inline ScheduleSpec schedule_spec_from(const KeyValueMap& kv, const std::string& prefix,
                                       const ScheduleSpec& defaults) {
  ScheduleSpec s = defaults;
  s.kind = schedule_kind_from_string(get_or(kv, prefix + ".kind", to_string(defaults.kind)));
  s.T = get_int(kv, prefix + ".T", defaults.T);
  s.lambda = get_double(kv, prefix + ".lambda", defaults.lambda);
  if (s.kind == ScheduleKind::Constant) {
    s.params = {get_double(kv, prefix + ".theta",
                           defaults.kind == ScheduleKind::Constant ? defaults.params[0] : 0.04)};
  } else {
    s.params = {get_double(kv, prefix + ".theta_min", 0.01),
                get_double(kv, prefix + ".theta_max", 0.1)};
  }
  return s;
}

}  // namespace detail

inline ExperimentConfig experiment_config_from(const KeyValueMap& kv) {
  ExperimentConfig cfg;
  cfg.preset = preset_from_string(detail::get_or(kv, "preset", to_string(cfg.preset)));

  const std::string ik = detail::get_or(kv, "image.kind", "blobs");
  if (ik == "gradient") cfg.image.kind = ImageKind::Gradient;
  else if (ik == "checkerboard") cfg.image.kind = ImageKind::Checkerboard;
  else if (ik == "blobs") cfg.image.kind = ImageKind::Blobs;
  else throw ConfigError("config: unknown image.kind: " + ik);
  cfg.image.height = detail::get_int(kv, "image.height", 32);
  cfg.image.width = detail::get_int(kv, "image.width", 32);
  cfg.image.channels = detail::get_int(kv, "image.channels", 3);
  cfg.image.period = detail::get_int(kv, "image.period", 1);
  cfg.image.num_blobs = detail::get_int(kv, "image.blobs", 8);

  const std::string mk = detail::get_or(kv, "mask.kind", "strokes");
  if (mk == "rect") cfg.mask.kind = MaskKind::Rect;
  else if (mk == "strokes") cfg.mask.kind = MaskKind::Strokes;
  else throw ConfigError("config: unknown mask.kind: " + mk);
  cfg.mask.height = cfg.image.height;
  cfg.mask.width = cfg.image.width;
  cfg.mask.r_lo = detail::get_double(kv, "mask.r_lo", 0.2);
  cfg.mask.r_hi = detail::get_double(kv, "mask.r_hi", 0.4);

  cfg.sched_texture = detail::schedule_spec_from(kv, "sched.texture", cfg.sched_texture);
  cfg.sched_structure = detail::schedule_spec_from(kv, "sched.structure", cfg.sched_structure);

  cfg.resample_u = detail::get_int(kv, "resample.u", 5);
  cfg.scorer_window = detail::get_int(kv, "resample.window", 5);
  cfg.scorer_sharpness = detail::get_double(kv, "resample.sharpness", 4.0);
  const std::string adopt = detail::get_or(kv, "resample.adopt_on", "lt");
  if (adopt == "lt") cfg.adopt_on = AdoptOn::Lt;
  else if (adopt == "gt") cfg.adopt_on = AdoptOn::Gt;
  else throw ConfigError("config: resample.adopt_on must be lt or gt");

  cfg.snapshot_every = detail::get_int(kv, "snapshot_every", 25);
  cfg.kl_bins = detail::get_int(kv, "kl.bins", 64);
  cfg.seed = static_cast<std::uint64_t>(
      std::stoull(detail::get_or(kv, "seed", std::to_string(cfg.seed))));
  cfg.out_dir = detail::get_or(kv, "out_dir", cfg.out_dir);
  return cfg;
}

// Canonical serialization; also the identity used to check that two configs
// differ only in their preset.
inline KeyValueMap experiment_config_to_kv(const ExperimentConfig& cfg) {
  KeyValueMap kv;
  kv["preset"] = to_string(cfg.preset);
  kv["image.kind"] = cfg.image.kind == ImageKind::Gradient ? "gradient"
                     : cfg.image.kind == ImageKind::Checkerboard ? "checkerboard"
                                                                 : "blobs";
  kv["image.height"] = std::to_string(cfg.image.height);
  kv["image.width"] = std::to_string(cfg.image.width);
  kv["image.channels"] = std::to_string(cfg.image.channels);
  kv["image.period"] = std::to_string(cfg.image.period);
  kv["image.blobs"] = std::to_string(cfg.image.num_blobs);
  kv["mask.kind"] = cfg.mask.kind == MaskKind::Rect ? "rect" : "strokes";
  kv["mask.r_lo"] = std::to_string(cfg.mask.r_lo);
  kv["mask.r_hi"] = std::to_string(cfg.mask.r_hi);
  auto put_sched = [&kv](const std::string& prefix, const ScheduleSpec& s) {
    for (const auto& [k, v] : schedule_to_config(s.kind, s.T, s.lambda, s.params))
      kv[prefix + "." + k] = v;
  };
  put_sched("sched.texture", cfg.sched_texture);
  put_sched("sched.structure", cfg.sched_structure);
  kv["resample.u"] = std::to_string(cfg.resample_u);
  kv["resample.window"] = std::to_string(cfg.scorer_window);
  kv["resample.sharpness"] = std::to_string(cfg.scorer_sharpness);
  kv["resample.adopt_on"] = cfg.adopt_on == AdoptOn::Lt ? "lt" : "gt";
  kv["snapshot_every"] = std::to_string(cfg.snapshot_every);
  kv["kl.bins"] = std::to_string(cfg.kl_bins);
  kv["seed"] = std::to_string(cfg.seed);
  kv["out_dir"] = cfg.out_dir;
  return kv;
}

}  // namespace mrsde
