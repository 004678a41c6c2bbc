#pragma once

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <memory>
#include <string>
#include <vector>

#include "mrsde/config.hpp"
#include "mrsde/correlation.hpp"
#include "mrsde/image.hpp"
#include "mrsde/metrics.hpp"
#include "mrsde/predictor.hpp"
#include "mrsde/resampler.hpp"
#include "mrsde/rng.hpp"
#include "mrsde/sde.hpp"
#include "mrsde/synth.hpp"

namespace mrsde {

struct OutputPathError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct ScheduleMismatchError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct ExperimentSummary {
  Preset preset;
  double psnr_masked = 0.0;
  double psnr_unmasked = 0.0;
  double ssim_value = 0.0;
  double kl_masked = 0.0;
  double kl_unmasked = 0.0;
  double mean_kl_gap = 0.0;  // over the whole chain
};

struct ExperimentResult {
  ExperimentSummary summary;
  RunRecord record;
  std::vector<RegionReport> curve_psnr;
  std::vector<RegionReport> curve_kl;
  ImageGrid gt;
  Mask mask;
  ImageGrid output;
  std::vector<ImageGrid> y_chain;  // texture states, parallel to timesteps
  std::vector<ImageGrid> x_chain;  // structure states (guided presets only)
  std::vector<int> timesteps;
};

namespace detail {

inline std::string fmt_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.12g", v);
  return buf;
}

inline void write_curve_csv(const std::vector<RegionReport>& curve, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw OutputPathError("cannot open for writing: " + path);
  out << "t,masked,unmasked,gap\n";
  for (const RegionReport& r : curve)
    out << r.t << "," << fmt_double(r.masked_value) << "," << fmt_double(r.unmasked_value)
        << "," << fmt_double(r.gap()) << "\n";
}

inline std::string snapshot_name(const std::string& kind, int t, bool color) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%s_%03d.%s", kind.c_str(), t, color ? "ppm" : "pgm");
  return buf;
}

// Structure anchors (x_0, mu_x) for a preset; texture-only has none.
struct StructureAnchors {
  ImageGrid init;
  ImageGrid mean;
};

inline StructureAnchors structure_anchors(Preset preset, const ImageGrid& gt, const Mask& m) {
  const ImageGrid gray = luminance_of(gt);
  const ImageGrid edge = edge_map(gt);
  switch (preset) {
    case Preset::Gray2Edge: return {gray, apply_mask(edge, m)};
    case Preset::Gray2Gray: return {gray, apply_mask(gray, m)};
    case Preset::Edge2Edge: return {edge, apply_mask(edge, m)};
    case Preset::Edge2Gray: return {edge, apply_mask(gray, m)};
    case Preset::TextureOnly: break;
  }
  throw InvalidPresetError("texture-only preset has no structure anchors");
}

}  // namespace detail

// Runs one experiment in memory. Deterministic per (config, seed).
inline ExperimentResult run_experiment_in_memory(const ExperimentConfig& cfg) {
  if (cfg.sched_texture.T != cfg.sched_structure.T)
    throw ScheduleMismatchError("texture and structure schedules must share T");
  const Schedule sched_y = cfg.sched_texture.build();
  const Schedule sched_x = cfg.sched_structure.build();

  Rng rng(cfg.seed);
  const ImageGrid gt = gen_synthetic(cfg.image, rng);
  const Mask mask = gen_mask(cfg.mask, rng);
  const ImageGrid mu_y = apply_mask(gt, mask);

  ExperimentResult res;
  res.gt = gt;
  res.mask = mask;
  res.summary.preset = cfg.preset;

  std::vector<ImageGrid>& y_values = res.y_chain;
  std::vector<int>& timesteps = res.timesteps;

  if (cfg.preset == Preset::TextureOnly) {
    const DiffusionState y_T = terminal_state(mu_y, sched_y, rng, &gt);
    const OraclePredictor oracle(gt, mu_y, sched_y);
    const auto chain = reverse_chain(y_T, oracle);
    for (const DiffusionState& st : chain) {
      y_values.push_back(st.value);
      timesteps.push_back(st.t);
      StepRecord rec;
      rec.t = st.t;
      if (st.t < sched_y.T) {
        detail::region_mse(st.value, gt, mask, &rec.masked_mse, &rec.unmasked_mse);
        res.record.steps.push_back(rec);
      }
    }
    res.output = merge_result(chain.back().value, mu_y, mask);
  } else {
    const detail::StructureAnchors sa = detail::structure_anchors(cfg.preset, gt, mask);
    // Structure images are single-channel; lift them to the texture's shape
    // so the guided closed form applies elementwise per channel.
    auto broadcast = [&gt](const ImageGrid& s) {
      if (gt.channels == 1) return s;
      ImageGrid out(gt.height, gt.width, gt.channels);
      for (int y = 0; y < gt.height; ++y)
        for (int x = 0; x < gt.width; ++x)
          for (int c = 0; c < gt.channels; ++c) out.at(y, x, c) = s.at(y, x);
      return out;
    };
    const ImageGrid x0 = broadcast(sa.init);
    const ImageGrid mu_x = broadcast(sa.mean);

    const DiffusionState y_T = terminal_state(mu_y, sched_y, rng, &gt);
    const DiffusionState x_T = terminal_state(mu_x, sched_x, rng, &x0);
    const OraclePredictor pred_y(gt, mu_y, sched_y, x0, mu_x, sched_x);
    const OraclePredictor pred_x(x0, mu_x, sched_x);
    const auto scorer = statistic_scorer(cfg.scorer_window, cfg.scorer_sharpness, &mask);
    ResampleConfig rc;
    rc.max_iterations = cfg.resample_u;
    rc.scorer = scorer.get();
    rc.snapshot_every = cfg.snapshot_every;
    rc.adopt_on = cfg.adopt_on;
    InferenceResult inf = run_inference(y_T, x_T, pred_y, pred_x, rc, mask, rng);
    for (int t = sched_y.T; t >= 0; --t) {
      y_values.push_back(inf.y_chain[static_cast<std::size_t>(t)]);
      res.x_chain.push_back(inf.x_chain[static_cast<std::size_t>(t)]);
      timesteps.push_back(t);
    }
    res.record = std::move(inf.record);
    res.output = std::move(inf.output);
  }

  res.curve_psnr = discrepancy_curve(y_values, timesteps, gt, mask, CurveMetric::Psnr);
  res.curve_kl = discrepancy_curve(y_values, timesteps, gt, mask, CurveMetric::Kl, cfg.kl_bins);

  res.summary.psnr_masked = psnr(res.output, gt, &mask, Region::Masked);
  res.summary.psnr_unmasked = psnr(res.output, gt, &mask, Region::Unmasked);
  res.summary.ssim_value = ssim(res.output, gt);
  const RegionReport kl = region_kl(res.output, gt, mask, cfg.kl_bins);
  res.summary.kl_masked = kl.masked_value;
  res.summary.kl_unmasked = kl.unmasked_value;
  double gap = 0.0;
  for (const RegionReport& r : res.curve_kl) gap += r.gap();
  res.summary.mean_kl_gap = gap / static_cast<double>(res.curve_kl.size());
  return res;
}

inline void write_summary_csv(const std::vector<ExperimentSummary>& rows,
                              const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw OutputPathError("cannot open for writing: " + path);
  out << "preset,psnr_masked,psnr_unmasked,ssim,kl_masked,kl_unmasked,mean_kl_gap\n";
  for (const ExperimentSummary& s : rows)
    out << to_string(s.preset) << "," << detail::fmt_double(s.psnr_masked) << ","
        << detail::fmt_double(s.psnr_unmasked) << "," << detail::fmt_double(s.ssim_value)
        << "," << detail::fmt_double(s.kl_masked) << "," << detail::fmt_double(s.kl_unmasked)
        << "," << detail::fmt_double(s.mean_kl_gap) << "\n";
}

// Runs the experiment and writes all artifacts into cfg.out_dir.
inline ExperimentResult run_experiment(const ExperimentConfig& cfg) {
  namespace fs = std::filesystem;
  std::error_code ec;
  fs::create_directories(cfg.out_dir, ec);
  if (ec || !fs::is_directory(cfg.out_dir))
    throw OutputPathError("cannot create output directory: " + cfg.out_dir);

  ExperimentResult res = run_experiment_in_memory(cfg);
  const std::string dir = cfg.out_dir + "/";

  write_run_record_csv(res.record, dir + "run.csv");
  detail::write_curve_csv(res.curve_psnr, dir + "curve_psnr.csv");
  detail::write_curve_csv(res.curve_kl, dir + "curve_kl.csv");
  write_summary_csv({res.summary}, dir + "summary.csv");
  write_pnm(res.gt, dir + (res.gt.channels == 3 ? "gt.ppm" : "gt.pgm"));
  write_pnm(res.output, dir + (res.output.channels == 3 ? "result.ppm" : "result.pgm"));

  write_mask(res.mask, dir + "mask.pgm");
  if (cfg.snapshot_every > 0) {
    for (std::size_t i = 0; i < res.timesteps.size(); ++i) {
      const int t = res.timesteps[i];
      if (t % cfg.snapshot_every != 0) continue;
      const ImageGrid& y = res.y_chain[i];
      write_pnm(y, dir + detail::snapshot_name("texture", t, y.channels == 3));
      if (!res.x_chain.empty()) {
        // Structure states are channel-replicated; persist one plane as PGM.
        const ImageGrid& x = res.x_chain[i];
        ImageGrid plane(x.height, x.width, 1);
        for (int yy = 0; yy < x.height; ++yy)
          for (int xx = 0; xx < x.width; ++xx) plane.at(yy, xx) = x.at(yy, xx, 0);
        write_pnm(plane, dir + detail::snapshot_name("structure", t, false));
      }
    }
  }
  return res;
}

// One row per preset; configs must differ only in their preset.
inline std::vector<ExperimentSummary> compare_presets(const std::vector<ExperimentConfig>& cfgs) {
  if (cfgs.empty()) throw std::invalid_argument("compare_presets: no configs");
  KeyValueMap base = experiment_config_to_kv(cfgs.front());
  base["preset"] = "";
  base["out_dir"] = "";
  for (const ExperimentConfig& c : cfgs) {
    KeyValueMap kv = experiment_config_to_kv(c);
    kv["preset"] = "";
    kv["out_dir"] = "";
    if (kv != base)
      throw std::invalid_argument("compare_presets: configs differ beyond the preset");
  }
  std::vector<ExperimentSummary> rows;
  rows.reserve(cfgs.size());
  for (const ExperimentConfig& c : cfgs) rows.push_back(run_experiment_in_memory(c).summary);
  return rows;
}

}  // namespace mrsde
