#pragma once

// Monte Carlo evaluation: seeded scenes x seeded initial poses, errors in the
// ground-truth vehicle frame, per-axis recall tables.

#include <algorithm>
#include <array>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "cvl/geometry.hpp"
#include "cvl/harness/rng.hpp"
#include "cvl/harness/scene.hpp"
#include "cvl/pipeline.hpp"

namespace cvl {

struct NoiseModel {
  double lateral = 5.0;       // +- meters
  double longitudinal = 5.0;  // +- meters
  double yaw_deg = 15.0;      // +- degrees

  void validate() const {
    if (lateral < 0 || longitudinal < 0 || yaw_deg < 0) throw ConfigError("noise ranges must be >= 0");
  }
};

inline Pose3DoF sample_initial_pose(const Pose3DoF& gt, const NoiseModel& noise, std::uint64_t seed) {
  noise.validate();
  Rng rng(seed);
  const double dl = rng.uniform(-noise.lateral, noise.lateral);
  const double dn = rng.uniform(-noise.longitudinal, noise.longitudinal);
  const double dy = rng.uniform(-noise.yaw_deg, noise.yaw_deg);
  return Pose3DoF::make(gt.lateral + dl, gt.longitudinal + dn, gt.yaw + deg2rad(dy));
}

/// Signed error of `pred` in the frame of `gt` (lateral = right, longitudinal = forward).
struct PoseError {
  double lateral = 0.0;
  double longitudinal = 0.0;
  double yaw_deg = 0.0;
};

inline PoseError pose_error(const VehicleToWorld& pred, const VehicleToWorld& gt) {
  const Vec3 d = gt.rotation.transpose() * (pred.translation - gt.translation);
  return {d.y(), d.x(), rad2deg(wrap_angle(pred.heading() - gt.heading()))};
}

inline constexpr std::array<double, 4> kDistanceThresholds{0.25, 0.5, 1.0, 2.0};
inline constexpr std::array<double, 3> kYawThresholds{1.0, 2.0, 4.0};

struct MetricsTable {
  double lat_mean = 0, lat_median = 0, lon_mean = 0, lon_median = 0, yaw_mean = 0, yaw_median = 0;
  std::array<double, 4> r_lat{}, r_lon{};  // percent
  std::array<double, 3> r_yaw{};           // percent
  int trials = 0;
  int failures = 0;
};

namespace detail {
inline double mean_of(const std::vector<double>& v) {
  if (v.empty()) return std::nan("");
  double s = 0.0;
  for (double x : v) s += x;
  return s / v.size();
}
inline double median_of(std::vector<double> v) {
  if (v.empty()) return std::nan("");
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}
}  // namespace detail

/// Failed trials (nullopt) count as misses at every threshold and are left
/// out of the means and medians.
inline MetricsTable compute_metrics(const std::vector<std::optional<PoseError>>& errors) {
  MetricsTable t;
  t.trials = static_cast<int>(errors.size());
  std::vector<double> lat, lon, yaw;
  for (const auto& e : errors) {
    if (!e) {
      ++t.failures;
      continue;
    }
    lat.push_back(std::abs(e->lateral));
    lon.push_back(std::abs(e->longitudinal));
    yaw.push_back(std::abs(e->yaw_deg));
  }
  t.lat_mean = detail::mean_of(lat);
  t.lat_median = detail::median_of(lat);
  t.lon_mean = detail::mean_of(lon);
  t.lon_median = detail::median_of(lon);
  t.yaw_mean = detail::mean_of(yaw);
  t.yaw_median = detail::median_of(yaw);
  const auto recall = [&](const std::vector<double>& v, double thr) {
    if (t.trials == 0) return 0.0;
    const auto hits = std::count_if(v.begin(), v.end(), [&](double x) { return x < thr; });
    return 100.0 * static_cast<double>(hits) / t.trials;
  };
  for (std::size_t i = 0; i < kDistanceThresholds.size(); ++i) {
    t.r_lat[i] = recall(lat, kDistanceThresholds[i]);
    t.r_lon[i] = recall(lon, kDistanceThresholds[i]);
  }
  for (std::size_t i = 0; i < kYawThresholds.size(); ++i) t.r_yaw[i] = recall(yaw, kYawThresholds[i]);
  return t;
}

inline std::string metrics_csv_header() {
  return "lat_mean,lat_median,lon_mean,lon_median,yaw_mean,yaw_median,"
         "r_lat@0.25,r_lat@0.5,r_lat@1,r_lat@2,r_lon@0.25,r_lon@0.5,r_lon@1,r_lon@2,"
         "r_yaw@1,r_yaw@2,r_yaw@4,trials,failures";
}

inline std::string metrics_csv_row(const MetricsTable& t) {
  std::string out;
  char buf[64];
  const auto put = [&](double v) {
    std::snprintf(buf, sizeof buf, "%.6f,", v);
    out += buf;
  };
  for (double v : {t.lat_mean, t.lat_median, t.lon_mean, t.lon_median, t.yaw_mean, t.yaw_median}) put(v);
  for (double v : t.r_lat) put(v);
  for (double v : t.r_lon) put(v);
  for (double v : t.r_yaw) put(v);
  out += std::to_string(t.trials) + "," + std::to_string(t.failures);
  return out;
}

struct EvalConfig {
  int scenes = 20;
  int trials_per_scene = 10;
  std::uint64_t seed = 1;
  NoiseModel noise;
  std::string rig = "front";
  TextureKind texture = TextureKind::kBlobs;
  int distractors = 0;
  PipelineConfig pipeline;
  int threads = 0;  // 0 = hardware concurrency
};

struct TrialResult {
  int scene = 0;
  int trial = 0;
  Pose3DoF initial;
  std::optional<PoseError> error;
  std::string failure;
};

struct EvalResult {
  MetricsTable table;
  std::vector<TrialResult> trials;
};

inline SceneSpec scene_spec_for(const EvalConfig& cfg, int scene_index) {
  SceneSpec spec;
  spec.seed = Rng::derive(cfg.seed, static_cast<std::uint64_t>(scene_index));
  spec.texture = cfg.texture;
  spec.rig = rig_by_name(cfg.rig);
  spec.distractors = cfg.distractors;
  return spec;
}

/// Runs `n` independent jobs on up to `threads` workers; results are indexed.
template <typename Fn>
void parallel_for(int n, int threads, Fn&& fn) {
  const int workers = std::max(1, std::min(n, threads > 0 ? threads
                                                          : static_cast<int>(std::thread::hardware_concurrency())));
  if (workers <= 1) {
    for (int i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<int> next{0};
  std::vector<std::jthread> pool;
  for (int w = 0; w < workers; ++w)
    pool.emplace_back([&] {
      for (int i = next++; i < n; i = next++) fn(i);
    });
}

inline TrialResult run_trial(const Scene& scene, const GroundSide& ground, const EvalConfig& cfg,
                             int scene_index, int trial) {
  TrialResult r;
  r.scene = scene_index;
  r.trial = trial;
  r.initial = sample_initial_pose(scene.gt, cfg.noise,
                                  Rng::derive(scene.spec.seed, 1000 + static_cast<std::uint64_t>(trial)));
  try {
    const LocalizeResult res = localize(ground, scene.satellite_image, scene.satellite, scene.anchor,
                                        r.initial, cfg.pipeline);
    r.error = pose_error(res.final_transform, pose_to_transform(scene.gt, scene.anchor));
  } catch (const Error& e) {
    r.failure = e.what();
  }
  return r;
}

inline EvalResult evaluate(const EvalConfig& cfg) {
  if (cfg.scenes < 1 || cfg.trials_per_scene < 1) throw ConfigError("evaluate: need at least one trial");
  cfg.noise.validate();
  EvalResult out;
  out.trials.resize(static_cast<std::size_t>(cfg.scenes) * cfg.trials_per_scene);
  parallel_for(cfg.scenes, cfg.threads, [&](int s) {
    const Scene scene = synth_scene(scene_spec_for(cfg, s));
    std::optional<GroundSide> ground;
    std::string setup_failure;
    try {
      ground = prepare_ground(scene.spec.rig, scene.images, scene.masks, cfg.pipeline);
    } catch (const Error& e) {
      setup_failure = e.what();
    }
    for (int t = 0; t < cfg.trials_per_scene; ++t) {
      TrialResult& slot = out.trials[static_cast<std::size_t>(s) * cfg.trials_per_scene + t];
      if (ground) {
        slot = run_trial(scene, *ground, cfg, s, t);
      } else {
        slot.scene = s;
        slot.trial = t;
        slot.failure = setup_failure;
      }
    }
  });
  std::vector<std::optional<PoseError>> errors;
  for (const TrialResult& t : out.trials) errors.push_back(t.error);
  out.table = compute_metrics(errors);
  return out;
}

struct SweepRow {
  double translation_noise = 0.0;  // +- meters on both lateral and longitudinal
  MetricsTable table;
};

/// Re-runs `evaluate` with each lateral/longitudinal noise range; yaw noise stays fixed.
inline std::vector<SweepRow> sweep_translation_noise(EvalConfig cfg, const std::vector<double>& ranges) {
  std::vector<SweepRow> rows;
  for (double m : ranges) {
    cfg.noise.lateral = cfg.noise.longitudinal = m;
    rows.push_back({m, evaluate(cfg).table});
  }
  return rows;
}

inline std::string sweep_csv(const std::vector<SweepRow>& rows) {
  std::string out = "noise_m," + metrics_csv_header() + "\n";
  char buf[32];
  for (const SweepRow& r : rows) {
    std::snprintf(buf, sizeof buf, "%g,", r.translation_noise);
    out += buf + metrics_csv_row(r.table) + "\n";
  }
  return out;
}

}  // namespace cvl
