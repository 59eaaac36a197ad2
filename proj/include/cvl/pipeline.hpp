#pragma once

// End-to-end localization from images: toy feature extraction, keypoint
// detection on every ground camera, then coarse-to-fine LM started at the
// initial pose.

#include <optional>
#include <string>
#include <vector>

#include "cvl/embedding.hpp"
#include "cvl/fusion.hpp"
#include "cvl/geometry.hpp"
#include "cvl/optimizer.hpp"
#include "cvl/pyramid.hpp"
#include "cvl/vokd.hpp"

namespace cvl {

enum class MaskMode { kOracle, kOnes };

inline MaskMode parse_mask_mode(const std::string& s) {
  if (s == "oracle") return MaskMode::kOracle;
  if (s == "ones") return MaskMode::kOnes;
  throw std::invalid_argument("unknown mask mode '" + s + "' (expected oracle|ones)");
}

struct PipelineConfig {
  EmbeddingConfig embedding;
  VokdConfig vokd;
  LMConfig lm = [] {
    LMConfig c;
    c.residual_channels = 1;  // toy features: compare intensity only
    return c;
  }();
  MaskMode mask = MaskMode::kOracle;
  ToyExtractOptions extract{.normalize_intensity = false};
};

struct GroundSide {
  std::vector<GroundView> views;
  KeypointSet keypoints;
};

/// Detects and lifts keypoints on every camera from precomputed pyramids.
inline GroundSide prepare_ground(const std::vector<Camera>& rig, std::vector<FeaturePyramid> pyramids,
                                 const PipelineConfig& cfg) {
  if (pyramids.size() != rig.size()) throw ConfigError("prepare_ground: one pyramid per camera required");
  GroundSide out;
  for (std::size_t i = 0; i < rig.size(); ++i) out.views.emplace_back(rig[i], std::move(pyramids[i]));
  for (std::size_t i = 0; i < rig.size(); ++i) {
    const Camera& cam = rig[i];
    const FusedConfidence conf = fuse_confidence(out.views[i].pyramid());
    std::vector<Keypoint2D> kps;
    try {
      kps = detect_keypoints(conf, cam.intrinsics, cfg.vokd);
    } catch (const EmptyRegion&) {
      continue;  // camera contributes no keypoints
    }
    const KeypointSet lifted =
        lift_keypoints(kps, cam.intrinsics, cam.extrinsics, static_cast<int>(i));
    out.keypoints.points.insert(out.keypoints.points.end(), lifted.points.begin(),
                                lifted.points.end());
    out.keypoints.dropped += lifted.dropped;
  }
  return out;
}

/// Toy-extracts a pyramid per camera image, then detects keypoints.
/// `masks` may be empty (or ignored in kOnes mode).
inline GroundSide prepare_ground(const std::vector<Camera>& rig, const std::vector<Grid>& images,
                                 const std::vector<Grid>& masks, const PipelineConfig& cfg) {
  if (images.size() != rig.size()) throw ConfigError("prepare_ground: one image per camera required");
  std::vector<FeaturePyramid> pyramids;
  for (std::size_t i = 0; i < rig.size(); ++i) {
    const Camera& cam = rig[i];
    const EmbeddingMap emb = build_embedding(cam.intrinsics, cam.extrinsics, cfg.embedding);
    std::optional<Grid> mask;
    if (cfg.mask == MaskMode::kOracle && i < masks.size()) mask = masks[i];
    pyramids.push_back(toy_extract(images[i], emb, cfg.lm.levels, mask, cfg.extract));
  }
  return prepare_ground(rig, std::move(pyramids), cfg);
}

inline Anchor anchor_of(const VehicleToWorld& t) {
  return {t.translation.head<2>(), wrap_angle(t.heading())};
}

/// Pose of `t` expressed as a perturbation of `anchor`.
inline Pose3DoF relative_pose(const VehicleToWorld& t, const Anchor& anchor) {
  const Vec3 d = rot_about_down(anchor.heading).transpose() *
                 (t.translation - Vec3(anchor.position.x(), anchor.position.y(), 0.0));
  return Pose3DoF::make(d.y(), d.x(), t.heading() - anchor.heading);
}

/// Satellite pyramid whose embedding is centered on the initial placement.
inline SatelliteView prepare_satellite(const Grid& image, const SatelliteFrame& frame,
                                       const VehicleToWorld& initial, const PipelineConfig& cfg) {
  const EmbeddingMap emb = build_embedding(frame, initial, cfg.embedding);
  return SatelliteView(frame, toy_extract(image, emb, cfg.lm.levels, std::nullopt, cfg.extract));
}

struct LocalizeResult {
  OptimizeReport report;
  VehicleToWorld initial;
  VehicleToWorld final_transform;
  Pose3DoF final_pose;  // relative to the caller's anchor
};

/// Optimizes from `initial` (relative to `anchor`) against a prepared
/// satellite view. The problem is re-anchored at the initial placement so the
/// state starts at zero; poses passed to `on_iteration` are relative to `anchor`.
inline LocalizeResult localize(const GroundSide& ground, const SatelliteView& sat,
                               const Anchor& anchor, const Pose3DoF& initial,
                               const PipelineConfig& cfg,
                               const IterationCallback& on_iteration = {}) {
  LocalizeResult out;
  out.initial = pose_to_transform(initial, anchor);
  LocalizationProblem problem{&sat, &ground.views, &ground.keypoints, anchor_of(out.initial)};
  IterationCallback relay;
  if (on_iteration)
    relay = [&](const IterationRecord& rec) {
      IterationRecord r = rec;
      r.pose = relative_pose(pose_to_transform(rec.pose, problem.anchor), anchor);
      on_iteration(r);
    };
  out.report = optimize(Pose3DoF{}, problem, cfg.lm, relay);
  out.final_transform = pose_to_transform(out.report.final_pose, problem.anchor);
  out.final_pose = relative_pose(out.final_transform, anchor);
  return out;
}

/// Same, toy-extracting the satellite pyramid around the initial placement.
inline LocalizeResult localize(const GroundSide& ground, const Grid& satellite_image,
                               const SatelliteFrame& frame, const Anchor& anchor,
                               const Pose3DoF& initial, const PipelineConfig& cfg,
                               const IterationCallback& on_iteration = {}) {
  const SatelliteView sat =
      prepare_satellite(satellite_image, frame, pose_to_transform(initial, anchor), cfg);
  return localize(ground, sat, anchor, initial, cfg, on_iteration);
}

}  // namespace cvl
