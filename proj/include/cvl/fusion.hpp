#pragma once

// Multi-camera fusion: a keypoint lifted from one camera may be seen by
// others; its ground-side weight and feature come from the camera with the
// highest V (x) O response (or their mean, for the ablation baseline).

#include <stdexcept>
#include <string>
#include <vector>

#include "cvl/geometry.hpp"
#include "cvl/pyramid.hpp"
#include "cvl/vokd.hpp"

namespace cvl {

enum class FusionStrategy { kMax, kMean };

inline FusionStrategy parse_fusion_strategy(const std::string& s) {
  if (s == "max") return FusionStrategy::kMax;
  if (s == "mean") return FusionStrategy::kMean;
  throw std::invalid_argument("unknown fusion strategy '" + s + "' (expected max|mean)");
}

/// A camera together with its pyramid and cached per-level V (x) O maps.
class GroundView {
 public:
  GroundView(Camera camera, FeaturePyramid pyramid)
      : camera_(std::move(camera)), pyramid_(std::move(pyramid)) {
    pyramid_.validate();
    for (const PyramidLevel& lv : pyramid_.levels) confidence_.push_back(confidence_product(lv));
  }

  const Camera& camera() const { return camera_; }
  const FeaturePyramid& pyramid() const { return pyramid_; }
  const Grid& confidence(int level) const { return confidence_.at(level); }

  /// Scale from image pixels to grid coordinates of `level`.
  double level_scale(int level) const {
    return pyramid_.scale(level) * pyramid_.finest().width() / camera_.intrinsics.width;
  }

 private:
  Camera camera_;
  FeaturePyramid pyramid_;
  std::vector<Grid> confidence_;
};

struct FusedPoint {
  GroundPoint3D ground_point;
  double weight = 0.0;
  Eigen::VectorXd feature;
  int source_camera = -1;
};

struct CameraSample {
  double weight = 0.0;
  Eigen::VectorXd feature;
  bool visible = false;
};

/// Weight and feature of one camera at a ground point, on `level`.
inline CameraSample sample_camera(const GroundView& view, const GroundPoint3D& point, int level) {
  CameraSample s;
  const CameraPixel px =
      project_to_camera(point, view.camera().intrinsics, view.camera().extrinsics);
  if (!px.visible) return s;
  const Vec2 at = to_level(px.pixel, view.level_scale(level));
  bool in_bounds = false;
  s.weight = bilinear_scalar(view.confidence(level), at, 0, &in_bounds);
  if (!in_bounds) return s;
  s.feature = bilinear_lookup(view.pyramid().level(level).features, at).value;
  s.visible = true;
  return s;
}

inline FusedPoint fuse_point(const GroundPoint3D& point, const std::vector<GroundView>& views,
                             int level, FusionStrategy strategy = FusionStrategy::kMax) {
  FusedPoint out;
  out.ground_point = point;
  int visible = 0;
  for (int i = 0; i < static_cast<int>(views.size()); ++i) {
    CameraSample s = sample_camera(views[i], point, level);
    if (!s.visible) continue;
    ++visible;
    if (strategy == FusionStrategy::kMax) {
      // Strict comparison keeps the lowest camera index on ties.
      if (out.source_camera < 0 || s.weight > out.weight) {
        out.weight = s.weight;
        out.feature = std::move(s.feature);
        out.source_camera = i;
      }
    } else {
      if (out.source_camera < 0) {
        out.feature = Eigen::VectorXd::Zero(s.feature.size());
        out.source_camera = i;
      }
      out.weight += s.weight;
      out.feature += s.feature;
    }
  }
  if (visible == 0) throw NotVisible("fuse_point: no camera sees the point");
  if (strategy == FusionStrategy::kMean) {
    out.weight /= visible;
    out.feature /= visible;
  }
  return out;
}

struct FusedKeypoints {
  std::vector<FusedPoint> points;
  int not_visible = 0;
};

/// Fuses every keypoint at `level`; points no camera sees are dropped.
inline FusedKeypoints fuse_keypoints(const KeypointSet& keypoints,
                                     const std::vector<GroundView>& views, int level,
                                     FusionStrategy strategy = FusionStrategy::kMax) {
  FusedKeypoints out;
  out.points.reserve(keypoints.points.size());
  for (const GroundKeypoint& k : keypoints.points) {
    try {
      out.points.push_back(fuse_point(k.ground_point, views, level, strategy));
    } catch (const NotVisible&) {
      ++out.not_visible;
    }
  }
  return out;
}

}  // namespace cvl
