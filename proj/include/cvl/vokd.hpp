#pragma once

// View-consistent on-ground keypoint detection: fuse the per-level V (x) O
// maps, keep the region below the principal point, one winner per patch,
// global top-K, then lift the winners onto the ground plane.

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "cvl/geometry.hpp"
#include "cvl/pyramid.hpp"

namespace cvl {

/// Sum over levels of normalized V (x) O resized to the finest resolution.
using FusedConfidence = Grid;

inline FusedConfidence fuse_confidence(const FeaturePyramid& pyr) {
  if (pyr.levels.empty()) throw ConfigError("fuse_confidence: pyramid has no levels");
  const int h = pyr.finest().height(), w = pyr.finest().width();
  FusedConfidence fused(h, w, 1, 0.0f);
  for (const PyramidLevel& lv : pyr.levels) {
    const Grid resized = resize_bilinear(minmax_normalize(confidence_product(lv)), h, w);
    for (std::size_t i = 0; i < fused.size(); ++i) fused.data()[i] += resized.data()[i];
  }
  return fused;
}

struct VokdConfig {
  int max_keypoints = 256;
  int patch = 8;
};

struct Keypoint2D {
  Vec2 pixel = Vec2::Zero();  // image resolution
  int row = 0, col = 0;       // cell on the fused grid
  double score = 0.0;
};

/// Image coordinate of a fused-grid row or column index.
inline double grid_to_image(int index, double grid_scale) {
  return (index + 0.5) / grid_scale - 0.5;
}

inline std::vector<Keypoint2D> detect_keypoints(const FusedConfidence& conf,
                                                const CameraIntrinsics& intr,
                                                const VokdConfig& cfg = {}) {
  if (cfg.max_keypoints < 1 || cfg.patch < 1)
    throw std::invalid_argument("detect_keypoints: K and patch must be positive");
  // Grid may be coarser than the image; pixel centers stay aligned.
  const double grid_scale = static_cast<double>(conf.width()) / intr.width;

  const int patch_rows = (conf.height() + cfg.patch - 1) / cfg.patch;
  const int patch_cols = (conf.width() + cfg.patch - 1) / cfg.patch;
  std::vector<Keypoint2D> winners;
  winners.reserve(static_cast<std::size_t>(patch_rows) * patch_cols);
  bool any_masked_in = false;

  for (int pr = 0; pr < patch_rows; ++pr) {
    for (int pc = 0; pc < patch_cols; ++pc) {
      Keypoint2D best;
      bool found = false;
      const int r_end = std::min((pr + 1) * cfg.patch, conf.height());
      const int c_end = std::min((pc + 1) * cfg.patch, conf.width());
      for (int r = pr * cfg.patch; r < r_end; ++r) {
        if (!(grid_to_image(r, grid_scale) > intr.cy)) continue;
        any_masked_in = true;
        for (int c = pc * cfg.patch; c < c_end; ++c) {
          const double s = conf.at(r, c);
          if (!std::isfinite(s)) continue;
          // Row-major scan keeps the first (lowest row, column) cell on ties.
          if (!found || s > best.score) {
            best.row = r;
            best.col = c;
            best.score = s;
            found = true;
          }
        }
      }
      if (found) winners.push_back(best);
    }
  }
  if (!any_masked_in) throw EmptyRegion("detect_keypoints: no cell below the principal point");

  std::sort(winners.begin(), winners.end(), [](const Keypoint2D& a, const Keypoint2D& b) {
    if (a.score != b.score) return a.score > b.score;
    if (a.row != b.row) return a.row < b.row;
    return a.col < b.col;
  });
  if (static_cast<int>(winners.size()) > cfg.max_keypoints) winners.resize(cfg.max_keypoints);
  for (Keypoint2D& k : winners)
    k.pixel = {grid_to_image(k.col, grid_scale), grid_to_image(k.row, grid_scale)};
  return winners;
}

struct GroundKeypoint {
  Vec2 pixel = Vec2::Zero();
  int camera_index = 0;
  GroundPoint3D ground_point;
  double score = 0.0;
};

struct KeypointSet {
  std::vector<GroundKeypoint> points;
  int dropped = 0;  // failed the horizon guard
};

inline KeypointSet lift_keypoints(const std::vector<Keypoint2D>& points, const CameraIntrinsics& intr,
                                  const CameraExtrinsics& extr, int camera_index = 0) {
  KeypointSet out;
  out.points.reserve(points.size());
  for (const Keypoint2D& k : points) {
    const Vec3 ray = inverse_project(intr, extr.rot_cam_to_vehicle, k.pixel);
    if (!(ray.z() > kRayEpsilon)) {
      ++out.dropped;
      continue;
    }
    out.points.push_back({k.pixel, camera_index, lift_to_ground(ray, extr), k.score});
  }
  return out;
}

}  // namespace cvl
