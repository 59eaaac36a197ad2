#pragma once

#include <algorithm>
#include <cmath>

#include "cvl/geometry.hpp"
#include "cvl/grid.hpp"

namespace cvl {

struct EmbeddingConfig {
  double max_visible_distance = 200.0;  // meters
  double satellite_height_value = -1.0;

  void validate() const {
    if (!(max_visible_distance > 0.0)) throw ConfigError("embedding: max_visible_distance must be positive");
  }
};

/// Channel 0 = heading, 1 = distance, 2 = height.
using EmbeddingMap = Grid;

/// Cosine of the bearing of (x, y); 0 for the degenerate origin column.
inline double heading_channel(const Vec3& p) {
  const double n = std::hypot(p.x(), p.y());
  return n > 0.0 ? p.x() / n : 0.0;
}

inline double distance_channel(const GroundPoint3D& p, const EmbeddingConfig& cfg) {
  return std::clamp(std::hypot(p.x, p.y) / cfg.max_visible_distance, 0.0, 1.0);
}

inline double height_channel(const Vec3& ray, bool is_satellite, const EmbeddingConfig& cfg) {
  return is_satellite ? cfg.satellite_height_value : ray.z();
}

/// Embedding for a ground camera, one value triple per image pixel.
inline EmbeddingMap build_embedding(const CameraIntrinsics& intr, const CameraExtrinsics& extr,
                                    const EmbeddingConfig& cfg) {
  intr.validate();
  extr.validate();
  cfg.validate();
  EmbeddingMap e(intr.height, intr.width, 3);
  for (int r = 0; r < intr.height; ++r) {
    for (int c = 0; c < intr.width; ++c) {
      const Vec3 ray = inverse_project(intr, extr.rot_cam_to_vehicle, Vec2(c, r));
      e.at(r, c, 0) = static_cast<float>(heading_channel(ray));
      e.at(r, c, 1) = ray.z() > kRayEpsilon
                          ? static_cast<float>(distance_channel(lift_to_ground(ray, extr), cfg))
                          : 1.0f;
      e.at(r, c, 2) = static_cast<float>(height_channel(ray, false, cfg));
    }
  }
  return e;
}

/// Embedding for the satellite view, relative to the initial vehicle placement.
inline EmbeddingMap build_embedding(const SatelliteFrame& sat, const VehicleToWorld& initial,
                                    const EmbeddingConfig& cfg) {
  sat.validate();
  cfg.validate();
  EmbeddingMap e(sat.height, sat.width, 3);
  const Mat3 world_to_vehicle = initial.rotation.transpose();
  for (int r = 0; r < sat.height; ++r) {
    for (int c = 0; c < sat.width; ++c) {
      const Vec2 w = sat.pixel_to_world(Vec2(c, r));
      const Vec3 local = world_to_vehicle * (Vec3(w.x(), w.y(), 0.0) - initial.translation);
      e.at(r, c, 0) = static_cast<float>(heading_channel(local));
      e.at(r, c, 1) = static_cast<float>(distance_channel({local.x(), local.y(), 0.0}, cfg));
      e.at(r, c, 2) = static_cast<float>(height_channel(local, true, cfg));
    }
  }
  return e;
}

}  // namespace cvl
