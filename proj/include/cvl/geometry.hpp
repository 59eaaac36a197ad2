#pragma once

// Frames used throughout:
//   camera   x right, y down, z forward (pinhole)
//   vehicle  x forward, y right, z down; origin on the ground plane
//   world    x East (+u on the satellite image), y South (+v), z down;
//            origin at the satellite image center
// Headings are rotations about the down axis, measured from East toward
// South (clockwise when seen from above).

#include <cmath>
#include <numbers>
#include <optional>
#include <stdexcept>
#include <string>

#include <Eigen/Core>
#include <Eigen/Geometry>

#include "cvl/errors.hpp"

namespace cvl {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;
using Mat23 = Eigen::Matrix<double, 2, 3>;

/// Horizon guard on the down component of a vehicle-oriented ray.
inline constexpr double kRayEpsilon = 1e-3;

/// Wraps an angle to (-pi, pi].
inline double wrap_angle(double a) {
  constexpr double two_pi = 2.0 * std::numbers::pi;
  double r = std::fmod(a, two_pi);
  if (r <= -std::numbers::pi) r += two_pi;
  if (r > std::numbers::pi) r -= two_pi;
  return r;
}

inline double deg2rad(double d) { return d * std::numbers::pi / 180.0; }
inline double rad2deg(double r) { return r * 180.0 / std::numbers::pi; }

/// 3-DoF pose: a perturbation expressed in the anchor (initial) vehicle frame.
struct Pose3DoF {
  double lateral = 0.0;       // meters, along the anchor's right axis
  double longitudinal = 0.0;  // meters, along the anchor's forward axis
  double yaw = 0.0;           // radians, wrapped to (-pi, pi]

  static Pose3DoF make(double lateral, double longitudinal, double yaw) {
    Pose3DoF p{lateral, longitudinal, wrap_angle(yaw)};
    if (!std::isfinite(lateral) || !std::isfinite(longitudinal) || !std::isfinite(yaw))
      throw std::invalid_argument("Pose3DoF: non-finite component");
    return p;
  }

  /// Applies an additive update ordered (lateral, longitudinal, yaw).
  Pose3DoF plus(const Vec3& delta) const {
    return make(lateral + delta[0], longitudinal + delta[1], yaw + delta[2]);
  }

  Vec3 as_vector() const { return {lateral, longitudinal, yaw}; }

  bool operator==(const Pose3DoF&) const = default;
};

struct CameraIntrinsics {
  double fx = 1.0, fy = 1.0;
  double cx = 0.0, cy = 0.0;
  int width = 1, height = 1;

  void validate() const {
    if (!(fx > 0.0) || !(fy > 0.0)) throw ConfigError("intrinsics: focal lengths must be positive");
    if (width <= 0 || height <= 0) throw ConfigError("intrinsics: image size must be positive");
    if (!(cx >= 0.0 && cx < width) || !(cy >= 0.0 && cy < height))
      throw ConfigError("intrinsics: principal point outside the image");
  }

  Mat3 matrix() const {
    Mat3 k;
    k << fx, 0, cx, 0, fy, cy, 0, 0, 1;
    return k;
  }

  bool contains(const Vec2& px) const {
    return px.x() >= 0.0 && px.y() >= 0.0 && px.x() < width && px.y() < height;
  }
};

struct CameraExtrinsics {
  Mat3 rot_cam_to_vehicle = Mat3::Identity();
  Vec3 trans_cam_to_vehicle = Vec3::Zero();  // camera center in the vehicle frame
  double cam_height = 1.0;                   // meters above the ground plane

  void validate() const {
    const Mat3 should_be_identity = rot_cam_to_vehicle.transpose() * rot_cam_to_vehicle;
    if (!should_be_identity.isApprox(Mat3::Identity(), 1e-9) ||
        std::abs(rot_cam_to_vehicle.determinant() - 1.0) > 1e-9)
      throw ConfigError("extrinsics: rotation is not a proper orthonormal matrix");
    if (!(cam_height > 0.0)) throw ConfigError("extrinsics: camera must sit above the ground plane");
  }
};

/// A pinhole camera mounted on the vehicle.
struct Camera {
  std::string name;
  CameraIntrinsics intrinsics;
  CameraExtrinsics extrinsics;
};

/// Builds rot_cam_to_vehicle for a camera yawed by `yaw` (about vehicle down,
/// positive toward the right) and pitched down by `pitch_down`.
inline Mat3 camera_mount_rotation(double yaw, double pitch_down) {
  // Level, forward-looking camera: cam z -> vehicle x, cam x -> y, cam y -> z.
  Mat3 base;
  base << 0, 0, 1, 1, 0, 0, 0, 1, 0;
  const Mat3 pitch = Eigen::AngleAxisd(-pitch_down, Vec3::UnitY()).toRotationMatrix();
  const Mat3 yaw_r = Eigen::AngleAxisd(yaw, Vec3::UnitZ()).toRotationMatrix();
  return yaw_r * pitch * base;
}

/// Web-map tile scale in meters per pixel.
inline double meters_per_pixel(double latitude_deg, int zoom, int scale) {
  if (!(std::abs(latitude_deg) < 90.0))
    throw std::domain_error("meters_per_pixel: |latitude| must be below 90 degrees");
  if (zoom < 0) throw std::domain_error("meters_per_pixel: zoom must be non-negative");
  if (scale < 1) throw std::domain_error("meters_per_pixel: scale must be at least 1");
  constexpr double kEarthScale = 156543.03392;
  return kEarthScale * std::cos(latitude_deg * std::numbers::pi / 180.0) /
         (std::ldexp(1.0, zoom) * scale);
}

struct GeoTag {
  double latitude = 0.0;
  int zoom = 18;
  int scale = 2;
};

/// Parallel-projection satellite camera.
struct SatelliteFrame {
  double center_u = 0.0, center_v = 0.0;
  double gamma = 1.0;  // meters per pixel
  int width = 1, height = 1;
  std::optional<GeoTag> geo;

  static SatelliteFrame from_geo(const GeoTag& tag, int width, int height) {
    SatelliteFrame s;
    s.width = width;
    s.height = height;
    s.center_u = width / 2.0;
    s.center_v = height / 2.0;
    s.gamma = meters_per_pixel(tag.latitude, tag.zoom, tag.scale);
    s.geo = tag;
    return s;
  }

  void validate() const {
    if (!(gamma > 0.0)) throw ConfigError("satellite: gamma must be positive");
    if (width <= 0 || height <= 0) throw ConfigError("satellite: image size must be positive");
    if (geo) {
      const double expected = meters_per_pixel(geo->latitude, geo->zoom, geo->scale);
      if (std::abs(gamma - expected) > 1e-9 * expected)
        throw ConfigError("satellite: gamma inconsistent with latitude/zoom/scale");
    }
  }

  Vec2 world_to_pixel(const Vec2& xy) const {
    return {xy.x() / gamma + center_u, xy.y() / gamma + center_v};
  }
  Vec2 pixel_to_world(const Vec2& px) const {
    return {(px.x() - center_u) * gamma, (px.y() - center_v) * gamma};
  }
  bool contains(const Vec2& px) const {
    return px.x() >= 0.0 && px.y() >= 0.0 && px.x() < width && px.y() < height;
  }
};

/// Point in the vehicle ground frame (x forward, y right, z down), meters.
struct GroundPoint3D {
  double x = 0.0, y = 0.0, z = 0.0;
  Vec3 vec() const { return {x, y, z}; }
};

/// World placement of the initial (anchor) pose.
struct Anchor {
  Vec2 position = Vec2::Zero();  // world meters (East, South)
  double heading = 0.0;          // radians from East toward South

  static Anchor from_pixel(const SatelliteFrame& sat, const Vec2& px, double heading) {
    return {sat.pixel_to_world(px), heading};
  }
};

/// Rigid transform vehicle frame -> world frame.
struct VehicleToWorld {
  Mat3 rotation = Mat3::Identity();
  Vec3 translation = Vec3::Zero();

  Vec3 apply(const Vec3& p) const { return rotation * p + translation; }
  double heading() const { return std::atan2(rotation(1, 0), rotation(0, 0)); }
};

inline Mat3 rot_about_down(double angle) {
  return Eigen::AngleAxisd(angle, Vec3::UnitZ()).toRotationMatrix();
}

inline VehicleToWorld pose_to_transform(const Pose3DoF& pose, const Anchor& anchor) {
  const Mat3 r_anchor = rot_about_down(anchor.heading);
  VehicleToWorld t;
  t.rotation = r_anchor * rot_about_down(pose.yaw);
  t.translation = Vec3(anchor.position.x(), anchor.position.y(), 0.0) +
                  r_anchor * Vec3(pose.longitudinal, pose.lateral, 0.0);
  return t;
}

/// Homogeneous viewing ray of a pixel, rotated into vehicle axes. Not normalized.
inline Vec3 inverse_project(const CameraIntrinsics& intr, const Mat3& rot_cam_to_vehicle,
                            const Vec2& pixel) {
  const Vec3 cam((pixel.x() - intr.cx) / intr.fx, (pixel.y() - intr.cy) / intr.fy, 1.0);
  return rot_cam_to_vehicle * cam;
}

/// Intersects a vehicle-oriented ray with the ground plane.
inline GroundPoint3D lift_to_ground(const Vec3& ray, const CameraExtrinsics& extr) {
  if (!(ray.z() > kRayEpsilon))
    throw HorizonError("lift_to_ground: ray does not hit the ground plane");
  const Vec3 p = (extr.cam_height / ray.z()) * ray + extr.trans_cam_to_vehicle;
  return {p.x(), p.y(), 0.0};
}

struct CameraPixel {
  Vec2 pixel = Vec2::Zero();
  double depth = 0.0;
  bool visible = false;
};

/// Perspective projection of a vehicle-frame point into a mounted camera.
inline CameraPixel project_to_camera(const GroundPoint3D& point, const CameraIntrinsics& intr,
                                     const CameraExtrinsics& extr) {
  const Vec3 cam = extr.rot_cam_to_vehicle.transpose() * (point.vec() - extr.trans_cam_to_vehicle);
  CameraPixel out;
  out.depth = cam.z();
  if (!(cam.z() > 0.0)) return out;
  out.pixel = {intr.fx * cam.x() / cam.z() + intr.cx, intr.fy * cam.y() / cam.z() + intr.cy};
  out.visible = intr.contains(out.pixel);
  return out;
}

struct SatellitePixel {
  Vec2 pixel = Vec2::Zero();
  bool valid = false;
};

inline SatellitePixel satellite_project(const SatelliteFrame& sat, const VehicleToWorld& transform,
                                        const GroundPoint3D& point) {
  const Vec3 w = transform.apply(point.vec());
  SatellitePixel out;
  out.pixel = sat.world_to_pixel(w.head<2>());
  out.valid = sat.contains(out.pixel);
  return out;
}

/// d(satellite pixel) / d(lateral, longitudinal, yaw).
inline Mat23 pose_jacobian(const SatelliteFrame& sat, const Pose3DoF& pose, const Anchor& anchor,
                           const GroundPoint3D& point) {
  const double ca = std::cos(anchor.heading), sa = std::sin(anchor.heading);
  const double cy = std::cos(pose.yaw), sy = std::sin(pose.yaw);
  const double inv_gamma = 1.0 / sat.gamma;
  // Planar part of R_anchor applied to the vehicle forward/right axes.
  const Vec2 forward(ca, sa);
  const Vec2 right(-sa, ca);
  // d/dyaw of R_yaw * p, then rotated by the anchor heading.
  const Vec2 dp(-sy * point.x - cy * point.y, cy * point.x - sy * point.y);
  const Vec2 dyaw(ca * dp.x() - sa * dp.y(), sa * dp.x() + ca * dp.y());
  Mat23 j;
  j.col(0) = right * inv_gamma;
  j.col(1) = forward * inv_gamma;
  j.col(2) = dyaw * inv_gamma;
  return j;
}

}  // namespace cvl
