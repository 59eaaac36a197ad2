#pragma once

// Procedural test scenes: a planar texture seen from above (satellite) and
// from vehicle cameras (inverse warp through the ground-plane homography),
// with optional off-ground cylinders that only the ground cameras see.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

#include "cvl/geometry.hpp"
#include "cvl/grid.hpp"
#include "cvl/harness/rng.hpp"

namespace cvl {

enum class TextureKind { kBlobs, kChecker, kRoadmarks };

inline TextureKind parse_texture_kind(const std::string& s) {
  if (s == "blobs") return TextureKind::kBlobs;
  if (s == "checker") return TextureKind::kChecker;
  if (s == "roadmarks") return TextureKind::kRoadmarks;
  throw std::invalid_argument("unknown texture '" + s + "' (expected blobs|checker|roadmarks)");
}

inline std::string to_string(TextureKind k) {
  switch (k) {
    case TextureKind::kBlobs: return "blobs";
    case TextureKind::kChecker: return "checker";
    case TextureKind::kRoadmarks: return "roadmarks";
  }
  return "blobs";
}

/// Vehicle camera model used by the synthetic rigs.
struct RigCameraSpec {
  std::string name;
  double yaw_deg = 0.0;  // mount yaw, positive toward the right
  double pitch_down_deg = 5.0;
  Vec3 offset{0.0, 0.0, 0.0};  // mount position in the vehicle frame (z filled from height)
};

inline Camera make_camera(const RigCameraSpec& s, int width = 320, int height = 160,
                          double focal = 160.0, double cam_height = 1.6) {
  Camera c;
  c.name = s.name;
  c.intrinsics = {focal, focal, width / 2.0, height / 2.0, width, height};
  c.extrinsics.rot_cam_to_vehicle = camera_mount_rotation(deg2rad(s.yaw_deg), deg2rad(s.pitch_down_deg));
  c.extrinsics.trans_cam_to_vehicle = Vec3(s.offset.x(), s.offset.y(), -cam_height);
  c.extrinsics.cam_height = cam_height;
  return c;
}

inline std::vector<Camera> front_rig() { return {make_camera({"front", 0.0, 5.0, {1.0, 0.0, 0.0}})}; }

inline std::vector<Camera> quad_rig() {
  return {make_camera({"front", 0.0, 5.0, {1.0, 0.0, 0.0}}),
          make_camera({"left", -90.0, 5.0, {0.0, -0.8, 0.0}}),
          make_camera({"right", 90.0, 5.0, {0.0, 0.8, 0.0}}),
          make_camera({"rear", 180.0, 5.0, {-1.0, 0.0, 0.0}})};
}

inline std::vector<Camera> rig_by_name(const std::string& name) {
  if (name == "front" || name == "1") return front_rig();
  if (name == "quad" || name == "4cams" || name == "4") return quad_rig();
  throw std::invalid_argument("unknown rig '" + name + "' (expected front|4cams)");
}

struct SceneSpec {
  std::uint64_t seed = 0;
  TextureKind texture = TextureKind::kBlobs;
  int satellite_size = 512;  // pixels, square
  double gamma = 0.2;        // meters per pixel
  std::vector<Camera> rig = front_rig();
  int distractors = 0;
  double distractor_radius_min = 0.3, distractor_radius_max = 1.0;  // meters
  double distractor_height_min = 1.0, distractor_height_max = 2.5;  // meters
  int ground_supersample = 3;  // s x s samples per ground pixel
  double anchor_jitter = 5.0;  // meters; anchor placed within this of the map center
};

/// Upright cylinder standing on the ground plane (world frame).
struct Distractor {
  Vec2 center = Vec2::Zero();
  double radius = 0.5;
  double height = 1.5;
  double shade = 0.5;
};

struct Scene {
  SceneSpec spec;
  SatelliteFrame satellite;
  Grid satellite_image;       // h x w x 1 in [0,1]
  std::vector<Grid> images;   // per camera, h x w x 1
  std::vector<Grid> masks;    // per camera on-ground truth, 1 on the plane
  std::vector<Distractor> distractors;
  Anchor anchor;              // placement of the ground-truth vehicle
  Pose3DoF gt;                // relative to `anchor`
};

namespace detail {

inline void splat_blob(Grid& g, double u0, double v0, double sigma_px, double amp) {
  const int r = static_cast<int>(std::ceil(3.0 * sigma_px));
  const int cu = static_cast<int>(std::lround(u0)), cv = static_cast<int>(std::lround(v0));
  const double inv = 1.0 / (2.0 * sigma_px * sigma_px);
  for (int v = std::max(cv - r, 0); v <= std::min(cv + r, g.height() - 1); ++v)
    for (int u = std::max(cu - r, 0); u <= std::min(cu + r, g.width() - 1); ++u) {
      const double d2 = (u - u0) * (u - u0) + (v - v0) * (v - v0);
      g.at(v, u) += static_cast<float>(amp * std::exp(-d2 * inv));
    }
}

inline void add_blob_layers(Grid& g, Rng& rng, double gamma) {
  const double area_m2 = g.width() * g.height() * gamma * gamma;
  struct Layer { double sigma_m, amp, density; };
  // density: blobs per sigma^2 of area
  for (const Layer& layer : {Layer{8.0, 1.0, 0.35}, Layer{4.0, 0.5, 0.35}, Layer{2.0, 0.2, 0.3}}) {
    const int n = static_cast<int>(area_m2 * layer.density / (layer.sigma_m * layer.sigma_m));
    const double s_px = layer.sigma_m / gamma;
    for (int i = 0; i < n; ++i) {
      const double u = rng.uniform(-3 * s_px, g.width() + 3 * s_px);
      const double v = rng.uniform(-3 * s_px, g.height() + 3 * s_px);
      const double a = layer.amp * rng.uniform(-1.0, 1.0);
      splat_blob(g, u, v, s_px * rng.uniform(0.7, 1.3), a);
    }
  }
}

inline void add_roadmarks(Grid& g, Rng& rng, double gamma) {
  // A few straight painted stripes at random orientations and dashed lanes.
  const int stripes = 6;
  for (int s = 0; s < stripes; ++s) {
    const double angle = rng.uniform(0.0, std::numbers::pi);
    const Vec2 dir(std::cos(angle), std::sin(angle));
    const Vec2 normal(-dir.y(), dir.x());
    const Vec2 through(rng.uniform(0, g.width()), rng.uniform(0, g.height()));
    const double half_w = rng.uniform(0.08, 0.2) / gamma;
    const double dash = rng.uniform(2.0, 5.0) / gamma;
    const bool dashed = rng.uniform() < 0.5;
    for (int v = 0; v < g.height(); ++v)
      for (int u = 0; u < g.width(); ++u) {
        const Vec2 d = Vec2(u, v) - through;
        const double across = std::abs(d.dot(normal));
        if (across > half_w + 1.0) continue;
        if (dashed && std::fmod(std::abs(d.dot(dir)), 2.0 * dash) > dash) continue;
        const double cover = std::clamp(half_w + 0.5 - across, 0.0, 1.0);
        g.at(v, u) += static_cast<float>(1.5 * cover);
      }
  }
}

inline void normalize_unit(Grid& g) {
  const auto [lo, hi] = std::minmax_element(g.data().begin(), g.data().end());
  const float min = *lo, range = *hi - *lo;
  for (float& x : g.data()) x = range > 0 ? 0.05f + 0.9f * (x - min) / range : 0.5f;
}

inline Grid make_texture(const SceneSpec& spec, Rng& rng) {
  Grid g(spec.satellite_size, spec.satellite_size, 1, 0.0f);
  switch (spec.texture) {
    case TextureKind::kChecker: {
      const double cell = 2.0 / spec.gamma;
      for (int v = 0; v < g.height(); ++v)
        for (int u = 0; u < g.width(); ++u)
          g.at(v, u) = ((static_cast<int>(u / cell) + static_cast<int>(v / cell)) & 1) ? 1.0f : 0.0f;
      break;
    }
    case TextureKind::kRoadmarks:
      add_blob_layers(g, rng, spec.gamma);
      add_roadmarks(g, rng, spec.gamma);
      break;
    case TextureKind::kBlobs:
      add_blob_layers(g, rng, spec.gamma);
      break;
  }
  normalize_unit(g);
  return g;
}

/// Nearest hit distance along a world ray with an upright cylinder, if any.
inline std::optional<double> hit_cylinder(const Vec3& origin, const Vec3& dir, const Distractor& d) {
  const Vec2 o = origin.head<2>() - d.center;
  const Vec2 k = dir.head<2>();
  const double a = k.squaredNorm();
  if (a <= 0.0) return std::nullopt;
  const double b = o.dot(k);
  const double c = o.squaredNorm() - d.radius * d.radius;
  const double disc = b * b - a * c;
  if (disc < 0.0) return std::nullopt;
  const double t = (-b - std::sqrt(disc)) / a;
  if (t <= 0.0) return std::nullopt;
  const double z = origin.z() + t * dir.z();
  if (z > 0.0 || z < -d.height) return std::nullopt;
  return t;
}

}  // namespace detail

inline void validate_rig(const std::vector<Camera>& rig) {
  if (rig.empty()) throw ConfigError("rig: no cameras");
  for (const Camera& c : rig) {
    c.intrinsics.validate();
    c.extrinsics.validate();
    if (std::abs(c.extrinsics.trans_cam_to_vehicle.z() + c.extrinsics.cam_height) > 1e-6)
      throw ConfigError("rig: camera '" + c.name + "' position does not match its height above ground");
  }
}

/// Renders one camera of the scene from the ground-truth pose.
inline void render_camera(const Scene& scene, const Camera& cam, Grid& image, Grid& mask) {
  const CameraIntrinsics& in = cam.intrinsics;
  const CameraExtrinsics& ex = cam.extrinsics;
  const VehicleToWorld gt = pose_to_transform(scene.gt, scene.anchor);
  const Vec3 cam_world = gt.apply(ex.trans_cam_to_vehicle);
  const int s = std::max(scene.spec.ground_supersample, 1);
  constexpr float kSky = 0.9f;
  image = Grid(in.height, in.width, 1);
  mask = Grid(in.height, in.width, 1);
  for (int r = 0; r < in.height; ++r) {
    for (int c = 0; c < in.width; ++c) {
      double acc = 0.0, ground = 0.0;
      for (int sy = 0; sy < s; ++sy)
        for (int sx = 0; sx < s; ++sx) {
          const Vec2 px(c + (sx + 0.5) / s - 0.5, r + (sy + 0.5) / s - 0.5);
          const Vec3 ray = inverse_project(in, ex.rot_cam_to_vehicle, px);
          const Vec3 ray_world = gt.rotation * ray;
          double t_ground = std::numeric_limits<double>::infinity();
          if (ray.z() > kRayEpsilon) t_ground = ex.cam_height / ray.z();
          double t_hit = t_ground;
          const Distractor* hit = nullptr;
          for (const Distractor& d : scene.distractors) {
            const auto t = detail::hit_cylinder(cam_world, ray_world, d);
            if (t && *t < t_hit) {
              t_hit = *t;
              hit = &d;
            }
          }
          if (hit) {
            const Vec3 p = cam_world + t_hit * ray_world;
            const double stripe = std::fmod(std::abs(p.z()) * 4.0, 2.0) < 1.0 ? 0.15 : -0.15;
            acc += std::clamp(hit->shade + stripe, 0.0, 1.0);
          } else if (std::isfinite(t_ground)) {
            const GroundPoint3D gp = lift_to_ground(ray, ex);
            const Vec3 w = gt.apply(gp.vec());
            const Vec2 sp = scene.satellite.world_to_pixel(w.head<2>());
            const Vec2 clamped(std::clamp(sp.x(), 0.0, scene.satellite.width - 1.0),
                               std::clamp(sp.y(), 0.0, scene.satellite.height - 1.0));
            acc += bilinear_scalar(scene.satellite_image, clamped);
            ground += 1.0;
          } else {
            acc += kSky;
          }
        }
      image.at(r, c) = static_cast<float>(acc / (s * s));
      mask.at(r, c) = static_cast<float>(ground / (s * s));
    }
  }
}

inline Scene synth_scene(const SceneSpec& spec) {
  if (spec.satellite_size < 16) throw ConfigError("scene: satellite too small");
  if (!(spec.gamma > 0.0)) throw ConfigError("scene: gamma must be positive");
  validate_rig(spec.rig);

  Rng rng(spec.seed);
  Scene scene;
  scene.spec = spec;
  scene.satellite.width = scene.satellite.height = spec.satellite_size;
  scene.satellite.center_u = scene.satellite.center_v = spec.satellite_size / 2.0;
  scene.satellite.gamma = spec.gamma;
  scene.satellite_image = detail::make_texture(spec, rng);

  scene.anchor.position = {rng.uniform(-spec.anchor_jitter, spec.anchor_jitter),
                           rng.uniform(-spec.anchor_jitter, spec.anchor_jitter)};
  scene.anchor.heading = wrap_angle(rng.uniform(-std::numbers::pi, std::numbers::pi));
  scene.gt = Pose3DoF{};

  // Distractors sit around the vehicle, 4-20 m away, clear of the body.
  const VehicleToWorld gt = pose_to_transform(scene.gt, scene.anchor);
  for (int i = 0; i < spec.distractors; ++i) {
    const double bearing = rng.uniform(-std::numbers::pi, std::numbers::pi);
    const double range = rng.uniform(4.0, 20.0);
    Distractor d;
    d.center = gt.apply(Vec3(range * std::cos(bearing), range * std::sin(bearing), 0.0)).head<2>();
    d.radius = rng.uniform(spec.distractor_radius_min, spec.distractor_radius_max);
    d.height = rng.uniform(spec.distractor_height_min, spec.distractor_height_max);
    d.shade = rng.uniform(0.1, 0.9);
    scene.distractors.push_back(d);
  }

  scene.images.resize(spec.rig.size());
  scene.masks.resize(spec.rig.size());
  for (std::size_t i = 0; i < spec.rig.size(); ++i)
    render_camera(scene, spec.rig[i], scene.images[i], scene.masks[i]);
  return scene;
}

}  // namespace cvl
