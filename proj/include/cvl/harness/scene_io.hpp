#pragma once

// Scene directories and JSON sidecars:
//   satellite.png + satellite.json   parallel-projection tile and its metadata
//   cam_<name>.png, mask_<name>.png  ground views and optional on-ground masks
//   rig.json                         camera array
//   gt_pose.json                     optional ground truth relative to the anchor
// plus JSON-lines writers for optimizer traces and keypoint dumps.

#include <filesystem>
#include <fstream>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "json.hpp"

#include "cvl/geometry.hpp"
#include "cvl/harness/image_io.hpp"
#include "cvl/harness/scene.hpp"
#include "cvl/optimizer.hpp"
#include "cvl/vokd.hpp"

namespace cvl {

using Json = nlohmann::json;

namespace detail {

inline Json load_json(const std::filesystem::path& path) {
  std::ifstream f(path);
  if (!f) throw ConfigError("cannot open " + path.string());
  try {
    return Json::parse(f);
  } catch (const Json::exception& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

inline void save_json(const Json& j, const std::filesystem::path& path) {
  std::ofstream f(path, std::ios::trunc);
  if (!f) throw Error("cannot open " + path.string() + " for writing");
  f << j.dump(2) << '\n';
  if (!f) throw Error("failed writing " + path.string());
}

template <typename T>
T field(const Json& j, const char* key, const std::string& where) {
  if (!j.contains(key)) throw ConfigError(where + ": missing \"" + key + "\"");
  try {
    return j.at(key).get<T>();
  } catch (const Json::exception&) {
    throw ConfigError(where + ": \"" + key + "\" has the wrong type");
  }
}

}  // namespace detail

inline Json camera_to_json(const Camera& c) {
  const CameraIntrinsics& in = c.intrinsics;
  const CameraExtrinsics& ex = c.extrinsics;
  Json rot = Json::array();
  for (int r = 0; r < 3; ++r)
    for (int k = 0; k < 3; ++k) rot.push_back(ex.rot_cam_to_vehicle(r, k));
  return {{"name", c.name},
          {"fx", in.fx},
          {"fy", in.fy},
          {"cx", in.cx},
          {"cy", in.cy},
          {"width", in.width},
          {"height", in.height},
          {"rot_cam_to_vehicle", rot},
          {"trans_cam_to_vehicle",
           {ex.trans_cam_to_vehicle.x(), ex.trans_cam_to_vehicle.y(), ex.trans_cam_to_vehicle.z()}},
          {"cam_height", ex.cam_height}};
}

inline Camera camera_from_json(const Json& j, const std::string& where) {
  using detail::field;
  Camera c;
  c.name = field<std::string>(j, "name", where);
  c.intrinsics.fx = field<double>(j, "fx", where);
  c.intrinsics.fy = field<double>(j, "fy", where);
  c.intrinsics.cx = field<double>(j, "cx", where);
  c.intrinsics.cy = field<double>(j, "cy", where);
  c.intrinsics.width = field<int>(j, "width", where);
  c.intrinsics.height = field<int>(j, "height", where);
  const auto rot = field<std::vector<double>>(j, "rot_cam_to_vehicle", where);
  const auto trans = field<std::vector<double>>(j, "trans_cam_to_vehicle", where);
  if (rot.size() != 9) throw ConfigError(where + ": rot_cam_to_vehicle needs 9 numbers");
  if (trans.size() != 3) throw ConfigError(where + ": trans_cam_to_vehicle needs 3 numbers");
  for (int r = 0; r < 3; ++r)
    for (int k = 0; k < 3; ++k) c.extrinsics.rot_cam_to_vehicle(r, k) = rot[3 * r + k];
  c.extrinsics.trans_cam_to_vehicle = Vec3(trans[0], trans[1], trans[2]);
  c.extrinsics.cam_height = field<double>(j, "cam_height", where);
  c.intrinsics.validate();
  c.extrinsics.validate();
  return c;
}

inline Json rig_to_json(const std::vector<Camera>& rig) {
  Json arr = Json::array();
  for (const Camera& c : rig) arr.push_back(camera_to_json(c));
  return arr;
}

inline std::vector<Camera> rig_from_json(const Json& j) {
  if (!j.is_array() || j.empty()) throw ConfigError("rig: expected a non-empty array of cameras");
  std::vector<Camera> rig;
  for (std::size_t i = 0; i < j.size(); ++i)
    rig.push_back(camera_from_json(j[i], "rig camera " + std::to_string(i)));
  for (std::size_t i = 0; i < rig.size(); ++i)
    for (std::size_t k = i + 1; k < rig.size(); ++k)
      if (rig[i].name == rig[k].name) throw ConfigError("rig: duplicate camera name '" + rig[i].name + "'");
  return rig;
}

/// Satellite metadata together with the anchor it carries.
struct SatelliteMeta {
  SatelliteFrame frame;
  Anchor anchor;
};

inline Json satellite_to_json(const SatelliteMeta& m) {
  const SatelliteFrame& s = m.frame;
  Json j{{"center_u", s.center_u}, {"center_v", s.center_v}, {"gamma", s.gamma},
         {"width", s.width},       {"height", s.height}};
  if (s.geo) {
    j["latitude"] = s.geo->latitude;
    j["zoom"] = s.geo->zoom;
    j["scale"] = s.geo->scale;
  }
  const Vec2 px = s.world_to_pixel(m.anchor.position);
  j["anchor_heading_deg"] = rad2deg(m.anchor.heading);
  j["anchor_pixel"] = {px.x(), px.y()};
  return j;
}

/// `gamma` may be given directly or derived from latitude/zoom/scale; when
/// both are present they must agree.
inline SatelliteMeta satellite_from_json(const Json& j) {
  using detail::field;
  const std::string where = "satellite metadata";
  SatelliteMeta m;
  SatelliteFrame& s = m.frame;
  s.width = field<int>(j, "width", where);
  s.height = field<int>(j, "height", where);
  s.center_u = field<double>(j, "center_u", where);
  s.center_v = field<double>(j, "center_v", where);
  const bool has_geo = j.contains("latitude") || j.contains("zoom") || j.contains("scale");
  if (has_geo) {
    GeoTag tag;
    tag.latitude = field<double>(j, "latitude", where);
    tag.zoom = field<int>(j, "zoom", where);
    tag.scale = field<int>(j, "scale", where);
    s.geo = tag;
    try {
      s.gamma = meters_per_pixel(tag.latitude, tag.zoom, tag.scale);
    } catch (const std::domain_error& e) {
      throw ConfigError(where + ": " + e.what());
    }
  }
  if (j.contains("gamma")) {
    s.gamma = field<double>(j, "gamma", where);
  } else if (!has_geo) {
    throw ConfigError(where + ": need \"gamma\" or latitude/zoom/scale");
  }
  s.validate();
  const auto px = field<std::vector<double>>(j, "anchor_pixel", where);
  if (px.size() != 2) throw ConfigError(where + ": anchor_pixel needs 2 numbers");
  m.anchor = Anchor::from_pixel(s, Vec2(px[0], px[1]),
                                wrap_angle(deg2rad(field<double>(j, "anchor_heading_deg", where))));
  return m;
}

inline Json pose_to_json(const Pose3DoF& p) {
  return {{"lateral", p.lateral}, {"longitudinal", p.longitudinal}, {"yaw_deg", rad2deg(p.yaw)}};
}

inline Pose3DoF pose_from_json(const Json& j) {
  using detail::field;
  const std::string where = "pose";
  return Pose3DoF::make(field<double>(j, "lateral", where), field<double>(j, "longitudinal", where),
                        deg2rad(field<double>(j, "yaw_deg", where)));
}

/// Scene as stored on disk: everything needed to localize, plus optional truth.
struct SceneFiles {
  std::vector<Camera> rig;
  SatelliteMeta satellite;
  Grid satellite_image;
  std::vector<Grid> images;
  std::vector<Grid> masks;  // empty when no mask files exist
  std::optional<Pose3DoF> gt;
};

inline void write_scene(const Scene& scene, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  write_png16(scene.satellite_image, dir / "satellite.png");
  detail::save_json(satellite_to_json({scene.satellite, scene.anchor}), dir / "satellite.json");
  detail::save_json(rig_to_json(scene.spec.rig), dir / "rig.json");
  detail::save_json(pose_to_json(scene.gt), dir / "gt_pose.json");
  for (std::size_t i = 0; i < scene.spec.rig.size(); ++i) {
    const std::string& name = scene.spec.rig[i].name;
    write_png16(scene.images[i], dir / ("cam_" + name + ".png"));
    write_png16(scene.masks[i], dir / ("mask_" + name + ".png"));
  }
}

inline Grid to_gray(const Grid& g) {
  if (g.channels() == 1) return g;
  Grid out(g.height(), g.width(), 1);
  for (int r = 0; r < g.height(); ++r)
    for (int c = 0; c < g.width(); ++c) {
      double s = 0.0;
      for (int k = 0; k < g.channels(); ++k) s += g.at(r, c, k);
      out.at(r, c) = static_cast<float>(s / g.channels());
    }
  return out;
}

inline SceneFiles read_scene(const std::filesystem::path& dir) {
  if (!std::filesystem::is_directory(dir)) throw ConfigError("scene: " + dir.string() + " is not a directory");
  SceneFiles s;
  s.rig = rig_from_json(detail::load_json(dir / "rig.json"));
  s.satellite = satellite_from_json(detail::load_json(dir / "satellite.json"));
  s.satellite_image = read_png(dir / "satellite.png");
  if (s.satellite_image.width() != s.satellite.frame.width ||
      s.satellite_image.height() != s.satellite.frame.height)
    throw ConfigError("scene: satellite.png size differs from satellite.json");
  bool all_masks = true;
  for (const Camera& c : s.rig) {
    Grid img = read_png(dir / ("cam_" + c.name + ".png"));
    if (img.width() != c.intrinsics.width || img.height() != c.intrinsics.height)
      throw ConfigError("scene: cam_" + c.name + ".png size differs from the rig intrinsics");
    s.images.push_back(std::move(img));
    all_masks = all_masks && std::filesystem::exists(dir / ("mask_" + c.name + ".png"));
  }
  if (all_masks)
    for (const Camera& c : s.rig) {
      Grid m = to_gray(read_png(dir / ("mask_" + c.name + ".png")));
      if (m.width() != c.intrinsics.width || m.height() != c.intrinsics.height)
        throw ConfigError("scene: mask_" + c.name + ".png size differs from the rig intrinsics");
      s.masks.push_back(std::move(m));
    }
  if (std::filesystem::exists(dir / "gt_pose.json"))
    s.gt = pose_from_json(detail::load_json(dir / "gt_pose.json"));
  return s;
}

inline Json iteration_to_json(const IterationRecord& r) {
  return {{"level", r.level},
          {"iter", r.iter},
          {"lambda", r.lambda},
          {"cost", r.cost},
          {"pose", {r.pose.lateral, r.pose.longitudinal, rad2deg(r.pose.yaw)}},
          {"step_norm", r.step_norm},
          {"accepted", r.accepted}};
}

inline Json keypoint_to_json(const GroundKeypoint& k) {
  return {{"camera", k.camera_index}, {"u", k.pixel.x()},        {"v", k.pixel.y()},
          {"x", k.ground_point.x},    {"y", k.ground_point.y}, {"score", k.score}};
}

inline void write_keypoints_jsonl(const KeypointSet& set, std::ostream& out) {
  for (const GroundKeypoint& k : set.points) out << keypoint_to_json(k).dump() << '\n';
}

}  // namespace cvl
