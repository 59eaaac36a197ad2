#pragma once

// Central finite-difference checks of every analytic derivative used by the
// optimizer, over seeded random cameras, poses, points and scales.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <vector>

#include "cvl/geometry.hpp"
#include "cvl/grid.hpp"
#include "cvl/harness/rng.hpp"
#include "cvl/optimizer.hpp"

namespace cvl {

struct GradcheckReport {
  int configurations = 0;
  double pose_jacobian = 0.0;      // max relative error, d(satellite pixel)/d(pose)
  double bilinear_gradient = 0.0;  // spatial_gradient vs differences of bilinear_lookup
  double cost_chain = 0.0;         // directional derivative of the weighted cost vs 2 J^T W r
  double reprojection = 0.0;       // reprojection_loss gradient
  double seconds = 0.0;

  double worst() const {
    return std::max({pose_jacobian, bilinear_gradient, cost_chain, reprojection});
  }
};

namespace detail {

inline double rel_error(double analytic, double numeric, double floor) {
  return std::abs(analytic - numeric) / std::max({std::abs(analytic), std::abs(numeric), floor});
}

/// Random camera with a random mount, plus a ground point it sees below the horizon.
inline GroundPoint3D random_ground_point(Rng& rng) {
  CameraIntrinsics in;
  in.width = static_cast<int>(rng.uniform(200, 1200));
  in.height = static_cast<int>(rng.uniform(150, 900));
  in.fx = rng.uniform(100, 1000);
  in.fy = in.fx * rng.uniform(0.9, 1.1);
  in.cx = in.width * rng.uniform(0.4, 0.6);
  in.cy = in.height * rng.uniform(0.4, 0.6);
  CameraExtrinsics ex;
  const Mat3 roll = Eigen::AngleAxisd(rng.uniform(-0.1, 0.1), Vec3::UnitZ()).toRotationMatrix();
  ex.rot_cam_to_vehicle =
      camera_mount_rotation(rng.uniform(-std::numbers::pi, std::numbers::pi), rng.uniform(0.0, 0.35)) * roll;
  ex.cam_height = rng.uniform(1.0, 3.0);
  ex.trans_cam_to_vehicle = Vec3(rng.uniform(-2, 2), rng.uniform(-1, 1), -ex.cam_height);
  for (;;) {
    const Vec2 px(rng.uniform(0, in.width), rng.uniform(0, in.height));
    const Vec3 ray = inverse_project(in, ex.rot_cam_to_vehicle, px);
    if (ray.z() > 0.05) return lift_to_ground(ray, ex);
  }
}

inline Pose3DoF random_pose(Rng& rng) {
  return Pose3DoF::make(rng.uniform(-10, 10), rng.uniform(-10, 10),
                        rng.uniform(-std::numbers::pi, std::numbers::pi));
}

inline Anchor random_anchor(Rng& rng) {
  return {Vec2(rng.uniform(-20, 20), rng.uniform(-20, 20)),
          rng.uniform(-std::numbers::pi, std::numbers::pi)};
}

inline bool near_cell_edge(const Vec2& p, double margin) {
  const auto frac = [](double x) { return x - std::floor(x); };
  const double fu = frac(p.x()), fv = frac(p.y());
  return fu < margin || fu > 1.0 - margin || fv < margin || fv > 1.0 - margin;
}

}  // namespace detail

/// `configurations` seeded draws per check; step is the central-difference step.
inline GradcheckReport run_gradcheck(int configurations = 500, std::uint64_t seed = 1,
                                     double step = 1e-5) {
  const auto t0 = std::chrono::steady_clock::now();
  GradcheckReport rep;
  rep.configurations = configurations;
  Rng rng(seed);

  for (int n = 0; n < configurations; ++n) {
    // Pose Jacobian of the satellite projection.
    {
      SatelliteFrame sat;
      sat.gamma = rng.uniform(0.05, 0.5);
      sat.width = sat.height = 4096;
      sat.center_u = sat.center_v = 2048;
      const GroundPoint3D p = detail::random_ground_point(rng);
      const Pose3DoF pose = detail::random_pose(rng);
      const Anchor anchor = detail::random_anchor(rng);
      const Mat23 j = pose_jacobian(sat, pose, anchor, p);
      Mat23 fd;
      for (int k = 0; k < 3; ++k) {
        Vec3 d = Vec3::Zero();
        d[k] = step;
        const Vec2 hi = satellite_project(sat, pose_to_transform(pose.plus(d), anchor), p).pixel;
        const Vec2 lo = satellite_project(sat, pose_to_transform(pose.plus(-d), anchor), p).pixel;
        fd.col(k) = (hi - lo) / (2 * step);
      }
      const double scale = fd.cwiseAbs().maxCoeff();
      for (int r = 0; r < 2; ++r)
        for (int k = 0; k < 3; ++k)
          rep.pose_jacobian =
              std::max(rep.pose_jacobian, std::abs(j(r, k) - fd(r, k)) / std::max(scale, 1e-12));
    }

    // Spatial gradient of the bilinear surface.
    {
      Grid g(8, 8, 2);
      for (float& x : g.data()) x = static_cast<float>(rng.uniform(-1, 1));
      Vec2 at;
      do at = Vec2(rng.uniform(0, 7), rng.uniform(0, 7));
      while (detail::near_cell_edge(at, 1e-3));
      const GradientResult an = spatial_gradient(g, at);
      for (int axis = 0; axis < 2; ++axis) {
        Vec2 d = Vec2::Zero();
        d[axis] = step;
        const Eigen::VectorXd fd =
            (bilinear_lookup(g, at + d).value - bilinear_lookup(g, at - d).value) / (2 * step);
        for (int ch = 0; ch < 2; ++ch)
          rep.bilinear_gradient =
              std::max(rep.bilinear_gradient, detail::rel_error(an.gradient(axis, ch), fd[ch], 1e-6));
      }
    }

    // Full residual chain: weighted robust cost along a random pose direction.
    for (;;) {
      const int size = 256;
      SatelliteFrame sat;
      sat.gamma = rng.uniform(0.3, 0.5);
      sat.width = sat.height = size;
      sat.center_u = sat.center_v = size / 2.0;
      PyramidLevel lv{Grid(size, size, 3), Grid(size, size, 1, 1.0f), Grid(size, size, 1, 1.0f)};
      for (float& x : lv.features.data()) x = static_cast<float>(rng.uniform(0, 1));
      const SatelliteView view(sat, FeaturePyramid{{lv}});
      LMConfig cfg;
      cfg.levels = 1;
      cfg.robust.scale = rng.uniform(0.2, 1.0);
      const Anchor anchor{Vec2(rng.uniform(-5, 5), rng.uniform(-5, 5)),
                          rng.uniform(-std::numbers::pi, std::numbers::pi)};
      const Pose3DoF pose = Pose3DoF::make(rng.uniform(-2, 2), rng.uniform(-2, 2), rng.uniform(-0.3, 0.3));
      std::vector<FusedPoint> pts;
      for (int i = 0; i < 8; ++i) {
        FusedPoint fp;
        fp.ground_point = {rng.uniform(-20, 20), rng.uniform(-20, 20), 0.0};
        fp.weight = rng.uniform(0.1, 1.0);
        fp.feature = Eigen::Vector3d(rng.uniform(0, 1), rng.uniform(0, 1), rng.uniform(0, 1));
        pts.push_back(fp);
      }
      const Vec3 dir = Vec3(rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-0.05, 0.05));
      // Skip draws whose samples would cross a bilinear cell edge inside the stencil.
      bool straddles = false;
      for (double s : {-step, step})
        for (const FusedPoint& fp : pts) {
          const Vec2 at = satellite_project(sat, pose_to_transform(pose.plus(s * dir), anchor),
                                            fp.ground_point).pixel;
          straddles = straddles || detail::near_cell_edge(at, 1e-3);
        }
      if (straddles) continue;
      const ResidualSystem sys = build_system(pose, pts, view, anchor, 0, cfg);
      const double hi = build_system(pose.plus(step * dir), pts, view, anchor, 0, cfg, false).cost;
      const double lo = build_system(pose.plus(-step * dir), pts, view, anchor, 0, cfg, false).cost;
      // d/dpose sum w rho(|r|^2) = 2 sum w rho' J^T r.
      const double analytic = 2.0 * sys.gradient.dot(dir);
      rep.cost_chain = std::max(rep.cost_chain, detail::rel_error(analytic, (hi - lo) / (2 * step), 1e-6));
      break;
    }

    // Reprojection loss gradient.
    {
      SatelliteFrame sat;
      sat.gamma = rng.uniform(0.05, 0.5);
      sat.width = sat.height = 4096;
      sat.center_u = sat.center_v = 2048;
      std::vector<GroundPoint3D> pts;
      for (int i = 0; i < 5; ++i) pts.push_back(detail::random_ground_point(rng));
      const Anchor anchor = detail::random_anchor(rng);
      const Pose3DoF gt = detail::random_pose(rng);
      const Pose3DoF pred = gt.plus(Vec3(rng.uniform(-3, 3), rng.uniform(-3, 3), rng.uniform(-0.3, 0.3)));
      Vec3 g;
      reprojection_loss(pred, gt, pts, sat, anchor, &g);
      for (int k = 0; k < 3; ++k) {
        Vec3 d = Vec3::Zero();
        d[k] = step;
        const double fd = (reprojection_loss(pred.plus(d), gt, pts, sat, anchor) -
                           reprojection_loss(pred.plus(-d), gt, pts, sat, anchor)) /
                          (2 * step);
        rep.reprojection = std::max(rep.reprojection, detail::rel_error(g[k], fd, 1e-3));
      }
    }
  }
  rep.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return rep;
}

}  // namespace cvl
