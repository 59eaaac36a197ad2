#include <cmath>
#include <numbers>

#include <gtest/gtest.h>

#include "cvl/geometry.hpp"
#include "cvl/harness/rng.hpp"

namespace cvl {
namespace {

constexpr double kPi = std::numbers::pi;

TEST(WrapAngle, MapsIntoHalfOpenInterval) {
  EXPECT_DOUBLE_EQ(wrap_angle(0.0), 0.0);
  EXPECT_DOUBLE_EQ(wrap_angle(kPi), kPi);
  EXPECT_DOUBLE_EQ(wrap_angle(-kPi), kPi);
  EXPECT_NEAR(wrap_angle(3 * kPi / 2), -kPi / 2, 1e-15);
  EXPECT_NEAR(wrap_angle(-5 * kPi / 2), -kPi / 2, 1e-15);
}

TEST(Pose3DoF, StoresWrappedYawAndRejectsNonFinite) {
  const Pose3DoF p = Pose3DoF::make(1, 2, 2 * kPi + 0.25);
  EXPECT_NEAR(p.yaw, 0.25, 1e-15);
  EXPECT_THROW(Pose3DoF::make(NAN, 0, 0), std::invalid_argument);
  EXPECT_THROW(Pose3DoF::make(0, INFINITY, 0), std::invalid_argument);
}

TEST(Intrinsics, Validation) {
  CameraIntrinsics in{100, 100, 50, 40, 100, 80};
  EXPECT_NO_THROW(in.validate());
  in.cx = 100;
  EXPECT_THROW(in.validate(), ConfigError);
  in = {0, 100, 50, 40, 100, 80};
  EXPECT_THROW(in.validate(), ConfigError);
}

TEST(Extrinsics, Validation) {
  CameraExtrinsics ex;
  ex.rot_cam_to_vehicle = camera_mount_rotation(0.3, 0.1);
  ex.cam_height = 1.5;
  EXPECT_NO_THROW(ex.validate());
  ex.rot_cam_to_vehicle(0, 0) += 1e-6;
  EXPECT_THROW(ex.validate(), ConfigError);
  ex.rot_cam_to_vehicle = -Mat3::Identity();  // orthonormal, det -1
  EXPECT_THROW(ex.validate(), ConfigError);
  ex.rot_cam_to_vehicle = Mat3::Identity();
  ex.cam_height = 0.0;
  EXPECT_THROW(ex.validate(), ConfigError);
}

TEST(MetersPerPixel, EquatorValue) {
  EXPECT_NEAR(meters_per_pixel(0.0, 18, 2), 156543.03392 / 524288.0, 1e-15);
  EXPECT_NEAR(meters_per_pixel(0.0, 18, 2), 0.2985821, 1e-6);
}

TEST(MetersPerPixel, DatasetLatitudes) {
  EXPECT_NEAR(meters_per_pixel(42.30, 18, 2), 0.2209, 1e-4);
  EXPECT_NEAR(meters_per_pixel(42.30, 18, 2), 0.22, 0.005);
  EXPECT_NEAR(meters_per_pixel(49.01, 18, 2), 0.1959, 1e-4);
  EXPECT_NEAR(meters_per_pixel(49.01, 18, 2), 0.20, 0.005);
}

TEST(MetersPerPixel, MonotoneInLatitudeAndHalvesPerZoom) {
  double prev = meters_per_pixel(0.0, 18, 2);
  for (double lat = 0.5; lat < 90.0; lat += 0.5) {
    const double g = meters_per_pixel(lat, 18, 2);
    EXPECT_LT(g, prev);
    EXPECT_DOUBLE_EQ(meters_per_pixel(-lat, 18, 2), g);
    prev = g;
  }
  for (int z = 0; z < 22; ++z)
    EXPECT_NEAR(meters_per_pixel(37.0, z + 1, 1), 0.5 * meters_per_pixel(37.0, z, 1), 1e-12);
}

TEST(MetersPerPixel, DomainErrors) {
  EXPECT_THROW(meters_per_pixel(90.0, 18, 2), std::domain_error);
  EXPECT_THROW(meters_per_pixel(-91.0, 18, 2), std::domain_error);
  EXPECT_THROW(meters_per_pixel(10.0, -1, 2), std::domain_error);
  EXPECT_THROW(meters_per_pixel(10.0, 18, 0), std::domain_error);
}

TEST(SatelliteFrame, GammaMustMatchGeoTag) {
  SatelliteFrame s = SatelliteFrame::from_geo({42.3, 18, 2}, 1280, 1280);
  EXPECT_NO_THROW(s.validate());
  s.gamma *= 1 + 1e-8;
  EXPECT_THROW(s.validate(), ConfigError);
}

TEST(InverseProject, PrincipalRay) {
  const CameraIntrinsics in{1, 1, 0, 0, 10, 10};
  EXPECT_TRUE(inverse_project(in, Mat3::Identity(), {0, 0}).isApprox(Vec3(0, 0, 1)));
}

TEST(InverseProject, OffsetPixel) {
  const CameraIntrinsics in{2, 2, 3, 4, 10, 10};
  EXPECT_TRUE(inverse_project(in, Mat3::Identity(), {5, 6}).isApprox(Vec3(1, 1, 1)));
}

TEST(InverseProject, RotationAppliedAfterBackProjection) {
  const CameraIntrinsics in{2, 2, 3, 4, 10, 10};
  // 90 degrees about camera z, written out by hand.
  Mat3 r;
  r << 0, -1, 0, 1, 0, 0, 0, 0, 1;
  const Vec3 ray = inverse_project(in, r, {5, 6});
  EXPECT_NEAR(ray.x(), -1.0, 1e-15);
  EXPECT_NEAR(ray.y(), 1.0, 1e-15);
  EXPECT_NEAR(ray.z(), 1.0, 1e-15);
}

CameraExtrinsics extrinsics(double h, const Vec3& t) {
  CameraExtrinsics ex;
  ex.cam_height = h;
  ex.trans_cam_to_vehicle = t;
  return ex;
}

TEST(LiftToGround, Examples) {
  const auto a = lift_to_ground({0, 0, 1}, extrinsics(1.6, {0, 0, -1.6}));
  EXPECT_NEAR(a.x, 0, 1e-12);
  EXPECT_NEAR(a.y, 0, 1e-12);
  EXPECT_EQ(a.z, 0.0);
  const auto b = lift_to_ground({2, 0, 0.8}, extrinsics(1.6, {0, 0, -1.6}));
  EXPECT_NEAR(b.x, 4, 1e-12);
  EXPECT_NEAR(b.y, 0, 1e-12);
  const auto c = lift_to_ground({1, 1, 0.1}, extrinsics(1.6, {1, 0, -1.6}));
  EXPECT_NEAR(c.x, 17, 1e-12);
  EXPECT_NEAR(c.y, 16, 1e-12);
  EXPECT_EQ(c.z, 0.0);
}

TEST(LiftToGround, HorizonGuard) {
  const auto ex = extrinsics(1.6, {0, 0, -1.6});
  EXPECT_THROW(lift_to_ground({1, 0, kRayEpsilon}, ex), HorizonError);
  EXPECT_THROW(lift_to_ground({1, 0, -0.5}, ex), HorizonError);
  EXPECT_NO_THROW(lift_to_ground({1, 0, 2 * kRayEpsilon}, ex));
}

TEST(PoseToTransform, ZeroPoseIsAnchor) {
  const Anchor a{{3, -4}, 0.7};
  const VehicleToWorld t = pose_to_transform({}, a);
  EXPECT_TRUE(t.translation.isApprox(Vec3(3, -4, 0)));
  EXPECT_NEAR(t.heading(), 0.7, 1e-15);
}

TEST(PoseToTransform, LongitudinalTowardNorthMovesUpTheImage) {
  // Heading is measured from East toward South, so North is -pi/2.
  const Anchor a{{0, 0}, -kPi / 2};
  const VehicleToWorld t = pose_to_transform({0, 5, 0}, a);
  EXPECT_NEAR(t.translation.x(), 0, 1e-12);
  EXPECT_NEAR(t.translation.y(), -5, 1e-12);  // -v is North
}

TEST(PoseToTransform, LateralFacingEastMovesSouth) {
  const Anchor a{{0, 0}, 0.0};
  const VehicleToWorld t = pose_to_transform({2.5, 0, 0}, a);
  EXPECT_NEAR(t.translation.x(), 0, 1e-12);
  EXPECT_NEAR(t.translation.y(), 2.5, 1e-12);
}

TEST(PoseToTransform, HeadingAddsYaw) {
  const Anchor a{{1, 1}, 0.4};
  EXPECT_NEAR(pose_to_transform({0, 0, 0.3}, a).heading(), 0.7, 1e-12);
}

TEST(SatelliteProject, Examples) {
  SatelliteFrame s;
  s.gamma = 0.25;
  s.center_u = s.center_v = 640;
  s.width = s.height = 1280;
  const VehicleToWorld id;
  auto p = satellite_project(s, id, {0, 0, 0});
  EXPECT_TRUE(p.pixel.isApprox(Vec2(640, 640)));
  EXPECT_TRUE(p.valid);
  p = satellite_project(s, id, {10, -5, 0});
  EXPECT_NEAR(p.pixel.x(), 680, 1e-12);
  EXPECT_NEAR(p.pixel.y(), 620, 1e-12);
  p = satellite_project(s, id, {1000, 0, 0});
  EXPECT_FALSE(p.valid);
}

TEST(SatelliteProject, YawNinetyMatchesHandComposition) {
  SatelliteFrame s;
  s.gamma = 0.5;
  s.center_u = s.center_v = 100;
  s.width = s.height = 200;
  const GroundPoint3D p{4, 1, 0};
  const auto px = satellite_project(s, pose_to_transform({0, 0, kPi / 2}, Anchor{}), p);
  // R(90 deg about down): (x, y) -> (-y, x).
  EXPECT_NEAR(px.pixel.x(), -1 / 0.5 + 100, 1e-12);
  EXPECT_NEAR(px.pixel.y(), 4 / 0.5 + 100, 1e-12);
}

TEST(SatelliteProject, TranslationEquivariance) {
  Rng rng(5);
  SatelliteFrame s;
  s.gamma = 0.3;
  s.center_u = s.center_v = 500;
  s.width = s.height = 1000;
  for (int i = 0; i < 100; ++i) {
    const Anchor a{{rng.uniform(-10, 10), rng.uniform(-10, 10)}, rng.uniform(-kPi, kPi)};
    const Pose3DoF pose = Pose3DoF::make(rng.uniform(-5, 5), rng.uniform(-5, 5), rng.uniform(-1, 1));
    const double dl = rng.uniform(-3, 3), dn = rng.uniform(-3, 3);
    const GroundPoint3D p{rng.uniform(-20, 20), rng.uniform(-20, 20), 0};
    const Vec2 before = satellite_project(s, pose_to_transform(pose, a), p).pixel;
    const Vec2 after = satellite_project(s, pose_to_transform(pose.plus({dl, dn, 0}), a), p).pixel;
    const Vec2 expected_shift = rot_about_down(a.heading).topLeftCorner<2, 2>() * Vec2(dn, dl) / s.gamma;
    EXPECT_LT((after - before - expected_shift).norm(), 1e-9);
  }
}

TEST(PoseJacobian, AxisAlignedColumns) {
  SatelliteFrame s;
  s.gamma = 0.2;
  const Mat23 j = pose_jacobian(s, {}, Anchor{}, {3, 2, 0});
  EXPECT_NEAR(j(0, 1), 5.0, 1e-12);
  EXPECT_NEAR(j(1, 1), 0.0, 1e-12);
  EXPECT_NEAR(j(0, 0), 0.0, 1e-12);
  EXPECT_NEAR(j(1, 0), 5.0, 1e-12);
}

TEST(PoseJacobian, RotationCenterHasZeroYawColumn) {
  SatelliteFrame s;
  s.gamma = 0.2;
  const Mat23 j = pose_jacobian(s, Pose3DoF::make(1, 2, 0.4), Anchor{{3, 4}, 1.0}, {0, 0, 0});
  EXPECT_EQ(j.col(2).norm(), 0.0);
}

TEST(PoseJacobian, MatchesFiniteDifferences) {
  Rng rng(11);
  SatelliteFrame s;
  s.width = s.height = 4096;
  s.center_u = s.center_v = 2048;
  for (int i = 0; i < 200; ++i) {
    s.gamma = rng.uniform(0.05, 0.5);
    const Anchor a{{rng.uniform(-20, 20), rng.uniform(-20, 20)}, rng.uniform(-kPi, kPi)};
    const Pose3DoF pose = Pose3DoF::make(rng.uniform(-5, 5), rng.uniform(-5, 5), rng.uniform(-kPi, kPi));
    const GroundPoint3D p{rng.uniform(-30, 30), rng.uniform(-30, 30), 0};
    const Mat23 j = pose_jacobian(s, pose, a, p);
    const double steps[3] = {1e-4, 1e-4, 1e-5};
    for (int k = 0; k < 3; ++k) {
      Vec3 d = Vec3::Zero();
      d[k] = steps[k];
      const Vec2 fd = (satellite_project(s, pose_to_transform(pose.plus(d), a), p).pixel -
                       satellite_project(s, pose_to_transform(pose.plus(-d), a), p).pixel) /
                      (2 * steps[k]);
      const double scale = std::max(fd.norm(), 1e-9);
      EXPECT_LE((j.col(k) - fd).norm() / scale, 1e-5) << "config " << i << " column " << k;
    }
  }
}

TEST(ProjectToCamera, RoundTripAndBehind) {
  const CameraIntrinsics in{300, 300, 320, 240, 640, 480};
  CameraExtrinsics ex;
  ex.rot_cam_to_vehicle = camera_mount_rotation(0.2, 0.1);
  ex.cam_height = 1.5;
  ex.trans_cam_to_vehicle = {0.5, 0.1, -1.5};
  const Vec2 px(400, 300);
  const GroundPoint3D g = lift_to_ground(inverse_project(in, ex.rot_cam_to_vehicle, px), ex);
  const CameraPixel back = project_to_camera(g, in, ex);
  EXPECT_TRUE(back.visible);
  EXPECT_LT((back.pixel - px).norm(), 1e-9);
  const CameraPixel behind = project_to_camera({-20, 0, 0}, in, ex);
  EXPECT_FALSE(behind.visible);
  EXPECT_LT(behind.depth, 0.0);
}

TEST(ProjectToCamera, RandomRoundTrip) {
  Rng rng(3);
  for (int i = 0; i < 2000; ++i) {
    CameraIntrinsics in;
    in.width = 640;
    in.height = 480;
    in.fx = rng.uniform(200, 800);
    in.fy = in.fx;
    in.cx = rng.uniform(300, 340);
    in.cy = rng.uniform(220, 260);
    CameraExtrinsics ex;
    ex.rot_cam_to_vehicle = camera_mount_rotation(rng.uniform(-kPi, kPi), rng.uniform(0, 0.3));
    ex.cam_height = rng.uniform(1, 3);
    ex.trans_cam_to_vehicle = {rng.uniform(-1, 1), rng.uniform(-1, 1), -ex.cam_height};
    const Vec2 px(rng.uniform(0, in.width), rng.uniform(0, in.height));
    const Vec3 ray = inverse_project(in, ex.rot_cam_to_vehicle, px);
    if (!(ray.z() > kRayEpsilon)) continue;
    const GroundPoint3D g = lift_to_ground(ray, ex);
    EXPECT_EQ(g.z, 0.0);
    EXPECT_LE((project_to_camera(g, in, ex).pixel - px).norm(), 1e-6);
  }
}

}  // namespace
}  // namespace cvl
