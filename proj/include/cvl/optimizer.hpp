#pragma once

// Feature-metric Levenberg-Marquardt over the 3-DoF pose.
//
// For every fused keypoint p the satellite feature map is sampled where p
// lands under the current pose:
//   r[p] = F_sat(pi(p; pose)) - F_ground[p]
//   w[p] = (V (x) O)_sat(pi(p; pose)) * w_ground[p]
//   J[p] = dF_sat/dpixel * dpixel/dpose
// and the damped normal equations (H + lambda diag H) delta = -J^T W r are
// solved once per iteration, coarse level first.

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>

#include "cvl/fusion.hpp"
#include "cvl/geometry.hpp"
#include "cvl/grid.hpp"
#include "cvl/pyramid.hpp"

namespace cvl {

enum class RobustKind { kL2, kHuber, kCauchy };

struct RobustCost {
  RobustKind kind = RobustKind::kHuber;
  double scale = 1.0;  // Huber threshold / Cauchy scale, in feature units
};

inline RobustKind parse_robust_kind(const std::string& s) {
  if (s == "l2") return RobustKind::kL2;
  if (s == "huber") return RobustKind::kHuber;
  if (s == "cauchy") return RobustKind::kCauchy;
  throw std::invalid_argument("unknown robust cost '" + s + "' (expected l2|huber|cauchy)");
}

struct RobustValue {
  double cost = 0.0;    // rho(s^2)
  double weight = 1.0;  // d rho / d(s^2)
};

inline RobustValue robust_weight(double squared_norm, const RobustCost& cfg) {
  const double s2 = std::max(squared_norm, 0.0);
  const double k = cfg.scale;
  switch (cfg.kind) {
    case RobustKind::kL2:
      return {s2, 1.0};
    case RobustKind::kHuber: {
      const double s = std::sqrt(s2);
      if (s <= k) return {s2, 1.0};
      return {k * (2.0 * s - k), k / s};
    }
    case RobustKind::kCauchy: {
      const double k2 = k * k;
      return {k2 * std::log1p(s2 / k2), 1.0 / (1.0 + s2 / k2)};
    }
  }
  return {s2, 1.0};
}

struct LMConfig {
  int levels = 3;
  int iters_per_level = 20;
  double lambda_init = 0.01;
  double lambda_down = 0.1;
  double lambda_up = 10.0;
  double lambda_min = 1e-6;
  double lambda_max = 1e4;
  RobustCost robust;
  bool irls_weights = true;  // fold rho' into W
  double alpha = 10.0;       // triplet-loss sharpness
  int residual_channels = 0;  // leading feature channels compared; 0 = all
  bool satellite_confidence = true;  // include (V (x) O)_sat in W
  bool early_stop = true;
  Vec3 stop_step{1e-4, 1e-4, 1e-6};  // lateral m, longitudinal m, yaw rad
  FusionStrategy fusion = FusionStrategy::kMax;
  std::vector<int> level_order;  // empty = coarse -> fine

  void validate() const {
    if (levels < 1 || iters_per_level < 1) throw ConfigError("LMConfig: levels and iterations must be >= 1");
    if (!(lambda_init > 0.0) || !(lambda_min > 0.0) || !(lambda_max >= lambda_min))
      throw ConfigError("LMConfig: damping must be positive");
    if (residual_channels < 0) throw ConfigError("LMConfig: residual_channels must be >= 0");
  }

  std::vector<int> schedule() const {
    if (!level_order.empty()) return level_order;
    std::vector<int> s(levels);
    for (int l = 0; l < levels; ++l) s[l] = l;
    return s;
  }
};

/// Satellite frame, its pyramid and cached V (x) O maps.
class SatelliteView {
 public:
  SatelliteView(SatelliteFrame frame, FeaturePyramid pyramid)
      : frame_(frame), pyramid_(std::move(pyramid)) {
    frame_.validate();
    pyramid_.validate();
    for (const PyramidLevel& lv : pyramid_.levels) confidence_.push_back(confidence_product(lv));
  }

  const SatelliteFrame& frame() const { return frame_; }
  const FeaturePyramid& pyramid() const { return pyramid_; }
  const Grid& confidence(int level) const { return confidence_.at(level); }
  double level_scale(int level) const {
    return pyramid_.scale(level) * pyramid_.finest().width() / frame_.width;
  }

 private:
  SatelliteFrame frame_;
  FeaturePyramid pyramid_;
  std::vector<Grid> confidence_;
};

struct ResidualSystem {
  std::vector<Eigen::VectorXd> residuals;
  std::vector<double> weights;                 // w_sat * w_ground (* rho' when IRLS)
  std::vector<Eigen::Matrix<double, Eigen::Dynamic, 3>> jacobians;
  std::vector<int> point_index;                // source keypoint of each row block
  int active_count = 0;
  double cost = 0.0;  // sum of w_sat * w_ground * rho(|r|^2)
  Mat3 hessian = Mat3::Zero();
  Vec3 gradient = Vec3::Zero();  // J^T W r
};

namespace detail {

inline int used_channels(int available, int requested) {
  return requested > 0 ? std::min(available, requested) : available;
}

}  // namespace detail

/// Residuals, weights and Jacobians for all fused points at `level`.
/// Points that project outside the satellite level are skipped.
inline ResidualSystem build_system(const Pose3DoF& pose, const std::vector<FusedPoint>& points,
                                   const SatelliteView& sat, const Anchor& anchor, int level,
                                   const LMConfig& cfg, bool with_jacobians = true) {
  ResidualSystem sys;
  const PyramidLevel& lv = sat.pyramid().level(level);
  const double scale = sat.level_scale(level);
  const VehicleToWorld transform = pose_to_transform(pose, anchor);
  const int channels = detail::used_channels(lv.channels(), cfg.residual_channels);

  for (int i = 0; i < static_cast<int>(points.size()); ++i) {
    const FusedPoint& fp = points[i];
    const SatellitePixel sp = satellite_project(sat.frame(), transform, fp.ground_point);
    const Vec2 at = to_level(sp.pixel, scale);
    bool in_bounds = false;
    double w_sat = bilinear_scalar(sat.confidence(level), at, 0, &in_bounds);
    if (!in_bounds) continue;
    if (!cfg.satellite_confidence) w_sat = 1.0;
    const LookupResult f = bilinear_lookup(lv.features, at);
    const int c = std::min<int>(channels, static_cast<int>(fp.feature.size()));
    const Eigen::VectorXd r = f.value.head(c) - fp.feature.head(c);
    const double w = w_sat * fp.weight;
    const RobustValue rho = robust_weight(r.squaredNorm(), cfg.robust);
    const double w_total = cfg.irls_weights ? w * rho.weight : w;
    sys.cost += w * rho.cost;
    if (w > 0.0) ++sys.active_count;
    if (with_jacobians) {
      const GradientResult g = spatial_gradient(lv.features, at);
      const Mat23 dp = scale * pose_jacobian(sat.frame(), pose, anchor, fp.ground_point);
      const Eigen::Matrix<double, Eigen::Dynamic, 3> j = g.gradient.leftCols(c).transpose() * dp;
      sys.hessian += w_total * j.transpose() * j;
      sys.gradient += w_total * j.transpose() * r;
      sys.jacobians.push_back(j);
    }
    sys.residuals.push_back(r);
    sys.weights.push_back(w_total);
    sys.point_index.push_back(i);
  }
  if (sys.active_count < 3)
    throw DegenerateSystem("build_system: fewer than 3 active keypoints", sys.active_count);
  return sys;
}

/// Solves (H + lambda diag H) delta = -g.
template <int N>
Eigen::Matrix<double, N, 1> lm_solve(const Eigen::Matrix<double, N, N>& h,
                                     const Eigen::Matrix<double, N, 1>& g, double lambda) {
  Eigen::Matrix<double, N, N> a = h;
  a.diagonal() += lambda * h.diagonal();
  const Eigen::SelfAdjointEigenSolver<Eigen::Matrix<double, N, N>> eig(a, Eigen::EigenvaluesOnly);
  const double hi = eig.eigenvalues().cwiseAbs().maxCoeff();
  const double lo = eig.eigenvalues().minCoeff();
  if (!(hi > 0.0) || !(lo > hi * 1e-14))
    throw SingularHessian("lm_step: damped Hessian is not positive definite",
                          lo > 0.0 ? hi / lo : std::numeric_limits<double>::infinity());
  return -a.ldlt().solve(g);
}

inline Vec3 lm_step(const ResidualSystem& sys, double lambda) {
  return lm_solve<3>(sys.hessian, sys.gradient, lambda);
}

/// Everything the optimizer needs about one localization query.
struct LocalizationProblem {
  const SatelliteView* satellite = nullptr;
  const std::vector<GroundView>* cameras = nullptr;
  const KeypointSet* keypoints = nullptr;
  Anchor anchor;
};

struct IterationRecord {
  int level = 0;
  int iter = 0;
  double lambda = 0.0;
  double cost = 0.0;
  Pose3DoF pose;
  double step_norm = 0.0;
  bool accepted = false;
};

struct OptimizeReport {
  std::vector<IterationRecord> trajectory;
  Pose3DoF final_pose;
  std::vector<double> level_cost;    // cost at the end of each scheduled level
  std::vector<int> early_stopped_at;  // iteration index per level, -1 when run to the cap
  bool converged = false;
};

/// Ground-side fusion depends only on the level, so it is done once per level.
inline std::vector<std::vector<FusedPoint>> fuse_all_levels(const LocalizationProblem& problem,
                                                            const LMConfig& cfg) {
  const int n = problem.satellite->pyramid().size();
  std::vector<std::vector<FusedPoint>> out(n);
  for (int l = 0; l < n; ++l)
    out[l] = fuse_keypoints(*problem.keypoints, *problem.cameras, l, cfg.fusion).points;
  return out;
}

using IterationCallback = std::function<void(const IterationRecord&)>;

inline OptimizeReport optimize(const Pose3DoF& initial, const LocalizationProblem& problem,
                               const LMConfig& cfg, const IterationCallback& on_iteration = {}) {
  cfg.validate();
  const int n_levels = problem.satellite->pyramid().size();
  if (n_levels != cfg.levels) throw ConfigError("optimize: satellite pyramid level count differs from config");
  for (const GroundView& v : *problem.cameras)
    if (v.pyramid().size() != n_levels) throw ConfigError("optimize: ground pyramid level count differs");

  const auto fused = fuse_all_levels(problem, cfg);
  OptimizeReport report;
  Pose3DoF pose = initial;

  for (int level : cfg.schedule()) {
    if (level < 0 || level >= n_levels) throw ConfigError("optimize: level out of range");
    const std::vector<FusedPoint>& pts = fused[level];
    double lambda = cfg.lambda_init;
    ResidualSystem sys = build_system(pose, pts, *problem.satellite, problem.anchor, level, cfg);
    int stopped = -1;
    for (int it = 0; it < cfg.iters_per_level; ++it) {
      const Vec3 delta = lm_step(sys, lambda);
      const Pose3DoF candidate = pose.plus(delta);
      std::optional<ResidualSystem> next;
      try {
        next = build_system(candidate, pts, *problem.satellite, problem.anchor, level, cfg);
      } catch (const DegenerateSystem&) {
        // Candidate left the map; treated as a cost increase.
      }
      IterationRecord rec{level, it, lambda, sys.cost, pose, delta.norm(), false};
      if (next && next->cost < sys.cost) {
        pose = candidate;
        sys = std::move(*next);
        lambda = std::max(lambda * cfg.lambda_down, cfg.lambda_min);
        rec.accepted = true;
        rec.cost = sys.cost;
        rec.pose = pose;
      } else {
        lambda = std::min(lambda * cfg.lambda_up, cfg.lambda_max);
      }
      report.trajectory.push_back(rec);
      if (on_iteration) on_iteration(rec);
      if (cfg.early_stop && (delta.cwiseAbs().array() < cfg.stop_step.array()).all()) {
        stopped = it;
        break;
      }
    }
    report.level_cost.push_back(sys.cost);
    report.early_stopped_at.push_back(stopped);
    report.converged = stopped >= 0;
  }
  report.final_pose = pose;
  return report;
}

/// log(1 + exp(x)) without overflow.
inline double log1p_exp(double x) {
  return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
}

/// Soft-margin loss on the ratio of initial-pose cost to ground-truth cost.
/// A zero ground-truth cost saturates at log(1 + e^alpha).
inline double triplet_loss(double cost_at_init, double cost_at_gt, double alpha) {
  if (cost_at_gt == 0.0) return log1p_exp(alpha);
  return log1p_exp(alpha * (1.0 - cost_at_init / cost_at_gt));
}

inline double triplet_loss(const ResidualSystem& at_init, const ResidualSystem& at_gt, double alpha) {
  return triplet_loss(at_init.cost, at_gt.cost, alpha);
}

/// Sum of squared satellite-pixel distances between the predicted and true projections.
inline double reprojection_loss(const Pose3DoF& pred, const Pose3DoF& gt,
                                const std::vector<GroundPoint3D>& points, const SatelliteFrame& sat,
                                const Anchor& anchor, Vec3* gradient = nullptr) {
  const VehicleToWorld tp = pose_to_transform(pred, anchor);
  const VehicleToWorld tg = pose_to_transform(gt, anchor);
  double loss = 0.0;
  if (gradient) gradient->setZero();
  for (const GroundPoint3D& p : points) {
    const Vec2 d = satellite_project(sat, tp, p).pixel - satellite_project(sat, tg, p).pixel;
    loss += d.squaredNorm();
    if (gradient) *gradient += 2.0 * pose_jacobian(sat, pred, anchor, p).transpose() * d;
  }
  return loss;
}

}  // namespace cvl
