// Acceptance run: one PASS/FAIL line per criterion, nonzero exit if any fail.
// Usage: acceptance <path-to-cvl-cli> <work-dir>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <numbers>
#include <sstream>
#include <string>
#include <vector>

#include "cvl/harness/evaluate.hpp"
#include "cvl/harness/gradcheck.hpp"
#include "cvl/harness/rng.hpp"
#include "cvl/harness/scene.hpp"
#include "cvl/pyramid_io.hpp"
#include "oracles.hpp"
#include "test_support.hpp"

namespace {

using namespace cvl;
namespace fs = std::filesystem;

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

struct Context {
  std::string cli;
  fs::path work;
  std::optional<MetricsTable> front, quad;
  double front_seconds = 0.0;
};

Outcome jacobians(Context&) {
  const GradcheckReport r = run_gradcheck(500, 1);
  return {r.worst() <= 1e-4 && r.seconds < 10.0,
          fmt("max rel err %.3g (pose %.3g, bilinear %.3g, chain %.3g, reproj %.3g), %.2f s", r.worst(),
              r.pose_jacobian, r.bilinear_gradient, r.cost_chain, r.reprojection, r.seconds)};
}

Outcome projection_round_trip(Context&) {
  Rng rng(2);
  double worst = 0.0;
  int n = 0;
  while (n < 100000) {
    const int w = 64 + static_cast<int>(rng.below(1200)), h = 48 + static_cast<int>(rng.below(800));
    const double f = rng.uniform(50, 1500);
    Camera c = make_camera({"c", rng.uniform(-180, 180), rng.uniform(-5, 60),
                            {rng.uniform(-2, 2), rng.uniform(-1, 1), 0}},
                           w, h, f, rng.uniform(0.5, 3.0));
    c.intrinsics.cx = rng.uniform(0.3, 0.7) * w;
    c.intrinsics.cy = rng.uniform(0.3, 0.7) * h;
    for (int k = 0; k < 100; ++k) {
      const Vec2 px(rng.uniform(0, w - 1), rng.uniform(0, h - 1));
      const Vec3 ray = inverse_project(c.intrinsics, c.extrinsics.rot_cam_to_vehicle, px);
      if (!(ray.z() > 1e-3)) continue;  // above or near the horizon
      const GroundPoint3D g = lift_to_ground(ray, c.extrinsics);
      worst = std::max(worst, (project_to_camera(g, c.intrinsics, c.extrinsics).pixel - px).norm());
      ++n;
    }
  }
  return {worst <= 1e-6, fmt("max error %.3g px over %d pixels", worst, n)};
}

Outcome dataset_scales(Context&) {
  const double a = meters_per_pixel(42.30, 18, 2), b = meters_per_pixel(49.01, 18, 2);
  return {std::abs(a - 0.22) <= 0.005 && std::abs(b - 0.20) <= 0.005,
          fmt("lat 42.30 -> %.4f m/px, lat 49.01 -> %.4f m/px", a, b)};
}

EvalConfig standard_eval(const std::string& rig) {
  EvalConfig cfg;
  cfg.scenes = 20;
  cfg.trials_per_scene = 10;
  cfg.seed = 1;
  cfg.noise = {5.0, 5.0, 15.0};
  cfg.rig = rig;
  cfg.pipeline.lm.levels = 3;
  cfg.pipeline.lm.iters_per_level = 20;
  return cfg;
}

Outcome synthetic_convergence(Context& ctx) {
  const auto t0 = std::chrono::steady_clock::now();
  ctx.front = evaluate(standard_eval("front")).table;
  ctx.front_seconds = seconds_since(t0);
  const MetricsTable& t = *ctx.front;
  return {t.r_lat[0] >= 90.0 && t.r_lon[0] >= 90.0 && t.r_yaw[0] >= 85.0 && ctx.front_seconds < 300.0,
          fmt("r_lat@0.25 %.1f%%, r_lon@0.25 %.1f%%, r_yaw@1 %.1f%%, failures %d, %.1f s", t.r_lat[0], t.r_lon[0],
              t.r_yaw[0], t.failures, ctx.front_seconds)};
}

Outcome multi_camera(Context& ctx) {
  if (!ctx.front) ctx.front = evaluate(standard_eval("front")).table;
  ctx.quad = evaluate(standard_eval("4cams")).table;
  const MetricsTable &f = *ctx.front, &q = *ctx.quad;
  return {q.yaw_median <= f.yaw_median && q.r_yaw[1] > f.r_yaw[1],
          fmt("median yaw %.4f deg (4 cams) vs %.4f deg (1 cam); r_yaw@2 %.1f%% vs %.1f%%", q.yaw_median,
              f.yaw_median, q.r_yaw[1], f.r_yaw[1])};
}

int run(const std::string& cmd) {
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::vector<std::vector<std::string>> read_csv(const fs::path& p) {
  std::ifstream in(p);
  std::vector<std::vector<std::string>> rows;
  for (std::string line; std::getline(in, line);) {
    std::vector<std::string> cells;
    std::stringstream ss(line);
    for (std::string cell; std::getline(ss, cell, ',');) cells.push_back(cell);
    rows.push_back(cells);
  }
  return rows;
}

Outcome robustness_sweep(Context& ctx) {
  const fs::path csv = ctx.work / "sweep.csv";
  fs::remove(csv);
  const int code = run(ctx.cli + " eval --sweep 5,15,30 --noise 5,5,15 --report " + csv.string() + " > /dev/null");
  if (code != 0) return {false, fmt("cli exited with %d", code)};
  const auto rows = read_csv(csv);
  if (rows.size() != 4) return {false, fmt("expected header + 3 rows, got %zu lines", rows.size())};
  const auto col = [&](const std::string& name) {
    for (std::size_t i = 0; i < rows[0].size(); ++i)
      if (rows[0][i] == name) return i;
    return std::size_t(-1);
  };
  const std::size_t lat = col("r_lat@0.25"), lon = col("r_lon@0.25");
  if (lat == std::size_t(-1) || lon == std::size_t(-1)) return {false, "recall columns missing"};
  bool ok = true;
  std::string detail = "r_lat/r_lon@0.25:";
  for (std::size_t r = 1; r < rows.size(); ++r) {
    detail += " " + rows[r][0] + "m " + rows[r][lat] + "/" + rows[r][lon];
    if (r > 1)
      ok = ok && std::stod(rows[r][lat]) <= std::stod(rows[r - 1][lat]) &&
           std::stod(rows[r][lon]) <= std::stod(rows[r - 1][lon]);
  }
  return {ok, detail};
}

Outcome vokd_equivalence(Context&) {
  Rng rng(7);
  int mismatches = 0, total = 0;
  for (int t = 0; t < 100; ++t) {
    const int h = 20 + static_cast<int>(rng.below(100)), w = 20 + static_cast<int>(rng.below(150));
    Grid conf = test::random_grid(h, w, 1, 1000 + t, 0.0, 3.0);
    if (t % 3 == 0)
      for (float& x : conf.data()) x = std::round(x * 4) / 4;  // ties
    VokdConfig cfg;
    cfg.max_keypoints = 1 + static_cast<int>(rng.below(400));
    cfg.patch = t % 2 ? 8 : 2 + static_cast<int>(rng.below(12));
    const CameraIntrinsics in{100, 100, w / 2.0, rng.uniform(0, h - 1), w, h};
    std::vector<Keypoint2D> got;
    try {
      got = detect_keypoints(conf, in, cfg);
    } catch (const EmptyRegion&) {
    }
    const auto want = oracle::detect(conf, in.cy, in.width, cfg.max_keypoints, cfg.patch);
    bool same = got.size() == want.size();
    for (std::size_t i = 0; same && i < want.size(); ++i)
      same = got[i].row == want[i].row && got[i].col == want[i].col && got[i].score == want[i].score;
    mismatches += !same;
    total += static_cast<int>(want.size());
  }
  return {mismatches == 0, fmt("%d of 100 maps differ (%d keypoints compared)", mismatches, total)};
}

Outcome confidence_fusion(Context&) {
  double worst = 0.0;
  for (int t = 0; t < 100; ++t) {
    const int h = 4 + t % 9;
    FeaturePyramid pyr = test::random_pyramid({h, 2 * h, 4 * h}, 1, 5000 + t);
    if (t % 4 == 0) {  // constant map
      auto& v = pyr.levels[t % 3].view_consistent.data();
      std::fill(v.begin(), v.end(), 0.25f);
    }
    const FusedConfidence f = fuse_confidence(pyr);
    const std::vector<float> want = oracle::fuse_confidence(pyr);
    for (std::size_t i = 0; i < want.size(); ++i)
      worst = std::max(worst, std::abs(static_cast<double>(f.data()[i]) - want[i]));
  }
  // Single constant level: every pixel is exactly 0.5.
  PyramidLevel lv{Grid(3, 3, 1), Grid(3, 3, 1, 0.7f), Grid(3, 3, 1, 1.0f)};
  const FusedConfidence c = fuse_confidence(FeaturePyramid{{lv}});
  bool half = true;
  for (float v : c.data()) half = half && v == 0.5f;
  return {worst <= 1e-9 && half, fmt("max |diff| %.3g over 100 pyramids; constant map -> 0.5: %s", worst,
                                     half ? "yes" : "no")};
}

Outcome losses(Context&) {
  const double l = triplet_loss(2.0, 2.0, 10.0);
  SatelliteFrame sat;
  sat.width = sat.height = 512;
  sat.center_u = sat.center_v = 256;
  sat.gamma = 0.22;
  const Anchor anchor{{4.0, -3.0}, 0.8};
  Rng rng(3);
  std::vector<GroundPoint3D> pts;
  for (int i = 0; i < 50; ++i) pts.push_back({rng.uniform(-20, 20), rng.uniform(-20, 20), 0});
  const Pose3DoF gt = Pose3DoF::make(0.4, -1.1, 0.2);
  const double zero = reprojection_loss(gt, gt, pts, sat, anchor);
  double shift_err = 0.0;
  for (double d : {0.1, 0.5, 2.0, -3.0}) {
    const double want = pts.size() * std::pow(d / sat.gamma, 2);
    shift_err = std::max(shift_err, std::abs(reprojection_loss(gt.plus({d, 0, 0}), gt, pts, sat, anchor) - want));
  }
  return {std::abs(l - std::numbers::ln2) <= 1e-12 && zero == 0.0 && shift_err <= 1e-9,
          fmt("triplet(ratio 1) - ln2 = %.2g; reproj(gt) = %g; lateral-shift max |err| %.2g", l - std::numbers::ln2,
              zero, shift_err)};
}

Outcome lm_behavior(Context&) {
  ResidualSystem scalar;
  // J = 1 on every axis, W = 1, residual 2: H = I, J^T W r = 2.
  scalar.hessian = Mat3::Identity();
  scalar.gradient = Vec3::Constant(2.0);
  const Vec3 d = lm_step(scalar, 0.0);
  const bool exact = d == Vec3::Constant(-2.0);

  Rng rng(4);
  bool monotone = true;
  double worst = 0.0;
  for (int t = 0; t < 200; ++t) {
    Mat3 a = Mat3::NullaryExpr([&] { return rng.uniform(-1, 1); });
    ResidualSystem sys;
    sys.hessian = a.transpose() * a + 0.05 * Mat3::Identity();
    sys.gradient = Vec3(rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1));
    double prev = std::numeric_limits<double>::infinity();
    for (double lambda : {0.0, 1e-2, 1.0, 1e2, 1e4}) {
      const double n = lm_step(sys, lambda).norm();
      monotone = monotone && n < prev;
      prev = n;
    }
    const double lambda = rng.uniform(0, 3);
    Mat3 damped = sys.hessian;
    damped.diagonal() *= 1.0 + lambda;
    const Vec3 want = -damped.fullPivLu().solve(sys.gradient);
    worst = std::max(worst, (lm_step(sys, lambda) - want).norm() / std::max(1.0, want.norm()));
  }
  return {exact && monotone && worst <= 1e-10,
          fmt("scalar delta = (%g, %g, %g); damping monotone: %s; dense-solve max err %.2g", d[0], d[1], d[2],
              monotone ? "yes" : "no", worst)};
}

std::uint64_t corruption_offset(const std::vector<unsigned char>& bytes) {
  try {
    decode_pyramid(bytes);
  } catch (const FormatError& e) {
    return e.offset();
  }
  return ~0ull;
}

Outcome pyramid_io(Context& ctx) {
  FeaturePyramid pyr = test::random_pyramid({27, 54, 108}, 6, 77);
  pyr.levels[1].features.at(0, 0, 0) = -0.0f;
  pyr.levels[2].features.at(1, 1, 1) = std::numeric_limits<float>::denorm_min();
  const fs::path p = ctx.work / "rt.pacl";
  write_pyramid(pyr, p);
  const FeaturePyramid back = read_pyramid(p);
  bool exact = back.size() == pyr.size();
  for (int l = 0; exact && l < pyr.size(); ++l)
    for (const auto& [x, y] : {std::pair{&pyr.level(l).features, &back.level(l).features},
                               {&pyr.level(l).view_consistent, &back.level(l).view_consistent},
                               {&pyr.level(l).on_ground, &back.level(l).on_ground}})
      exact = exact && x->same_shape(*y) &&
              std::memcmp(x->data().data(), y->data().data(), x->data().size() * sizeof(float)) == 0;

  const std::vector<unsigned char> good = encode_pyramid(pyr);
  struct Case {
    std::vector<unsigned char> bytes;
    std::uint64_t offset;
  };
  std::vector<Case> cases;
  auto flip = [&](std::size_t at, unsigned char v) {
    auto b = good;
    b[at] = v;
    return b;
  };
  cases.push_back({flip(0, 'Q'), 0});
  cases.push_back({flip(4, 9), 4});
  cases.push_back({flip(8, 0), 8});
  cases.push_back({flip(12, 0), 12});
  cases.push_back({{good.begin(), good.begin() + 3}, 0});
  cases.push_back({{good.begin(), good.begin() + 30}, 24});
  auto extra = good;
  extra.push_back(1);
  cases.push_back({extra, good.size()});
  int ok = 0;
  for (const Case& c : cases) ok += corruption_offset(c.bytes) == c.offset;
  return {exact && ok == static_cast<int>(cases.size()),
          fmt("bit-exact: %s; %d/%zu corruptions raised FormatError at the right offset", exact ? "yes" : "no", ok,
              cases.size())};
}

Outcome determinism(Context& ctx) {
  const std::string args = " eval --scenes 4 --trials-per-scene 4 --seed 17 --threads 4 --report ";
  const fs::path a = ctx.work / "det_a.csv", b = ctx.work / "det_b.csv";
  fs::remove(a);
  fs::remove(b);
  const int ca = run(ctx.cli + args + a.string() + " > /dev/null");
  const int cb = run(ctx.cli + args + b.string() + " > /dev/null");
  const auto ba = test::read_bytes(a), bb = test::read_bytes(b);
  return {ca == 0 && cb == 0 && !ba.empty() && ba == bb,
          fmt("exit codes %d/%d; reports %zu and %zu bytes, identical: %s", ca, cb, ba.size(), bb.size(),
              ba == bb ? "yes" : "no")};
}

}  // namespace

int main(int argc, char** argv) {
  if (argc != 3) {
    std::cerr << "usage: acceptance <cvl-cli> <work-dir>\n";
    return 1;
  }
  Context ctx{argv[1], argv[2]};
  fs::create_directories(ctx.work);
  const std::vector<std::pair<std::string, std::function<Outcome(Context&)>>> criteria{
      {"jacobian correctness", jacobians},
      {"projection round trip", projection_round_trip},
      {"dataset scales", dataset_scales},
      {"synthetic convergence, 1 camera", synthetic_convergence},
      {"multi-camera benefit", multi_camera},
      {"robustness sweep", robustness_sweep},
      {"VOKD brute-force equivalence", vokd_equivalence},
      {"confidence fusion oracle", confidence_fusion},
      {"loss values", losses},
      {"LM unit behavior", lm_behavior},
      {"pyramid file IO", pyramid_io},
      {"determinism", determinism},
  };
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    Outcome o;
    try {
      o = criteria[i].second(ctx);
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    failed += !o.pass;
    std::cout << (o.pass ? "PASS" : "FAIL") << " " << i + 1 << " " << criteria[i].first << ": " << o.detail
              << std::endl;
  }
  std::cout << criteria.size() - failed << "/" << criteria.size() << " criteria passed" << std::endl;
  return failed == 0 ? 0 : 1;
}
