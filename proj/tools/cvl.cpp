// Command-line front end: synthesize scenes, localize one query, run the
// Monte Carlo evaluation, and run the finite-difference derivative checks.
//
// Exit status: 0 success, 1 usage error, 2 data error.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "cvl/harness/evaluate.hpp"
#include "cvl/harness/gradcheck.hpp"
#include "cvl/harness/scene.hpp"
#include "cvl/harness/scene_io.hpp"
#include "cvl/pipeline.hpp"
#include "cvl/pyramid_io.hpp"

namespace fs = std::filesystem;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitData = 2;

// Bad command-line values, reported as usage errors.
struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::stringstream in(s);
  for (std::string item; std::getline(in, item, sep);) out.push_back(item);
  return out;
}

double to_number(const std::string& s, const std::string& what) {
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(s, &used);
  } catch (const std::exception&) {
    throw UsageError(what + ": '" + s + "' is not a number");
  }
  if (used != s.size()) throw UsageError(what + ": '" + s + "' is not a number");
  return v;
}

std::vector<double> number_list(const std::string& s, const std::string& what) {
  std::vector<double> out;
  for (const std::string& item : split(s, ',')) out.push_back(to_number(item, what));
  return out;
}

// "lateral,longitudinal,yaw"; yaw takes an optional deg/rad suffix and defaults to degrees.
cvl::Pose3DoF parse_pose(const std::string& s) {
  const std::vector<std::string> parts = split(s, ',');
  if (parts.size() != 3) throw UsageError("--init: expected lateral,longitudinal,yaw");
  std::string yaw = parts[2];
  bool radians = false;
  if (yaw.size() > 3 && yaw.ends_with("deg")) {
    yaw.resize(yaw.size() - 3);
  } else if (yaw.size() > 3 && yaw.ends_with("rad")) {
    yaw.resize(yaw.size() - 3);
    radians = true;
  }
  const double y = to_number(yaw, "--init yaw");
  return cvl::Pose3DoF::make(to_number(parts[0], "--init lateral"),
                             to_number(parts[1], "--init longitudinal"),
                             radians ? y : cvl::deg2rad(y));
}

cvl::NoiseModel parse_noise(const std::string& s) {
  const std::vector<double> v = number_list(s, "--noise");
  if (v.size() != 3) throw UsageError("--noise: expected lateral,longitudinal,yaw_deg");
  cvl::NoiseModel n{v[0], v[1], v[2]};
  if (n.lateral < 0 || n.longitudinal < 0 || n.yaw_deg < 0) throw UsageError("--noise: ranges must be >= 0");
  return n;
}

template <typename Fn>
auto as_usage(Fn&& fn) -> decltype(fn()) {
  try {
    return fn();
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }
}

// Options shared by localize and eval.
struct PipelineOptions {
  std::string mask = "oracle";
  std::string fusion = "max";
  std::string robust = "huber";
  double robust_scale = 1.0;
  int levels = 3;
  int iters = 20;
  int keypoints = 256;
  std::string level_order = "coarse-to-fine";

  void add_to(CLI::App& app) {
    app.add_option("--mask", mask, "On-ground mask source: oracle|ones")->capture_default_str();
    app.add_option("--fusion", fusion, "Multi-camera fusion: max|mean")->capture_default_str();
    app.add_option("--robust", robust, "Robust cost: huber|cauchy|l2")->capture_default_str();
    app.add_option("--robust-scale", robust_scale, "Robust cost threshold")->capture_default_str();
    app.add_option("--levels", levels, "Pyramid levels")->capture_default_str()->check(CLI::Range(1, 8));
    app.add_option("--iters", iters, "LM iterations per level")->capture_default_str()->check(CLI::PositiveNumber);
    app.add_option("--max-keypoints", keypoints, "Keypoints per camera")->capture_default_str()->check(CLI::PositiveNumber);
    app.add_option("--level-order", level_order, "coarse-to-fine|fine-to-coarse")->capture_default_str();
  }

  cvl::PipelineConfig build() const {
    cvl::PipelineConfig cfg;
    as_usage([&] {
      cfg.mask = cvl::parse_mask_mode(mask);
      cfg.lm.fusion = cvl::parse_fusion_strategy(fusion);
      cfg.lm.robust.kind = cvl::parse_robust_kind(robust);
      return 0;
    });
    if (!(robust_scale > 0.0)) throw UsageError("--robust-scale must be positive");
    cfg.lm.robust.scale = robust_scale;
    cfg.lm.levels = levels;
    cfg.lm.iters_per_level = iters;
    cfg.vokd.max_keypoints = keypoints;
    if (level_order == "fine-to-coarse") {
      for (int l = levels - 1; l >= 0; --l) cfg.lm.level_order.push_back(l);
    } else if (level_order != "coarse-to-fine") {
      throw UsageError("--level-order: expected coarse-to-fine|fine-to-coarse");
    }
    return cfg;
  }
};

std::ofstream open_output(const std::string& path) {
  std::ofstream f(path, std::ios::trunc);
  if (!f) throw cvl::Error("cannot open " + path + " for writing");
  return f;
}

int run_synth(std::uint64_t seed, const std::string& out, const std::string& rig,
              const std::string& texture, int distractors, int size, double gamma) {
  cvl::SceneSpec spec;
  as_usage([&] {
    spec.rig = cvl::rig_by_name(rig);
    spec.texture = cvl::parse_texture_kind(texture);
    return 0;
  });
  spec.seed = seed;
  spec.distractors = distractors;
  spec.satellite_size = size;
  spec.gamma = gamma;
  const cvl::Scene scene = cvl::synth_scene(spec);
  cvl::write_scene(scene, out);
  std::cout << cvl::Json{{"scene", out}, {"seed", seed}, {"cameras", spec.rig.size()},
                         {"gt", cvl::pose_to_json(scene.gt)}}
                   .dump()
            << '\n';
  return kExitOk;
}

int run_localize(const std::string& scene_dir, const std::string& init, const std::string& trace,
                 const std::string& keypoints, const std::string& pyramids,
                 const std::string& dump_pyramids, const PipelineOptions& opts) {
  const cvl::Pose3DoF initial = parse_pose(init);
  cvl::PipelineConfig cfg = opts.build();
  const cvl::SceneFiles scene = cvl::read_scene(scene_dir);
  const cvl::Anchor& anchor = scene.satellite.anchor;

  cvl::GroundSide ground;
  std::optional<cvl::SatelliteView> sat;
  if (!pyramids.empty()) {
    const fs::path dir(pyramids);
    std::vector<cvl::FeaturePyramid> pyrs;
    for (const cvl::Camera& c : scene.rig) pyrs.push_back(cvl::read_pyramid(dir / ("cam_" + c.name + ".pacl")));
    sat.emplace(scene.satellite.frame, cvl::read_pyramid(dir / "satellite.pacl"));
    cfg.lm.levels = sat->pyramid().size();
    if (opts.level_order == "fine-to-coarse") {
      cfg.lm.level_order.clear();
      for (int l = cfg.lm.levels - 1; l >= 0; --l) cfg.lm.level_order.push_back(l);
    }
    ground = cvl::prepare_ground(scene.rig, std::move(pyrs), cfg);
  } else {
    const std::vector<cvl::Grid> masks = cfg.mask == cvl::MaskMode::kOracle ? scene.masks : std::vector<cvl::Grid>{};
    std::vector<cvl::Grid> gray;
    for (const cvl::Grid& g : scene.images) gray.push_back(cvl::to_gray(g));
    ground = cvl::prepare_ground(scene.rig, gray, masks, cfg);
    sat.emplace(cvl::prepare_satellite(cvl::to_gray(scene.satellite_image), scene.satellite.frame,
                                       cvl::pose_to_transform(initial, anchor), cfg));
  }

  if (!dump_pyramids.empty()) {
    const fs::path dir(dump_pyramids);
    fs::create_directories(dir);
    for (const cvl::GroundView& v : ground.views)
      cvl::write_pyramid(v.pyramid(), dir / ("cam_" + v.camera().name + ".pacl"));
    cvl::write_pyramid(sat->pyramid(), dir / "satellite.pacl");
  }
  if (!keypoints.empty()) {
    std::ofstream f = open_output(keypoints);
    cvl::write_keypoints_jsonl(ground.keypoints, f);
  }

  std::optional<std::ofstream> trace_file;
  if (!trace.empty()) trace_file = open_output(trace);
  cvl::IterationCallback on_iteration;
  if (trace_file)
    on_iteration = [&](const cvl::IterationRecord& r) { *trace_file << cvl::iteration_to_json(r).dump() << '\n'; };

  const cvl::LocalizeResult res = cvl::localize(ground, *sat, anchor, initial, cfg, on_iteration);

  cvl::Json out{{"pose", cvl::pose_to_json(res.final_pose)},
                {"initial", cvl::pose_to_json(initial)},
                {"converged", res.report.converged},
                {"iterations", res.report.trajectory.size()},
                {"level_cost", res.report.level_cost},
                {"keypoints", ground.keypoints.points.size()}};
  if (scene.gt) {
    const cvl::PoseError e =
        cvl::pose_error(res.final_transform, cvl::pose_to_transform(*scene.gt, anchor));
    out["error"] = {{"lateral", e.lateral}, {"longitudinal", e.longitudinal}, {"yaw_deg", e.yaw_deg}};
  }
  std::cout << out.dump(2) << '\n';
  return kExitOk;
}

int run_eval(int scenes, int trials, const std::string& noise, const std::string& report,
             const std::string& rig, std::uint64_t seed, const std::string& sweep, int threads,
             const std::string& texture, int distractors, const PipelineOptions& opts) {
  cvl::EvalConfig cfg;
  cfg.scenes = scenes;
  cfg.trials_per_scene = trials;
  cfg.seed = seed;
  cfg.noise = parse_noise(noise);
  cfg.threads = threads;
  cfg.distractors = distractors;
  as_usage([&] {
    cvl::rig_by_name(rig);
    cfg.texture = cvl::parse_texture_kind(texture);
    return 0;
  });
  cfg.rig = rig;
  cfg.pipeline = opts.build();

  std::string csv;
  if (!sweep.empty()) {
    const std::vector<double> ranges = number_list(sweep, "--sweep");
    for (double r : ranges)
      if (r < 0) throw UsageError("--sweep: ranges must be >= 0");
    csv = cvl::sweep_csv(cvl::sweep_translation_noise(cfg, ranges));
  } else {
    const cvl::EvalResult res = cvl::evaluate(cfg);
    csv = cvl::metrics_csv_header() + "\n" + cvl::metrics_csv_row(res.table) + "\n";
    for (const cvl::TrialResult& t : res.trials)
      if (!t.error) std::cerr << "scene " << t.scene << " trial " << t.trial << " failed: " << t.failure << '\n';
  }
  if (report.empty()) {
    std::cout << csv;
  } else {
    std::ofstream f = open_output(report);
    f << csv;
    if (!f) throw cvl::Error("failed writing " + report);
  }
  return kExitOk;
}

int run_gradcheck(int configs, std::uint64_t seed, double tolerance) {
  const cvl::GradcheckReport r = cvl::run_gradcheck(configs, seed);
  std::printf("configurations     %d\n", r.configurations);
  std::printf("pose_jacobian      %.3e\n", r.pose_jacobian);
  std::printf("bilinear_gradient  %.3e\n", r.bilinear_gradient);
  std::printf("cost_chain         %.3e\n", r.cost_chain);
  std::printf("reprojection       %.3e\n", r.reprojection);
  std::printf("seconds            %.2f\n", r.seconds);
  const bool ok = r.worst() <= tolerance;
  std::printf("%s (max relative error %.3e, tolerance %.1e)\n", ok ? "ok" : "FAILED", r.worst(), tolerance);
  return ok ? kExitOk : kExitData;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Satellite-conditioned 3-DoF vehicle localization toolkit"};
  app.require_subcommand(1);

  std::uint64_t synth_seed = 0;
  std::string synth_out, synth_rig = "front", synth_texture = "blobs";
  int synth_distractors = 0, synth_size = 512;
  double synth_gamma = 0.2;
  CLI::App* synth = app.add_subcommand("synth", "Render a synthetic scene directory");
  synth->add_option("--seed", synth_seed, "Scene seed")->required();
  synth->add_option("--out", synth_out, "Output directory")->required();
  synth->add_option("--rig", synth_rig, "front|4cams")->capture_default_str();
  synth->add_option("--texture", synth_texture, "blobs|checker|roadmarks")->capture_default_str();
  synth->add_option("--distractors", synth_distractors, "Off-ground occluders")->capture_default_str()->check(CLI::NonNegativeNumber);
  synth->add_option("--satellite-size", synth_size, "Satellite tile size in pixels")->capture_default_str()->check(CLI::Range(16, 8192));
  synth->add_option("--gamma", synth_gamma, "Meters per satellite pixel")->capture_default_str()->check(CLI::PositiveNumber);

  std::string loc_scene, loc_init = "0,0,0", loc_trace, loc_keypoints, loc_pyramids, loc_dump;
  PipelineOptions loc_opts;
  CLI::App* localize = app.add_subcommand("localize", "Localize the query of a scene directory");
  localize->add_option("--scene", loc_scene, "Scene directory")->required();
  localize->add_option("--init", loc_init, "Initial pose lateral,longitudinal,yaw[deg|rad] relative to the anchor")
      ->capture_default_str()
      ->allow_extra_args(false);
  localize->add_option("--trace", loc_trace, "Write the per-iteration trace as JSON lines");
  localize->add_option("--keypoints", loc_keypoints, "Write detected keypoints as JSON lines");
  localize->add_option("--pyramids", loc_pyramids, "Read satellite.pacl and cam_<name>.pacl from this directory");
  localize->add_option("--dump-pyramids", loc_dump, "Write the pyramids used to this directory");
  loc_opts.add_to(*localize);

  int ev_scenes = 20, ev_trials = 10, ev_threads = 0, ev_distractors = 0;
  std::uint64_t ev_seed = 1;
  std::string ev_noise = "5,5,15", ev_report, ev_rig = "front", ev_sweep, ev_texture = "blobs";
  PipelineOptions ev_opts;
  CLI::App* eval = app.add_subcommand("eval", "Monte Carlo evaluation over seeded scenes and initial poses");
  eval->add_option("--scenes", ev_scenes, "Number of scenes")->capture_default_str()->check(CLI::PositiveNumber);
  eval->add_option("--trials-per-scene", ev_trials, "Initial poses per scene")->capture_default_str()->check(CLI::PositiveNumber);
  eval->add_option("--noise", ev_noise, "Uniform init noise lateral_m,longitudinal_m,yaw_deg")->capture_default_str();
  eval->add_option("--report", ev_report, "CSV output path (default stdout)");
  eval->add_option("--rig", ev_rig, "front|4cams")->capture_default_str();
  eval->add_option("--seed", ev_seed, "Base seed")->capture_default_str();
  eval->add_option("--sweep", ev_sweep, "Comma-separated translation noise ranges in meters");
  eval->add_option("--threads", ev_threads, "Worker threads (0 = all cores)")->capture_default_str()->check(CLI::NonNegativeNumber);
  eval->add_option("--texture", ev_texture, "blobs|checker|roadmarks")->capture_default_str();
  eval->add_option("--distractors", ev_distractors, "Off-ground occluders per scene")->capture_default_str()->check(CLI::NonNegativeNumber);
  ev_opts.add_to(*eval);

  int gc_configs = 500;
  std::uint64_t gc_seed = 1;
  double gc_tol = 1e-4;
  CLI::App* gradcheck = app.add_subcommand("gradcheck", "Finite-difference checks of all analytic derivatives");
  gradcheck->add_option("--configs", gc_configs, "Random configurations")->capture_default_str()->check(CLI::PositiveNumber);
  gradcheck->add_option("--seed", gc_seed, "Seed")->capture_default_str();
  gradcheck->add_option("--tolerance", gc_tol, "Max relative error")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }

  try {
    if (*synth)
      return run_synth(synth_seed, synth_out, synth_rig, synth_texture, synth_distractors, synth_size, synth_gamma);
    if (*localize)
      return run_localize(loc_scene, loc_init, loc_trace, loc_keypoints, loc_pyramids, loc_dump, loc_opts);
    if (*eval)
      return run_eval(ev_scenes, ev_trials, ev_noise, ev_report, ev_rig, ev_seed, ev_sweep, ev_threads,
                      ev_texture, ev_distractors, ev_opts);
    if (*gradcheck) return run_gradcheck(gc_configs, gc_seed, gc_tol);
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitData;
  }
  return kExitUsage;
}
