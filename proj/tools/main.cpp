// apreg: sparse 3D scan registration and odometry from line/corner features.
//
// Subcommands: register, odometry, eval, synth, study, plot.
// Exit codes: 0 success, 1 pipeline failure, 2 bad invocation or config.

#include <cstdint>
#include <cstdio>
#include <exception>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "apreg/config_io.hpp"
#include "apreg/dataset_io.hpp"
#include "apreg/errors.hpp"
#include "apreg/evaluation.hpp"
#include "apreg/registration.hpp"
#include "apreg/synthetic.hpp"
#include "apreg/trajectory_plot.hpp"

namespace fs = std::filesystem;
using namespace apreg;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitPipeline = 1;
constexpr int kExitUsage = 2;

/// Marks failures caused by the invocation or config rather than the data.
struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

template <class F>
auto usage_scope(F&& f) {
  try {
    return f();
  } catch (const UsageError&) {
    throw;
  } catch (const std::exception& e) {
    throw UsageError(e.what());
  }
}

struct CommonOpts {
  std::string config_path;
  std::string profile;
  std::string downsample;
  std::optional<std::uint64_t> seed;
  std::optional<int> threads;
  std::string out_dir = "out";
};

void add_common_flags(CLI::App* cmd, CommonOpts& o) {
  cmd->add_option("--config", o.config_path, "JSON config file (echo of a previous run works)");
  cmd->add_option("--profile", o.profile, "Threshold bundle: lidar or depth")
      ->check(CLI::IsMember({"lidar", "depth"}));
  cmd->add_option("--seed", o.seed, "Seed for every random choice in the run");
  cmd->add_option("--downsample", o.downsample, "Grid strides as HxV, e.g. 10x10");
  cmd->add_option("--threads", o.threads, "Worker cap (<= 0 uses the hardware count)");
  cmd->add_option("--out", o.out_dir, "Output directory")->capture_default_str();
}

std::pair<int, int> parse_downsample(const std::string& text) {
  int h = 0, v = 0;
  char x = 0, tail = 0;
  if (std::sscanf(text.c_str(), "%d%c%d%c", &h, &x, &v, &tail) != 3 || x != 'x' ||
      h < 1 || v < 1)
    throw std::invalid_argument("--downsample expects HxV with positive integers, got \"" +
                                text + "\"");
  return {h, v};
}

/// Defaults, then config file, then flags (flags win).
PipelineConfig resolve_config(const CommonOpts& o) {
  PipelineConfig cfg;
  if (!o.config_path.empty()) cfg = load_config<PipelineConfig>(o.config_path);
  if (!o.profile.empty()) apply_profile(cfg, o.profile);
  if (o.seed) cfg.seed = *o.seed;
  if (o.threads) cfg.threads = *o.threads;
  if (!o.downsample.empty()) {
    auto [h, v] = parse_downsample(o.downsample);
    cfg.preprocess.downsample_h = h;
    cfg.preprocess.downsample_v = v;
  }
  cfg.validate();
  return cfg;
}

fs::path prepare_out_dir(const std::string& dir) {
  fs::path p(dir);
  fs::create_directories(p);
  return p;
}

void echo_config(const fs::path& out_dir, const PipelineConfig& cfg) {
  save_config(out_dir / "config.json", cfg);
}

OrganizedCloud load_frame(const fs::path& path, const PipelineConfig& cfg, int frame_id) {
  std::string ext = path.extension().string();
  if (ext == ".png")
    return read_depth_png(path, cfg.intrinsics, cfg.depth_scale, frame_id);
  if (ext == ".bin")
    return organize_lidar(read_lidar_bin(path), cfg.lidar, frame_id);
  throw DatasetError("unsupported frame format (expected .png or .bin): " + path.string());
}

std::string format_transform(const RigidTransform& t) {
  char buf[512];
  std::string out;
  const Mat3& r = t.rotation();
  const Point3& p = t.translation();
  for (int i = 0; i < 3; ++i) {
    std::snprintf(buf, sizeof(buf), "%.12g %.12g %.12g %.12g\n", r(i, 0), r(i, 1),
                  r(i, 2), p[i]);
    out += buf;
  }
  out += "0 0 0 1\n";
  return out;
}

/// Sniffs TUM (8 fields, timestamped) vs KITTI (12 fields) trajectory text.
bool looks_like_tum(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw DatasetError("cannot read trajectory: " + path.string());
  std::string line;
  while (std::getline(in, line)) {
    std::size_t start = line.find_first_not_of(" \t\r");
    if (start == std::string::npos || line[start] == '#') continue;
    std::istringstream ss(line);
    double v;
    int count = 0;
    while (ss >> v) ++count;
    if (count == 8) return true;
    if (count == 12) return false;
    throw DatasetError(path.string() + ": expected 8 (timestamped) or 12 (matrix) fields per line");
  }
  throw DatasetError(path.string() + ": no data lines");
}

struct LoadedTrajectory {
  std::vector<TimedPose> poses;
  bool timestamped = false;
};

LoadedTrajectory load_trajectory_any(const fs::path& path) {
  LoadedTrajectory out;
  if (looks_like_tum(path)) {
    out.poses = read_tum_trajectory(path);
    out.timestamped = true;
  } else {
    auto poses = read_kitti_trajectory(path);
    out.poses.reserve(poses.size());
    for (std::size_t i = 0; i < poses.size(); ++i)
      out.poses.push_back({static_cast<double>(i), poses[i]});
  }
  return out;
}

std::vector<RigidTransform> strip_timestamps(const LoadedTrajectory& t) {
  std::vector<RigidTransform> out;
  out.reserve(t.poses.size());
  for (const auto& tp : t.poses) out.push_back(tp.pose);
  return out;
}

// ---------------------------------------------------------------- register

int cmd_register(const std::string& frame1, const std::string& frame2,
                 const CommonOpts& opts) {
  PipelineConfig cfg = usage_scope([&] { return resolve_config(opts); });
  OrganizedCloud cloud1 = load_frame(frame1, cfg, 0);
  OrganizedCloud cloud2 = load_frame(frame2, cfg, 1);
  FrameFeatures f1 = preprocess_frame(cloud1, cfg.preprocess, mix_seed(cfg.seed, 101));
  FrameFeatures f2 = preprocess_frame(cloud2, cfg.preprocess, mix_seed(cfg.seed, 102));

  RegistrationConfig reg = cfg.registration;
  reg.rng_seed = mix_seed(cfg.seed, 7);
  reg.threads = cfg.threads;
  RegistrationResult res = register_pair(f1, f2, reg);

  fs::path out = prepare_out_dir(opts.out_dir);
  atomic_write_text(out / "transform.txt", format_transform(res.transform));
  nlohmann::json report = {
      {"inliers", res.inliers},
      {"inlier_lines", res.inlier_split.lines},
      {"inlier_corner_edges", res.inlier_split.corner_edges},
      {"candidates", res.candidates},
      {"converged", res.converged},
      {"final_delta", res.final_delta},
      {"best_round", res.best_round},
      {"mix_index", res.mix_index},
      {"frame1", {{"lines", f1.line_count()}, {"corners", f1.corners.size()}, {"edges", f1.edges.size()}}},
      {"frame2", {{"lines", f2.line_count()}, {"corners", f2.corners.size()}, {"edges", f2.edges.size()}}},
  };
  nlohmann::json passes = nlohmann::json::array();
  for (const auto& p : res.passes)
    passes.push_back({{"inliers", p.inliers}});
  report["passes"] = passes;
  atomic_write_text(out / "report.json", report.dump(2) + "\n");
  echo_config(out, cfg);

  std::cout << "register: " << res.inliers << "/" << res.candidates
            << " inlier candidates, " << (res.converged ? "converged" : "NOT converged")
            << " (residual " << res.final_delta << " m)\n"
            << "wrote " << (out / "transform.txt").string() << "\n";
  return res.converged ? kExitOk : kExitPipeline;
}

// ---------------------------------------------------------------- odometry

int cmd_odometry(const std::string& dir, const std::string& extension, bool tum_export,
                 const CommonOpts& opts) {
  PipelineConfig cfg = usage_scope([&] { return resolve_config(opts); });
  std::string ext = extension;
  if (ext.empty()) {
    ext = list_files_sorted(dir, ".png").empty() ? ".bin" : ".png";
  } else if (ext.front() != '.') {
    ext = "." + ext;
  }
  std::vector<fs::path> files = list_files_sorted(dir, ext);
  if (files.size() < 2)
    throw DatasetError("need at least 2 " + ext + " frames in " + dir);

  std::vector<FrameFeatures> features;
  features.reserve(files.size());
  for (std::size_t i = 0; i < files.size(); ++i) {
    OrganizedCloud cloud = load_frame(files[i], cfg, static_cast<int>(i));
    features.push_back(
        preprocess_frame(cloud, cfg.preprocess, mix_seed(cfg.seed, 200, i)));
    std::cerr << "frames " << (i + 1) << "/" << files.size() << ": "
              << features.back().line_count() << " lines, "
              << features.back().corners.size() << " corners\r";
  }
  std::cerr << "\n";

  RegistrationConfig reg = cfg.registration;
  reg.rng_seed = mix_seed(cfg.seed, 8);
  reg.threads = cfg.threads;
  OdometryResult odo = run_odometry(features, reg);

  fs::path out = prepare_out_dir(opts.out_dir);
  write_kitti_trajectory(out / "trajectory.txt", odo.poses);
  std::string pairs = "pair,inliers,fallback\n";
  for (std::size_t i = 1; i < odo.relative.size(); ++i)  // index 0 is the anchor pose
    pairs += std::to_string(i) + "," + std::to_string(odo.inliers[i]) + "," +
             (odo.fallback[i] ? "1" : "0") + "\n";
  atomic_write_text(out / "pairs.csv", pairs);
  if (tum_export) {
    std::vector<TimedPose> timed;
    timed.reserve(odo.poses.size());
    for (std::size_t i = 0; i < odo.poses.size(); ++i) {
      double ts = static_cast<double>(i);
      try {
        ts = std::stod(files[i].stem().string());  // TUM filenames carry timestamps
      } catch (const std::exception&) {
      }
      timed.push_back({ts, odo.poses[i]});
    }
    write_tum_trajectory(out / "trajectory_tum.txt", timed);
  }
  echo_config(out, cfg);

  int fallbacks = 0;
  for (bool f : odo.fallback) fallbacks += f;
  std::cout << "odometry: " << odo.poses.size() << " poses, " << fallbacks
            << " constant-velocity fallbacks\n"
            << "wrote " << (out / "trajectory.txt").string() << "\n";
  return kExitOk;
}

// -------------------------------------------------------------------- eval

int cmd_eval(const std::string& est_path, const std::string& gt_path,
             const std::string& metric, int delta_frames, double max_time_diff,
             const CommonOpts& opts) {
  LoadedTrajectory est = load_trajectory_any(est_path);
  LoadedTrajectory gt = load_trajectory_any(gt_path);
  fs::path out = prepare_out_dir(opts.out_dir);
  char buf[256];

  if (metric == "rpe") {
    if ((!est.timestamped || !gt.timestamped) && est.poses.size() != gt.poses.size())
      throw DatasetError("index-paired trajectories must have equal length (" +
                         std::to_string(est.poses.size()) + " vs " +
                         std::to_string(gt.poses.size()) + ")");
    RpeResult rpe = relative_pose_error(gt.poses, est.poses, delta_frames,
                                        est.timestamped && gt.timestamped
                                            ? max_time_diff
                                            : 0.5);  // index pairing: exact match
    std::string csv = "kind,pair,translation_m,rotation_deg\n";
    for (std::size_t i = 0; i < rpe.translation_residuals.size(); ++i) {
      std::snprintf(buf, sizeof(buf), "pair,%zu,%.9f,%.9f\n", i,
                    rpe.translation_residuals[i], rpe.rotation_residuals[i]);
      csv += buf;
    }
    std::snprintf(buf, sizeof(buf), "summary,%d,%.9f,%.9f\n", rpe.pairs,
                  rpe.translation.mean, rpe.rotation_deg.mean);
    csv += buf;
    atomic_write_text(out / "rpe.csv", csv);
    std::snprintf(buf, sizeof(buf),
                  "rpe: %d pairs, translation mean %.6f m (rmse %.6f), rotation mean "
                  "%.6f deg (rmse %.6f)\n",
                  rpe.pairs, rpe.translation.mean, rpe.translation.rmse,
                  rpe.rotation_deg.mean, rpe.rotation_deg.rmse);
    std::cout << buf << "wrote " << (out / "rpe.csv").string() << "\n";
    return kExitOk;
  }

  // kitti metric: fixed-length span drift, index-aligned trajectories.
  if (est.poses.size() != gt.poses.size())
    throw DatasetError("kitti metric needs equal-length trajectories (" +
                       std::to_string(est.poses.size()) + " vs " +
                       std::to_string(gt.poses.size()) + ")");
  OdometryBenchmark bench =
      odometry_segment_errors(strip_timestamps(gt), strip_timestamps(est));
  std::string csv = "kind,first_frame,length_m,translation_percent,rotation_deg_per_m\n";
  for (const auto& s : bench.spans) {
    std::snprintf(buf, sizeof(buf), "span,%zu,%.1f,%.9f,%.9f\n", s.first_frame,
                  s.length, s.t_err_percent, s.r_err_deg_per_m);
    csv += buf;
  }
  for (const auto& l : bench.per_length) {
    if (l.count == 0) continue;
    std::snprintf(buf, sizeof(buf), "length_mean,%d,%.1f,%.9f,%.9f\n", l.count,
                  l.length, l.t_err_percent, l.r_err_deg_per_m);
    csv += buf;
  }
  std::snprintf(buf, sizeof(buf), "summary,%d,,%.9f,%.9f\n", bench.segments,
                bench.t_err_percent, bench.r_err_deg_per_m);
  csv += buf;
  atomic_write_text(out / "kitti.csv", csv);
  if (bench.empty()) {
    std::cout << "kitti: no span of the requested lengths fits the trajectory\n";
  } else {
    std::snprintf(buf, sizeof(buf),
                  "kitti: %d spans, translation %.4f %%, rotation %.6f deg/m\n",
                  bench.segments, bench.t_err_percent, bench.r_err_deg_per_m);
    std::cout << buf;
  }
  std::cout << "wrote " << (out / "kitti.csv").string() << "\n";
  return kExitOk;
}

// ------------------------------------------------------------------- synth

DepthImage cloud_to_depth_image(const OrganizedCloud& cloud, double depth_scale) {
  DepthImage img(cloud.rows(), cloud.cols());
  img.setZero();
  for (int r = 0; r < cloud.rows(); ++r) {
    for (int c = 0; c < cloud.cols(); ++c) {
      auto p = cloud.at(r, c);
      if (!p || p->z() <= 0.0) continue;
      double raw = std::round(p->z() / depth_scale);
      if (raw < 1.0 || raw > 65535.0) continue;  // out of encodable range: missing
      img(r, c) = static_cast<std::uint16_t>(raw);
    }
  }
  return img;
}

int cmd_synth(const std::string& scene_path, int frames, const std::string& sensor,
              double orbit_radius, double orbit_span, const CommonOpts& opts) {
  PipelineConfig cfg = usage_scope([&] { return resolve_config(opts); });
  SceneSpec scene = usage_scope([&] {
    SceneSpec s = scene_path.empty()
                      ? box_room_scene(sensor == "lidar" ? SensorKind::Lidar
                                                         : SensorKind::Depth)
                      : load_config<SceneSpec>(scene_path);
    if (opts.seed) s.rng_seed = *opts.seed;
    s.validate();
    return s;
  });
  if (frames < 1) throw std::invalid_argument("--frames must be >= 1");

  // Echo a config whose loaders match the emitted frames.
  cfg.intrinsics = scene.intrinsics;
  cfg.lidar = scene.lidar;
  apply_profile(cfg, scene.sensor == SensorKind::Lidar ? "lidar" : "depth");

  fs::path out = prepare_out_dir(opts.out_dir);
  std::vector<RigidTransform> poses =
      orbit_trajectory(scene, frames, orbit_radius, orbit_span);
  for (int i = 0; i < frames; ++i) {
    OrganizedCloud cloud = render_frame(scene, poses[static_cast<std::size_t>(i)],
                                        static_cast<std::uint64_t>(i));
    char name[64];
    if (scene.sensor == SensorKind::Depth) {
      std::snprintf(name, sizeof(name), "frame_%06d.png", i);
      write_depth_png(out / name, cloud_to_depth_image(cloud, cfg.depth_scale));
    } else {
      std::snprintf(name, sizeof(name), "frame_%06d.bin", i);
      std::vector<Eigen::Vector4f> pts;
      for (int r = 0; r < cloud.rows(); ++r)
        for (int c = 0; c < cloud.cols(); ++c)
          if (auto p = cloud.at(r, c))
            pts.emplace_back(static_cast<float>(p->x()), static_cast<float>(p->y()),
                             static_cast<float>(p->z()), 0.0f);
      write_lidar_bin(out / name, pts);
    }
  }
  write_kitti_trajectory(out / "groundtruth.txt", poses);
  save_config(out / "scene.json", scene);
  echo_config(out, cfg);
  std::cout << "synth: " << frames << " " << (scene.sensor == SensorKind::Depth ? "depth" : "lidar")
            << " frames in " << out.string() << "\n";
  return kExitOk;
}

// ------------------------------------------------------------------- study

int cmd_study(const std::string& kind, const std::string& scene_path, int trials,
              std::vector<double> magnitudes, std::vector<int> factors,
              const CommonOpts& opts) {
  PipelineConfig cfg = usage_scope([&] { return resolve_config(opts); });
  SceneSpec scene = usage_scope([&] {
    SceneSpec s = scene_path.empty() ? box_room_scene() : load_config<SceneSpec>(scene_path);
    if (opts.seed) s.rng_seed = *opts.seed;
    s.validate();
    return s;
  });
  fs::path out = prepare_out_dir(opts.out_dir);
  char buf[128];

  if (kind == "perturbation") {
    PerturbationConfig pc;
    pc.preprocess = cfg.preprocess;
    pc.registration = cfg.registration;
    pc.threads = cfg.threads;
    if (trials > 0) pc.trials = trials;
    if (!magnitudes.empty()) pc.magnitudes = magnitudes;
    std::string csv = "kind,magnitude,successes,trials,rate\n";
    for (PerturbationKind k : {PerturbationKind::Translation, PerturbationKind::Rotation}) {
      pc.kind = k;
      PerturbationResult res = perturbation_study(scene, pc);
      const char* label = k == PerturbationKind::Translation ? "translation_m" : "rotation_deg";
      for (const auto& row : res.rows) {
        std::snprintf(buf, sizeof(buf), "%s,%g,%d,%d,%.4f\n", label, row.magnitude,
                      row.successes, row.trials, row.rate);
        csv += buf;
      }
    }
    atomic_write_text(out / "perturbation.csv", csv);
    std::cout << "study: wrote " << (out / "perturbation.csv").string() << "\n";
    return kExitOk;
  }

  if (kind == "sparsity") {
    SparsityConfig sc;
    sc.preprocess = cfg.preprocess;
    if (!factors.empty()) sc.factors = factors;
    SparsityResult res = sparsity_inlier_study(scene, sc);
    std::string csv = "factor,lines,points,line_ratio,point_ratio\n";
    for (const auto& row : res.rows) {
      std::snprintf(buf, sizeof(buf), "%d,%zu,%zu,", row.factor, row.lines, row.points);
      csv += buf;
      if (row.line_ratio) {
        std::snprintf(buf, sizeof(buf), "%.6f", *row.line_ratio);
        csv += buf;
      }
      csv += ",";
      if (row.point_ratio) {
        std::snprintf(buf, sizeof(buf), "%.6f", *row.point_ratio);
        csv += buf;
      }
      csv += "\n";
    }
    atomic_write_text(out / "sparsity.csv", csv);
    std::cout << "study: wrote " << (out / "sparsity.csv").string() << "\n";
    return kExitOk;
  }

  throw std::invalid_argument("unknown study kind: " + kind);
}

// -------------------------------------------------------------------- plot

int cmd_plot(const std::vector<std::string>& paths, const std::string& plane,
             const CommonOpts& opts) {
  int axis_h = 0, axis_v = 1;
  if (plane == "xz") axis_v = 2;
  else if (plane == "yz") axis_h = 1, axis_v = 2;
  else if (plane != "xy") throw std::invalid_argument("--plane must be xy, xz, or yz");

  std::vector<PlotSeries> series;
  for (const auto& p : paths) {
    LoadedTrajectory t = load_trajectory_any(p);
    series.push_back({fs::path(p).stem().string(), strip_timestamps(t)});
  }
  fs::path out = prepare_out_dir(opts.out_dir);
  atomic_write_text(out / "trajectories.svg", trajectory_svg(series, 720, 720, axis_h, axis_v));
  std::cout << "plot: wrote " << (out / "trajectories.svg").string() << "\n";
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Sparse 3D scan registration from line and corner features"};
  app.require_subcommand(1);

  CommonOpts reg_opts;
  std::string reg_frame1, reg_frame2;
  CLI::App* reg = app.add_subcommand("register", "Estimate the rigid motion between two frames");
  reg->add_option("frame1", reg_frame1, "First frame (.png depth or .bin scan)")->required();
  reg->add_option("frame2", reg_frame2, "Second frame")->required();
  add_common_flags(reg, reg_opts);

  CommonOpts odo_opts;
  std::string odo_dir, odo_ext;
  bool odo_tum = false;
  CLI::App* odo = app.add_subcommand("odometry", "Chain pairwise registrations over a frame directory");
  odo->add_option("dir", odo_dir, "Directory of frames, lexicographic order")->required();
  odo->add_option("--ext", odo_ext, "Frame extension (default: auto-detect png/bin)");
  odo->add_flag("--tum", odo_tum, "Also export a timestamped trajectory");
  add_common_flags(odo, odo_opts);

  CommonOpts eval_opts;
  std::string eval_est, eval_gt, eval_metric = "rpe";
  int eval_delta = 1;
  double eval_max_dt = 0.02;
  CLI::App* eval = app.add_subcommand("eval", "Compare an estimated trajectory against ground truth");
  eval->add_option("estimate", eval_est, "Estimated trajectory file")->required();
  eval->add_option("groundtruth", eval_gt, "Ground-truth trajectory file")->required();
  eval->add_option("--metric", eval_metric, "rpe or kitti")
      ->check(CLI::IsMember({"rpe", "kitti"}))
      ->capture_default_str();
  eval->add_option("--delta", eval_delta, "Frame gap for rpe pairs")->capture_default_str();
  eval->add_option("--max-time-diff", eval_max_dt, "Association window in seconds")
      ->capture_default_str();
  add_common_flags(eval, eval_opts);

  CommonOpts synth_opts;
  std::string synth_scene, synth_sensor = "depth";
  int synth_frames = 2;
  double synth_radius = 2.5, synth_span = 0.6;
  CLI::App* synth = app.add_subcommand("synth", "Render synthetic frames with ground truth");
  synth->add_option("--scene", synth_scene, "Scene JSON (default: built-in box room)");
  synth->add_option("--frames", synth_frames, "Frame count")->capture_default_str();
  synth->add_option("--sensor", synth_sensor, "depth or lidar (built-in scene only)")
      ->check(CLI::IsMember({"depth", "lidar"}))
      ->capture_default_str();
  synth->add_option("--orbit-radius", synth_radius, "Camera orbit radius, meters")
      ->capture_default_str();
  synth->add_option("--orbit-span", synth_span, "Camera orbit sweep, radians")
      ->capture_default_str();
  add_common_flags(synth, synth_opts);

  CommonOpts study_opts;
  std::string study_kind, study_scene;
  int study_trials = 0;
  std::vector<double> study_magnitudes;
  std::vector<int> study_factors;
  CLI::App* study = app.add_subcommand("study", "Sensitivity studies on a synthetic scene");
  study->add_option("kind", study_kind, "perturbation or sparsity")
      ->required()
      ->check(CLI::IsMember({"perturbation", "sparsity"}));
  study->add_option("--scene", study_scene, "Scene JSON (default: built-in box room)");
  study->add_option("--trials", study_trials, "Trials per magnitude (perturbation)");
  study->add_option("--magnitudes", study_magnitudes, "Perturbation ladder values");
  study->add_option("--factors", study_factors, "Downsampling ladder (sparsity)");
  add_common_flags(study, study_opts);

  CommonOpts plot_opts;
  std::vector<std::string> plot_paths;
  std::string plot_plane = "xy";
  CLI::App* plot = app.add_subcommand("plot", "Top-down SVG of one or more trajectories");
  plot->add_option("trajectories", plot_paths, "Trajectory files")->required();
  plot->add_option("--plane", plot_plane, "Projection plane: xy, xz, or yz")
      ->capture_default_str();
  add_common_flags(plot, plot_opts);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (reg->parsed()) return cmd_register(reg_frame1, reg_frame2, reg_opts);
    if (odo->parsed()) return cmd_odometry(odo_dir, odo_ext, odo_tum, odo_opts);
    if (eval->parsed())
      return cmd_eval(eval_est, eval_gt, eval_metric, eval_delta, eval_max_dt, eval_opts);
    if (synth->parsed())
      return cmd_synth(synth_scene, synth_frames, synth_sensor, synth_radius,
                       synth_span, synth_opts);
    if (study->parsed())
      return cmd_study(study_kind, study_scene, study_trials, study_magnitudes,
                       study_factors, study_opts);
    if (plot->parsed()) return cmd_plot(plot_paths, plot_plane, plot_opts);
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitPipeline;
  }
  return kExitUsage;
}
