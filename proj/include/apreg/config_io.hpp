#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <stdexcept>
#include <string>

#include "json.hpp"

#include "apreg/ap_solver.hpp"
#include "apreg/dataset_io.hpp"
#include "apreg/preprocess.hpp"
#include "apreg/registration.hpp"
#include "apreg/synthetic.hpp"

namespace apreg {

/// Everything a pipeline run needs; the effective copy is echoed next to
/// the outputs so any run can be reproduced by pointing --config at it.
/// Member defaults equal the lidar profile bundle.
struct PipelineConfig {
  std::string profile = "lidar";  // "lidar" or "depth"
  PreprocessConfig preprocess;
  RegistrationConfig registration;
  CameraIntrinsics intrinsics;
  double depth_scale = kDefaultDepthScale;  // meters per stored unit
  LidarGridSpec lidar;
  std::uint64_t seed = 0;
  int threads = 1;

  void validate() const {
    preprocess.validate();
    registration.validate();
    if (depth_scale <= 0.0)
      throw std::invalid_argument("PipelineConfig: depth_scale must be > 0");
  }
};

/// Bundles the per-sensor thresholds; explicit config fields still override.
inline void apply_profile(PipelineConfig& cfg, const std::string& name) {
  if (name == "lidar") {
    cfg.preprocess.ransac_line_threshold = 0.02;
    cfg.registration.inlier_threshold = 0.02;
    cfg.registration.candidate_radius = 0.5;
    cfg.registration.ap.epsilon = 1e-3;
  } else if (name == "depth") {
    cfg.preprocess.ransac_line_threshold = 0.01;
    cfg.registration.inlier_threshold = 0.005;
    cfg.registration.candidate_radius = 0.1;
    cfg.registration.ap.epsilon = 2.5e-4;
  } else {
    throw std::invalid_argument("unknown profile: " + name +
                                " (expected \"lidar\" or \"depth\")");
  }
  cfg.profile = name;
}

namespace detail {

template <class T>
void assign_if(const nlohmann::json& j, const char* key, T& out) {
  if (auto it = j.find(key); it != j.end()) it->get_to(out);
}

}  // namespace detail

inline void to_json(nlohmann::json& j, const PreprocessConfig& c) {
  j = {{"downsample_h", c.downsample_h},
       {"downsample_v", c.downsample_v},
       {"ransac_line_threshold", c.ransac_line_threshold},
       {"min_line_inliers", c.min_line_inliers},
       {"smoothness_K", c.smoothness_K},
       {"zones_per_scanline", c.zones_per_scanline},
       {"corners_per_zone", c.corners_per_zone},
       {"min_corner_smoothness", c.min_corner_smoothness},
       {"line_ransac_iterations", c.line_ransac_iterations},
       {"gap_limit", c.gap_limit},
       {"edge_chain_radius", c.edge_chain_radius}};
}

inline void from_json(const nlohmann::json& j, PreprocessConfig& c) {
  detail::assign_if(j, "downsample_h", c.downsample_h);
  detail::assign_if(j, "downsample_v", c.downsample_v);
  detail::assign_if(j, "ransac_line_threshold", c.ransac_line_threshold);
  detail::assign_if(j, "min_line_inliers", c.min_line_inliers);
  detail::assign_if(j, "smoothness_K", c.smoothness_K);
  detail::assign_if(j, "zones_per_scanline", c.zones_per_scanline);
  detail::assign_if(j, "corners_per_zone", c.corners_per_zone);
  detail::assign_if(j, "min_corner_smoothness", c.min_corner_smoothness);
  detail::assign_if(j, "line_ransac_iterations", c.line_ransac_iterations);
  detail::assign_if(j, "gap_limit", c.gap_limit);
  detail::assign_if(j, "edge_chain_radius", c.edge_chain_radius);
}

inline void to_json(nlohmann::json& j, const ApConfig& c) {
  j = {{"epsilon", c.epsilon},
       {"max_iterations", c.max_iterations},
       {"bilateral", c.bilateral},
       {"stall_window", c.stall_window},
       {"stall_min_improvement", c.stall_min_improvement}};
}

inline void from_json(const nlohmann::json& j, ApConfig& c) {
  detail::assign_if(j, "epsilon", c.epsilon);
  detail::assign_if(j, "max_iterations", c.max_iterations);
  detail::assign_if(j, "bilateral", c.bilateral);
  detail::assign_if(j, "stall_window", c.stall_window);
  detail::assign_if(j, "stall_min_improvement", c.stall_min_improvement);
}

inline void to_json(nlohmann::json& j, const RegistrationConfig& c) {
  j = {{"inlier_threshold", c.inlier_threshold},
       {"candidate_radius", c.candidate_radius},
       {"refinement_radius", c.refinement_radius},
       {"ransac_iterations", c.ransac_iterations},
       {"refinement_iterations", c.refinement_iterations},
       {"refinement_passes", c.refinement_passes},
       {"solver_weights", c.solver_weights},
       {"ap", c.ap},
       {"rng_seed", c.rng_seed},
       {"threads", c.threads}};
}

inline void from_json(const nlohmann::json& j, RegistrationConfig& c) {
  detail::assign_if(j, "inlier_threshold", c.inlier_threshold);
  detail::assign_if(j, "candidate_radius", c.candidate_radius);
  detail::assign_if(j, "refinement_radius", c.refinement_radius);
  detail::assign_if(j, "ransac_iterations", c.ransac_iterations);
  detail::assign_if(j, "refinement_iterations", c.refinement_iterations);
  detail::assign_if(j, "refinement_passes", c.refinement_passes);
  detail::assign_if(j, "solver_weights", c.solver_weights);
  detail::assign_if(j, "ap", c.ap);
  detail::assign_if(j, "rng_seed", c.rng_seed);
  detail::assign_if(j, "threads", c.threads);
}

inline void to_json(nlohmann::json& j, const CameraIntrinsics& c) {
  j = {{"fx", c.fx},     {"fy", c.fy},       {"cx", c.cx},
       {"cy", c.cy},     {"width", c.width}, {"height", c.height}};
}

inline void from_json(const nlohmann::json& j, CameraIntrinsics& c) {
  detail::assign_if(j, "fx", c.fx);
  detail::assign_if(j, "fy", c.fy);
  detail::assign_if(j, "cx", c.cx);
  detail::assign_if(j, "cy", c.cy);
  detail::assign_if(j, "width", c.width);
  detail::assign_if(j, "height", c.height);
}

inline void to_json(nlohmann::json& j, const LidarGridSpec& c) {
  j = {{"rings", c.rings},
       {"azimuth_bins", c.azimuth_bins},
       {"elevation_deg", c.elevation_deg},
       {"min_range", c.min_range},
       {"max_range", c.max_range}};
}

inline void from_json(const nlohmann::json& j, LidarGridSpec& c) {
  detail::assign_if(j, "rings", c.rings);
  detail::assign_if(j, "azimuth_bins", c.azimuth_bins);
  detail::assign_if(j, "elevation_deg", c.elevation_deg);
  detail::assign_if(j, "min_range", c.min_range);
  detail::assign_if(j, "max_range", c.max_range);
}

inline void to_json(nlohmann::json& j, const AaRect& r) {
  j = {{"axis", r.axis}, {"value", r.value}, {"lo0", r.lo0},
       {"hi0", r.hi0},   {"lo1", r.lo1},     {"hi1", r.hi1}};
}

inline void from_json(const nlohmann::json& j, AaRect& r) {
  detail::assign_if(j, "axis", r.axis);
  detail::assign_if(j, "value", r.value);
  detail::assign_if(j, "lo0", r.lo0);
  detail::assign_if(j, "hi0", r.hi0);
  detail::assign_if(j, "lo1", r.lo1);
  detail::assign_if(j, "hi1", r.hi1);
}

inline void to_json(nlohmann::json& j, const SceneSpec& s) {
  j = {{"extent", {s.extent.x(), s.extent.y(), s.extent.z()}},
       {"surfaces", s.surfaces},
       {"sensor", s.sensor == SensorKind::Depth ? "depth" : "lidar"},
       {"intrinsics", s.intrinsics},
       {"max_depth_range", s.max_depth_range},
       {"lidar", s.lidar},
       {"noise_sigma", s.noise_sigma},
       {"dropout_rate", s.dropout_rate},
       {"rng_seed", s.rng_seed}};
}

inline void from_json(const nlohmann::json& j, SceneSpec& s) {
  if (auto it = j.find("extent"); it != j.end()) {
    std::array<double, 3> e{};
    it->get_to(e);
    s.extent = Point3(e[0], e[1], e[2]);
  }
  detail::assign_if(j, "surfaces", s.surfaces);
  if (auto it = j.find("sensor"); it != j.end()) {
    std::string kind = it->get<std::string>();
    if (kind == "depth") s.sensor = SensorKind::Depth;
    else if (kind == "lidar") s.sensor = SensorKind::Lidar;
    else throw std::invalid_argument("unknown sensor kind: " + kind);
  }
  detail::assign_if(j, "intrinsics", s.intrinsics);
  detail::assign_if(j, "max_depth_range", s.max_depth_range);
  detail::assign_if(j, "lidar", s.lidar);
  detail::assign_if(j, "noise_sigma", s.noise_sigma);
  detail::assign_if(j, "dropout_rate", s.dropout_rate);
  detail::assign_if(j, "rng_seed", s.rng_seed);
}

inline void to_json(nlohmann::json& j, const PipelineConfig& c) {
  j = {{"profile", c.profile},
       {"preprocess", c.preprocess},
       {"registration", c.registration},
       {"intrinsics", c.intrinsics},
       {"depth_scale", c.depth_scale},
       {"lidar", c.lidar},
       {"seed", c.seed},
       {"threads", c.threads}};
}

inline void from_json(const nlohmann::json& j, PipelineConfig& c) {
  // The profile key seeds the per-sensor bundle; explicit fields override.
  if (auto it = j.find("profile"); it != j.end())
    apply_profile(c, it->get<std::string>());
  detail::assign_if(j, "preprocess", c.preprocess);
  detail::assign_if(j, "registration", c.registration);
  detail::assign_if(j, "intrinsics", c.intrinsics);
  detail::assign_if(j, "depth_scale", c.depth_scale);
  detail::assign_if(j, "lidar", c.lidar);
  detail::assign_if(j, "seed", c.seed);
  detail::assign_if(j, "threads", c.threads);
}

inline nlohmann::json read_json_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DatasetError("cannot read config: " + path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw DatasetError(path.string() + ": " + e.what());
  }
  return j;
}

template <class T>
T load_config(const std::filesystem::path& path) {
  T cfg{};
  read_json_file(path).get_to(cfg);
  return cfg;
}

template <class T>
void save_config(const std::filesystem::path& path, const T& cfg) {
  nlohmann::json j = cfg;
  atomic_write_text(path, j.dump(2) + "\n");
}

}  // namespace apreg
