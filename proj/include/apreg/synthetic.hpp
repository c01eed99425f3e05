#pragma once

#include <cmath>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <unordered_map>
#include <vector>

#include "apreg/dataset_io.hpp"
#include "apreg/geometry.hpp"
#include "apreg/organized_cloud.hpp"
#include "apreg/parallel.hpp"
#include "apreg/preprocess.hpp"
#include "apreg/registration.hpp"
#include "apreg/rng.hpp"

namespace apreg {

/// Axis-aligned rectangle on the plane {p[axis] == value}; double-sided.
struct AaRect {
  int axis = 0;      // 0: x fixed, 1: y fixed, 2: z fixed
  double value = 0.0;
  double lo0 = 0.0;  // bounds on the two free axes, lowest axis first
  double hi0 = 0.0;
  double lo1 = 0.0;
  double hi1 = 0.0;
};

enum class SensorKind { Depth, Lidar };

struct SceneSpec {
  Point3 extent{10.0, 10.0, 3.0};  // room spans [0, extent] on each axis
  std::vector<AaRect> surfaces;
  SensorKind sensor = SensorKind::Depth;
  CameraIntrinsics intrinsics;
  double max_depth_range = 20.0;  // meters along the optical axis
  LidarGridSpec lidar;
  double noise_sigma = 0.005;  // meters, isotropic
  double dropout_rate = 0.1;
  std::uint64_t rng_seed = 0;

  void validate() const {
    if (extent.x() <= 0.0 || extent.y() <= 0.0 || extent.z() <= 0.0)
      throw std::invalid_argument("SceneSpec: extents must be positive");
    if (dropout_rate < 0.0 || dropout_rate >= 1.0)
      throw std::invalid_argument("SceneSpec: dropout_rate must be in [0, 1)");
    if (noise_sigma < 0.0)
      throw std::invalid_argument("SceneSpec: noise_sigma must be >= 0");
    if (max_depth_range <= 0.0)
      throw std::invalid_argument("SceneSpec: max_depth_range must be positive");
    for (const auto& s : surfaces)
      if (s.axis < 0 || s.axis > 2 || s.lo0 > s.hi0 || s.lo1 > s.hi1)
        throw std::invalid_argument("SceneSpec: malformed surface");
  }
};

inline std::vector<double> uniform_elevations(int rings, double top_deg,
                                              double bottom_deg) {
  if (rings < 1) throw std::invalid_argument("uniform_elevations: rings must be >= 1");
  std::vector<double> table(static_cast<std::size_t>(rings));
  for (int i = 0; i < rings; ++i)
    table[static_cast<std::size_t>(i)] =
        rings == 1 ? top_deg : top_deg + (bottom_deg - top_deg) * i / (rings - 1);
  return table;
}

/// Sensor-to-world pose with +z toward target, +x right, +y down.
inline RigidTransform look_at(const Point3& eye, const Point3& target,
                              const Point3& world_up = Point3(0, 0, 1)) {
  Point3 forward = target - eye;
  if (forward.norm() < 1e-12)
    throw std::invalid_argument("look_at: eye and target coincide");
  forward.normalize();
  Point3 right = forward.cross(world_up);
  if (right.norm() < 1e-9) right = forward.cross(Point3(0, 1, 0));
  right.normalize();
  Point3 down = forward.cross(right);
  Mat3 r;
  r.col(0) = right;
  r.col(1) = down;
  r.col(2) = forward;
  return RigidTransform(r, eye);
}

/// Default study scene: 10x10x3 m box room with two interior partition
/// walls, so every view offers horizontal and vertical lines, corners,
/// and vertical edge lines.
inline SceneSpec box_room_scene(SensorKind kind = SensorKind::Depth) {
  SceneSpec s;
  s.sensor = kind;
  const double ex = s.extent.x(), ey = s.extent.y(), ez = s.extent.z();
  s.surfaces = {
      {0, 0.0, 0.0, ey, 0.0, ez},  // walls
      {0, ex, 0.0, ey, 0.0, ez},
      {1, 0.0, 0.0, ex, 0.0, ez},
      {1, ey, 0.0, ex, 0.0, ez},
      {2, 0.0, 0.0, ex, 0.0, ey},  // floor, ceiling
      {2, ez, 0.0, ex, 0.0, ey},
      {0, 6.5, 0.0, 6.0, 0.0, ez},  // partitions with free vertical edges
      {1, 6.5, 4.0, ex, 0.0, ez},
  };
  if (kind == SensorKind::Lidar) {
    s.noise_sigma = 0.01;
    s.lidar.rings = 32;
    s.lidar.azimuth_bins = 720;
    s.lidar.min_range = 0.3;
    s.lidar.max_range = 50.0;
    s.lidar.elevation_deg = uniform_elevations(s.lidar.rings, 15.0, -25.0);
  }
  return s;
}

namespace detail {

inline std::optional<double> ray_rect_hit(const AaRect& s, const Point3& origin,
                                          const Point3& dir) {
  double d = dir[s.axis];
  if (std::abs(d) < 1e-12) return std::nullopt;
  double t = (s.value - origin[s.axis]) / d;
  if (t <= 1e-9) return std::nullopt;
  int a0 = s.axis == 0 ? 1 : 0;
  int a1 = s.axis == 2 ? 1 : 2;
  double p0 = origin[a0] + t * dir[a0];
  double p1 = origin[a1] + t * dir[a1];
  if (p0 < s.lo0 || p0 > s.hi0 || p1 < s.lo1 || p1 > s.hi1) return std::nullopt;
  return t;
}

inline std::optional<double> cast_ray(const SceneSpec& scene, const Point3& origin,
                                      const Point3& dir) {
  std::optional<double> best;
  for (const auto& s : scene.surfaces) {
    auto t = ray_rect_hit(s, origin, dir);
    if (t && (!best || *t < *best)) best = t;
  }
  return best;
}

}  // namespace detail

/// Ray-casts the sensor grid from `pose` (sensor-to-world), returning points
/// in the sensor frame with seeded isotropic Gaussian noise and dropout.
/// Distinct `salt` values give independent noise streams.
inline OrganizedCloud render_frame(const SceneSpec& scene, const RigidTransform& pose,
                                   std::uint64_t salt = 0) {
  scene.validate();
  const Point3& origin = pose.translation();
  for (int a = 0; a < 3; ++a)
    if (origin[a] <= 0.0 || origin[a] >= scene.extent[a])
      throw std::invalid_argument("render_frame: pose outside scene");

  int rows, cols;
  if (scene.sensor == SensorKind::Depth) {
    rows = scene.intrinsics.height;
    cols = scene.intrinsics.width;
    if (rows < 1 || cols < 1 || scene.intrinsics.fx <= 0.0 || scene.intrinsics.fy <= 0.0)
      throw std::invalid_argument("render_frame: bad intrinsics");
  } else {
    rows = scene.lidar.rings;
    cols = scene.lidar.azimuth_bins;
    if (scene.lidar.elevation_deg.size() != static_cast<std::size_t>(rows))
      throw std::invalid_argument("render_frame: lidar scene needs an elevation table");
  }

  OrganizedCloud cloud(rows, cols, static_cast<int>(salt));
  auto rng = seeded_rng(mix_seed(scene.rng_seed, salt));
  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c < cols; ++c) {
      Point3 dir_s;
      if (scene.sensor == SensorKind::Depth) {
        dir_s = Point3((c - scene.intrinsics.cx) / scene.intrinsics.fx,
                       (r - scene.intrinsics.cy) / scene.intrinsics.fy, 1.0)
                    .normalized();
      } else {
        double elev = scene.lidar.elevation_deg[static_cast<std::size_t>(r)] * M_PI / 180.0;
        double az = -M_PI + (c + 0.5) * 2.0 * M_PI / cols;
        dir_s = Point3(std::cos(elev) * std::cos(az), std::cos(elev) * std::sin(az),
                       std::sin(elev));
      }
      Point3 dir_w = pose.rotation() * dir_s;
      auto t = detail::cast_ray(scene, origin, dir_w);
      if (!t) continue;
      Point3 p = *t * dir_s;
      if (scene.sensor == SensorKind::Depth) {
        if (p.z() > scene.max_depth_range) continue;
      } else {
        if (*t < scene.lidar.min_range || *t > scene.lidar.max_range) continue;
      }
      if (scene.dropout_rate > 0.0 && uniform_double(rng) < scene.dropout_rate) continue;
      if (scene.noise_sigma > 0.0)
        p += scene.noise_sigma *
             Point3(normal_double(rng), normal_double(rng), normal_double(rng));
      cloud.set(r, c, p);
    }
  }
  return cloud;
}

/// Poses on a circle of `radius` around the room center at mid height,
/// looking inward, sweeping `span_rad` starting from `start_rad`.
inline std::vector<RigidTransform> orbit_trajectory(const SceneSpec& scene, int count,
                                                    double radius = 2.5,
                                                    double span_rad = 0.6,
                                                    double start_rad = M_PI * 1.25) {
  if (count < 1) throw std::invalid_argument("orbit_trajectory: count must be >= 1");
  Point3 center(scene.extent.x() / 2.0, scene.extent.y() / 2.0, scene.extent.z() / 2.0);
  std::vector<RigidTransform> poses;
  poses.reserve(static_cast<std::size_t>(count));
  for (int i = 0; i < count; ++i) {
    double a = start_rad + (count == 1 ? 0.0 : span_rad * i / (count - 1));
    Point3 eye = center + Point3(radius * std::cos(a), radius * std::sin(a), 0.0);
    poses.push_back(look_at(eye, center));
  }
  return poses;
}

inline Point3 random_unit_vector(std::mt19937_64& rng) {
  for (;;) {
    Point3 v(normal_double(rng), normal_double(rng), normal_double(rng));
    double n = v.norm();
    if (n > 1e-9) return v / n;
  }
}

inline RigidTransform random_rotation(double angle_deg, std::mt19937_64& rng) {
  Eigen::AngleAxisd aa(angle_deg * M_PI / 180.0, random_unit_vector(rng));
  return RigidTransform(aa.toRotationMatrix(), Point3::Zero());
}

inline RigidTransform random_translation(double magnitude, std::mt19937_64& rng) {
  return RigidTransform(Mat3::Identity(), magnitude * random_unit_vector(rng));
}

enum class PerturbationKind { Translation, Rotation };

struct PerturbationConfig {
  PerturbationKind kind = PerturbationKind::Translation;
  std::vector<double> magnitudes{0.5, 2.0, 8.0, 32.0, 128.0};  // meters or degrees
  int trials = 100;
  RigidTransform base_pose = look_at(Point3(2.0, 2.0, 1.5), Point3(6.5, 6.0, 1.5));
  PreprocessConfig preprocess;
  RegistrationConfig registration;
  double radius_slack = 1.25;   // candidate radius growth per meter of displacement
  double rotation_arm = 7.0;    // meters; converts rotation to peak displacement
  double max_candidate_radius = 16.0;
  double success_rot_deg = 0.5;
  double success_trans_m = 0.1;
  int threads = 1;
};

struct PerturbationRow {
  double magnitude = 0.0;
  int successes = 0;
  int trials = 0;
  double rate = 0.0;
};

struct PerturbationResult {
  PerturbationKind kind = PerturbationKind::Translation;
  std::vector<PerturbationRow> rows;
};

/// Success rate of recovering an injected motion of each magnitude: frame 2
/// is a displaced copy of frame 1, both frames are fitted independently and
/// registered, and the estimate must match the injected motion within the
/// success thresholds. Deterministic given the scene seed.
inline PerturbationResult perturbation_study(const SceneSpec& scene,
                                             const PerturbationConfig& cfg) {
  scene.validate();
  if (cfg.trials < 1) throw std::invalid_argument("perturbation_study: trials >= 1");
  PerturbationResult result;
  result.kind = cfg.kind;
  for (std::size_t mi = 0; mi < cfg.magnitudes.size(); ++mi) {
    const double magnitude = cfg.magnitudes[mi];
    const double displacement = cfg.kind == PerturbationKind::Translation
                                    ? magnitude
                                    : magnitude * M_PI / 180.0 * cfg.rotation_arm;
    std::vector<char> ok(static_cast<std::size_t>(cfg.trials), 0);
    parallel_chunks(static_cast<std::size_t>(cfg.trials), cfg.threads,
                    [&](std::size_t begin, std::size_t end) {
      for (std::size_t trial = begin; trial < end; ++trial) {
        OrganizedCloud cloud1 =
            render_frame(scene, cfg.base_pose, mix_seed(1, mi, trial));
        auto rng = seeded_rng(mix_seed(scene.rng_seed, mix_seed(2, mi, trial)));
        RigidTransform injected = cfg.kind == PerturbationKind::Translation
                                      ? random_translation(magnitude, rng)
                                      : random_rotation(magnitude, rng);
        OrganizedCloud cloud2 = transform_cloud(injected, cloud1);
        FrameFeatures f1 = preprocess_frame(cloud1, cfg.preprocess, mix_seed(3, mi, trial));
        FrameFeatures f2 = preprocess_frame(cloud2, cfg.preprocess, mix_seed(4, mi, trial));
        RegistrationConfig reg = cfg.registration;
        reg.candidate_radius = std::min(cfg.max_candidate_radius,
                                        reg.candidate_radius + cfg.radius_slack * displacement);
        reg.rng_seed = mix_seed(scene.rng_seed, mix_seed(5, mi, trial));
        try {
          RegistrationResult res = register_pair(f1, f2, reg);
          RigidTransform err = compose(invert(injected), res.transform);
          if (rotation_angle_deg(err.rotation()) < cfg.success_rot_deg &&
              err.translation().norm() < cfg.success_trans_m)
            ok[trial] = 1;
        } catch (const RegistrationInfeasibleError&) {
        }
      }
    });
    PerturbationRow row;
    row.magnitude = magnitude;
    row.trials = cfg.trials;
    for (char c : ok) row.successes += c;
    row.rate = static_cast<double>(row.successes) / cfg.trials;
    result.rows.push_back(row);
  }
  return result;
}

struct SparsityConfig {
  std::vector<int> factors{1, 2, 3, 4, 6};
  RigidTransform pose1 = look_at(Point3(2.0, 2.0, 1.5), Point3(6.5, 6.0, 1.5));
  RigidTransform pose2 = look_at(Point3(2.15, 2.1, 1.52), Point3(6.6, 6.0, 1.48));
  PreprocessConfig preprocess;
  double match_threshold = 0.02;  // meters
};

struct SparsityRow {
  int factor = 1;
  std::optional<double> line_ratio;   // absent when a frame has no lines
  std::optional<double> point_ratio;  // absent when a frame has no points
  std::size_t lines = 0;
  std::size_t points = 0;
};

struct SparsityResult {
  std::vector<SparsityRow> rows;
};

namespace detail {

/// Fraction of cloud1 points whose nearest cloud2 point (after mapping
/// cloud1 by `align`) is within `threshold`. Voxel hash, exact distances.
inline std::optional<double> matched_point_fraction(const OrganizedCloud& cloud1,
                                                    const OrganizedCloud& cloud2,
                                                    const RigidTransform& align,
                                                    double threshold) {
  if (cloud1.present_count() == 0 || cloud2.present_count() == 0) return std::nullopt;
  const double cell = threshold;
  auto key = [cell](const Point3& p) {
    auto q = [cell](double v) {
      return static_cast<std::int64_t>(std::floor(v / cell));
    };
    std::uint64_t h = 1469598103934665603ULL;
    for (std::int64_t k : {q(p.x()), q(p.y()), q(p.z())}) {
      h ^= static_cast<std::uint64_t>(k);
      h *= 1099511628211ULL;
    }
    return h;
  };
  std::unordered_map<std::uint64_t, std::vector<Point3>> grid;
  for (int r = 0; r < cloud2.rows(); ++r)
    for (int c = 0; c < cloud2.cols(); ++c)
      if (auto p = cloud2.at(r, c)) grid[key(*p)].push_back(*p);

  std::size_t matched = 0, total = 0;
  const double thr2 = threshold * threshold;
  for (int r = 0; r < cloud1.rows(); ++r) {
    for (int c = 0; c < cloud1.cols(); ++c) {
      auto p = cloud1.at(r, c);
      if (!p) continue;
      ++total;
      Point3 m = align.apply(*p);
      bool hit = false;
      for (int dx = -1; dx <= 1 && !hit; ++dx)
        for (int dy = -1; dy <= 1 && !hit; ++dy)
          for (int dz = -1; dz <= 1 && !hit; ++dz) {
            Point3 probe = m + cell * Point3(dx, dy, dz);
            auto it = grid.find(key(probe));
            if (it == grid.end()) continue;
            for (const Point3& q : it->second)
              if ((q - m).squaredNorm() < thr2) {
                hit = true;
                break;
              }
          }
      if (hit) ++matched;
    }
  }
  return static_cast<double>(matched) / total;
}

}  // namespace detail

/// Inlier-ratio curves under downsampling: two renders from nearby poses are
/// aligned by ground truth, then each frame-1 line (resp. point) counts as
/// matched when its nearest frame-2 line (resp. point) is within threshold.
inline SparsityResult sparsity_inlier_study(const SceneSpec& scene,
                                            const SparsityConfig& cfg) {
  scene.validate();
  RigidTransform align = compose(invert(cfg.pose2), cfg.pose1);  // frame 1 -> frame 2
  OrganizedCloud full1 = render_frame(scene, cfg.pose1, 101);
  OrganizedCloud full2 = render_frame(scene, cfg.pose2, 202);

  SparsityResult result;
  for (std::size_t fi = 0; fi < cfg.factors.size(); ++fi) {
    int f = cfg.factors[fi];
    if (f < 1) throw std::invalid_argument("sparsity_inlier_study: factor must be >= 1");
    OrganizedCloud ds1 = f == 1 ? full1 : downsample(full1, f, f);
    OrganizedCloud ds2 = f == 1 ? full2 : downsample(full2, f, f);
    FrameFeatures f1 = preprocess_frame(ds1, cfg.preprocess, mix_seed(6, fi, 1));
    FrameFeatures f2 = preprocess_frame(ds2, cfg.preprocess, mix_seed(6, fi, 2));

    SparsityRow row;
    row.factor = f;
    row.lines = f1.line_count();
    row.points = ds1.present_count();
    if (f1.line_count() > 0 && f2.line_count() > 0) {
      std::size_t matched = 0;
      for (std::size_t i = 0; i < f1.line_count(); ++i) {
        LineSegment3 moved = transform_segment(align, f1.line(i).segment);
        double best = std::numeric_limits<double>::max();
        for (std::size_t j = 0; j < f2.line_count(); ++j)
          best = std::min(best, segment_distance(moved, f2.line(j).segment));
        if (best < cfg.match_threshold) ++matched;
      }
      row.line_ratio = static_cast<double>(matched) / f1.line_count();
    }
    row.point_ratio =
        detail::matched_point_fraction(ds1, ds2, align, cfg.match_threshold);
    result.rows.push_back(row);
  }
  return result;
}

}  // namespace apreg
