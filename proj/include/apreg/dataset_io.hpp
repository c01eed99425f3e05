#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Geometry>
#include <opencv2/imgcodecs.hpp>

#include "apreg/errors.hpp"
#include "apreg/geometry.hpp"
#include "apreg/organized_cloud.hpp"

namespace apreg {

struct CameraIntrinsics {
  double fx = 525.0;
  double fy = 525.0;
  double cx = 319.5;
  double cy = 239.5;
  int width = 640;
  int height = 480;
};

inline constexpr double kDefaultDepthScale = 1.0 / 5000.0;  // meters per stored unit

struct LidarGridSpec {
  int rings = 64;
  int azimuth_bins = 2000;
  std::vector<double> elevation_deg;  // per-ring table, top first; empty = auto-detect
  double min_range = 0.5;             // meters
  double max_range = 120.0;
};

struct LidarBinStats {
  std::size_t records = 0;
  std::size_t binned = 0;
  std::size_t dropped_nonfinite = 0;
  std::size_t dropped_range = 0;
  std::size_t collisions = 0;  // later point lost to a nearer one in the same cell
};

using DepthImage =
    Eigen::Matrix<std::uint16_t, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Writes text atomically: temp file in the same directory, then rename.
inline void atomic_write_text(const std::filesystem::path& path,
                              const std::string& content) {
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw DatasetError("cannot open for writing: " + tmp.string());
    out << content;
    if (!out.flush()) throw DatasetError("write failed: " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

inline DepthImage read_depth_png_raw(const std::filesystem::path& path) {
  cv::Mat img = cv::imread(path.string(), cv::IMREAD_UNCHANGED);
  if (img.empty()) throw DatasetError("cannot read depth image: " + path.string());
  if (img.type() != CV_16UC1)
    throw DatasetError("depth image is not 16-bit single channel: " + path.string());
  DepthImage depth(img.rows, img.cols);
  for (int r = 0; r < img.rows; ++r)
    for (int c = 0; c < img.cols; ++c) depth(r, c) = img.at<std::uint16_t>(r, c);
  return depth;
}

inline void write_depth_png(const std::filesystem::path& path, const DepthImage& depth) {
  cv::Mat img(static_cast<int>(depth.rows()), static_cast<int>(depth.cols()), CV_16UC1);
  for (int r = 0; r < img.rows; ++r)
    for (int c = 0; c < img.cols; ++c) img.at<std::uint16_t>(r, c) = depth(r, c);
  std::filesystem::path tmp = path;
  tmp += ".tmp.png";
  if (!cv::imwrite(tmp.string(), img))
    throw DatasetError("cannot write depth image: " + path.string());
  std::filesystem::rename(tmp, path);
}

/// Back-projects a depth image through the pinhole model; depth_scale is
/// meters per stored unit. Zero depth marks a missing cell.
inline OrganizedCloud depth_to_cloud(const DepthImage& depth,
                                     const CameraIntrinsics& intr, double depth_scale,
                                     int frame_id = 0) {
  if (depth_scale <= 0.0) throw std::invalid_argument("depth_to_cloud: bad scale");
  if (intr.fx <= 0.0 || intr.fy <= 0.0)
    throw std::invalid_argument("depth_to_cloud: bad focal length");
  OrganizedCloud cloud(static_cast<int>(depth.rows()), static_cast<int>(depth.cols()),
                       frame_id);
  for (int v = 0; v < cloud.rows(); ++v) {
    for (int u = 0; u < cloud.cols(); ++u) {
      std::uint16_t raw = depth(v, u);
      if (raw == 0) continue;
      double z = static_cast<double>(raw) * depth_scale;
      cloud.set(v, u,
                Point3((u - intr.cx) * z / intr.fx, (v - intr.cy) * z / intr.fy, z));
    }
  }
  return cloud;
}

inline OrganizedCloud read_depth_png(const std::filesystem::path& path,
                                     const CameraIntrinsics& intr,
                                     double depth_scale = kDefaultDepthScale,
                                     int frame_id = 0) {
  DepthImage depth = read_depth_png_raw(path);
  if (depth.rows() != intr.height || depth.cols() != intr.width)
    throw DatasetError("depth image is " + std::to_string(depth.cols()) + "x" +
                       std::to_string(depth.rows()) + ", expected " +
                       std::to_string(intr.width) + "x" + std::to_string(intr.height) +
                       ": " + path.string());
  return depth_to_cloud(depth, intr, depth_scale, frame_id);
}

inline std::vector<Eigen::Vector4f> read_lidar_bin(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary | std::ios::ate);
  if (!in) throw DatasetError("cannot read scan: " + path.string());
  std::streamsize bytes = in.tellg();
  if (bytes < 0 || bytes % 16 != 0)
    throw DatasetError("scan size is not a multiple of 16 bytes: " + path.string());
  in.seekg(0);
  std::vector<Eigen::Vector4f> points(static_cast<std::size_t>(bytes / 16));
  if (!points.empty() &&
      !in.read(reinterpret_cast<char*>(points.data()), bytes))
    throw DatasetError("short read: " + path.string());
  return points;
}

inline void write_lidar_bin(const std::filesystem::path& path,
                            const std::vector<Eigen::Vector4f>& points) {
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw DatasetError("cannot open for writing: " + tmp.string());
    if (!points.empty())
      out.write(reinterpret_cast<const char*>(points.data()),
                static_cast<std::streamsize>(points.size() * 16));
    if (!out.flush()) throw DatasetError("write failed: " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

namespace detail {

/// 1D k-means (Lloyd's with quantile init) on sorted values; returns at most
/// k centers, ascending. Deterministic.
inline std::vector<double> kmeans_1d(std::vector<double> values, int k) {
  std::sort(values.begin(), values.end());
  values.erase(std::unique(values.begin(), values.end()), values.end());
  const std::size_t n = values.size();
  if (n == 0) return {};
  const std::size_t kk = std::min<std::size_t>(static_cast<std::size_t>(k), n);
  std::vector<double> centers(kk);
  for (std::size_t i = 0; i < kk; ++i)
    centers[i] = values[i * (n - 1) / (kk > 1 ? kk - 1 : 1)];
  std::vector<double> prefix(n + 1, 0.0);
  for (std::size_t i = 0; i < n; ++i) prefix[i + 1] = prefix[i] + values[i];
  for (int iter = 0; iter < 100; ++iter) {
    // In 1D, cluster boundaries are midpoints between adjacent centers.
    std::vector<double> next(kk);
    bool changed = false;
    std::size_t begin = 0;
    for (std::size_t c = 0; c < kk; ++c) {
      std::size_t end = n;
      if (c + 1 < kk) {
        double boundary = 0.5 * (centers[c] + centers[c + 1]);
        end = static_cast<std::size_t>(
            std::upper_bound(values.begin() + begin, values.end(), boundary) -
            values.begin());
      }
      next[c] = end > begin ? (prefix[end] - prefix[begin]) / (end - begin) : centers[c];
      if (std::abs(next[c] - centers[c]) > 1e-12) changed = true;
      begin = end;
    }
    centers = std::move(next);
    if (!changed) break;
  }
  return centers;
}

inline std::size_t nearest_index(const std::vector<double>& sorted, double v) {
  auto it = std::lower_bound(sorted.begin(), sorted.end(), v);
  if (it == sorted.begin()) return 0;
  if (it == sorted.end()) return sorted.size() - 1;
  std::size_t hi = static_cast<std::size_t>(it - sorted.begin());
  return (v - sorted[hi - 1] <= sorted[hi] - v) ? hi - 1 : hi;
}

}  // namespace detail

/// Bins an unordered scan into a ring x azimuth grid, keeping the nearest
/// return per cell. Ring index comes from the per-ring elevation table (top
/// ring first), or from 1D k-means clustering of observed elevations when no
/// table is given.
inline OrganizedCloud organize_lidar(const std::vector<Eigen::Vector4f>& points,
                                     const LidarGridSpec& grid, int frame_id = 0,
                                     LidarBinStats* stats = nullptr) {
  if (grid.rings < 1 || grid.azimuth_bins < 1)
    throw std::invalid_argument("organize_lidar: bad grid spec");
  if (!grid.elevation_deg.empty() &&
      grid.elevation_deg.size() != static_cast<std::size_t>(grid.rings))
    throw std::invalid_argument("organize_lidar: elevation table size != rings");

  LidarBinStats local;
  local.records = points.size();
  auto elevation_of = [](const Point3& q, double r) {
    return std::asin(std::clamp(q.z() / r, -1.0, 1.0)) * 180.0 / M_PI;
  };

  std::vector<double> ascending;  // ring elevations, ascending for binary search
  std::vector<int> row_of;        // ascending index -> grid row (top ring = row 0)
  if (!grid.elevation_deg.empty()) {
    ascending = grid.elevation_deg;
    std::vector<std::size_t> order(ascending.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return ascending[a] < ascending[b]; });
    std::vector<double> sorted(order.size());
    row_of.resize(order.size());
    for (std::size_t i = 0; i < order.size(); ++i) {
      sorted[i] = ascending[order[i]];
      row_of[i] = static_cast<int>(order[i]);
    }
    ascending = std::move(sorted);
  } else {
    std::vector<double> elevations;
    elevations.reserve(points.size());
    for (const auto& p : points) {
      Point3 q(p.x(), p.y(), p.z());
      if (!q.allFinite()) continue;
      double r = q.norm();
      if (r < grid.min_range || r > grid.max_range) continue;
      elevations.push_back(elevation_of(q, r));
    }
    ascending = detail::kmeans_1d(std::move(elevations), grid.rings);
    row_of.resize(ascending.size());
    for (std::size_t i = 0; i < ascending.size(); ++i)
      row_of[i] = static_cast<int>(ascending.size() - 1 - i);  // highest ring on top
  }

  OrganizedCloud cloud(grid.rings, grid.azimuth_bins, frame_id);
  std::vector<double> cell_range(
      static_cast<std::size_t>(grid.rings) * static_cast<std::size_t>(grid.azimuth_bins),
      std::numeric_limits<double>::max());
  for (const auto& p : points) {
    Point3 q(p.x(), p.y(), p.z());
    if (!q.allFinite()) {
      ++local.dropped_nonfinite;
      continue;
    }
    double r = q.norm();
    if (r < grid.min_range || r > grid.max_range) {
      ++local.dropped_range;
      continue;
    }
    if (ascending.empty()) {
      ++local.dropped_range;
      continue;
    }
    int row = row_of[detail::nearest_index(ascending, elevation_of(q, r))];
    double az = std::atan2(q.y(), q.x());
    int col = static_cast<int>(std::floor((az + M_PI) / (2.0 * M_PI) * grid.azimuth_bins));
    col = ((col % grid.azimuth_bins) + grid.azimuth_bins) % grid.azimuth_bins;
    std::size_t idx = static_cast<std::size_t>(row) * grid.azimuth_bins + col;
    if (r < cell_range[idx]) {
      if (cell_range[idx] != std::numeric_limits<double>::max()) ++local.collisions;
      cell_range[idx] = r;
      cloud.set(row, col, q);
    } else {
      ++local.collisions;
    }
  }
  local.binned = cloud.present_count();
  if (stats) *stats = local;
  return cloud;
}

struct TimedPose {
  double timestamp = 0.0;
  RigidTransform pose;  // sensor-to-world
};

/// Lines of "timestamp tx ty tz qx qy qz qw"; '#' comments skipped.
inline std::vector<TimedPose> read_tum_trajectory(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DatasetError("cannot read trajectory: " + path.string());
  std::vector<TimedPose> out;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::size_t start = line.find_first_not_of(" \t\r");
    if (start == std::string::npos || line[start] == '#') continue;
    std::istringstream ss(line);
    double ts, tx, ty, tz, qx, qy, qz, qw;
    if (!(ss >> ts >> tx >> ty >> tz >> qx >> qy >> qz >> qw))
      throw DatasetError(path.string() + ":" + std::to_string(line_no) +
                         ": expected 8 fields");
    Eigen::Quaterniond q(qw, qx, qy, qz);
    if (q.norm() < 1e-6)
      throw DatasetError(path.string() + ":" + std::to_string(line_no) +
                         ": degenerate quaternion");
    if (!out.empty() && ts <= out.back().timestamp)
      throw DatasetError(path.string() + ":" + std::to_string(line_no) +
                         ": timestamps must be strictly increasing");
    q.normalize();
    out.push_back({ts, RigidTransform(q.toRotationMatrix(), Point3(tx, ty, tz))});
  }
  return out;
}

inline void write_tum_trajectory(const std::filesystem::path& path,
                                 const std::vector<TimedPose>& poses) {
  std::string content;
  char buf[256];
  for (const auto& tp : poses) {
    Eigen::Quaterniond q(tp.pose.rotation());
    q.normalize();
    const Point3& t = tp.pose.translation();
    std::snprintf(buf, sizeof(buf), "%.6f %.9f %.9f %.9f %.9f %.9f %.9f %.9f\n",
                  tp.timestamp, t.x(), t.y(), t.z(), q.x(), q.y(), q.z(), q.w());
    content += buf;
  }
  atomic_write_text(path, content);
}

/// Lines of 12 values: the upper 3x4 of a sensor-to-world matrix, row major.
inline std::vector<RigidTransform> read_kitti_trajectory(
    const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DatasetError("cannot read trajectory: " + path.string());
  std::vector<RigidTransform> out;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    std::istringstream ss(line);
    double v[12];
    for (int i = 0; i < 12; ++i)
      if (!(ss >> v[i]))
        throw DatasetError(path.string() + ":" + std::to_string(line_no) +
                           ": expected 12 fields");
    Mat3 r;
    r << v[0], v[1], v[2], v[4], v[5], v[6], v[8], v[9], v[10];
    Mat3 fixed = orthonormalized(r);
    if ((fixed - r).cwiseAbs().maxCoeff() > 1e-3)
      throw DatasetError(path.string() + ":" + std::to_string(line_no) +
                         ": rotation block is not orthonormal");
    out.emplace_back(fixed, Point3(v[3], v[7], v[11]));
  }
  return out;
}

inline void write_kitti_trajectory(const std::filesystem::path& path,
                                   const std::vector<RigidTransform>& poses) {
  std::string content;
  char buf[512];
  for (const auto& p : poses) {
    const Mat3& r = p.rotation();
    const Point3& t = p.translation();
    std::snprintf(buf, sizeof(buf),
                  "%.9e %.9e %.9e %.9e %.9e %.9e %.9e %.9e %.9e %.9e %.9e %.9e\n",
                  r(0, 0), r(0, 1), r(0, 2), t.x(), r(1, 0), r(1, 1), r(1, 2), t.y(),
                  r(2, 0), r(2, 1), r(2, 2), t.z());
    content += buf;
  }
  atomic_write_text(path, content);
}

struct TimedFile {
  double timestamp = 0.0;
  std::string path;
};

/// Index files of "timestamp relative/path" rows, as shipped next to depth
/// image folders.
inline std::vector<TimedFile> read_file_index(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DatasetError("cannot read index: " + path.string());
  std::vector<TimedFile> out;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::size_t start = line.find_first_not_of(" \t\r");
    if (start == std::string::npos || line[start] == '#') continue;
    std::istringstream ss(line);
    TimedFile f;
    if (!(ss >> f.timestamp >> f.path))
      throw DatasetError(path.string() + ":" + std::to_string(line_no) +
                         ": expected timestamp and path");
    out.push_back(std::move(f));
  }
  return out;
}

inline std::vector<std::filesystem::path> list_files_sorted(
    const std::filesystem::path& dir, const std::string& extension) {
  if (!std::filesystem::is_directory(dir))
    throw DatasetError("not a directory: " + dir.string());
  std::vector<std::filesystem::path> out;
  for (const auto& entry : std::filesystem::directory_iterator(dir))
    if (entry.is_regular_file() && entry.path().extension() == extension)
      out.push_back(entry.path());
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace apreg
