#pragma once

#include <optional>
#include <stdexcept>
#include <vector>

#include "apreg/geometry.hpp"

namespace apreg {

/// Grid-indexed 3D points with missing entries (sensor dropout).
/// Row = ring / image row, column = azimuth bin / image column; points are
/// stored in the sensor's local frame.
class OrganizedCloud {
 public:
  OrganizedCloud() = default;

  OrganizedCloud(int rows, int cols, int frame_id = 0)
      : rows_(rows), cols_(cols), frame_id_(frame_id) {
    if (rows < 0 || cols < 0)
      throw std::invalid_argument("OrganizedCloud: negative dimensions");
    cells_.resize(static_cast<std::size_t>(rows) * static_cast<std::size_t>(cols));
  }

  int rows() const { return rows_; }
  int cols() const { return cols_; }
  int frame_id() const { return frame_id_; }
  void set_frame_id(int id) { frame_id_ = id; }

  bool empty() const { return cells_.empty(); }

  const std::optional<Point3>& at(int r, int c) const { return cells_[index(r, c)]; }

  void set(int r, int c, const Point3& p) {
    if (!p.allFinite()) throw InvalidGeometryError("OrganizedCloud: non-finite point");
    cells_[index(r, c)] = p;
  }

  void clear(int r, int c) { cells_[index(r, c)].reset(); }

  std::size_t present_count() const {
    std::size_t n = 0;
    for (const auto& cell : cells_)
      if (cell) ++n;
    return n;
  }

 private:
  std::size_t index(int r, int c) const {
    if (r < 0 || r >= rows_ || c < 0 || c >= cols_)
      throw std::out_of_range("OrganizedCloud: cell index out of range");
    return static_cast<std::size_t>(r) * static_cast<std::size_t>(cols_) +
           static_cast<std::size_t>(c);
  }

  int rows_ = 0;
  int cols_ = 0;
  int frame_id_ = 0;
  std::vector<std::optional<Point3>> cells_;
};

/// Keeps cell (i*v, j*h) of the input; output dims are ceil(rows/v) x ceil(cols/h).
inline OrganizedCloud downsample(const OrganizedCloud& cloud, int h, int v) {
  if (h < 1 || v < 1) throw std::invalid_argument("downsample: strides must be >= 1");
  int out_rows = (cloud.rows() + v - 1) / v;
  int out_cols = (cloud.cols() + h - 1) / h;
  OrganizedCloud out(out_rows, out_cols, cloud.frame_id());
  for (int i = 0; i < out_rows; ++i) {
    for (int j = 0; j < out_cols; ++j) {
      const auto& cell = cloud.at(i * v, j * h);
      if (cell) out.set(i, j, *cell);
    }
  }
  return out;
}

/// Applies a rigid transform to every present cell.
inline OrganizedCloud transform_cloud(const RigidTransform& t, const OrganizedCloud& cloud) {
  OrganizedCloud out(cloud.rows(), cloud.cols(), cloud.frame_id());
  for (int r = 0; r < cloud.rows(); ++r)
    for (int c = 0; c < cloud.cols(); ++c)
      if (const auto& cell = cloud.at(r, c)) out.set(r, c, t * *cell);
  return out;
}

}  // namespace apreg
