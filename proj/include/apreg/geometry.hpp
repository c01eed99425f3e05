#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <span>
#include <stdexcept>

#include "apreg/errors.hpp"

namespace apreg {

using Point3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;

/// Segments shorter than this are rejected: their direction vector is
/// too ill-conditioned to project onto.
inline constexpr double kMinSegmentLength = 1e-6;

/// Elementwise tolerance for R^T R = I and |det(R) - 1|.
inline constexpr double kRotationTol = 1e-9;

inline bool is_rotation(const Mat3& r, double tol = kRotationTol) {
  Mat3 e = r.transpose() * r - Mat3::Identity();
  return e.cwiseAbs().maxCoeff() <= tol && std::abs(r.determinant() - 1.0) <= tol;
}

/// Nearest rotation to an arbitrary matrix (polar projection, det +1).
inline Mat3 orthonormalized(const Mat3& m) {
  Eigen::JacobiSVD<Mat3> svd(m, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Mat3 u = svd.matrixU();
  Mat3 v = svd.matrixV();
  Mat3 r = u * v.transpose();
  if (r.determinant() < 0.0) {
    u.col(2) *= -1.0;
    r = u * v.transpose();
  }
  return r;
}

/// 6-DOF pose: p' = R p + t. Construction validates orthonormality and
/// det +1 so downstream code never sees a reflection or a sheared frame.
class RigidTransform {
 public:
  RigidTransform() : rotation_(Mat3::Identity()), translation_(Point3::Zero()) {}

  RigidTransform(const Mat3& rotation, const Point3& translation)
      : rotation_(rotation), translation_(translation) {
    if (!rotation_.allFinite() || !translation_.allFinite())
      throw InvalidGeometryError("rigid transform has non-finite entries");
    if (!is_rotation(rotation_))
      throw InvalidGeometryError("rotation is not orthonormal with det +1");
  }

  static RigidTransform identity() { return RigidTransform(); }

  const Mat3& rotation() const { return rotation_; }
  const Point3& translation() const { return translation_; }

  Point3 apply(const Point3& p) const { return rotation_ * p + translation_; }
  Point3 operator*(const Point3& p) const { return apply(p); }

 private:
  Mat3 rotation_;
  Point3 translation_;
};

/// compose(t1, t2) applies t2 first, then t1.
inline RigidTransform compose(const RigidTransform& t1, const RigidTransform& t2) {
  return RigidTransform(t1.rotation() * t2.rotation(),
                        t1.rotation() * t2.translation() + t1.translation());
}

inline RigidTransform invert(const RigidTransform& t) {
  Mat3 rt = t.rotation().transpose();
  return RigidTransform(rt, -(rt * t.translation()));
}

inline RigidTransform operator*(const RigidTransform& t1, const RigidTransform& t2) {
  return compose(t1, t2);
}

/// Rotation angle in degrees. atan2 of the skew-symmetric part against the
/// trace stays accurate at both tiny and near-pi angles, where the plain
/// arccos form loses half the significant digits.
inline double rotation_angle_deg(const Mat3& r) {
  double s = 0.5 * Point3(r(2, 1) - r(1, 2), r(0, 2) - r(2, 0), r(1, 0) - r(0, 1)).norm();
  double c = (r.trace() - 1.0) * 0.5;
  return std::atan2(s, c) * 180.0 / M_PI;
}

inline double rotation_angle_deg(const RigidTransform& a, const RigidTransform& b) {
  return rotation_angle_deg(Mat3(a.rotation().transpose() * b.rotation()));
}

/// Endpoint-parameterized 3D segment; the unit of re-parameterized scan
/// data. Endpoints must be farther apart than kMinSegmentLength.
class LineSegment3 {
 public:
  LineSegment3(const Point3& a, const Point3& b) : a_(a), b_(b) {
    if (!a_.allFinite() || !b_.allFinite())
      throw InvalidGeometryError("segment endpoint is non-finite");
    if ((b_ - a_).norm() <= kMinSegmentLength)
      throw InvalidGeometryError("degenerate segment (endpoints coincide)");
  }

  const Point3& a() const { return a_; }
  const Point3& b() const { return b_; }

  Point3 direction() const { return b_ - a_; }
  double length() const { return (b_ - a_).norm(); }
  Point3 point_at(double s) const { return a_ + s * (b_ - a_); }

 private:
  Point3 a_;
  Point3 b_;
};

inline LineSegment3 transform_segment(const RigidTransform& t, const LineSegment3& s) {
  return LineSegment3(t * s.a(), t * s.b());
}

inline LineSegment3 translate_segment(const LineSegment3& s, const Point3& d) {
  return LineSegment3(s.a() + d, s.b() + d);
}

struct SegmentClosestPair {
  Point3 m;        // closest point on the first segment
  Point3 n;        // closest point on the second segment
  double distance; // |m - n|
};

struct PointSegmentProjection {
  Point3 p;        // point on the segment nearest to the query
  double distance; // |k - p|
};

/// Nearest point on segment s to query k, clamped to the segment extent.
inline PointSegmentProjection point_to_segment(const Point3& k, const LineSegment3& s) {
  Point3 d = s.direction();
  double t = (k - s.a()).dot(d) / d.squaredNorm();
  t = std::clamp(t, 0.0, 1.0);
  Point3 p = s.a() + t * d;
  return {p, (k - p).norm()};
}

/// Closest pair of points between two segments.
///
/// Parallel segments are resolved deterministically: the midpoint of the
/// overlapping parameter interval, or the nearest endpoints when the
/// projections are disjoint.
inline SegmentClosestPair closest_points_segments(const LineSegment3& s1,
                                                  const LineSegment3& s2) {
  const Point3 d1 = s1.direction();
  const Point3 d2 = s2.direction();
  const Point3 r = s1.a() - s2.a();
  const double a = d1.squaredNorm();
  const double e = d2.squaredNorm();
  const double b = d1.dot(d2);
  const double c = d1.dot(r);
  const double f = d2.dot(r);
  const double denom = a * e - b * b;

  if (denom <= 1e-12 * a * e) {
    // Parallel. Project s2's endpoints onto s1's parameterization.
    double u0 = (s2.a() - s1.a()).dot(d1) / a;
    double u1 = (s2.b() - s1.a()).dot(d1) / a;
    double lo = std::max(0.0, std::min(u0, u1));
    double hi = std::min(1.0, std::max(u0, u1));
    double s;
    if (lo <= hi) {
      s = 0.5 * (lo + hi);
    } else {
      s = (std::max(u0, u1) < 0.0) ? 0.0 : 1.0;
    }
    Point3 m = s1.point_at(s);
    auto proj = point_to_segment(m, s2);
    return {m, proj.p, proj.distance};
  }

  double s = std::clamp((b * f - c * e) / denom, 0.0, 1.0);
  double t = (b * s + f) / e;
  if (t < 0.0) {
    t = 0.0;
    s = std::clamp(-c / a, 0.0, 1.0);
  } else if (t > 1.0) {
    t = 1.0;
    s = std::clamp((b - c) / a, 0.0, 1.0);
  }
  Point3 m = s1.point_at(s);
  Point3 n = s2.point_at(t);
  return {m, n, (m - n).norm()};
}

inline double segment_distance(const LineSegment3& s1, const LineSegment3& s2) {
  return closest_points_segments(s1, s2).distance;
}

/// Least-squares rigid alignment T minimizing sum |T * source_i - target_i|^2
/// (centroid translation + Orthogonal Procrustes rotation, reflection
/// excluded via sign correction on the smallest singular direction).
inline RigidTransform procrustes_align(std::span<const Point3> source,
                                       std::span<const Point3> target) {
  if (source.size() != target.size())
    throw std::invalid_argument("procrustes_align: size mismatch");
  const std::size_t n = source.size();
  if (n < 3) throw RankDeficiencyError("procrustes_align: fewer than 3 points");

  Point3 cs = Point3::Zero();
  Point3 ct = Point3::Zero();
  for (std::size_t i = 0; i < n; ++i) {
    cs += source[i];
    ct += target[i];
  }
  cs /= static_cast<double>(n);
  ct /= static_cast<double>(n);

  Mat3 h = Mat3::Zero();
  for (std::size_t i = 0; i < n; ++i) {
    h.noalias() += (source[i] - cs) * (target[i] - ct).transpose();
  }

  Eigen::JacobiSVD<Mat3> svd(h, Eigen::ComputeFullU | Eigen::ComputeFullV);
  const auto& sv = svd.singularValues();
  if (sv(0) < 1e-15 || sv(1) <= 1e-10 * sv(0))
    throw RankDeficiencyError("procrustes_align: collinear or degenerate points");

  Mat3 u = svd.matrixU();
  Mat3 v = svd.matrixV();
  Mat3 rot = v * u.transpose();
  if (rot.determinant() < 0.0) {
    v.col(2) *= -1.0;
    rot = v * u.transpose();
  }
  return RigidTransform(rot, ct - rot * cs);
}

}  // namespace apreg
