#pragma once

#include <algorithm>
#include <limits>
#include <vector>

#include "apreg/errors.hpp"
#include "apreg/geometry.hpp"

namespace apreg {

/// A segment observed in frame 1 paired with its counterpart in frame 2.
/// Requiring them to touch fixes 1 degree of freedom.
struct LineLinePair {
  LineSegment3 l;  // frame 1
  LineSegment3 g;  // frame 2
};

/// Which frame contributes the corner of a corner/edge pair.
enum class CornerEdgeDirection { CornerInFrame1, EdgeInFrame1 };

/// A corner point paired with an edge line from the other frame. Requiring
/// incidence fixes 2 degrees of freedom.
struct CornerEdgePair {
  Point3 k;           // the corner
  LineSegment3 q;     // the edge line
  CornerEdgeDirection direction = CornerEdgeDirection::CornerInFrame1;
};

struct ConstraintSet {
  std::vector<LineLinePair> line_pairs;
  std::vector<CornerEdgePair> corner_edge_pairs;

  int dof() const {
    return static_cast<int>(line_pairs.size()) +
           2 * static_cast<int>(corner_edge_pairs.size());
  }
  std::size_t size() const { return line_pairs.size() + corner_edge_pairs.size(); }
  bool empty() const { return line_pairs.empty() && corner_edge_pairs.empty(); }
};

struct ApConfig {
  double epsilon = 1e-3;      // meters; max residual at convergence
  int max_iterations = 30000;
  bool bilateral = true;      // move both frames toward each other
  int stall_window = 100;     // iterations between stagnation checks
  double stall_min_improvement = 1e-3;  // required relative residual drop per window

  void validate() const {
    if (epsilon <= 0.0) throw std::invalid_argument("ApConfig: epsilon must be > 0");
    if (max_iterations < 1)
      throw std::invalid_argument("ApConfig: max_iterations must be >= 1");
    if (stall_window < 1)
      throw std::invalid_argument("ApConfig: stall_window must be >= 1");
    if (stall_min_improvement < 0.0)
      throw std::invalid_argument("ApConfig: stall_min_improvement must be >= 0");
  }
};

struct ApResult {
  RigidTransform transform;  // maps frame-1 coordinates into frame 2
  bool converged = false;    // final_delta <= epsilon
  int iterations = 0;
  double final_delta = 0.0;  // max constraint residual at exit
};

/// Translation that brings l into contact with g, evaluated at their
/// closest points.
inline Point3 line_line_projection(const LineSegment3& l, const LineSegment3& g) {
  auto cp = closest_points_segments(l, g);
  return cp.n - cp.m;
}

/// Translation that puts k onto q.
inline Point3 corner_edge_projection(const Point3& k, const LineSegment3& q) {
  return point_to_segment(k, q).p - k;
}

/// Worst constraint residual after applying t to the frame-1 side.
inline double residual_delta(const ConstraintSet& cs, const RigidTransform& t) {
  double d = 0.0;
  for (const auto& p : cs.line_pairs)
    d = std::max(d, segment_distance(transform_segment(t, p.l), p.g));
  for (const auto& p : cs.corner_edge_pairs) {
    double r = p.direction == CornerEdgeDirection::CornerInFrame1
                   ? point_to_segment(t * p.k, p.q).distance
                   : point_to_segment(p.k, transform_segment(t, p.q)).distance;
    d = std::max(d, r);
  }
  return d;
}

/// Alternating-projection rigid solve. Each iteration computes one
/// projection translation per pair, displaces the frame-1 landmark points
/// (segment endpoints plus corners) by it, rigidly aligns the landmarks
/// onto their displaced copies, and applies that alignment to every frame-1
/// primitive; the worst post-update residual drives termination. In
/// bilateral mode each side covers half the displacement and the returned
/// transform composes the two accumulated motions. Degenerate landmark
/// geometry ends the solve with the transform accumulated so far.
inline ApResult ap_solve(const ConstraintSet& constraints, const ApConfig& cfg) {
  cfg.validate();
  if (constraints.empty()) throw std::invalid_argument("ap_solve: empty constraint set");

  ConstraintSet work = constraints;
  const std::size_t n_lines = work.line_pairs.size();
  const std::size_t n_corners = work.corner_edge_pairs.size();
  const double step = cfg.bilateral ? 0.5 : 1.0;

  std::vector<Point3> moves(n_lines + n_corners);  // full projection translations
  auto current_delta = [&]() {
    double d = 0.0;
    for (const auto& p : work.line_pairs) d = std::max(d, segment_distance(p.l, p.g));
    for (const auto& p : work.corner_edge_pairs)
      d = std::max(d, point_to_segment(p.k, p.q).distance);
    return d;
  };

  RigidTransform a1, a2;
  std::vector<Point3> src, dst;
  int iterations = 0;
  double delta = std::numeric_limits<double>::max();
  double window_anchor = delta;
  bool rank_failed = false;

  while (iterations < cfg.max_iterations) {
    for (std::size_t i = 0; i < n_lines; ++i)
      moves[i] = line_line_projection(work.line_pairs[i].l, work.line_pairs[i].g);
    for (std::size_t j = 0; j < n_corners; ++j)
      moves[n_lines + j] = corner_edge_projection(work.corner_edge_pairs[j].k,
                                                  work.corner_edge_pairs[j].q);

    // Frame-1 landmarks and their displaced copies. For corner/edge pairs
    // the movable element depends on the direction tag; the projection
    // translation is defined on the corner, so the edge moves by its
    // negative.
    src.clear();
    dst.clear();
    for (std::size_t i = 0; i < n_lines; ++i) {
      const auto& p = work.line_pairs[i];
      const Point3 d = step * moves[i];
      src.push_back(p.l.a());
      dst.push_back(p.l.a() + d);
      src.push_back(p.l.b());
      dst.push_back(p.l.b() + d);
    }
    for (std::size_t j = 0; j < n_corners; ++j) {
      const auto& p = work.corner_edge_pairs[j];
      if (p.direction == CornerEdgeDirection::CornerInFrame1) {
        const Point3 d = step * moves[n_lines + j];
        src.push_back(p.k);
        dst.push_back(p.k + d);
      } else {
        const Point3 d = -step * moves[n_lines + j];
        src.push_back(p.q.a());
        dst.push_back(p.q.a() + d);
        src.push_back(p.q.b());
        dst.push_back(p.q.b() + d);
      }
    }

    RigidTransform t1;
    try {
      t1 = procrustes_align(src, dst);
    } catch (const RankDeficiencyError&) {
      rank_failed = true;
      break;
    }
    a1 = compose(t1, a1);
    for (auto& p : work.line_pairs) p.l = transform_segment(t1, p.l);
    for (auto& p : work.corner_edge_pairs) {
      if (p.direction == CornerEdgeDirection::CornerInFrame1)
        p.k = t1 * p.k;
      else
        p.q = transform_segment(t1, p.q);
    }

    if (cfg.bilateral) {
      src.clear();
      dst.clear();
      for (std::size_t i = 0; i < n_lines; ++i) {
        const auto& p = work.line_pairs[i];
        const Point3 d = -0.5 * moves[i];
        src.push_back(p.g.a());
        dst.push_back(p.g.a() + d);
        src.push_back(p.g.b());
        dst.push_back(p.g.b() + d);
      }
      for (std::size_t j = 0; j < n_corners; ++j) {
        const auto& p = work.corner_edge_pairs[j];
        if (p.direction == CornerEdgeDirection::CornerInFrame1) {
          const Point3 d = -0.5 * moves[n_lines + j];
          src.push_back(p.q.a());
          dst.push_back(p.q.a() + d);
          src.push_back(p.q.b());
          dst.push_back(p.q.b() + d);
        } else {
          const Point3 d = 0.5 * moves[n_lines + j];
          src.push_back(p.k);
          dst.push_back(p.k + d);
        }
      }
      RigidTransform t2;
      try {
        t2 = procrustes_align(src, dst);
      } catch (const RankDeficiencyError&) {
        rank_failed = true;
        break;
      }
      a2 = compose(t2, a2);
      for (auto& p : work.line_pairs) p.g = transform_segment(t2, p.g);
      for (auto& p : work.corner_edge_pairs) {
        if (p.direction == CornerEdgeDirection::CornerInFrame1)
          p.q = transform_segment(t2, p.q);
        else
          p.k = t2 * p.k;
      }
    }

    ++iterations;
    delta = current_delta();
    if (delta <= cfg.epsilon) break;

    if (iterations % 100 == 0) {
      a1 = RigidTransform(orthonormalized(a1.rotation()), a1.translation());
      a2 = RigidTransform(orthonormalized(a2.rotation()), a2.translation());
    }
    if (iterations % cfg.stall_window == 0) {
      if (window_anchor - delta < cfg.stall_min_improvement * window_anchor) break;
      window_anchor = delta;
    }
  }

  if (rank_failed) delta = current_delta();

  ApResult result;
  result.transform = compose(invert(a2), a1);
  result.iterations = iterations;
  result.final_delta = delta;
  result.converged = delta <= cfg.epsilon;
  return result;
}

}  // namespace apreg
