#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <span>
#include <utility>
#include <vector>

#include "apreg/dataset_io.hpp"
#include "apreg/geometry.hpp"

namespace apreg {

struct ErrorStats {
  double rmse = 0.0;
  double mean = 0.0;
  double median = 0.0;
  double stddev = 0.0;
  double min = 0.0;
  double max = 0.0;
  int count = 0;
};

inline ErrorStats compute_stats(std::vector<double> values) {
  ErrorStats s;
  s.count = static_cast<int>(values.size());
  if (values.empty()) return s;
  std::sort(values.begin(), values.end());
  s.min = values.front();
  s.max = values.back();
  std::size_t mid = values.size() / 2;
  s.median = values.size() % 2 == 1 ? values[mid] : 0.5 * (values[mid - 1] + values[mid]);
  double sum = 0.0, sq = 0.0;
  for (double v : values) {
    sum += v;
    sq += v * v;
  }
  s.mean = sum / static_cast<double>(values.size());
  s.rmse = std::sqrt(sq / static_cast<double>(values.size()));
  double var = 0.0;
  for (double v : values) var += (v - s.mean) * (v - s.mean);
  s.stddev = std::sqrt(var / static_cast<double>(values.size()));
  return s;
}

/// Greedy bipartite matching of timestamps: all pairs within max_time_diff,
/// claimed in order of increasing time offset; returns (gt index, est index)
/// pairs sorted by gt time.
inline std::vector<std::pair<int, int>> associate_trajectories(
    const std::vector<TimedPose>& gt, const std::vector<TimedPose>& est,
    double max_time_diff = 0.02) {
  struct Cand {
    double dt;
    int gi;
    int ei;
  };
  std::vector<Cand> cands;
  std::vector<double> gt_times;
  gt_times.reserve(gt.size());
  for (const auto& p : gt) gt_times.push_back(p.timestamp);
  for (int ei = 0; ei < static_cast<int>(est.size()); ++ei) {
    double t = est[static_cast<std::size_t>(ei)].timestamp;
    auto lo = std::lower_bound(gt_times.begin(), gt_times.end(), t - max_time_diff);
    auto hi = std::upper_bound(gt_times.begin(), gt_times.end(), t + max_time_diff);
    for (auto it = lo; it != hi; ++it) {
      int gi = static_cast<int>(it - gt_times.begin());
      cands.push_back({std::abs(*it - t), gi, ei});
    }
  }
  std::sort(cands.begin(), cands.end(), [](const Cand& a, const Cand& b) {
    if (a.dt != b.dt) return a.dt < b.dt;
    if (a.gi != b.gi) return a.gi < b.gi;
    return a.ei < b.ei;
  });
  std::vector<bool> gt_used(gt.size(), false), est_used(est.size(), false);
  std::vector<std::pair<int, int>> matches;
  for (const auto& c : cands) {
    if (gt_used[static_cast<std::size_t>(c.gi)] || est_used[static_cast<std::size_t>(c.ei)])
      continue;
    gt_used[static_cast<std::size_t>(c.gi)] = true;
    est_used[static_cast<std::size_t>(c.ei)] = true;
    matches.emplace_back(c.gi, c.ei);
  }
  std::sort(matches.begin(), matches.end());
  return matches;
}

struct RpeResult {
  ErrorStats translation;    // meters
  ErrorStats rotation_deg;
  std::vector<double> translation_residuals;  // one per evaluated pair
  std::vector<double> rotation_residuals;
  int pairs = 0;
};

/// Relative pose error over matched poses delta_frames apart:
/// E = (Q_i^-1 Q_j)^-1 (P_i^-1 P_j) with Q ground truth and P estimate.
inline RpeResult relative_pose_error(const std::vector<TimedPose>& gt,
                                     const std::vector<TimedPose>& est,
                                     int delta_frames = 1,
                                     double max_time_diff = 0.02) {
  if (delta_frames < 1)
    throw std::invalid_argument("relative_pose_error: delta_frames must be >= 1");
  auto matches = associate_trajectories(gt, est, max_time_diff);
  if (matches.size() < 2)
    throw std::invalid_argument("relative_pose_error: fewer than 2 matched poses");
  RpeResult out;
  for (std::size_t k = 0; k + static_cast<std::size_t>(delta_frames) < matches.size();
       ++k) {
    const auto& [gi, ei] = matches[k];
    const auto& [gj, ej] = matches[k + static_cast<std::size_t>(delta_frames)];
    RigidTransform dq = compose(invert(gt[static_cast<std::size_t>(gi)].pose),
                                gt[static_cast<std::size_t>(gj)].pose);
    RigidTransform dp = compose(invert(est[static_cast<std::size_t>(ei)].pose),
                                est[static_cast<std::size_t>(ej)].pose);
    RigidTransform e = compose(invert(dq), dp);
    out.translation_residuals.push_back(e.translation().norm());
    out.rotation_residuals.push_back(rotation_angle_deg(e.rotation()));
  }
  out.pairs = static_cast<int>(out.translation_residuals.size());
  out.translation = compute_stats(out.translation_residuals);
  out.rotation_deg = compute_stats(out.rotation_residuals);
  return out;
}

inline double trajectory_length(std::span<const RigidTransform> poses) {
  double len = 0.0;
  for (std::size_t i = 1; i < poses.size(); ++i)
    len += (poses[i].translation() - poses[i - 1].translation()).norm();
  return len;
}

struct SpanError {
  std::size_t first_frame = 0;
  double length = 0.0;          // requested span length, meters
  double t_err_percent = 0.0;   // translation drift over the span, percent
  double r_err_deg_per_m = 0.0;
};

struct LengthSummary {
  double length = 0.0;
  double t_err_percent = 0.0;   // means over spans of this length
  double r_err_deg_per_m = 0.0;
  int count = 0;
};

struct OdometryBenchmark {
  std::vector<SpanError> spans;
  std::vector<LengthSummary> per_length;
  double t_err_percent = 0.0;   // means over every evaluated span
  double r_err_deg_per_m = 0.0;
  int segments = 0;
  bool empty() const { return spans.empty(); }
};

inline const std::vector<double>& default_segment_lengths() {
  static const std::vector<double> lengths{100, 200, 300, 400, 500, 600, 700, 800};
  return lengths;
}

/// Fixed-length span drift: for each start frame (stepped) and span length,
/// compares the ground-truth and estimated relative motion over the span;
/// translation error is a percentage of the span length, rotation error
/// degrees per meter. Trajectories shorter than the shortest length yield
/// an empty (not erroneous) report.
inline OdometryBenchmark odometry_segment_errors(
    const std::vector<RigidTransform>& gt, const std::vector<RigidTransform>& est,
    const std::vector<double>& lengths = default_segment_lengths(), int step = 1) {
  if (gt.size() != est.size())
    throw std::invalid_argument("odometry_segment_errors: size mismatch");
  if (step < 1) throw std::invalid_argument("odometry_segment_errors: step must be >= 1");

  std::vector<double> dist(gt.size(), 0.0);
  for (std::size_t i = 1; i < gt.size(); ++i)
    dist[i] = dist[i - 1] + (gt[i].translation() - gt[i - 1].translation()).norm();

  auto frame_after = [&](std::size_t first, double len) -> std::optional<std::size_t> {
    for (std::size_t i = first; i < dist.size(); ++i)
      if (dist[i] >= dist[first] + len) return i;
    return std::nullopt;
  };

  OdometryBenchmark bench;
  double t_sum = 0.0, r_sum = 0.0;
  for (double len : lengths) {
    LengthSummary summary;
    summary.length = len;
    double seg_t = 0.0, seg_r = 0.0;
    for (std::size_t first = 0; first < gt.size(); first += static_cast<std::size_t>(step)) {
      auto last = frame_after(first, len);
      if (!last) break;
      RigidTransform dgt = compose(invert(gt[first]), gt[*last]);
      RigidTransform dest = compose(invert(est[first]), est[*last]);
      RigidTransform err = compose(invert(dest), dgt);
      double t_err = err.translation().norm() / len;
      double r_err = rotation_angle_deg(err.rotation()) / len;
      bench.spans.push_back({first, len, t_err * 100.0, r_err});
      seg_t += t_err;
      seg_r += r_err;
      ++summary.count;
    }
    if (summary.count > 0) {
      t_sum += seg_t;
      r_sum += seg_r;
      bench.segments += summary.count;
      summary.t_err_percent = seg_t / summary.count * 100.0;
      summary.r_err_deg_per_m = seg_r / summary.count;
    }
    bench.per_length.push_back(summary);
  }
  if (bench.segments > 0) {
    bench.t_err_percent = t_sum / bench.segments * 100.0;
    bench.r_err_deg_per_m = r_sum / bench.segments;
  }
  return bench;
}

}  // namespace apreg
