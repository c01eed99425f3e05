#pragma once

#include <algorithm>
#include <cstdint>
#include <optional>
#include <vector>

#include "apreg/geometry.hpp"
#include "apreg/organized_cloud.hpp"
#include "apreg/rng.hpp"

namespace apreg {

enum class Orientation { Horizontal, Vertical };

struct ScanPoint {
  int grid_pos;  // column for horizontal scan-lines, row for vertical ones
  Point3 p;
};

/// Ordered present points of one grid row or column.
struct ScanLine {
  Orientation orientation = Orientation::Horizontal;
  int index = 0;
  std::vector<ScanPoint> points;
};

struct FittedLine {
  LineSegment3 segment;
  Orientation orientation;
  int inlier_count;
  int source_scanline;
  std::vector<int> inlier_positions;  // grid positions of supporting points
};

struct CornerPoint {
  Point3 position;
  double smoothness = 0.0;  // c value; higher = less smooth
  Orientation orientation = Orientation::Horizontal;
  int scanline = 0;
  int zone = 0;
};

struct EdgeLine {
  LineSegment3 segment;
  int supporting_corner_count;
};

/// Per-frame bundle of re-parameterized primitives.
struct FrameFeatures {
  std::vector<FittedLine> h_lines;
  std::vector<FittedLine> v_lines;
  std::vector<CornerPoint> corners;
  std::vector<EdgeLine> edges;

  std::size_t line_count() const { return h_lines.size() + v_lines.size(); }
  const FittedLine& line(std::size_t i) const {
    return i < h_lines.size() ? h_lines[i] : v_lines[i - h_lines.size()];
  }
};

struct PreprocessConfig {
  int downsample_h = 1;
  int downsample_v = 1;
  double ransac_line_threshold = 0.02;  // meters; 0.01 for the depth profile
  int min_line_inliers = 5;
  int smoothness_K = 5;
  int zones_per_scanline = 4;
  int corners_per_zone = 2;
  double min_corner_smoothness = 0.0;  // 0 keeps every zone's top picks
  int line_ransac_iterations = 100;
  int gap_limit = 5;              // max missing/rejected cells bridged by one segment
  double edge_chain_radius = 0.5; // meters; corner chaining between scan-lines

  void validate() const {
    if (downsample_h < 1 || downsample_v < 1)
      throw std::invalid_argument("PreprocessConfig: strides must be >= 1");
    if (ransac_line_threshold <= 0.0 || edge_chain_radius <= 0.0)
      throw std::invalid_argument("PreprocessConfig: thresholds must be > 0");
    if (min_corner_smoothness < 0.0)
      throw std::invalid_argument("PreprocessConfig: min_corner_smoothness must be >= 0");
    if (smoothness_K < 1) throw std::invalid_argument("PreprocessConfig: K must be >= 1");
    if (min_line_inliers < 2 || zones_per_scanline < 1 || corners_per_zone < 1 ||
        line_ransac_iterations < 1 || gap_limit < 0)
      throw std::invalid_argument("PreprocessConfig: invalid counts");
  }
};

/// One horizontal scan-line per row and one vertical per column, missing
/// cells skipped, empty scan-lines omitted.
inline std::vector<ScanLine> extract_scanlines(const OrganizedCloud& cloud) {
  std::vector<ScanLine> lines;
  lines.reserve(static_cast<std::size_t>(cloud.rows() + cloud.cols()));
  for (int r = 0; r < cloud.rows(); ++r) {
    ScanLine line{Orientation::Horizontal, r, {}};
    for (int c = 0; c < cloud.cols(); ++c)
      if (const auto& cell = cloud.at(r, c)) line.points.push_back({c, *cell});
    if (!line.points.empty()) lines.push_back(std::move(line));
  }
  for (int c = 0; c < cloud.cols(); ++c) {
    ScanLine line{Orientation::Vertical, c, {}};
    for (int r = 0; r < cloud.rows(); ++r)
      if (const auto& cell = cloud.at(r, c)) line.points.push_back({r, *cell});
    if (!line.points.empty()) lines.push_back(std::move(line));
  }
  return lines;
}

namespace detail {

struct TlsLine {
  Point3 centroid;
  Point3 direction;  // unit
};

/// Total-least-squares line: principal direction of the covariance through
/// the centroid.
inline std::optional<TlsLine> fit_tls_line(const std::vector<ScanPoint>& pts,
                                           const std::vector<int>& idx) {
  if (idx.size() < 2) return std::nullopt;
  Point3 mean = Point3::Zero();
  for (int i : idx) mean += pts[static_cast<std::size_t>(i)].p;
  mean /= static_cast<double>(idx.size());
  Mat3 cov = Mat3::Zero();
  for (int i : idx) {
    Point3 d = pts[static_cast<std::size_t>(i)].p - mean;
    cov.noalias() += d * d.transpose();
  }
  Eigen::SelfAdjointEigenSolver<Mat3> eig(cov);
  Point3 dir = eig.eigenvectors().col(2);  // largest eigenvalue
  if (dir.norm() < 0.5) return std::nullopt;
  return TlsLine{mean, dir.normalized()};
}

inline double point_line_distance(const Point3& p, const TlsLine& line) {
  Point3 d = p - line.centroid;
  return (d - d.dot(line.direction) * line.direction).norm();
}

/// Longest run of candidate inliers whose consecutive grid positions do not
/// jump by more than gap_limit skipped cells.
inline std::vector<int> best_contiguous_run(const std::vector<ScanPoint>& pts,
                                            const std::vector<int>& inliers,
                                            int gap_limit) {
  std::vector<int> best, current;
  for (std::size_t k = 0; k < inliers.size(); ++k) {
    if (!current.empty()) {
      int prev_pos = pts[static_cast<std::size_t>(current.back())].grid_pos;
      int pos = pts[static_cast<std::size_t>(inliers[k])].grid_pos;
      if (pos - prev_pos - 1 > gap_limit) {
        if (current.size() > best.size()) best = current;
        current.clear();
      }
    }
    current.push_back(inliers[k]);
  }
  if (current.size() > best.size()) best = current;
  return best;
}

inline std::vector<int> collect_inliers(const std::vector<ScanPoint>& pts,
                                        const std::vector<int>& active,
                                        const TlsLine& line, double threshold,
                                        int gap_limit) {
  std::vector<int> in;
  for (int i : active)
    if (point_line_distance(pts[static_cast<std::size_t>(i)].p, line) <= threshold)
      in.push_back(i);
  return best_contiguous_run(pts, in, gap_limit);
}

inline std::optional<LineSegment3> segment_from_extent(const std::vector<ScanPoint>& pts,
                                                       const std::vector<int>& idx,
                                                       const TlsLine& line) {
  double lo = std::numeric_limits<double>::max();
  double hi = std::numeric_limits<double>::lowest();
  for (int i : idx) {
    double s = (pts[static_cast<std::size_t>(i)].p - line.centroid).dot(line.direction);
    lo = std::min(lo, s);
    hi = std::max(hi, s);
  }
  if (hi - lo <= kMinSegmentLength) return std::nullopt;
  return LineSegment3(line.centroid + lo * line.direction,
                      line.centroid + hi * line.direction);
}

}  // namespace detail

/// Iteratively extracts straight segments from one scan-line with RANSAC:
/// 2-point hypotheses, inliers within the threshold of the infinite line,
/// grid-contiguity enforced, total-least-squares refit, endpoints trimmed
/// to the inlier extent, inliers removed, repeat.
inline std::vector<FittedLine> fit_lines_ransac(const ScanLine& line,
                                                const PreprocessConfig& cfg,
                                                std::uint64_t seed) {
  std::vector<FittedLine> result;
  const auto& pts = line.points;
  std::vector<int> active(pts.size());
  for (std::size_t i = 0; i < pts.size(); ++i) active[i] = static_cast<int>(i);

  auto rng = seeded_rng(seed);

  while (static_cast<int>(active.size()) >= cfg.min_line_inliers) {
    std::vector<int> best_run;
    for (int it = 0; it < cfg.line_ransac_iterations; ++it) {
      std::size_t i = uniform_index(rng, active.size());
      std::size_t j = uniform_index(rng, active.size());
      if (i == j) continue;
      const Point3& pa = pts[static_cast<std::size_t>(active[i])].p;
      const Point3& pb = pts[static_cast<std::size_t>(active[j])].p;
      Point3 dir = pb - pa;
      if (dir.norm() <= kMinSegmentLength) continue;
      detail::TlsLine hyp{pa, dir.normalized()};
      auto run = detail::collect_inliers(pts, active, hyp, cfg.ransac_line_threshold,
                                         cfg.gap_limit);
      if (run.size() > best_run.size()) best_run = std::move(run);
    }
    if (static_cast<int>(best_run.size()) < cfg.min_line_inliers) break;

    // Refit on the consensus, re-collect against the refit line, refit once
    // more, then drop any point whose residual still exceeds the threshold.
    auto refit = detail::fit_tls_line(pts, best_run);
    if (!refit) break;
    auto support = detail::collect_inliers(pts, active, *refit, cfg.ransac_line_threshold,
                                           cfg.gap_limit);
    if (static_cast<int>(support.size()) < cfg.min_line_inliers) break;
    refit = detail::fit_tls_line(pts, support);
    if (!refit) break;
    std::vector<int> final_support;
    for (int i : support)
      if (detail::point_line_distance(pts[static_cast<std::size_t>(i)].p, *refit) <=
          cfg.ransac_line_threshold)
        final_support.push_back(i);
    if (static_cast<int>(final_support.size()) < cfg.min_line_inliers) break;

    auto segment = detail::segment_from_extent(pts, final_support, *refit);
    if (segment) {
      std::vector<int> positions;
      positions.reserve(final_support.size());
      for (int i : final_support)
        positions.push_back(pts[static_cast<std::size_t>(i)].grid_pos);
      result.push_back(FittedLine{*segment, line.orientation,
                                  static_cast<int>(final_support.size()), line.index,
                                  std::move(positions)});
    }

    // Remove consumed points and continue on the remainder.
    std::vector<int> next;
    next.reserve(active.size());
    std::size_t k = 0;
    for (int i : active) {
      while (k < final_support.size() && final_support[k] < i) ++k;
      if (k < final_support.size() && final_support[k] == i) continue;
      next.push_back(i);
    }
    if (next.size() == active.size()) break;  // no progress
    active = std::move(next);
  }
  return result;
}

/// Local smoothness c_i = |sum_{j=-K..K, j!=0} (x_i - x_j)| / (2K |x_i|),
/// over the ordered points of one scan-line. Points without K neighbors on
/// each side receive no score.
inline std::optional<double> smoothness(const ScanLine& line, int i, int k) {
  if (k < 1) throw std::invalid_argument("smoothness: K must be >= 1");
  const auto& pts = line.points;
  if (i < 0 || i >= static_cast<int>(pts.size())) return std::nullopt;
  if (i - k < 0 || i + k >= static_cast<int>(pts.size())) return std::nullopt;
  const Point3& xi = pts[static_cast<std::size_t>(i)].p;
  double norm_xi = xi.norm();
  if (norm_xi <= 0.0) return std::nullopt;
  Point3 acc = Point3::Zero();
  for (int j = -k; j <= k; ++j) {
    if (j == 0) continue;
    acc += xi - pts[static_cast<std::size_t>(i + j)].p;
  }
  return acc.norm() / (2.0 * static_cast<double>(k) * norm_xi);
}

/// Splits the scan-line into contiguous equal-length zones and keeps the
/// highest-c points of each zone, optionally requiring c to clear a floor
/// so featureless zones contribute nothing.
inline std::vector<CornerPoint> select_corners(const ScanLine& line,
                                               const PreprocessConfig& cfg) {
  const int n = static_cast<int>(line.points.size());
  std::vector<CornerPoint> corners;
  if (n == 0) return corners;

  std::vector<std::pair<double, int>> scored;  // (c, index), per zone
  for (int zone = 0; zone < cfg.zones_per_scanline; ++zone) {
    int begin = static_cast<int>(static_cast<std::int64_t>(zone) * n / cfg.zones_per_scanline);
    int end = static_cast<int>(static_cast<std::int64_t>(zone + 1) * n / cfg.zones_per_scanline);
    scored.clear();
    for (int i = begin; i < end; ++i) {
      if (auto c = smoothness(line, i, cfg.smoothness_K))
        if (*c >= cfg.min_corner_smoothness) scored.emplace_back(*c, i);
    }
    std::sort(scored.begin(), scored.end(), [](const auto& x, const auto& y) {
      if (x.first != y.first) return x.first > y.first;
      return x.second < y.second;
    });
    int take = std::min<int>(cfg.corners_per_zone, static_cast<int>(scored.size()));
    for (int t = 0; t < take; ++t) {
      const auto& [c, i] = scored[static_cast<std::size_t>(t)];
      corners.push_back(CornerPoint{line.points[static_cast<std::size_t>(i)].p, c,
                                    line.orientation, line.index, zone});
    }
  }
  return corners;
}

/// Chains corners from successive scan-lines by nearest neighbor within
/// edge_chain_radius and fits a line to each chain of length >= 2, dropping
/// chain outliers beyond the line threshold.
inline std::vector<EdgeLine> fit_edge_lines(const std::vector<CornerPoint>& corners,
                                            const PreprocessConfig& cfg) {
  std::vector<EdgeLine> edges;

  auto chain_orientation = [&](Orientation orient) {
    // Group corner indices by scan-line index.
    std::vector<std::pair<int, int>> by_line;  // (scanline, corner index)
    for (std::size_t i = 0; i < corners.size(); ++i)
      if (corners[i].orientation == orient)
        by_line.emplace_back(corners[i].scanline, static_cast<int>(i));
    if (by_line.empty()) return;
    std::sort(by_line.begin(), by_line.end());

    struct Chain {
      std::vector<int> members;
      int tail_scanline;
      Point3 tail;
    };
    std::vector<Chain> chains;

    std::size_t k = 0;
    while (k < by_line.size()) {
      int scanline = by_line[k].first;
      std::size_t end = k;
      while (end < by_line.size() && by_line[end].first == scanline) ++end;

      // Candidate links between open chains and this scan-line's corners,
      // matched greedily by increasing distance.
      struct Link {
        double d;
        int chain;
        std::size_t local;  // corner offset within [k, end)
      };
      std::vector<Link> links;
      for (int ci = 0; ci < static_cast<int>(chains.size()); ++ci) {
        const Chain& ch = chains[static_cast<std::size_t>(ci)];
        if (scanline - ch.tail_scanline > 2) continue;  // chain went stale
        for (std::size_t idx = k; idx < end; ++idx) {
          int corner = by_line[idx].second;
          double d = (corners[static_cast<std::size_t>(corner)].position - ch.tail).norm();
          if (d <= cfg.edge_chain_radius) links.push_back({d, ci, idx - k});
        }
      }
      std::sort(links.begin(), links.end(), [](const Link& x, const Link& y) {
        if (x.d != y.d) return x.d < y.d;
        if (x.chain != y.chain) return x.chain < y.chain;
        return x.local < y.local;
      });
      std::vector<bool> chain_used(chains.size(), false);
      std::vector<bool> corner_used(end - k, false);
      for (const Link& link : links) {
        if (chain_used[static_cast<std::size_t>(link.chain)] || corner_used[link.local])
          continue;
        chain_used[static_cast<std::size_t>(link.chain)] = true;
        corner_used[link.local] = true;
        int corner = by_line[k + link.local].second;
        Chain& ch = chains[static_cast<std::size_t>(link.chain)];
        ch.members.push_back(corner);
        ch.tail_scanline = scanline;
        ch.tail = corners[static_cast<std::size_t>(corner)].position;
      }
      // Unmatched corners start fresh chains.
      for (std::size_t idx = k; idx < end; ++idx) {
        if (corner_used[idx - k]) continue;
        int corner = by_line[idx].second;
        chains.push_back(Chain{{corner},
                               scanline,
                               corners[static_cast<std::size_t>(corner)].position});
      }
      k = end;
    }

    // Fit a line to each chain, trimming outliers beyond the threshold.
    for (const Chain& ch : chains) {
      std::vector<Point3> pts;
      for (int i : ch.members) pts.push_back(corners[static_cast<std::size_t>(i)].position);
      while (pts.size() >= 2) {
        Point3 mean = Point3::Zero();
        for (const auto& p : pts) mean += p;
        mean /= static_cast<double>(pts.size());
        Mat3 cov = Mat3::Zero();
        for (const auto& p : pts) {
          Point3 d = p - mean;
          cov.noalias() += d * d.transpose();
        }
        Eigen::SelfAdjointEigenSolver<Mat3> eig(cov);
        Point3 dir = eig.eigenvectors().col(2).normalized();

        double worst = -1.0;
        std::size_t worst_i = 0;
        for (std::size_t i = 0; i < pts.size(); ++i) {
          Point3 d = pts[i] - mean;
          double res = (d - d.dot(dir) * dir).norm();
          if (res > worst) {
            worst = res;
            worst_i = i;
          }
        }
        if (worst > cfg.ransac_line_threshold) {
          pts.erase(pts.begin() + static_cast<std::ptrdiff_t>(worst_i));
          continue;
        }
        double lo = std::numeric_limits<double>::max();
        double hi = std::numeric_limits<double>::lowest();
        for (const auto& p : pts) {
          double s = (p - mean).dot(dir);
          lo = std::min(lo, s);
          hi = std::max(hi, s);
        }
        if (hi - lo > kMinSegmentLength) {
          edges.push_back(EdgeLine{LineSegment3(mean + lo * dir, mean + hi * dir),
                                   static_cast<int>(pts.size())});
        }
        break;
      }
    }
  };

  chain_orientation(Orientation::Horizontal);
  chain_orientation(Orientation::Vertical);
  return edges;
}

/// Full per-frame feature extraction: optional downsampling, scan-line
/// extraction, per-scan-line RANSAC line fitting (tagged H/V), smoothness
/// scoring, corner selection, and edge-line fitting.
inline FrameFeatures preprocess_frame(const OrganizedCloud& cloud,
                                      const PreprocessConfig& cfg,
                                      std::uint64_t seed = 0) {
  cfg.validate();
  FrameFeatures features;
  if (cloud.empty()) return features;

  const OrganizedCloud* source = &cloud;
  OrganizedCloud reduced;
  if (cfg.downsample_h > 1 || cfg.downsample_v > 1) {
    reduced = downsample(cloud, cfg.downsample_h, cfg.downsample_v);
    source = &reduced;
  }

  auto scanlines = extract_scanlines(*source);
  std::vector<CornerPoint> corners;
  for (const auto& line : scanlines) {
    std::uint64_t line_seed =
        mix_seed(seed, line.orientation == Orientation::Horizontal ? 0u : 1u,
                 static_cast<std::uint64_t>(line.index));
    if (static_cast<int>(line.points.size()) >= cfg.min_line_inliers) {
      auto fitted = fit_lines_ransac(line, cfg, line_seed);
      auto& dst = line.orientation == Orientation::Horizontal ? features.h_lines
                                                              : features.v_lines;
      for (auto& f : fitted) dst.push_back(std::move(f));
    }
    auto line_corners = select_corners(line, cfg);
    corners.insert(corners.end(), line_corners.begin(), line_corners.end());
  }
  features.edges = fit_edge_lines(corners, cfg);
  features.corners = std::move(corners);
  return features;
}

}  // namespace apreg
