#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <optional>
#include <vector>

#include "apreg/ap_solver.hpp"
#include "apreg/errors.hpp"
#include "apreg/geometry.hpp"
#include "apreg/parallel.hpp"
#include "apreg/preprocess.hpp"
#include "apreg/rng.hpp"

namespace apreg {

/// The four near-minimal constraint mixtures: lines fix 1 DOF each, corner
/// or edge incidences 2 each, always totaling 7 for the 6-DOF pose.
struct ConstraintMix {
  int lines;
  int corners;
};

inline constexpr std::array<ConstraintMix, 4> kConstraintMixes{
    {{7, 0}, {5, 1}, {3, 2}, {1, 3}}};

/// Nearly-parallel line pairs constrain the motion weakly, so matches that
/// cross scan orientation keep full weight and same-orientation matches are
/// sampled at half weight.
inline constexpr double kSameOrientationWeight = 0.5;

struct RegistrationConfig {
  double inlier_threshold = 0.02;   // meters
  double candidate_radius = 0.5;    // meters; pairing gate between frames
  double refinement_radius = 0.0;   // meters; pass >= 2 gate, 0 keeps candidate_radius
  int ransac_iterations = 2000;     // hypotheses per pass
  int refinement_iterations = 0;    // pass >= 2 hypotheses, 0 keeps ransac_iterations
  int refinement_passes = 3;
  std::array<double, 4> solver_weights{0.25, 0.25, 0.25, 0.25};
  ApConfig ap;
  std::uint64_t rng_seed = 0;
  int threads = 1;                  // <= 0 selects the hardware count

  void validate() const {
    ap.validate();
    if (inlier_threshold <= 0.0 || candidate_radius <= 0.0)
      throw std::invalid_argument("RegistrationConfig: thresholds must be > 0");
    if (refinement_radius < 0.0 || refinement_iterations < 0)
      throw std::invalid_argument("RegistrationConfig: refinement settings must be >= 0");
    if (ransac_iterations < 1 || refinement_passes < 1)
      throw std::invalid_argument("RegistrationConfig: counts must be >= 1");
    double sum = 0.0;
    for (double w : solver_weights) {
      if (w < 0.0)
        throw std::invalid_argument("RegistrationConfig: negative solver weight");
      sum += w;
    }
    if (std::abs(sum - 1.0) > 1e-9)
      throw std::invalid_argument("RegistrationConfig: solver weights must sum to 1");
  }
};

struct LineCandidate {
  LineSegment3 f1;  // prior already applied
  LineSegment3 f2;
  double distance;
  int f1_index;
  int f2_index;
  bool cross_orientation;
};

struct CornerEdgeCandidate {
  Point3 corner;      // prior applied when the corner is the frame-1 side
  LineSegment3 edge;  // prior applied when the edge is the frame-1 side
  double distance;
  CornerEdgeDirection direction;
  int f1_index;  // frame-1 corner index or frame-1 edge index, per direction
  int f2_index;
};

struct CandidatePool {
  std::vector<LineCandidate> line_candidates;
  std::vector<CornerEdgeCandidate> corner_edge_candidates;
  int f1_line_count = 0;
  int f1_corner_count = 0;
  int f1_edge_count = 0;

  std::size_t size() const {
    return line_candidates.size() + corner_edge_candidates.size();
  }
};

/// Radius-gated matching candidates between two feature sets, with the
/// prior motion already applied to the frame-1 side. Corner/edge pairs are
/// formed in both directions.
inline CandidatePool build_candidates(const FrameFeatures& f1, const FrameFeatures& f2,
                                      const RigidTransform& prior,
                                      const RegistrationConfig& cfg) {
  CandidatePool pool;
  pool.f1_line_count = static_cast<int>(f1.line_count());
  pool.f1_corner_count = static_cast<int>(f1.corners.size());
  pool.f1_edge_count = static_cast<int>(f1.edges.size());

  for (int i = 0; i < pool.f1_line_count; ++i) {
    const FittedLine& a = f1.line(static_cast<std::size_t>(i));
    LineSegment3 moved = transform_segment(prior, a.segment);
    for (int j = 0; j < static_cast<int>(f2.line_count()); ++j) {
      const FittedLine& b = f2.line(static_cast<std::size_t>(j));
      double d = segment_distance(moved, b.segment);
      if (d <= cfg.candidate_radius)
        pool.line_candidates.push_back(
            {moved, b.segment, d, i, j, a.orientation != b.orientation});
    }
  }
  for (int i = 0; i < pool.f1_corner_count; ++i) {
    Point3 moved = prior * f1.corners[static_cast<std::size_t>(i)].position;
    for (int j = 0; j < static_cast<int>(f2.edges.size()); ++j) {
      const LineSegment3& edge = f2.edges[static_cast<std::size_t>(j)].segment;
      double d = point_to_segment(moved, edge).distance;
      if (d <= cfg.candidate_radius)
        pool.corner_edge_candidates.push_back(
            {moved, edge, d, CornerEdgeDirection::CornerInFrame1, i, j});
    }
  }
  for (int i = 0; i < pool.f1_edge_count; ++i) {
    LineSegment3 moved = transform_segment(prior, f1.edges[static_cast<std::size_t>(i)].segment);
    for (int j = 0; j < static_cast<int>(f2.corners.size()); ++j) {
      const Point3& corner = f2.corners[static_cast<std::size_t>(j)].position;
      double d = point_to_segment(corner, moved).distance;
      if (d <= cfg.candidate_radius)
        pool.corner_edge_candidates.push_back(
            {corner, moved, d, CornerEdgeDirection::EdgeInFrame1, i, j});
    }
  }
  return pool;
}

struct InlierSplit {
  int lines = 0;
  int corner_edges = 0;
  int total() const { return lines + corner_edges; }
};

/// Candidates within the inlier threshold after moving the frame-1 side
/// by t. Every candidate pair counts individually; line-line and
/// corner-edge contributions are reported separately.
inline InlierSplit count_inliers_split(const CandidatePool& pool, const RigidTransform& t,
                                       double threshold) {
  InlierSplit split;
  for (const auto& c : pool.line_candidates)
    if (segment_distance(transform_segment(t, c.f1), c.f2) < threshold) ++split.lines;
  for (const auto& c : pool.corner_edge_candidates) {
    double d = c.direction == CornerEdgeDirection::CornerInFrame1
                   ? point_to_segment(t * c.corner, c.edge).distance
                   : point_to_segment(c.corner, transform_segment(t, c.edge)).distance;
    if (d < threshold) ++split.corner_edges;
  }
  return split;
}

inline int count_inliers(const CandidatePool& pool, const RigidTransform& t,
                         double threshold) {
  return count_inliers_split(pool, t, threshold).total();
}

struct Hypothesis {
  ConstraintSet constraints;
  int mix_index = 0;  // into kConstraintMixes
};

/// Draws one near-minimal constraint set from the pool. The mixture comes
/// from solver_weights; when the pool cannot support the drawn mixture the
/// round falls back to the all-lines mixture, and nullopt means no mixture
/// is feasible. No frame-1 primitive is used twice within the hypothesis.
inline std::optional<Hypothesis> sample_hypothesis(const CandidatePool& pool,
                                                   const RegistrationConfig& cfg,
                                                   std::mt19937_64& rng) {
  std::vector<char> line_seen(static_cast<std::size_t>(pool.f1_line_count), 0);
  int distinct_lines = 0;
  for (const auto& c : pool.line_candidates)
    if (!line_seen[static_cast<std::size_t>(c.f1_index)]) {
      line_seen[static_cast<std::size_t>(c.f1_index)] = 1;
      ++distinct_lines;
    }
  std::vector<char> corner_seen(static_cast<std::size_t>(pool.f1_corner_count), 0);
  std::vector<char> edge_seen(static_cast<std::size_t>(pool.f1_edge_count), 0);
  int distinct_ce = 0;
  for (const auto& c : pool.corner_edge_candidates) {
    auto& seen = c.direction == CornerEdgeDirection::CornerInFrame1 ? corner_seen : edge_seen;
    if (!seen[static_cast<std::size_t>(c.f1_index)]) {
      seen[static_cast<std::size_t>(c.f1_index)] = 1;
      ++distinct_ce;
    }
  }
  auto feasible = [&](const ConstraintMix& m) {
    return distinct_lines >= m.lines && distinct_ce >= m.corners;
  };

  double u = uniform_double(rng);
  int mix_index = 0;
  double acc = 0.0;
  for (int i = 0; i < 4; ++i) {
    acc += cfg.solver_weights[static_cast<std::size_t>(i)];
    mix_index = i;
    if (u < acc) break;
  }
  if (!feasible(kConstraintMixes[static_cast<std::size_t>(mix_index)])) {
    if (!feasible(kConstraintMixes[0])) return std::nullopt;
    mix_index = 0;
  }
  const ConstraintMix mix = kConstraintMixes[static_cast<std::size_t>(mix_index)];

  Hypothesis hyp;
  hyp.mix_index = mix_index;

  std::fill(line_seen.begin(), line_seen.end(), 0);
  for (int draw = 0; draw < mix.lines; ++draw) {
    double total = 0.0;
    for (const auto& c : pool.line_candidates)
      if (!line_seen[static_cast<std::size_t>(c.f1_index)])
        total += c.cross_orientation ? 1.0 : kSameOrientationWeight;
    double target = uniform_double(rng) * total;
    const LineCandidate* pick = nullptr;
    for (const auto& c : pool.line_candidates) {
      if (line_seen[static_cast<std::size_t>(c.f1_index)]) continue;
      target -= c.cross_orientation ? 1.0 : kSameOrientationWeight;
      pick = &c;
      if (target <= 0.0) break;
    }
    line_seen[static_cast<std::size_t>(pick->f1_index)] = 1;
    hyp.constraints.line_pairs.push_back({pick->f1, pick->f2});
  }

  std::fill(corner_seen.begin(), corner_seen.end(), 0);
  std::fill(edge_seen.begin(), edge_seen.end(), 0);
  for (int draw = 0; draw < mix.corners; ++draw) {
    std::size_t eligible = 0;
    for (const auto& c : pool.corner_edge_candidates) {
      const auto& seen =
          c.direction == CornerEdgeDirection::CornerInFrame1 ? corner_seen : edge_seen;
      if (!seen[static_cast<std::size_t>(c.f1_index)]) ++eligible;
    }
    std::uint64_t target = uniform_index(rng, eligible);
    const CornerEdgeCandidate* pick = nullptr;
    for (const auto& c : pool.corner_edge_candidates) {
      auto& seen =
          c.direction == CornerEdgeDirection::CornerInFrame1 ? corner_seen : edge_seen;
      if (seen[static_cast<std::size_t>(c.f1_index)]) continue;
      if (target == 0) {
        pick = &c;
        seen[static_cast<std::size_t>(c.f1_index)] = 1;
        break;
      }
      --target;
    }
    hyp.constraints.corner_edge_pairs.push_back({pick->corner, pick->edge, pick->direction});
  }
  return hyp;
}

struct PassOutcome {
  RigidTransform transform;  // residual motion on top of the pool's prior
  int inliers = 0;
  int best_round = -1;
  int mix_index = -1;
  ApResult ap;
};

/// One hypothesize-and-verify sweep over the pool. Rounds carry independent
/// seed streams so the winner (highest inlier count, earliest round on ties)
/// does not depend on thread count or scheduling.
inline PassOutcome ransac_pass(const CandidatePool& pool, const RegistrationConfig& cfg,
                               std::uint64_t seed) {
  struct Round {
    bool valid = false;
    RigidTransform t;
    int inliers = 0;
    int mix_index = -1;
    ApResult ap;
  };
  std::vector<Round> rounds(static_cast<std::size_t>(cfg.ransac_iterations));

  parallel_chunks(rounds.size(), cfg.threads, [&](std::size_t begin, std::size_t end) {
    for (std::size_t r = begin; r < end; ++r) {
      auto rng = seeded_rng(mix_seed(seed, r));
      auto hyp = sample_hypothesis(pool, cfg, rng);
      if (!hyp) continue;
      ApResult ap = ap_solve(hyp->constraints, cfg.ap);
      rounds[r] = {true, ap.transform, count_inliers(pool, ap.transform, cfg.inlier_threshold),
                   hyp->mix_index, ap};
    }
  });

  int best = -1;
  for (std::size_t r = 0; r < rounds.size(); ++r)
    if (rounds[r].valid &&
        (best < 0 || rounds[r].inliers > rounds[static_cast<std::size_t>(best)].inliers))
      best = static_cast<int>(r);
  if (best < 0)
    throw RegistrationInfeasibleError(
        "ransac_pass: pool supports no constraint configuration");

  const Round& win = rounds[static_cast<std::size_t>(best)];
  return {win.t, win.inliers, best, win.mix_index, win.ap};
}

struct PassTrace {
  RigidTransform transform;  // full frame-1 -> frame-2 estimate after this pass
  int inliers = 0;
};

struct RegistrationResult {
  RigidTransform transform;  // frame-1 coordinates -> frame-2 coordinates
  int inliers = 0;
  InlierSplit inlier_split;  // line vs corner-edge share of the final count
  int candidates = 0;        // pool size of the final pass
  std::vector<PassTrace> passes;
  int best_round = -1;
  int mix_index = -1;
  double final_delta = 0.0;
  bool converged = false;
};

/// Full two-frame registration: each pass rebuilds the candidate pool
/// around the previous estimate and solves the residual, so later passes
/// see cleaner pools. When refinement_radius is set, the pairing gate
/// shrinks geometrically from candidate_radius to refinement_radius over
/// the passes, so an imperfect early prior still reaches its true matches
/// while the final pass drops nearly all spurious pairs.
inline RegistrationResult register_pair(const FrameFeatures& f1, const FrameFeatures& f2,
                                        const RegistrationConfig& cfg) {
  cfg.validate();
  RigidTransform prior;
  RegistrationResult out;
  for (int pass = 0; pass < cfg.refinement_passes; ++pass) {
    RegistrationConfig pass_cfg = cfg;
    if (pass > 0 && cfg.refinement_radius > 0.0) {
      double a = cfg.refinement_passes > 1
                     ? static_cast<double>(pass) / (cfg.refinement_passes - 1)
                     : 1.0;
      pass_cfg.candidate_radius =
          cfg.candidate_radius * std::pow(cfg.refinement_radius / cfg.candidate_radius, a);
    }
    if (pass > 0 && cfg.refinement_iterations > 0)
      pass_cfg.ransac_iterations = cfg.refinement_iterations;
    CandidatePool pool = build_candidates(f1, f2, prior, pass_cfg);
    PassOutcome res = ransac_pass(pool, pass_cfg, mix_seed(cfg.rng_seed, static_cast<std::uint64_t>(pass)));
    prior = compose(res.transform, prior);
    out.inliers = res.inliers;
    out.inlier_split = count_inliers_split(pool, res.transform, cfg.inlier_threshold);
    out.candidates = static_cast<int>(pool.size());
    out.passes.push_back({prior, res.inliers});
    out.best_round = res.best_round;
    out.mix_index = res.mix_index;
    out.final_delta = res.ap.final_delta;
    out.converged = res.ap.converged;
  }
  out.transform = prior;
  return out;
}

struct OdometryResult {
  std::vector<RigidTransform> poses;     // sensor-to-world, frame 0 = world
  std::vector<RigidTransform> relative;  // relative[i]: frame-(i-1) -> frame-i
  std::vector<int> inliers;              // -1 where registration fell back
  std::vector<bool> fallback;
};

/// Chains pairwise registrations into world poses. An infeasible pair
/// reuses the previous relative motion and is flagged.
inline OdometryResult run_odometry(const std::vector<FrameFeatures>& frames,
                                   const RegistrationConfig& cfg) {
  cfg.validate();
  if (frames.size() < 2)
    throw std::invalid_argument("run_odometry: need at least 2 frames");

  OdometryResult out;
  out.poses.push_back(RigidTransform());
  out.relative.push_back(RigidTransform());
  out.inliers.push_back(0);
  out.fallback.push_back(false);

  RigidTransform rel_prev;
  for (std::size_t i = 1; i < frames.size(); ++i) {
    RegistrationConfig pair_cfg = cfg;
    pair_cfg.rng_seed = mix_seed(cfg.rng_seed, i);
    RigidTransform rel = rel_prev;
    int inl = -1;
    bool fell_back = true;
    try {
      RegistrationResult r = register_pair(frames[i - 1], frames[i], pair_cfg);
      rel = r.transform;
      inl = r.inliers;
      fell_back = false;
    } catch (const RegistrationInfeasibleError&) {
    }
    out.poses.push_back(compose(out.poses.back(), invert(rel)));
    out.relative.push_back(rel);
    out.inliers.push_back(inl);
    out.fallback.push_back(fell_back);
    rel_prev = rel;
  }
  return out;
}

}  // namespace apreg
