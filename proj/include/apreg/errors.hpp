#pragma once

#include <stdexcept>

namespace apreg {

/// Degenerate segments, invalid rotations, poses outside the scene.
struct InvalidGeometryError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Landmark configurations that do not pin down a unique rotation
/// (fewer than 3 points, or all points collinear).
struct RankDeficiencyError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// The candidate pool cannot seed any solver configuration.
struct RegistrationInfeasibleError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Malformed dataset files; the message carries the offending line
/// number where known.
struct DatasetError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace apreg
