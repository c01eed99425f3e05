#pragma once

#include <random>
#include <vector>

#include "apreg/geometry.hpp"
#include "apreg/rng.hpp"

namespace apreg::testing {

inline Point3 random_point(std::mt19937_64& rng, double scale = 1.0) {
  return scale * Point3(2.0 * uniform_double(rng) - 1.0, 2.0 * uniform_double(rng) - 1.0,
                        2.0 * uniform_double(rng) - 1.0);
}

inline Mat3 random_rotation_matrix(std::mt19937_64& rng, double max_angle_deg = 180.0) {
  Point3 axis;
  do {
    axis = random_point(rng);
  } while (axis.norm() < 1e-6);
  axis.normalize();
  double angle = max_angle_deg * M_PI / 180.0 * uniform_double(rng);
  return Eigen::AngleAxisd(angle, axis).toRotationMatrix();
}

inline RigidTransform random_rigid(std::mt19937_64& rng, double max_angle_deg = 180.0,
                                   double max_translation = 1.0) {
  return RigidTransform(orthonormalized(random_rotation_matrix(rng, max_angle_deg)),
                        random_point(rng, max_translation));
}

inline double transform_gap(const RigidTransform& a, const RigidTransform& b) {
  RigidTransform err = compose(invert(a), b);
  return err.translation().norm() +
         (err.rotation() - Mat3::Identity()).cwiseAbs().maxCoeff();
}

}  // namespace apreg::testing
