#include <cmath>
#include <vector>

#include "doctest.h"

#include "apreg/synthetic.hpp"

#include "helpers.hpp"

using namespace apreg;

namespace {

/// Small camera for fast renders: 1/8 of the default resolution.
CameraIntrinsics small_camera() { return {65.625, 65.625, 39.5, 29.5, 80, 60}; }

double surface_gap(const SceneSpec& scene, const Point3& world) {
  double best = std::numeric_limits<double>::max();
  for (const auto& s : scene.surfaces)
    best = std::min(best, std::abs(world[s.axis] - s.value));
  return best;
}

}  // namespace

TEST_SUITE_BEGIN("scene_setup");

TEST_CASE("look_at builds a valid pose with the optical axis on the target") {
  Point3 eye(2, 3, 1), target(8, 5, 2);
  RigidTransform pose = look_at(eye, target);
  CHECK((pose.translation() - eye).norm() < 1e-12);
  Point3 forward = pose.rotation() * Point3(0, 0, 1);
  CHECK((forward - (target - eye).normalized()).norm() < 1e-12);
  CHECK(is_rotation(pose.rotation()));

  // Straight-up views fall back to a second up vector instead of degenerating.
  RigidTransform up = look_at(Point3(1, 1, 1), Point3(1, 1, 2.5));
  CHECK(is_rotation(up.rotation()));
  CHECK_THROWS_AS(look_at(eye, eye), std::invalid_argument);
}

TEST_CASE("uniform elevation tables span top to bottom") {
  auto table = uniform_elevations(5, 15.0, -25.0);
  REQUIRE(table.size() == 5);
  CHECK(table.front() == doctest::Approx(15.0));
  CHECK(table.back() == doctest::Approx(-25.0));
  CHECK(table[2] == doctest::Approx(-5.0));
  CHECK_THROWS_AS(uniform_elevations(0, 1.0, 0.0), std::invalid_argument);
}

TEST_CASE("scene validation rejects malformed specs") {
  SceneSpec scene = box_room_scene();
  CHECK_NOTHROW(scene.validate());
  SceneSpec bad = scene;
  bad.extent = Point3(10, -1, 3);
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
  bad = scene;
  bad.dropout_rate = 1.0;
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
  bad = scene;
  bad.noise_sigma = -0.1;
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
  bad = scene;
  bad.surfaces.push_back({0, 1.0, 5.0, 2.0, 0.0, 1.0});  // lo0 > hi0
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
}

TEST_CASE("orbit poses circle the room center inside the walls") {
  SceneSpec scene = box_room_scene();
  auto poses = orbit_trajectory(scene, 8);
  REQUIRE(poses.size() == 8);
  Point3 center = 0.5 * scene.extent;
  for (const auto& p : poses) {
    CHECK((p.translation() - center).norm() == doctest::Approx(2.5).epsilon(1e-9));
    for (int a = 0; a < 3; ++a) {
      CHECK(p.translation()[a] > 0.0);
      CHECK(p.translation()[a] < scene.extent[a]);
    }
  }
  CHECK_THROWS_AS(orbit_trajectory(scene, 0), std::invalid_argument);
}

TEST_CASE("random motions hit their requested magnitudes") {
  auto rng = seeded_rng(74);
  for (double mag : {0.5, 2.0, 32.0}) {
    RigidTransform t = random_translation(mag, rng);
    CHECK(t.translation().norm() == doctest::Approx(mag).epsilon(1e-12));
    CHECK((t.rotation() - Mat3::Identity()).norm() == 0.0);
    RigidTransform r = random_rotation(mag, rng);
    CHECK(rotation_angle_deg(r.rotation()) == doctest::Approx(mag).epsilon(1e-9));
    CHECK(r.translation().norm() == 0.0);
  }
}

TEST_SUITE_END();

TEST_SUITE_BEGIN("rendering");

TEST_CASE("a frontal wall renders at its exact distance") {
  SceneSpec scene;
  scene.surfaces = {{0, 5.0, 0.0, 10.0, 0.0, 3.0}};  // x = 5 plane
  scene.intrinsics = small_camera();
  // Integer principal point so one pixel looks exactly along the optical axis.
  scene.intrinsics.cx = 40.0;
  scene.intrinsics.cy = 30.0;
  scene.noise_sigma = 0.0;
  scene.dropout_rate = 0.0;
  RigidTransform pose = look_at(Point3(3, 5, 1.5), Point3(5, 5, 1.5));
  OrganizedCloud cloud = render_frame(scene, pose);
  CHECK(cloud.present_count() > 1000);

  // Ray through the principal point: straight ahead, 2 m.
  Point3 center_dir(0.0, 0.0, 1.0);
  bool found_center = false;
  for (int r = 0; r < cloud.rows() && !found_center; ++r)
    for (int c = 0; c < cloud.cols() && !found_center; ++c) {
      if (!cloud.at(r, c)) continue;
      const Point3& p = *cloud.at(r, c);
      if ((p / p.z() - center_dir).norm() < 1e-6) {
        CHECK((p - Point3(0, 0, 2)).norm() < 1e-9);
        found_center = true;
      }
    }
  CHECK(found_center);

  for (int r = 0; r < cloud.rows(); ++r)
    for (int c = 0; c < cloud.cols(); ++c)
      if (cloud.at(r, c)) {
        Point3 world = pose.apply(*cloud.at(r, c));
        CHECK(std::abs(world.x() - 5.0) < 1e-9);
      }
}

TEST_CASE("noise-free renders from any pose lie on scene surfaces") {
  SceneSpec scene = box_room_scene();
  scene.intrinsics = small_camera();
  scene.noise_sigma = 0.0;
  scene.dropout_rate = 0.0;
  for (const auto& pose : orbit_trajectory(scene, 3)) {
    OrganizedCloud cloud = render_frame(scene, pose);
    CHECK(cloud.present_count() > 500);
    for (int r = 0; r < cloud.rows(); ++r)
      for (int c = 0; c < cloud.cols(); ++c)
        if (cloud.at(r, c)) CHECK(surface_gap(scene, pose.apply(*cloud.at(r, c))) < 1e-9);
  }
}

TEST_CASE("dropout removes the configured fraction of returns") {
  SceneSpec scene = box_room_scene();
  scene.intrinsics = small_camera();
  scene.noise_sigma = 0.0;
  scene.dropout_rate = 0.0;
  RigidTransform pose = look_at(Point3(2, 2, 1.5), Point3(6.5, 6.0, 1.5));
  double full = static_cast<double>(render_frame(scene, pose).present_count());
  REQUIRE(full > 0);

  scene.dropout_rate = 0.5;
  double half = static_cast<double>(render_frame(scene, pose).present_count());
  CHECK(half / full == doctest::Approx(0.5).epsilon(0.08));

  scene.dropout_rate = 0.99;
  double sliver = static_cast<double>(render_frame(scene, pose).present_count());
  CHECK(sliver / full < 0.05);
}

TEST_CASE("renders are deterministic in the seed and salt") {
  SceneSpec scene = box_room_scene();
  scene.intrinsics = small_camera();
  RigidTransform pose = look_at(Point3(2, 2, 1.5), Point3(6.5, 6.0, 1.5));
  OrganizedCloud a = render_frame(scene, pose, 3);
  OrganizedCloud b = render_frame(scene, pose, 3);
  REQUIRE(a.present_count() == b.present_count());
  bool identical = true;
  for (int r = 0; r < a.rows(); ++r)
    for (int c = 0; c < a.cols(); ++c) {
      if (a.at(r, c).has_value() != b.at(r, c).has_value()) identical = false;
      if (a.at(r, c) && b.at(r, c) && (*a.at(r, c) - *b.at(r, c)).norm() != 0.0)
        identical = false;
    }
  CHECK(identical);

  OrganizedCloud other = render_frame(scene, pose, 4);
  bool differs = other.present_count() != a.present_count();
  for (int r = 0; r < a.rows() && !differs; ++r)
    for (int c = 0; c < a.cols() && !differs; ++c) {
      if (a.at(r, c).has_value() != other.at(r, c).has_value()) differs = true;
      if (a.at(r, c) && other.at(r, c) && (*a.at(r, c) - *other.at(r, c)).norm() > 0.0)
        differs = true;
    }
  CHECK(differs);
}

TEST_CASE("lidar renders respect the range gates and ring table") {
  SceneSpec scene = box_room_scene(SensorKind::Lidar);
  scene.dropout_rate = 0.0;
  RigidTransform pose(Mat3::Identity(), 0.5 * scene.extent);
  OrganizedCloud cloud = render_frame(scene, pose);
  CHECK(cloud.rows() == scene.lidar.rings);
  CHECK(cloud.cols() == scene.lidar.azimuth_bins);
  CHECK(cloud.present_count() > 5000);
  for (int r = 0; r < cloud.rows(); ++r)
    for (int c = 0; c < cloud.cols(); ++c)
      if (cloud.at(r, c)) {
        double range = cloud.at(r, c)->norm();
        CHECK(range >= scene.lidar.min_range - 0.1);
        CHECK(range <= scene.lidar.max_range + 0.1);
      }
}

TEST_CASE("poses outside the scene volume are rejected") {
  SceneSpec scene = box_room_scene();
  scene.intrinsics = small_camera();
  CHECK_THROWS_AS(
      render_frame(scene, RigidTransform(Mat3::Identity(), Point3(-1, 5, 1.5))),
      std::invalid_argument);
  CHECK_THROWS_AS(
      render_frame(scene, RigidTransform(Mat3::Identity(), Point3(5, 5, 99))),
      std::invalid_argument);
}

TEST_SUITE_END();

TEST_SUITE_BEGIN("studies");

TEST_CASE("tiny injected motions are recovered in a quick ladder") {
  SceneSpec scene = box_room_scene();
  scene.intrinsics = small_camera();
  scene.rng_seed = 5;

  PerturbationConfig cfg;
  cfg.kind = PerturbationKind::Translation;
  cfg.magnitudes = {0.0, 0.2};
  cfg.trials = 2;
  cfg.preprocess.zones_per_scanline = 2;
  cfg.preprocess.corners_per_zone = 1;
  cfg.registration.candidate_radius = 0.1;
  cfg.registration.ransac_iterations = 150;
  cfg.registration.refinement_passes = 2;

  PerturbationResult res = perturbation_study(scene, cfg);
  REQUIRE(res.rows.size() == 2);
  CHECK(res.kind == PerturbationKind::Translation);
  for (const auto& row : res.rows) {
    CHECK(row.trials == 2);
    CHECK(row.rate == doctest::Approx(1.0));
  }

  // The study is deterministic end to end.
  PerturbationResult again = perturbation_study(scene, cfg);
  for (std::size_t i = 0; i < res.rows.size(); ++i)
    CHECK(res.rows[i].successes == again.rows[i].successes);

  PerturbationConfig bad = cfg;
  bad.trials = 0;
  CHECK_THROWS_AS(perturbation_study(scene, bad), std::invalid_argument);
}

TEST_CASE("matched point fractions use exact distances") {
  SceneSpec scene = box_room_scene();
  scene.intrinsics = small_camera();
  scene.noise_sigma = 0.0;
  scene.dropout_rate = 0.0;
  RigidTransform pose = look_at(Point3(2, 2, 1.5), Point3(6.5, 6.0, 1.5));
  OrganizedCloud cloud = render_frame(scene, pose);
  auto self = detail::matched_point_fraction(cloud, cloud, RigidTransform(), 0.02);
  REQUIRE(self.has_value());
  CHECK(*self == doctest::Approx(1.0));

  RigidTransform shove(Mat3::Identity(), Point3(0.5, 0.5, 0.5));
  auto moved = detail::matched_point_fraction(cloud, cloud, shove, 0.02);
  REQUIRE(moved.has_value());
  CHECK(*moved < 0.2);

  CHECK(!detail::matched_point_fraction(OrganizedCloud(2, 2), cloud, RigidTransform(), 0.02)
             .has_value());
}

TEST_CASE("sparser grids keep lines but lose point overlap") {
  SceneSpec scene = box_room_scene();
  scene.intrinsics = small_camera();
  scene.rng_seed = 11;
  SparsityConfig cfg;
  cfg.factors = {1, 4};
  SparsityResult res = sparsity_inlier_study(scene, cfg);
  REQUIRE(res.rows.size() == 2);
  CHECK(res.rows[0].factor == 1);
  CHECK(res.rows[1].factor == 4);
  CHECK(res.rows[1].points < res.rows[0].points);
  for (const auto& row : res.rows) {
    REQUIRE(row.line_ratio.has_value());
    REQUIRE(row.point_ratio.has_value());
    CHECK(*row.line_ratio >= 0.0);
    CHECK(*row.line_ratio <= 1.0);
    CHECK(*row.point_ratio >= 0.0);
    CHECK(*row.point_ratio <= 1.0);
  }

  SparsityConfig bad = cfg;
  bad.factors = {0};
  CHECK_THROWS_AS(sparsity_inlier_study(scene, bad), std::invalid_argument);
}

TEST_SUITE_END();
