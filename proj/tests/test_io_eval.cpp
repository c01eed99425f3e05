#include <cmath>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "doctest.h"

#include "apreg/config_io.hpp"
#include "apreg/dataset_io.hpp"
#include "apreg/evaluation.hpp"
#include "apreg/rng.hpp"
#include "apreg/trajectory_plot.hpp"

#include "helpers.hpp"

using namespace apreg;
namespace fs = std::filesystem;

namespace {

fs::path temp_dir() {
  fs::path dir = fs::temp_directory_path() / "apreg_io_tests";
  fs::create_directories(dir);
  return dir;
}

void write_text(const fs::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::trunc);
  out << content;
}

}  // namespace

TEST_SUITE_BEGIN("depth_io");

TEST_CASE("depth images round-trip through png") {
  auto rng = seeded_rng(60);
  DepthImage depth(12, 16);
  for (int r = 0; r < 12; ++r)
    for (int c = 0; c < 16; ++c)
      depth(r, c) = static_cast<std::uint16_t>(uniform_index(rng, 60000));
  fs::path path = temp_dir() / "depth_roundtrip.png";
  write_depth_png(path, depth);
  DepthImage back = read_depth_png_raw(path);
  REQUIRE(back.rows() == depth.rows());
  REQUIRE(back.cols() == depth.cols());
  CHECK((back == depth));
  CHECK(!fs::exists(path.string() + ".tmp.png"));
}

TEST_CASE("zero depth means a missing cell") {
  DepthImage depth = DepthImage::Zero(8, 8);
  CameraIntrinsics intr{100.0, 100.0, 4.0, 4.0, 8, 8};
  OrganizedCloud cloud = depth_to_cloud(depth, intr, kDefaultDepthScale);
  CHECK(cloud.present_count() == 0);
  CHECK(cloud.rows() == 8);
  CHECK(cloud.cols() == 8);
}

TEST_CASE("the principal-point pixel back-projects onto the optical axis") {
  DepthImage depth = DepthImage::Zero(8, 8);
  CameraIntrinsics intr{100.0, 100.0, 4.0, 4.0, 8, 8};
  depth(4, 4) = 5000;  // 1 m at the default scale
  OrganizedCloud cloud = depth_to_cloud(depth, intr, kDefaultDepthScale);
  REQUIRE(cloud.at(4, 4).has_value());
  CHECK((*cloud.at(4, 4) - Point3(0, 0, 1)).norm() < 1e-12);
}

TEST_CASE("back-projected points reproject to their pixel centers") {
  auto rng = seeded_rng(62);
  CameraIntrinsics intr{80.0, 90.0, 15.5, 11.5, 32, 24};
  DepthImage depth = DepthImage::Zero(24, 32);
  for (int i = 0; i < 200; ++i)
    depth(static_cast<int>(uniform_index(rng, 24)),
          static_cast<int>(uniform_index(rng, 32))) =
        static_cast<std::uint16_t>(1000 + uniform_index(rng, 50000));
  OrganizedCloud cloud = depth_to_cloud(depth, intr, kDefaultDepthScale);
  CHECK(cloud.present_count() <= 200);
  for (int v = 0; v < 24; ++v)
    for (int u = 0; u < 32; ++u) {
      if (!cloud.at(v, u).has_value()) continue;
      const Point3& p = *cloud.at(v, u);
      double u_back = p.x() / p.z() * intr.fx + intr.cx;
      double v_back = p.y() / p.z() * intr.fy + intr.cy;
      CHECK(std::abs(u_back - u) < 0.5);
      CHECK(std::abs(v_back - v) < 0.5);
    }
}

TEST_CASE("dimension and format mismatches are rejected") {
  DepthImage depth = DepthImage::Zero(8, 8);
  fs::path path = temp_dir() / "small_depth.png";
  write_depth_png(path, depth);
  CameraIntrinsics intr;  // expects 640x480
  CHECK_THROWS_AS(read_depth_png(path, intr), DatasetError);

  fs::path eight_bit = temp_dir() / "eight_bit.png";
  cv::Mat gray(8, 8, CV_8UC1, cv::Scalar(42));
  cv::imwrite(eight_bit.string(), gray);
  CHECK_THROWS_AS(read_depth_png_raw(eight_bit), DatasetError);

  CHECK_THROWS_AS(read_depth_png_raw(temp_dir() / "does_not_exist.png"), DatasetError);
  CHECK_THROWS_AS(depth_to_cloud(depth, intr, 0.0), std::invalid_argument);
}

TEST_SUITE_END();

TEST_SUITE_BEGIN("lidar_io");

TEST_CASE("scan records round-trip through the binary format") {
  std::vector<Eigen::Vector4f> pts{{1.f, 2.f, 3.f, 0.5f}, {-4.f, 0.f, 1.f, 0.9f}};
  fs::path path = temp_dir() / "scan.bin";
  write_lidar_bin(path, pts);
  auto back = read_lidar_bin(path);
  REQUIRE(back.size() == 2);
  CHECK((back[0] - pts[0]).norm() == 0.f);
  CHECK((back[1] - pts[1]).norm() == 0.f);

  write_lidar_bin(temp_dir() / "empty.bin", {});
  CHECK(read_lidar_bin(temp_dir() / "empty.bin").empty());
}

TEST_CASE("truncated scan files are rejected") {
  fs::path path = temp_dir() / "truncated.bin";
  write_text(path, std::string(20, 'x'));  // not a multiple of 16
  CHECK_THROWS_AS(read_lidar_bin(path), DatasetError);
  CHECK_THROWS_AS(read_lidar_bin(temp_dir() / "missing.bin"), DatasetError);
}

TEST_CASE("four cardinal azimuths fill one column each") {
  std::vector<Eigen::Vector4f> pts{
      {1.f, 0.f, 0.f, 0.f}, {0.f, 1.f, 0.f, 0.f}, {-1.f, 0.f, 0.f, 0.f},
      {0.f, -1.f, 0.f, 0.f}};
  LidarGridSpec grid;
  grid.rings = 1;
  grid.azimuth_bins = 4;
  grid.elevation_deg = {0.0};
  OrganizedCloud cloud = organize_lidar(pts, grid);
  CHECK(cloud.present_count() == 4);
  for (int c = 0; c < 4; ++c) CHECK(cloud.at(0, c).has_value());
}

TEST_CASE("colliding returns keep the nearer point and report stats") {
  std::vector<Eigen::Vector4f> pts{{2.f, 0.f, 0.f, 0.f},
                                   {4.f, 0.001f, 0.f, 0.f},
                                   {3.f, 0.002f, 0.f, 0.f}};
  LidarGridSpec grid;
  grid.rings = 1;
  grid.azimuth_bins = 4;
  grid.elevation_deg = {0.0};
  LidarBinStats stats;
  OrganizedCloud cloud = organize_lidar(pts, grid, 0, &stats);
  CHECK(cloud.present_count() == 1);
  CHECK(stats.records == 3);
  CHECK(stats.binned == 1);
  CHECK(stats.collisions == 2);
  CHECK((*cloud.at(0, 2) - Point3(2, 0, 0)).norm() < 1e-6);
}

TEST_CASE("range and non-finite points are dropped and counted") {
  std::vector<Eigen::Vector4f> pts{
      {0.1f, 0.f, 0.f, 0.f},                                     // below min_range
      {500.f, 0.f, 0.f, 0.f},                                    // beyond max_range
      {std::numeric_limits<float>::quiet_NaN(), 0.f, 0.f, 0.f},  // bad record
      {10.f, 1.f, 0.f, 0.f}};
  LidarGridSpec grid;
  grid.rings = 1;
  grid.azimuth_bins = 16;
  grid.elevation_deg = {0.0};
  LidarBinStats stats;
  OrganizedCloud cloud = organize_lidar(pts, grid, 0, &stats);
  CHECK(cloud.present_count() == 1);
  CHECK(stats.dropped_range == 2);
  CHECK(stats.dropped_nonfinite == 1);
  CHECK(stats.binned + stats.dropped_range + stats.dropped_nonfinite +
            stats.collisions ==
        stats.records);
}

TEST_CASE("elevation auto-detection clusters the rings top-first") {
  std::vector<Eigen::Vector4f> pts;
  std::vector<double> elevations{5.0, 0.0, -5.0, -10.0};
  for (double el : elevations) {
    double rad = el * M_PI / 180.0;
    for (int k = 0; k < 8; ++k) {
      double az = -M_PI + (k + 0.5) * (2.0 * M_PI / 8.0);
      Point3 p = 10.0 * Point3(std::cos(rad) * std::cos(az),
                               std::cos(rad) * std::sin(az), std::sin(rad));
      pts.push_back({static_cast<float>(p.x()), static_cast<float>(p.y()),
                     static_cast<float>(p.z()), 0.f});
    }
  }
  LidarGridSpec grid;
  grid.rings = 4;
  grid.azimuth_bins = 8;
  OrganizedCloud cloud = organize_lidar(pts, grid);
  CHECK(cloud.present_count() == 32);
  for (int r = 0; r < 4; ++r) {
    int found = 0;
    for (int c = 0; c < 8; ++c)
      if (cloud.at(r, c).has_value()) {
        ++found;
        double el = std::asin(cloud.at(r, c)->z() / cloud.at(r, c)->norm()) * 180.0 / M_PI;
        CHECK(el == doctest::Approx(elevations[static_cast<std::size_t>(r)]).epsilon(0.05));
      }
    CHECK(found == 8);
  }
}

TEST_CASE("grid spec misuse is rejected") {
  LidarGridSpec grid;
  grid.rings = 0;
  CHECK_THROWS_AS(organize_lidar({}, grid), std::invalid_argument);
  grid.rings = 4;
  grid.elevation_deg = {0.0};  // wrong table size
  CHECK_THROWS_AS(organize_lidar({}, grid), std::invalid_argument);
}

TEST_SUITE_END();

TEST_SUITE_BEGIN("trajectory_io");

TEST_CASE("unit-quaternion lines parse to identity poses") {
  fs::path path = temp_dir() / "tum_identity.txt";
  write_text(path, "# comment line\n0.0 0 0 0 0 0 0 1\n1.0 1 2 3 0 0 0 1\n");
  auto poses = read_tum_trajectory(path);
  REQUIRE(poses.size() == 2);
  CHECK(poses[0].timestamp == 0.0);
  CHECK(testing::transform_gap(poses[0].pose, RigidTransform()) < 1e-12);
  CHECK((poses[1].pose.translation() - Point3(1, 2, 3)).norm() < 1e-12);
}

TEST_CASE("malformed trajectory lines carry their line number") {
  fs::path path = temp_dir() / "tum_bad.txt";
  write_text(path, "0.0 0 0 0 0 0 0 1\n1.0 0 0 0\n");
  try {
    read_tum_trajectory(path);
    FAIL("expected DatasetError");
  } catch (const DatasetError& e) {
    CHECK(std::string(e.what()).find(":2") != std::string::npos);
  }

  write_text(path, "1.0 0 0 0 0 0 0 1\n0.5 0 0 0 0 0 0 1\n");
  CHECK_THROWS_AS(read_tum_trajectory(path), DatasetError);
  write_text(path, "0.0 0 0 0 0 0 0 0\n");
  CHECK_THROWS_AS(read_tum_trajectory(path), DatasetError);
}

TEST_CASE("kitti identity line and orthonormality gate") {
  fs::path path = temp_dir() / "kitti.txt";
  write_text(path, "1 0 0 0 0 1 0 0 0 0 1 0\n");
  auto poses = read_kitti_trajectory(path);
  REQUIRE(poses.size() == 1);
  CHECK(testing::transform_gap(poses[0], RigidTransform()) < 1e-12);

  write_text(path, "2 0 0 0 0 2 0 0 0 0 2 0\n");
  CHECK_THROWS_AS(read_kitti_trajectory(path), DatasetError);
  write_text(path, "1 0 0 0 0 1 0 0 0 0 1\n");
  CHECK_THROWS_AS(read_kitti_trajectory(path), DatasetError);
}

TEST_CASE("trajectories round-trip through both formats") {
  auto rng = seeded_rng(64);
  std::vector<TimedPose> timed;
  std::vector<RigidTransform> plain;
  for (int i = 0; i < 20; ++i) {
    RigidTransform pose = testing::random_rigid(rng, 180.0, 50.0);
    timed.push_back({0.1 * i, pose});
    plain.push_back(pose);
  }
  fs::path tum = temp_dir() / "roundtrip_tum.txt";
  write_tum_trajectory(tum, timed);
  auto tum_back = read_tum_trajectory(tum);
  REQUIRE(tum_back.size() == timed.size());
  for (std::size_t i = 0; i < timed.size(); ++i) {
    CHECK(tum_back[i].timestamp == doctest::Approx(timed[i].timestamp).epsilon(1e-9));
    CHECK(testing::transform_gap(tum_back[i].pose, timed[i].pose) < 1e-6);
  }

  fs::path kitti = temp_dir() / "roundtrip_kitti.txt";
  write_kitti_trajectory(kitti, plain);
  auto kitti_back = read_kitti_trajectory(kitti);
  REQUIRE(kitti_back.size() == plain.size());
  for (std::size_t i = 0; i < plain.size(); ++i)
    CHECK(testing::transform_gap(kitti_back[i], plain[i]) < 1e-6);
}

TEST_CASE("file indexes and directory listings") {
  fs::path index = temp_dir() / "index.txt";
  write_text(index, "# ts path\n1.5 depth/a.png\n2.5 depth/b.png\n");
  auto files = read_file_index(index);
  REQUIRE(files.size() == 2);
  CHECK(files[0].timestamp == 1.5);
  CHECK(files[1].path == "depth/b.png");
  write_text(index, "1.5\n");
  CHECK_THROWS_AS(read_file_index(index), DatasetError);

  fs::path dir = temp_dir() / "listing";
  fs::create_directories(dir);
  write_text(dir / "b.png", "x");
  write_text(dir / "a.png", "x");
  write_text(dir / "c.txt", "x");
  auto listed = list_files_sorted(dir, ".png");
  REQUIRE(listed.size() == 2);
  CHECK(listed[0].filename() == "a.png");
  CHECK(listed[1].filename() == "b.png");
  CHECK_THROWS_AS(list_files_sorted(dir / "nope", ".png"), DatasetError);
}

TEST_SUITE_END();

TEST_SUITE_BEGIN("evaluation");

namespace {

std::vector<TimedPose> timed_from(const std::vector<RigidTransform>& poses) {
  std::vector<TimedPose> out;
  for (std::size_t i = 0; i < poses.size(); ++i)
    out.push_back({static_cast<double>(i), poses[i]});
  return out;
}

}  // namespace

TEST_CASE("compute_stats on a known sample") {
  ErrorStats s = compute_stats({1.0, 2.0, 3.0, 4.0});
  CHECK(s.mean == doctest::Approx(2.5));
  CHECK(s.median == doctest::Approx(2.5));
  CHECK(s.rmse == doctest::Approx(std::sqrt(7.5)));
  CHECK(s.stddev == doctest::Approx(std::sqrt(1.25)));
  CHECK(s.min == 1.0);
  CHECK(s.max == 4.0);
  CHECK(s.count == 4);
  CHECK(compute_stats({}).count == 0);
  CHECK(compute_stats({5.0, 1.0, 3.0}).median == doctest::Approx(3.0));
}

TEST_CASE("association picks the nearest timestamps and drops wide gaps") {
  std::vector<TimedPose> gt{{0.000, RigidTransform()}, {0.017, RigidTransform()}};
  std::vector<TimedPose> est{{0.010, RigidTransform()}};
  auto matches = associate_trajectories(gt, est);
  REQUIRE(matches.size() == 1);
  CHECK(matches[0].first == 1);  // 0.017 is 7 ms away, 0.000 is 10 ms away
  CHECK(matches[0].second == 0);

  std::vector<TimedPose> far{{0.5, RigidTransform()}};
  CHECK(associate_trajectories(gt, far).empty());

  auto self_matches = associate_trajectories(gt, gt);
  REQUIRE(self_matches.size() == 2);
  CHECK(self_matches[0] == std::pair<int, int>{0, 0});
  CHECK(self_matches[1] == std::pair<int, int>{1, 1});
}

TEST_CASE("rpe of a trajectory against itself is zero") {
  auto rng = seeded_rng(66);
  std::vector<RigidTransform> poses;
  for (int i = 0; i < 15; ++i) poses.push_back(testing::random_rigid(rng, 30.0, 5.0));
  auto gt = timed_from(poses);
  RpeResult res = relative_pose_error(gt, gt, 1, 0.5);
  CHECK(res.pairs == 14);
  CHECK(res.translation.max == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(res.rotation_deg.max == doctest::Approx(0.0).epsilon(1e-9));

  // A fixed world transform on one side leaves relative motions unchanged.
  RigidTransform world = testing::random_rigid(rng, 90.0, 10.0);
  std::vector<RigidTransform> moved;
  for (const auto& p : poses) moved.push_back(compose(world, p));
  RpeResult shifted = relative_pose_error(gt, timed_from(moved), 1, 0.5);
  CHECK(shifted.translation.max < 1e-9);
  CHECK(shifted.rotation_deg.max < 1e-7);
}

TEST_CASE("a constructed single-pair relative error is reported exactly") {
  auto rng = seeded_rng(68);
  RigidTransform a = testing::random_rigid(rng, 20.0, 2.0);
  RigidTransform injected(
      Eigen::AngleAxisd(1.0 * M_PI / 180.0, Point3::UnitZ()).toRotationMatrix(),
      Point3(0.1, 0, 0));
  std::vector<TimedPose> gt{{0.0, RigidTransform()}, {1.0, a}};
  std::vector<TimedPose> est{{0.0, RigidTransform()}, {1.0, compose(a, injected)}};
  RpeResult res = relative_pose_error(gt, est, 1, 0.5);
  REQUIRE(res.pairs == 1);
  CHECK(std::abs(res.translation.mean - 0.1) < 1e-9);
  CHECK(std::abs(res.rotation_deg.mean - 1.0) < 1e-9);

  // Swapping est and gt keeps the residual magnitudes.
  RpeResult swapped = relative_pose_error(est, gt, 1, 0.5);
  CHECK(swapped.translation.mean == doctest::Approx(res.translation.mean).epsilon(1e-9));
  CHECK(swapped.rotation_deg.mean == doctest::Approx(res.rotation_deg.mean).epsilon(1e-9));
}

TEST_CASE("rpe input validation") {
  std::vector<TimedPose> two{{0.0, RigidTransform()}, {1.0, RigidTransform()}};
  CHECK_THROWS_AS(relative_pose_error(two, two, 0), std::invalid_argument);
  std::vector<TimedPose> one{{0.0, RigidTransform()}};
  CHECK_THROWS_AS(relative_pose_error(two, one), std::invalid_argument);
}

TEST_CASE("trajectory_length sums the gt chord lengths") {
  std::vector<RigidTransform> square{
      RigidTransform(), RigidTransform(Mat3::Identity(), Point3(10, 0, 0)),
      RigidTransform(Mat3::Identity(), Point3(10, 10, 0)),
      RigidTransform(Mat3::Identity(), Point3(0, 10, 0))};
  CHECK(trajectory_length(square) == doctest::Approx(30.0));
  CHECK(trajectory_length(std::vector<RigidTransform>{}) == 0.0);
}

namespace {

std::vector<RigidTransform> straight_path(int frames, double spacing) {
  std::vector<RigidTransform> poses;
  for (int i = 0; i < frames; ++i)
    poses.emplace_back(Mat3::Identity(), Point3(spacing * i, 0, 0));
  return poses;
}

}  // namespace

TEST_CASE("per-length drift is zero for a perfect estimate") {
  auto gt = straight_path(1100, 1.0);  // 1.1 km
  OdometryBenchmark bench = odometry_segment_errors(gt, gt);
  CHECK(!bench.empty());
  CHECK(bench.segments > 0);
  CHECK(bench.t_err_percent == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(bench.r_err_deg_per_m == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(bench.per_length.size() == default_segment_lengths().size());
}

TEST_CASE("constant heading drift is recovered per meter") {
  int frames = 1100;
  auto gt = straight_path(frames, 1.0);
  std::vector<RigidTransform> est;
  for (int i = 0; i < frames; ++i) {
    Mat3 heading =
        Eigen::AngleAxisd(0.01 * i * M_PI / 180.0, Point3::UnitZ()).toRotationMatrix();
    est.emplace_back(heading, gt[static_cast<std::size_t>(i)].translation());
  }
  OdometryBenchmark bench = odometry_segment_errors(gt, est, default_segment_lengths(), 10);
  REQUIRE(!bench.empty());
  CHECK(bench.r_err_deg_per_m == doctest::Approx(0.01).epsilon(0.05));
  for (const auto& row : bench.per_length)
    if (row.count > 0) CHECK(row.r_err_deg_per_m == doctest::Approx(0.01).epsilon(0.05));
}

TEST_CASE("short trajectories produce an empty report") {
  auto gt = straight_path(51, 1.0);  // 50 m < shortest ladder length
  OdometryBenchmark bench = odometry_segment_errors(gt, gt);
  CHECK(bench.empty());
  CHECK(bench.segments == 0);
}

TEST_CASE("span endpoints are the first frames at or past the length") {
  // Frames every 60 m: a 100 m span must end at 120 m (index 2), where the
  // estimate carries a 0.5 m offset; the error is scaled by the requested
  // 100 m, giving exactly 0.5%.
  auto gt = straight_path(3, 60.0);
  auto est = gt;
  est[2] = RigidTransform(Mat3::Identity(), est[2].translation() + Point3(0, 0.5, 0));
  OdometryBenchmark bench = odometry_segment_errors(gt, est, {100.0});
  REQUIRE(bench.spans.size() == 1);
  CHECK(bench.spans[0].first_frame == 0);
  CHECK(bench.spans[0].length == 100.0);
  CHECK(bench.spans[0].t_err_percent == doctest::Approx(0.5).epsilon(1e-9));
}

TEST_CASE("metrics ignore a global change of world frame") {
  auto rng = seeded_rng(70);
  // Frame spacing chosen so span boundaries never land exactly on a frame,
  // which would let rounding in the transformed copy shift a span endpoint.
  auto gt = straight_path(450, 1.03);
  std::vector<RigidTransform> est = gt;
  for (std::size_t i = 0; i < est.size(); ++i)
    if (i % 7 == 0)
      est[i] = RigidTransform(est[i].rotation(),
                              est[i].translation() + Point3(0, 0.01 * (i % 3), 0));
  RigidTransform world = testing::random_rigid(rng, 150.0, 100.0);
  std::vector<RigidTransform> gt_w, est_w;
  for (const auto& p : gt) gt_w.push_back(compose(world, p));
  for (const auto& p : est) est_w.push_back(compose(world, p));

  OdometryBenchmark plain = odometry_segment_errors(gt, est, {100.0, 200.0}, 25);
  OdometryBenchmark moved = odometry_segment_errors(gt_w, est_w, {100.0, 200.0}, 25);
  REQUIRE(plain.spans.size() == moved.spans.size());
  CHECK(plain.t_err_percent == doctest::Approx(moved.t_err_percent).epsilon(1e-6));
  CHECK(plain.r_err_deg_per_m == doctest::Approx(moved.r_err_deg_per_m).epsilon(1e-6));

  CHECK_THROWS_AS(odometry_segment_errors(gt, straight_path(3, 1.0)),
                  std::invalid_argument);
  CHECK_THROWS_AS(odometry_segment_errors(gt, est, {100.0}, 0), std::invalid_argument);
}

TEST_SUITE_END();

TEST_SUITE_BEGIN("config");

TEST_CASE("profiles bundle the per-sensor thresholds") {
  PipelineConfig cfg;
  apply_profile(cfg, "depth");
  CHECK(cfg.profile == "depth");
  CHECK(cfg.preprocess.ransac_line_threshold == doctest::Approx(0.01));
  CHECK(cfg.registration.inlier_threshold == doctest::Approx(0.005));
  CHECK(cfg.registration.candidate_radius == doctest::Approx(0.1));
  CHECK(cfg.registration.ap.epsilon == doctest::Approx(2.5e-4));

  apply_profile(cfg, "lidar");
  CHECK(cfg.registration.inlier_threshold == doctest::Approx(0.02));
  CHECK(cfg.registration.candidate_radius == doctest::Approx(0.5));

  CHECK_THROWS_AS(apply_profile(cfg, "sonar"), std::invalid_argument);
}

TEST_CASE("configs round-trip through json files") {
  PipelineConfig cfg;
  apply_profile(cfg, "depth");
  cfg.seed = 1234;
  cfg.threads = 3;
  cfg.preprocess.downsample_h = 4;
  cfg.registration.ransac_iterations = 321;
  cfg.registration.solver_weights = {0.4, 0.3, 0.2, 0.1};
  cfg.lidar.elevation_deg = {2.0, -1.0};
  cfg.lidar.rings = 2;

  fs::path path = temp_dir() / "config_roundtrip.json";
  save_config(path, cfg);
  PipelineConfig back = load_config<PipelineConfig>(path);
  CHECK(back.profile == "depth");
  CHECK(back.seed == 1234);
  CHECK(back.threads == 3);
  CHECK(back.preprocess.downsample_h == 4);
  CHECK(back.preprocess.ransac_line_threshold == doctest::Approx(0.01));
  CHECK(back.registration.ransac_iterations == 321);
  CHECK(back.registration.solver_weights[0] == doctest::Approx(0.4));
  CHECK(back.lidar.elevation_deg == std::vector<double>{2.0, -1.0});
}

TEST_CASE("partial config files merge over the defaults") {
  fs::path path = temp_dir() / "partial.json";
  write_text(path, R"({"registration": {"inlier_threshold": 0.05}, "seed": 9})");
  PipelineConfig cfg = load_config<PipelineConfig>(path);
  CHECK(cfg.registration.inlier_threshold == doctest::Approx(0.05));
  CHECK(cfg.seed == 9);
  CHECK(cfg.registration.ransac_iterations == 2000);       // untouched default
  CHECK(cfg.preprocess.ransac_line_threshold == doctest::Approx(0.02));

  // The profile bundle applies first; explicit fields override it.
  write_text(path, R"({"profile": "depth", "registration": {"inlier_threshold": 0.03}})");
  PipelineConfig layered = load_config<PipelineConfig>(path);
  CHECK(layered.registration.inlier_threshold == doctest::Approx(0.03));
  CHECK(layered.registration.candidate_radius == doctest::Approx(0.1));  // from profile

  write_text(path, "{not json");
  CHECK_THROWS_AS(load_config<PipelineConfig>(path), DatasetError);
  CHECK_THROWS_AS(load_config<PipelineConfig>(temp_dir() / "absent.json"), DatasetError);
}

TEST_SUITE_END();

TEST_SUITE_BEGIN("plot");

namespace {

/// Minimal XML well-formedness check: tags balance and nest properly.
bool xml_well_formed(const std::string& svg) {
  std::vector<std::string> stack;
  std::size_t i = 0;
  while (i < svg.size()) {
    if (svg[i] != '<') {
      ++i;
      continue;
    }
    std::size_t end = svg.find('>', i);
    if (end == std::string::npos) return false;
    std::string tag = svg.substr(i + 1, end - i - 1);
    i = end + 1;
    if (tag.empty()) return false;
    if (tag[0] == '?' || tag[0] == '!') continue;
    if (tag.back() == '/') continue;  // self-closing
    if (tag[0] == '/') {
      std::string name = tag.substr(1);
      if (stack.empty() || stack.back() != name) return false;
      stack.pop_back();
    } else {
      std::string name = tag.substr(0, tag.find_first_of(" \t\n"));
      stack.push_back(name);
    }
  }
  return stack.empty();
}

}  // namespace

TEST_CASE("trajectory plots are well-formed svg with one polyline per series") {
  auto rng = seeded_rng(72);
  std::vector<PlotSeries> series(2);
  series[0].label = "estimate <&>";
  series[1].label = "truth";
  for (int i = 0; i < 40; ++i) {
    series[0].poses.push_back(testing::random_rigid(rng, 10.0, 20.0));
    series[1].poses.push_back(testing::random_rigid(rng, 10.0, 20.0));
  }
  std::string svg = trajectory_svg(series);
  CHECK(xml_well_formed(svg));
  CHECK(svg.find("<svg") != std::string::npos);
  std::size_t polylines = 0;
  for (std::size_t pos = svg.find("<polyline"); pos != std::string::npos;
       pos = svg.find("<polyline", pos + 1))
    ++polylines;
  CHECK(polylines == 2);
  CHECK(svg.find("&lt;&amp;&gt;") != std::string::npos);  // label escaping
  CHECK(svg.find('<') == 0);

  CHECK_THROWS_AS(trajectory_svg({}), std::invalid_argument);
  CHECK_THROWS_AS(trajectory_svg(series, 720, 720, 1, 1), std::invalid_argument);
  std::vector<PlotSeries> empty_series(1);
  empty_series[0].label = "none";
  CHECK_THROWS_AS(trajectory_svg(empty_series), std::invalid_argument);
}

TEST_CASE("a single-pose series still produces a finite viewport") {
  PlotSeries s;
  s.label = "dot";
  s.poses.push_back(RigidTransform(Mat3::Identity(), Point3(3, 4, 5)));
  std::string svg = trajectory_svg({s}, 300, 200, 0, 2);
  CHECK(xml_well_formed(svg));
  CHECK(svg.find("NaN") == std::string::npos);
  CHECK(svg.find("nan") == std::string::npos);
  CHECK(svg.find("inf") == std::string::npos);
}

TEST_SUITE_END();
