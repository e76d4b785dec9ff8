#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdio>
#include <filesystem>

#include "coral/error.hpp"
#include "coral/geometry.hpp"
#include "coral/rng.hpp"

using namespace coral;

namespace {

Pose random_pose(Rng& rng) {
  // random axis-angle through three elementary rotations keeps the matrix
  // exactly orthonormal up to rounding
  const Mat3 r = Mat3::rot_z(rng.uniform(-M_PI, M_PI)) *
                 Mat3::rot_y(rng.uniform(-M_PI / 2, M_PI / 2)) *
                 Mat3::rot_x(rng.uniform(-M_PI, M_PI));
  return Pose(r, {rng.uniform(-50, 50), rng.uniform(-50, 50), rng.uniform(-5, 5)});
}

// independent oracle: 4x4 homogeneous matrix multiply
Vec3 homogeneous_transform(const Pose& pose, const Vec3& p) {
  double m[4][4] = {};
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 3; ++j) m[i][j] = pose.rotation()(i, j);
  }
  m[0][3] = pose.translation().x;
  m[1][3] = pose.translation().y;
  m[2][3] = pose.translation().z;
  m[3][3] = 1.0;
  const double in[4] = {p.x, p.y, p.z, 1.0};
  double out[4] = {};
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 4; ++j) out[i] += m[i][j] * in[j];
  return {out[0] / out[3], out[1] / out[3], out[2] / out[3]};
}

}  // namespace

TEST_CASE("transform_point identity and translation") {
  const Vec3 p{3.2, 4.7, 1.5};
  const Vec3 r1 = transform_point(Pose::identity(), p);
  CHECK(r1.x == doctest::Approx(3.2));
  CHECK(r1.y == doctest::Approx(4.7));
  CHECK(r1.z == doctest::Approx(1.5));

  const Pose lifted(Mat3::identity(), {0, 0, 2});
  const Vec3 r2 = transform_point(lifted, p);
  CHECK(r2.z == doctest::Approx(3.5));
}

TEST_CASE("transform_point matches homogeneous-multiply oracle") {
  Rng rng(11);
  for (int trial = 0; trial < 200; ++trial) {
    const Pose pose = random_pose(rng);
    const Vec3 p{rng.uniform(-30, 30), rng.uniform(-30, 30), rng.uniform(-10, 10)};
    const Vec3 got = transform_point(pose, p);
    const Vec3 want = homogeneous_transform(pose, p);
    CHECK(std::abs(got.x - want.x) < 1e-9);
    CHECK(std::abs(got.y - want.y) < 1e-9);
    CHECK(std::abs(got.z - want.z) < 1e-9);
  }
}

TEST_CASE("pose inverse round trip") {
  Rng rng(17);
  for (int trial = 0; trial < 100; ++trial) {
    const Pose pose = random_pose(rng);
    const Vec3 p{rng.uniform(-30, 30), rng.uniform(-30, 30), rng.uniform(-10, 10)};
    const Vec3 back = transform_point(pose.inverse(), transform_point(pose, p));
    CHECK(std::abs(back.x - p.x) < 1e-9);
    CHECK(std::abs(back.y - p.y) < 1e-9);
    CHECK(std::abs(back.z - p.z) < 1e-9);

    const Pose ident = pose.compose(pose.inverse());
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j)
        CHECK(std::abs(ident.rotation()(i, j) - (i == j ? 1.0 : 0.0)) < 1e-9);
    CHECK(ident.translation().norm() < 1e-9);
  }
}

TEST_CASE("non-orthonormal rotation rejected") {
  Mat3 bad;
  bad(0, 0) = 2.0;
  CHECK_THROWS_AS(Pose(bad, {0, 0, 0}), Error);
  Mat3 reflect;  // det -1
  reflect(0, 0) = -1.0;
  CHECK_THROWS_AS(Pose(reflect, {0, 0, 0}), Error);
}

TEST_CASE("project_to_pixel basics") {
  CameraModel cam;
  cam.fx = cam.fy = 100;
  cam.cx = cam.cy = 56;
  cam.width = cam.height = 112;

  const auto center = project_to_pixel(cam, {0, 0, 1});
  REQUIRE(center.has_value());
  CHECK(center->u == doctest::Approx(56));
  CHECK(center->v == doctest::Approx(56));

  const auto off = project_to_pixel(cam, {0.5, 0, 1});
  REQUIRE(off.has_value());
  CHECK(off->u == doctest::Approx(106));
  CHECK(off->v == doctest::Approx(56));

  CHECK_FALSE(project_to_pixel(cam, {0, 0, -1}).has_value());
  CHECK_FALSE(project_to_pixel(cam, {0, 0, 0}).has_value());
}

TEST_CASE("projection is scale invariant along the ray") {
  CameraModel cam;
  cam.fx = 90;
  cam.fy = 110;
  cam.cx = 40.5;
  cam.cy = 30.25;
  cam.width = 80;
  cam.height = 64;
  Rng rng(23);
  for (int trial = 0; trial < 100; ++trial) {
    const Vec3 p{rng.uniform(-5, 5), rng.uniform(-5, 5), rng.uniform(0.1, 20)};
    const double s = rng.uniform(0.5, 4.0);
    const auto a = project_to_pixel(cam, p);
    const auto b = project_to_pixel(cam, p * s);
    REQUIRE(a.has_value());
    REQUIRE(b.has_value());
    CHECK(std::abs(a->u - b->u) < 1e-9);
    CHECK(std::abs(a->v - b->v) < 1e-9);
  }
}

TEST_CASE("world_to_cell basics") {
  GridSpec spec;
  spec.cells_x = spec.cells_y = 80;
  spec.resolution = 0.5;
  spec.origin_x = spec.origin_y = -20;

  const auto center = world_to_cell(spec, {0, 0, 3});
  REQUIRE(center.has_value());
  CHECK(center->i == 40);
  CHECK(center->j == 40);

  const auto corner = world_to_cell(spec, {-20, -20, 0});
  REQUIRE(corner.has_value());
  CHECK(corner->i == 0);
  CHECK(corner->j == 0);

  CHECK_FALSE(world_to_cell(spec, {20.0, 0, 0}).has_value());
  CHECK_FALSE(world_to_cell(spec, {-20.01, 0, 0}).has_value());
}

TEST_CASE("world_to_cell agrees with scalar floor oracle") {
  GridSpec spec;
  spec.cells_x = 60;
  spec.cells_y = 45;
  spec.resolution = 0.37;
  spec.origin_x = -7.3;
  spec.origin_y = 2.1;
  Rng rng(31);
  for (int trial = 0; trial < 1000; ++trial) {
    const Vec3 p{rng.uniform(-15, 25), rng.uniform(-10, 25), 0};
    const auto got = world_to_cell(spec, p);
    const long long oi =
        static_cast<long long>(std::floor((p.x - spec.origin_x) / spec.resolution));
    const long long oj =
        static_cast<long long>(std::floor((p.y - spec.origin_y) / spec.resolution));
    const bool inside =
        oi >= 0 && oj >= 0 && oi < spec.cells_x && oj < spec.cells_y;
    CHECK(got.has_value() == inside);
    if (got) {
      CHECK(got->i == oi);
      CHECK(got->j == oj);
    }
  }
}

TEST_CASE("cell center within half resolution of source point") {
  GridSpec spec;
  spec.cells_x = spec.cells_y = 40;
  spec.resolution = 0.5;
  spec.origin_x = spec.origin_y = -10;
  Rng rng(37);
  for (int trial = 0; trial < 500; ++trial) {
    const Vec3 p{rng.uniform(-10, 9.99), rng.uniform(-10, 9.99), 0};
    const auto cell = world_to_cell(spec, p);
    REQUIRE(cell.has_value());
    const Vec3 c = cell_center(spec, cell->i, cell->j);
    CHECK(std::abs(c.x - p.x) <= spec.resolution / 2 + 1e-12);
    CHECK(std::abs(c.y - p.y) <= spec.resolution / 2 + 1e-12);
  }
}

TEST_CASE("poses file round trip") {
  Rng rng(41);
  std::vector<TimedPose> poses;
  for (int i = 0; i < 10; ++i) poses.push_back({static_cast<double>(i), random_pose(rng)});
  const auto path = std::filesystem::temp_directory_path() / "coral_poses_test.txt";
  write_poses_file(path.string(), poses);
  const auto read = read_poses_file(path.string());
  REQUIRE(read.size() == poses.size());
  for (size_t i = 0; i < poses.size(); ++i) {
    CHECK(read[i].timestamp == doctest::Approx(poses[i].timestamp));
    for (int r = 0; r < 3; ++r)
      for (int c = 0; c < 3; ++c)
        CHECK(std::abs(read[i].pose.rotation()(r, c) -
                       poses[i].pose.rotation()(r, c)) < 1e-9);
    CHECK((read[i].pose.translation() - poses[i].pose.translation()).norm() < 1e-9);
  }
  std::filesystem::remove(path);
  CHECK_THROWS_AS(read_poses_file("/nonexistent/poses.txt"), Error);
}

TEST_CASE("frame label mismatch rejected in compose") {
  const Pose a(Mat3::identity(), {1, 0, 0}, "lidar", "world");
  const Pose b(Mat3::identity(), {0, 1, 0}, "camera", "base");
  CHECK_THROWS_AS(a.compose(b), Error);
  const Pose c(Mat3::identity(), {0, 1, 0}, "base", "lidar");
  const Pose ac = a.compose(c);
  CHECK(ac.frame_from() == "base");
  CHECK(ac.frame_to() == "world");
}

TEST_CASE("yaw extraction and degree wrapping") {
  const Pose p(Mat3::rot_z(M_PI / 3), {0, 0, 0});
  CHECK(yaw_degrees(p) == doctest::Approx(60.0));
  CHECK(wrap_degrees(190.0) == doctest::Approx(-170.0));
  CHECK(wrap_degrees(-180.0) == doctest::Approx(-180.0));
  CHECK(wrap_degrees(180.0) == doctest::Approx(-180.0));
  CHECK(wrap_degrees(359.0) == doctest::Approx(-1.0));
}
