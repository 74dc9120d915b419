#include <doctest.h>

#include <cmath>
#include <random>

#include "fovcbf/camera.hpp"
#include "fovcbf/errors.hpp"
#include "fovcbf/robust.hpp"
#include "oracles.hpp"

using namespace fovcbf;

namespace {

const double kR2 = std::sqrt(2.0);
const double kR3 = std::sqrt(3.0);

CameraModel desk_camera() { return CameraModel({615, 615, 320, 240, 0}, 640, 480); }

}  // namespace

TEST_CASE("view lines of the unit camera") {
  const CameraModel cam = unit_camera();
  const RayQuad& l = cam.lines();
  CHECK((l[0] - Vec3(-1, -1, 1) / kR3).norm() < 1e-15);
  CHECK((l[2] - Vec3(1, 1, 1) / kR3).norm() < 1e-15);

  const RayQuad axis = view_lines(cam.intrinsics(), {Pixel(1, 1), Pixel(1, 1), Pixel(1, 1), Pixel(1, 1)});
  CHECK((axis[0] - Vec3(0, 0, 1)).norm() < 1e-15);
}

TEST_CASE("visibility normals of the unit camera") {
  const RayQuad& a = unit_camera().normals();
  CHECK((a[0] - Vec3(1, 0, 1) / kR2).norm() < 1e-15);
  CHECK((a[1] - Vec3(0, -1, 1) / kR2).norm() < 1e-15);
  CHECK((a[2] - Vec3(-1, 0, 1) / kR2).norm() < 1e-15);
  CHECK((a[3] - Vec3(0, 1, 1) / kR2).norm() < 1e-15);
  for (const auto& n : a) {
    CHECK(std::abs(n.z() - 1 / kR2) < 1e-15);
    CHECK(std::abs(n.norm() - 1.0) < 1e-15);
  }
}

TEST_CASE("fov_contains on the unit camera") {
  const CameraModel cam = unit_camera();
  const FovMembership c = fov_contains(cam, Vec3(0, 0, 1));
  CHECK(c.inside);
  for (double m : c.margins) CHECK(std::abs(m - 1 / kR2) < 1e-15);

  const FovMembership edge = fov_contains(cam, Vec3(1, 0, 1));
  CHECK(std::abs(edge.margins[2]) < 1e-15);

  const FovMembership back = fov_contains(cam, Vec3(0, 0, -1));
  CHECK_FALSE(back.inside);
  for (double m : back.margins) CHECK(std::abs(m + 1 / kR2) < 1e-15);
}

TEST_CASE("project") {
  const Intrinsics K = unit_camera().intrinsics();
  CHECK((project(K, Vec3(0, 0, 1)) - Pixel(1, 1)).norm() < 1e-15);
  CHECK((project(K, Vec3(-1, -1, 1)) - Pixel(0, 0)).norm() < 1e-15);
  CHECK_THROWS_AS(project(K, Vec3(0, 0, 0)), GeometryError);
  CHECK_THROWS_AS(project(K, Vec3(0, 0, -1)), GeometryError);
}

TEST_CASE("field of view and image rectangle agree") {
  std::mt19937_64 rng(21);
  for (const CameraModel& cam : {unit_camera(), desk_camera()}) {
    std::uniform_real_distribution<double> u(-1.2, 1.2);
    for (int k = 0; k < 1000; ++k) {
      const Vec3 p(u(rng), u(rng), std::uniform_real_distribution<double>(0.05, 2.0)(rng));
      const Pixel px = project(cam.intrinsics(), p);
      const bool in_image = px.x() >= 0 && px.x() <= cam.width() && px.y() >= 0 && px.y() <= cam.length();
      CHECK(fov_contains(cam, p).inside == in_image);
    }
    // points exactly on the image boundary
    const Mat3 Kinv = cam.intrinsics().matrix().inverse();
    for (int k = 0; k < 200; ++k) {
      const double s = std::uniform_real_distribution<double>(0, 1)(rng);
      const Pixel px = k % 2 ? Pixel(s * cam.width(), 0) : Pixel(cam.width(), s * cam.length());
      const Vec3 p = Kinv * Vec3(px.x(), px.y(), 1.0);
      const FovMembership m = fov_contains(cam, p);
      CHECK(*std::min_element(m.margins.begin(), m.margins.end()) > -1e-9);
    }
  }
}

TEST_CASE("cone property") {
  std::mt19937_64 rng(22);
  const CameraModel cam = desk_camera();
  for (int k = 0; k < 200; ++k) {
    const Vec3 p = oracle::random_vec(rng, 1.0) + Vec3(0, 0, 0.5);
    const double lambda = std::uniform_real_distribution<double>(0.01, 100)(rng);
    const FovMembership a = fov_contains(cam, p);
    const FovMembership b = fov_contains(cam, lambda * p);
    CHECK(a.inside == b.inside);
    for (int i = 0; i < 4; ++i) CHECK(std::abs(b.margins[i] - lambda * a.margins[i]) < 1e-12 * (1 + lambda));
  }
}

TEST_CASE("shrunken corners give a subset of the nominal field of view") {
  std::mt19937_64 rng(23);
  const CameraModel cam = desk_camera();
  for (double eps : {0.02, 0.0872664626, 0.2}) {
    for (const CameraModel& inner :
         {cam.with_corners(shrink_corners(cam, eps)), cam.with_corners(conservative_corners(cam, eps))}) {
      int accepted = 0;
      std::uniform_real_distribution<double> u(-1.0, 1.0);
      while (accepted < 2000) {
        const Vec3 p(u(rng), u(rng), 1.0);
        if (!fov_contains(inner, p).inside) continue;
        ++accepted;
        CHECK(fov_contains(cam, p).inside);
      }
    }
  }
}

TEST_CASE("degenerate cameras are rejected") {
  CHECK_THROWS_AS(CameraModel({0, 1, 0, 0, 0}, 2, 2), GeometryError);
  CHECK_THROWS_AS(CameraModel({1, 1, 1, 1, 0}, 0, 2), GeometryError);
}
