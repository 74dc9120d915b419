#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "fovcbf/sim.hpp"
#include "fovcbf/visibility_cbf.hpp"
#include "oracles.hpp"

using namespace fovcbf;
using std::numbers::pi;

namespace {

const double kR2 = std::sqrt(2.0);

struct Scene {
  RigidTransform ee;          // ^W T_E
  RigidTransform extrinsics;  // ^E T_C
  RigidTransform marker;      // ^W T_A
  double side = 0.1;

  MarkerObservation observe() const { return make_observation(inverse(ee * extrinsics) * marker, side); }
  Scene moved(const Twist& u, double h) const {
    Scene s = *this;
    s.ee = ee * exp_twist(h * u.v, h * u.w);
    return s;
  }
};

// Camera looking down at a marker roughly 0.4 m away, with everything
// perturbed so no term of the rows vanishes by symmetry.
Scene random_scene(std::mt19937_64& rng) {
  Scene s;
  s.extrinsics = oracle::random_transform(rng, 0.3, 0.08);
  s.marker = {oracle::random_rotation(rng, 0.4), oracle::random_vec(rng, 0.05)};
  const RigidTransform cam{rot_x(pi) * oracle::random_rotation(rng, 0.2), Vec3(0, 0, 0.4) + oracle::random_vec(rng, 0.05)};
  s.ee = cam * inverse(s.extrinsics);
  return s;
}

CameraModel desk_camera() { return CameraModel({615, 615, 320, 240, 0}, 640, 480); }

}  // namespace

TEST_CASE("marker corners in ArUco order") {
  const auto c = marker_corners(0.1);
  CHECK((c[0] - Vec3(-0.05, 0.05, 0)).norm() == 0.0);
  CHECK((c[1] - Vec3(0.05, 0.05, 0)).norm() == 0.0);
  CHECK((c[2] - Vec3(0.05, -0.05, 0)).norm() == 0.0);
  CHECK((c[3] - Vec3(-0.05, -0.05, 0)).norm() == 0.0);
}

TEST_CASE("barrier values on the unit camera") {
  const CameraModel cam = unit_camera();
  const MarkerObservation centered = make_observation({rot_x(pi), Vec3(0, 0, 1)}, 0.1);
  const BarrierState b = barrier_values(cam, centered, 0.05);
  CHECK(b.h.minCoeff() > 0.0);
  CHECK(std::abs(b.h_min - b.h.minCoeff()) == 0.0);

  MarkerObservation obs = centered;
  obs.corners = {Vec3(0.05, 0.05, 1), Vec3(1, 0, 1), Vec3(0, 0, 1), Vec3(0, 0, 1)};
  const BarrierState hand = barrier_values(cam, obs, 0.05);
  CHECK(std::abs(hand.h(2, 0) - 0.95 / kR2) < 1e-15);
  CHECK(std::abs(hand.h(2, 1)) < 1e-15);
}

TEST_CASE("depth barrier") {
  // marker 0.5 m ahead facing the camera
  const MarkerObservation obs = make_observation({rot_x(pi), Vec3(0, 0, 0.5)}, 0.1);
  CHECK(std::abs(barrier_values(unit_camera(), obs, 0.05).h_z - 0.45) < 1e-15);
}

TEST_CASE("rows at rest and static feasibility") {
  std::mt19937_64 rng(41);
  const CameraModel cam = desk_camera();
  for (int k = 0; k < 50; ++k) {
    const Scene s = random_scene(rng);
    const MarkerObservation obs = s.observe();
    const BarrierState b = barrier_values(cam, obs, 0.05);
    const auto rows = visibility_constraint_rows(cam, obs, s.extrinsics, 2.0);
    for (int r = 0; r < 16; ++r) {
      CHECK(rows[r].evaluate(Twist::zero()) == doctest::Approx(2.0 * b.h(r / 4, r % 4)).epsilon(1e-14));
      if (b.h_min >= 0) CHECK(rows[r].evaluate(Twist::zero()) >= 0.0);
    }
    const ConstraintRow z = z_constraint_row(obs, s.extrinsics, 0.05, 2.0);
    CHECK(z.evaluate(Twist::zero()) == doctest::Approx(2.0 * b.h_z).epsilon(1e-14));
  }
}

TEST_CASE("identity extrinsics and zero angular velocity") {
  const CameraModel cam = desk_camera();
  const MarkerObservation obs = make_observation({rot_x(pi + 0.1), Vec3(0.02, -0.01, 0.4)}, 0.1);
  const auto rows = visibility_constraint_rows(cam, obs, RigidTransform{}, 2.0);
  const Twist u{Vec3(0.3, -0.2, 0.1), Vec3::Zero()};
  for (int r = 0; r < 16; ++r) {
    const Vec3& a = cam.normals()[r / 4];
    CHECK(std::abs(rows[r].evaluate(u) - (-a.dot(u.v) + 2.0 * a.dot(obs.corners[r % 4]))) < 1e-15);
  }
}

TEST_CASE("rows are affine in the twist") {
  std::mt19937_64 rng(42);
  const Scene s = random_scene(rng);
  const auto rows = visibility_constraint_rows(desk_camera(), s.observe(), s.extrinsics, 2.0);
  const Twist u = Twist::from_vector(oracle::random_vec6(rng, 1.0));
  const Twist u2 = Twist::from_vector(2.0 * u.vector());
  for (const auto& r : rows) CHECK(r.linear(u2) == 2.0 * r.linear(u));
}

TEST_CASE("corner rows match finite differences of the simulator") {
  std::mt19937_64 rng(43);
  const CameraModel cam = desk_camera();
  for (int k = 0; k < 100; ++k) {
    const Scene s = random_scene(rng);
    const Twist u = Twist::from_vector(oracle::random_vec6(rng, 0.5));
    const auto rows = visibility_constraint_rows(cam, s.observe(), s.extrinsics, 2.0);
    const double h = 1e-6;
    const Eigen::Matrix4d plus = barrier_values(cam, s.moved(u, h).observe(), 0.05).h;
    const Eigen::Matrix4d minus = barrier_values(cam, s.moved(u, -h).observe(), 0.05).h;
    for (int r = 0; r < 16; ++r) {
      const double fd = (plus(r / 4, r % 4) - minus(r / 4, r % 4)) / (2 * h);
      CHECK(std::abs(rows[r].linear(u) - fd) / std::max(1e-2, std::abs(fd)) < 1e-4);
    }
  }
}

TEST_CASE("finite-difference residual shrinks at first order") {
  std::mt19937_64 rng(44);
  const CameraModel cam = desk_camera();
  const Scene s = random_scene(rng);
  const Twist u = Twist::from_vector(oracle::random_vec6(rng, 0.5));
  const auto rows = visibility_constraint_rows(cam, s.observe(), s.extrinsics, 2.0);
  const double h0 = barrier_values(cam, s.observe(), 0.05).h(1, 2);
  auto residual = [&](double h) {
    const double forward = (barrier_values(cam, s.moved(u, h).observe(), 0.05).h(1, 2) - h0) / h;
    return std::abs(forward - rows[6].linear(u));
  };
  const double r1 = residual(1e-3);
  const double r2 = residual(5e-4);
  CHECK(r1 > 0.0);
  CHECK(r2 / r1 == doctest::Approx(0.5).epsilon(0.05));
}

TEST_CASE("depth row matches finite differences") {
  std::mt19937_64 rng(45);
  for (int k = 0; k < 100; ++k) {
    const Scene s = random_scene(rng);
    const Twist u = Twist::from_vector(oracle::random_vec6(rng, 0.5));
    const ConstraintRow z = z_constraint_row(s.observe(), s.extrinsics, 0.05, 2.0);
    const double h = 1e-6;
    const double fd = (barrier_values(unit_camera(), s.moved(u, h).observe(), 0.05).h_z -
                       barrier_values(unit_camera(), s.moved(u, -h).observe(), 0.05).h_z) /
                      (2 * h);
    CHECK(std::abs(z.linear(u) - fd) / std::max(1e-2, std::abs(fd)) < 1e-4);
  }
}

TEST_CASE("depth row with identity extrinsics and an aligned marker") {
  // marker axes parallel to the camera's: the camera height in A is -t_z and
  // moves with v_z only
  const MarkerObservation obs = make_observation({Mat3::Identity(), Vec3(0.1, 0.2, -0.5)}, 0.1);
  const ConstraintRow z = z_constraint_row(obs, RigidTransform{}, 0.05, 2.0);
  CHECK((z.v_coeff - Vec3(0, 0, 1)).norm() < 1e-15);
  CHECK(z.w_coeff.norm() < 1e-15);
  CHECK(std::abs(z.constant - 2.0 * 0.45) < 1e-15);

  // with a lever arm the camera origin also moves under rotation:
  // d/dt z = e_z . (v + w x t)
  const RigidTransform lever{Mat3::Identity(), Vec3(0.0, 0.03, 0.02)};
  const ConstraintRow zl = z_constraint_row(obs, lever, 0.05, 2.0);
  CHECK((zl.w_coeff - Vec3(0.03, 0.0, 0.0)).norm() < 1e-15);
}
