#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "fovcbf/pbvs.hpp"
#include "oracles.hpp"

using namespace fovcbf;
using std::numbers::pi;

namespace {

Vec6 error_of(const RigidTransform& T) { return feature_error(T).vector(); }

// Central difference of the feature error along T * exp(tau u).
Vec6 error_rate(const RigidTransform& T, const Twist& u, double h) {
  const RigidTransform plus = T * oracle::integrate_body_twist({}, u, h, 4);
  const RigidTransform minus = T * oracle::integrate_body_twist({}, {-u.v, -u.w}, h, 4);
  return (error_of(plus) - error_of(minus)) / (2 * h);
}

}  // namespace

TEST_CASE("feature_error") {
  CHECK(feature_error(RigidTransform{}).vector().isZero(0.0));
  const FeatureError t = feature_error({Mat3::Identity(), Vec3(0.1, 0, 0)});
  CHECK((t.vector() - (Vec6() << 0.1, 0, 0, 0, 0, 0).finished()).norm() < 1e-15);
  const FeatureError r = feature_error({rot_y(pi / 3), Vec3::Zero()});
  CHECK((r.vector() - (Vec6() << 0, 0, 0, 0, pi / 3, 0).finished()).norm() < 1e-12);
}

TEST_CASE("servo_twist") {
  const Twist zero = servo_twist(FeatureError{}, Mat3::Identity(), 0.8);
  CHECK(zero.vector().isZero(0.0));
  const Twist u = servo_twist(feature_error({Mat3::Identity(), Vec3(0.1, 0, 0)}), Mat3::Identity(), 1.0);
  CHECK((u.v - Vec3(-0.1, 0, 0)).norm() < 1e-15);
  CHECK(u.w.isZero(0.0));
}

TEST_CASE("interaction matrix at zero rotation is the identity on the rotation block") {
  const Mat6 L = interaction_matrix(feature_error({Mat3::Identity(), Vec3(0.1, 0.2, 0.3)}), Mat3::Identity());
  CHECK((L.bottomRightCorner<3, 3>() - Mat3::Identity()).norm() < 1e-15);
  CHECK(L.topRightCorner<3, 3>().isZero(0.0));
  CHECK(L.bottomLeftCorner<3, 3>().isZero(0.0));
}

TEST_CASE("interaction matrix matches finite differences") {
  std::mt19937_64 rng(31);
  for (int k = 0; k < 100; ++k) {
    const RigidTransform T = oracle::random_transform(rng, pi - 0.2, 0.5);
    const Twist u = Twist::from_vector(oracle::random_vec6(rng, 1.0));
    const FeatureError e = feature_error(T);
    const Vec6 predicted = interaction_matrix(e, T.rotation) * u.vector();
    const Vec6 fd = error_rate(T, u, 1e-6);
    CHECK((predicted - fd).norm() / std::max(1.0, fd.norm()) < 1e-4);
  }
}

TEST_CASE("interaction matrix at theta = pi/2 about z") {
  const RigidTransform T{rot_z(pi / 2), Vec3(0.1, -0.2, 0.05)};
  const Mat6 L = interaction_matrix(feature_error(T), T.rotation);
  // direct formula: I + (theta/2)[b]x + (1 - sinc(theta)/sinc^2(theta/2))[b]x^2
  const double th = pi / 2;
  const Mat3 bx = skew(Vec3(0, 0, 1));
  const double s = std::sin(th) / th;
  const double s2 = std::sin(th / 2) / (th / 2);
  const Mat3 direct = Mat3::Identity() + th / 2 * bx + (1 - s / (s2 * s2)) * bx * bx;
  CHECK((L.bottomRightCorner<3, 3>() - direct).norm() < 1e-12);
  for (int c = 0; c < 6; ++c) {
    Twist u;
    Vec6 unit = Vec6::Zero();
    unit(c) = 1.0;
    u = Twist::from_vector(unit);
    CHECK((L * unit - error_rate(T, u, 1e-6)).norm() < 1e-6);
  }
}

TEST_CASE("servo twist inverts the interaction matrix") {
  std::mt19937_64 rng(32);
  for (int k = 0; k < 200; ++k) {
    const RigidTransform T = oracle::random_transform(rng, pi - 0.1, 1.0);
    const FeatureError e = feature_error(T);
    const double sigma = std::uniform_real_distribution<double>(0.1, 3.0)(rng);
    const Twist u = servo_twist(e, T.rotation, sigma);
    CHECK((interaction_matrix(e, T.rotation) * u.vector() + sigma * e.vector()).norm() < 1e-9);
  }
}

TEST_CASE("closed loop decays exponentially and monotonically") {
  std::mt19937_64 rng(33);
  const double sigma = 0.8;
  for (int trial = 0; trial < 3; ++trial) {
    RigidTransform T = oracle::random_transform(rng, 2.0, 0.3);
    const double e0 = feature_error(T).vector().norm();
    const double dt = 1e-3;
    double prev = e0;
    for (int k = 1; k <= 2000; ++k) {
      const Twist u = servo_twist(feature_error(T), T.rotation, sigma);
      T = T * oracle::integrate_body_twist({}, u, dt, 1);
      const double e = feature_error(T).vector().norm();
      CHECK(e < prev);
      prev = e;
    }
    // first-order sampling of a continuous decay: relative error ~ sigma dt / 2 per unit sigma t
    CHECK(std::abs(prev / e0 - std::exp(-sigma * 2.0)) / std::exp(-sigma * 2.0) < 2e-3);
  }
}

TEST_CASE("saturate scales uniformly") {
  const Twist u{Vec3(1.0, 0.1, 0), Vec3(0, 0, 0.5)};
  const Twist s = saturate(u, {});
  CHECK(std::abs(s.v.x() - 0.5) < 1e-15);
  CHECK((s.vector() - 0.5 * u.vector()).norm() < 1e-15);
  const Twist small{Vec3(0.1, 0, 0), Vec3(0, 0.2, 0)};
  CHECK(saturate(small, {}).vector() == small.vector());
}

TEST_CASE("sinc") {
  CHECK(sinc(0.0) == 1.0);
  for (double x : {1e-8, 1e-5, 1e-4, 0.5, 3.0}) CHECK(std::abs(sinc(x) - std::sin(x) / x) < 1e-15);
}
