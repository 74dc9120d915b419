#include "fovcbf/se3.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace fovcbf {

namespace {

constexpr double kSmallAngle = 1e-6;
constexpr double kPiAmbiguity = 1e-7;

Vec3 vee_antisymmetric(const Mat3& r) {
  return Vec3(r(2, 1) - r(1, 2), r(0, 2) - r(2, 0), r(1, 0) - r(0, 1));
}

// Axis from the symmetric part (R + R^T)/2 = cos(t) I + (1 - cos(t)) k k^T.
Vec3 axis_from_symmetric(const Mat3& r, double cos_theta) {
  const Mat3 kkt = (0.5 * (r + r.transpose()) - cos_theta * Mat3::Identity()) / (1.0 - cos_theta);
  Eigen::Index i = 0;
  kkt.diagonal().maxCoeff(&i);
  Vec3 k = kkt.col(i) / std::sqrt(std::max(kkt(i, i), 0.0));
  return k.normalized();
}

}  // namespace

Mat3 skew(const Vec3& v) {
  Mat3 m;
  m << 0.0, -v.z(), v.y(),
       v.z(), 0.0, -v.x(),
       -v.y(), v.x(), 0.0;
  return m;
}

Mat3 rotation_from_vector(const Vec3& rotation_vector) {
  const double theta = rotation_vector.norm();
  if (theta == 0.0) return Mat3::Identity();
  const Vec3 k = rotation_vector / theta;
  const Mat3 kx = skew(k);
  return Mat3::Identity() + std::sin(theta) * kx + (1.0 - std::cos(theta)) * kx * kx;
}

RotationLog log_rotation(const Mat3& rotation) {
  const Vec3 vee = vee_antisymmetric(rotation);
  const double sin_theta = 0.5 * vee.norm();
  const double cos_theta = std::clamp(0.5 * (rotation.trace() - 1.0), -1.0, 1.0);
  const double theta = std::atan2(sin_theta, cos_theta);

  RotationLog out;
  if (theta < kSmallAngle) {
    // theta / sin(theta) = 1 + theta^2 / 6 + O(theta^4)
    out.vector = 0.5 * (1.0 + theta * theta / 6.0) * vee;
    return out;
  }
  if (std::numbers::pi - theta < kPiAmbiguity) {
    Vec3 k = axis_from_symmetric(rotation, -1.0);
    Eigen::Index i = 0;
    k.cwiseAbs().maxCoeff(&i);
    if (k(i) < 0.0) k = -k;
    out.vector = std::numbers::pi * k;
    out.pi_ambiguous = true;
    return out;
  }
  if (theta > 0.5 * std::numbers::pi) {
    Vec3 k = axis_from_symmetric(rotation, cos_theta);
    if (k.dot(vee) < 0.0) k = -k;
    out.vector = theta * k;
    return out;
  }
  out.vector = (theta / (2.0 * sin_theta)) * vee;
  return out;
}

RigidTransform compose(const RigidTransform& a, const RigidTransform& b) {
  return {a.rotation * b.rotation, a.rotation * b.translation + a.translation};
}

RigidTransform inverse(const RigidTransform& a) {
  const Mat3 rt = a.rotation.transpose();
  return {rt, -rt * a.translation};
}

Vec3 transform_point(const RigidTransform& a, const Vec3& p) {
  return a.rotation * p + a.translation;
}

RigidTransform exp_twist(const Vec3& v, const Vec3& w) {
  const double theta = w.norm();
  const Mat3 wx = skew(w);
  double a = 0.5;
  double b = 1.0 / 6.0;
  if (theta > 1e-4) {
    const double t2 = theta * theta;
    a = (1.0 - std::cos(theta)) / t2;
    b = (theta - std::sin(theta)) / (t2 * theta);
  } else {
    const double t2 = theta * theta;
    a -= t2 / 24.0;
    b -= t2 / 120.0;
  }
  const Mat3 jac = Mat3::Identity() + a * wx + b * wx * wx;
  return {rotation_from_vector(w), jac * v};
}

double orthonormality_error(const Mat3& rotation) {
  const double ortho = (rotation.transpose() * rotation - Mat3::Identity()).cwiseAbs().maxCoeff();
  return std::max(ortho, std::abs(rotation.determinant() - 1.0));
}

}  // namespace fovcbf
