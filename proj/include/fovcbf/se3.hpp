#pragma once

#include <Eigen/Dense>

namespace fovcbf {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;
using Vec6 = Eigen::Matrix<double, 6, 1>;
using Mat6 = Eigen::Matrix<double, 6, 6>;

/// Cross-product matrix: skew(v) * w == v.cross(w).
Mat3 skew(const Vec3& v);

/// Rodrigues formula. Returns exact identity for the zero vector.
Mat3 rotation_from_vector(const Vec3& rotation_vector);

struct RotationLog {
  Vec3 vector = Vec3::Zero();  // theta * axis, theta in [0, pi]
  bool pi_ambiguous = false;   // theta == pi: axis sign fixed by the largest-component rule
};

/// Canonical rotation vector of R. Below 1e-6 rad the axis is extracted by
/// series expansion; at theta == pi the component of largest magnitude is
/// made positive.
RotationLog log_rotation(const Mat3& rotation);

inline Vec3 rotation_to_vector(const Mat3& rotation) { return log_rotation(rotation).vector; }

/// Rigid transform in the ^F T_G convention: rotation columns are the basis
/// of G expressed in F, translation is the origin of G in F. Applying it to
/// a point expressed in G gives the point expressed in F.
struct RigidTransform {
  Mat3 rotation = Mat3::Identity();
  Vec3 translation = Vec3::Zero();

  static RigidTransform identity() { return {}; }
  static RigidTransform from_vector(const Vec3& rotation_vector, const Vec3& translation) {
    return {rotation_from_vector(rotation_vector), translation};
  }
};

RigidTransform compose(const RigidTransform& a, const RigidTransform& b);
RigidTransform inverse(const RigidTransform& a);
Vec3 transform_point(const RigidTransform& a, const Vec3& p);

inline RigidTransform operator*(const RigidTransform& a, const RigidTransform& b) { return compose(a, b); }

/// Rotation about a world axis, handy for scenario setup and tests.
inline Mat3 rot_x(double a) { return rotation_from_vector(Vec3(a, 0, 0)); }
inline Mat3 rot_y(double a) { return rotation_from_vector(Vec3(0, a, 0)); }
inline Mat3 rot_z(double a) { return rotation_from_vector(Vec3(0, 0, a)); }

/// Group exponential of a body twist (v, w) held for unit time: the motion
/// x' = R v, R' = R [w]x integrated exactly.
RigidTransform exp_twist(const Vec3& v, const Vec3& w);

/// max |R^T R - I| and |det R - 1|, used to validate user-provided rotations.
double orthonormality_error(const Mat3& rotation);

}  // namespace fovcbf
