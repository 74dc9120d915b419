#pragma once

#include "fovcbf/se3.hpp"

namespace fovcbf {

/// End-effector twist expressed in the end-effector frame.
struct Twist {
  Vec3 v = Vec3::Zero();  // m/s
  Vec3 w = Vec3::Zero();  // rad/s

  Vec6 vector() const {
    Vec6 u;
    u << v, w;
    return u;
  }
  static Twist from_vector(const Vec6& u) { return {u.head<3>(), u.tail<3>()}; }
  static Twist zero() { return {}; }
};

/// Pose error between the target frame E* and the current frame E_t.
struct FeatureError {
  Vec3 translation = Vec3::Zero();  // ^{E*} t_{E_t}
  Vec3 rotation = Vec3::Zero();     // theta * b of ^{E*} R_{E_t}
  bool pi_ambiguous = false;

  Vec6 vector() const {
    Vec6 e;
    e << translation, rotation;
    return e;
  }
};

FeatureError feature_error(const RigidTransform& target_to_current);

/// v = -sigma R^T t, w = -sigma theta b.
Twist servo_twist(const FeatureError& err, const Mat3& rel_rotation, double sigma);

/// Block-diagonal interaction matrix relating the body twist to d/dt of the
/// feature error.
Mat6 interaction_matrix(const FeatureError& err, const Mat3& rel_rotation);

/// sin(x)/x with a series expansion below 1e-4.
double sinc(double x);

/// Per-component caps. Applied by scaling the whole twist, so the result
/// stays on the segment between zero and the input.
struct TwistLimits {
  double max_linear = 0.5;   // m/s, per component
  double max_angular = 1.0;  // rad/s, per component
};

Twist saturate(const Twist& u, const TwistLimits& limits);

}  // namespace fovcbf
