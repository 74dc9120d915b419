#include "fovcbf/pbvs.hpp"

#include <algorithm>
#include <cmath>

namespace fovcbf {

double sinc(double x) {
  if (std::abs(x) < 1e-4) {
    const double x2 = x * x;
    return 1.0 - x2 / 6.0 + x2 * x2 / 120.0;
  }
  return std::sin(x) / x;
}

FeatureError feature_error(const RigidTransform& target_to_current) {
  const RotationLog log = log_rotation(target_to_current.rotation);
  return {target_to_current.translation, log.vector, log.pi_ambiguous};
}

Twist servo_twist(const FeatureError& err, const Mat3& rel_rotation, double sigma) {
  return {-sigma * rel_rotation.transpose() * err.translation, -sigma * err.rotation};
}

Mat6 interaction_matrix(const FeatureError& err, const Mat3& rel_rotation) {
  Mat6 l = Mat6::Zero();
  l.topLeftCorner<3, 3>() = rel_rotation;

  Mat3 l_theta = Mat3::Identity();
  const double theta = err.rotation.norm();
  if (theta > 0.0) {
    const Mat3 bx = skew(err.rotation / theta);
    const double half_sinc = sinc(0.5 * theta);
    // Body-frame twist: R(t + dt) = R exp([w dt]x), hence the + sign on the
    // first-order term.
    l_theta += 0.5 * theta * bx + (1.0 - sinc(theta) / (half_sinc * half_sinc)) * bx * bx;
  }
  l.bottomRightCorner<3, 3>() = l_theta;
  return l;
}

Twist saturate(const Twist& u, const TwistLimits& limits) {
  double scale = 1.0;
  const double lin = u.v.cwiseAbs().maxCoeff();
  const double ang = u.w.cwiseAbs().maxCoeff();
  if (lin > limits.max_linear) scale = std::min(scale, limits.max_linear / lin);
  if (ang > limits.max_angular) scale = std::min(scale, limits.max_angular / ang);
  return {scale * u.v, scale * u.w};
}

}  // namespace fovcbf
