#pragma once

#include <array>

#include "fovcbf/camera.hpp"
#include "fovcbf/qp.hpp"
#include "fovcbf/visibility_cbf.hpp"

namespace fovcbf {

/// Bounds on the estimated-to-true camera transform: |t| <= delta, |theta u| <= epsilon.
struct ErrorBounds {
  double delta = 0.0;    // m
  double epsilon = 0.0;  // rad

  /// Throws ConfigError unless delta >= 0 and 0 <= epsilon < pi/2.
  void validate() const;
  bool admits(const RigidTransform& error, double tol = 1e-12) const;
};

/// radius: z offset delta / min a_z and corners inset by the displacement
/// of the rotated corner ray. conservative: offset and corners sized so
/// containment holds for the combined error (see README).
enum class Construction { conservative, radius };

/// delta / min_i a_{i,z}. Throws GeometryError if min a_{i,z} <= 0.
double robust_z_offset(const CameraModel& camera, double delta);

/// delta / min_i sin(beta_i - epsilon) with beta_i the elevation of a_i.
double conservative_z_offset(const CameraModel& camera, const ErrorBounds& bounds);

/// Radii r_j of the corner circles traced by rotating each corner ray by epsilon.
std::array<double, 4> shrink_radii(const CameraModel& camera, double epsilon);

/// Corners moved inward by (sqrt2/2) r_j along both image axes. Throws
/// GeometryError if some r_j >= min(W, L)/sqrt2.
CornerMatrix shrink_corners(const CameraModel& camera, double epsilon);

/// Smallest diagonal inset per corner with a_i . l~_j >= sin(epsilon) for all i.
CornerMatrix conservative_corners(const CameraModel& camera, double epsilon);

struct RobustCamera {
  RigidTransform frame_shift;  // ^{C^} T_{C~}: identity rotation, (0, 0, z~)
  CornerMatrix shrunken_corners;
  CameraModel camera;          // same K, shrunken corners
  ErrorBounds bounds;
  Construction construction = Construction::conservative;

  double z_offset() const { return frame_shift.translation.z(); }
  /// ^E T_{C~} given the estimated extrinsics ^E T_{C^}.
  RigidTransform extrinsics(const RigidTransform& estimated) const { return estimated * frame_shift; }
  /// Observation re-expressed in the shifted frame.
  MarkerObservation shift(const MarkerObservation& obs) const;
};

RobustCamera robust_camera(const CameraModel& camera, const ErrorBounds& bounds,
                           Construction construction = Construction::conservative);

/// Which vector minimizes mu . (R x) over rotations of angle <= epsilon.
/// corrected: rotate x away from mu by epsilon while phi + epsilon <= pi,
/// otherwise the antipode of mu. swapped: the two branches exchanged.
enum class BranchRule { corrected, swapped };

struct RotatedMin {
  double value = 0.0;
  Vec3 minimizer = Vec3::Zero();  // the rotated x attaining value
};

RotatedMin rotated_min(const Vec3& mu, const Vec3& x, double epsilon, BranchRule rule = BranchRule::corrected);

/// Brute-force min of mu . (R x) over rotation vectors of norm epsilon
/// spread on a Fibonacci sphere.
double rotated_min_sweep(const Vec3& mu, const Vec3& x, double epsilon, int directions);

struct ThetaTerms {
  double t0 = 0.0;  // control term, exact
  double t1 = 0.0;  // translation error coupled with rotation
  double t2 = 0.0;  // rotation error coupled with rotation
  double t3 = 0.0;  // rotation error on the barrier value
  double t4 = 0.0;  // translation error on the barrier value
  double total() const { return t0 + t1 + t2 + t3 + t4; }
};

struct ThetaSweep {
  double gap2 = 0.0;  // sweep minimum minus analytic bound, >= 0 when the bound is sound
  double gap3 = 0.0;
};

/// Lower bound on the robust barrier constraint for plane i and corner j
/// over every admissible extrinsic error. Concave in u.
class ThetaBoundRow final : public ConcaveConstraint {
 public:
  ThetaBoundRow() = default;
  /// normal: robust a~_i; corner: x_j as observed; estimated: ^E T_{C^}.
  ThetaBoundRow(const Vec3& normal, const Vec3& corner, const RigidTransform& estimated, double z_offset,
                const ErrorBounds& bounds, double alpha_gain, BranchRule rule = BranchRule::corrected);

  ThetaTerms terms(const Twist& u) const;
  double value(const Twist& u) const override { return terms(u).total(); }
  Vec6 supergradient(const Twist& u) const override;
  ThetaSweep sweep(const Twist& u, int directions = 64) const;

 private:
  Vec3 mu(const Vec3& w) const { return a_ * w; }

  Vec3 b_ = Vec3::UnitZ();
  Vec3 x_ = Vec3::Zero();
  Mat3 r_e_ = Mat3::Identity();  // ^E R_{C^}
  Vec3 tau_ = Vec3::Zero();      // E origin to C^ origin, in C^
  Mat3 a_ = Mat3::Zero();        // mu_1 = a_ w
  double z_offset_ = 0.0;
  ErrorBounds bounds_;
  double alpha_ = 0.0;
  BranchRule rule_ = BranchRule::corrected;
  double t3_ = 0.0;
};

/// Rows indexed 4 i + j like visibility_constraint_rows.
std::array<ThetaBoundRow, 16> theta_lower_bounds(const RobustCamera& robust, const MarkerObservation& obs,
                                                 const RigidTransform& estimated, double alpha_gain,
                                                 BranchRule rule = BranchRule::corrected);

}  // namespace fovcbf
