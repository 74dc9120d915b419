#pragma once

#include <array>

#include "fovcbf/camera.hpp"
#include "fovcbf/pbvs.hpp"

namespace fovcbf {

/// Marker corners and pose, both expressed in the camera frame.
struct MarkerObservation {
  std::array<Vec3, 4> corners;  // ArUco order: top-left, top-right, bottom-right, bottom-left
  RigidTransform marker_pose;   // ^C T_A
};

/// Corners of a square marker of the given side, in the marker frame A.
std::array<Vec3, 4> marker_corners(double side);

MarkerObservation make_observation(const RigidTransform& camera_to_marker, double side);

struct BarrierState {
  Eigen::Matrix4d h = Eigen::Matrix4d::Zero();  // rows: planes i, cols: corners j
  double h_z = 0.0;
  double h_min = 0.0;  // min over the 16 corner barriers
};

BarrierState barrier_values(const CameraModel& camera, const MarkerObservation& obs, double zeta);

/// v_coeff . v + w_coeff . w + constant >= 0
struct ConstraintRow {
  Vec3 v_coeff = Vec3::Zero();
  Vec3 w_coeff = Vec3::Zero();
  double constant = 0.0;

  double linear(const Twist& u) const { return v_coeff.dot(u.v) + w_coeff.dot(u.w); }
  double evaluate(const Twist& u) const { return linear(u) + constant; }
  Vec6 gradient() const {
    Vec6 g;
    g << v_coeff, w_coeff;
    return g;
  }
};

/// Row index 4 * i + j for plane i and corner j. extrinsics is ^E T_C.
std::array<ConstraintRow, 16> visibility_constraint_rows(const CameraModel& camera, const MarkerObservation& obs,
                                                         const RigidTransform& extrinsics, double alpha_gain);

/// Keeps the camera origin at least zeta in front of the marker plane.
ConstraintRow z_constraint_row(const MarkerObservation& obs, const RigidTransform& extrinsics, double zeta,
                               double alpha_gain);

}  // namespace fovcbf
