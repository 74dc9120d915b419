#include "fovcbf/visibility_cbf.hpp"

#include <limits>

namespace fovcbf {

std::array<Vec3, 4> marker_corners(double side) {
  const double s = 0.5 * side;
  return {Vec3(-s, s, 0.0), Vec3(s, s, 0.0), Vec3(s, -s, 0.0), Vec3(-s, -s, 0.0)};
}

MarkerObservation make_observation(const RigidTransform& camera_to_marker, double side) {
  MarkerObservation obs;
  obs.marker_pose = camera_to_marker;
  const auto local = marker_corners(side);
  for (std::size_t j = 0; j < 4; ++j) obs.corners[j] = transform_point(camera_to_marker, local[j]);
  return obs;
}

BarrierState barrier_values(const CameraModel& camera, const MarkerObservation& obs, double zeta) {
  BarrierState state;
  state.h_min = std::numeric_limits<double>::infinity();
  for (int i = 0; i < 4; ++i) {
    for (int j = 0; j < 4; ++j) {
      state.h(i, j) = camera.normals()[i].dot(obs.corners[j]);
      state.h_min = std::min(state.h_min, state.h(i, j));
    }
  }
  state.h_z = inverse(obs.marker_pose).translation.z() - zeta;
  return state;
}

std::array<ConstraintRow, 16> visibility_constraint_rows(const CameraModel& camera, const MarkerObservation& obs,
                                                         const RigidTransform& extrinsics, double alpha_gain) {
  std::array<ConstraintRow, 16> rows;
  for (int i = 0; i < 4; ++i) {
    // a_i expressed in E
    const Vec3 a_e = extrinsics.rotation * camera.normals()[i];
    for (int j = 0; j < 4; ++j) {
      const Vec3 p_e = transform_point(extrinsics, obs.corners[j]);
      ConstraintRow& row = rows[4 * i + j];
      row.v_coeff = -a_e;
      row.w_coeff = a_e.cross(p_e);
      row.constant = alpha_gain * camera.normals()[i].dot(obs.corners[j]);
    }
  }
  return rows;
}

ConstraintRow z_constraint_row(const MarkerObservation& obs, const RigidTransform& extrinsics, double zeta,
                               double alpha_gain) {
  // M maps E-frame vectors into the marker frame.
  const Mat3 m = obs.marker_pose.rotation.transpose() * extrinsics.rotation.transpose();
  Mat3 sum = Mat3::Zero();
  for (int k = 0; k < 3; ++k) {
    sum += extrinsics.translation(k) * skew(m * Vec3::Unit(k));
  }
  const Mat3 n = -sum * m;

  ConstraintRow row;
  row.v_coeff = m.row(2).transpose();
  row.w_coeff = n.row(2).transpose();
  const double height = inverse(obs.marker_pose).translation.z();
  row.constant = alpha_gain * (height - zeta);
  return row;
}

}  // namespace fovcbf
