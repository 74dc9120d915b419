#pragma once

#include <array>

#include "fovcbf/se3.hpp"

namespace fovcbf {

using Pixel = Eigen::Vector2d;

/// Upper-triangular pinhole intrinsics; all values in pixels.
struct Intrinsics {
  double fx = 1.0;
  double fy = 1.0;
  double cx = 0.0;
  double cy = 0.0;
  double skew = 0.0;

  Mat3 matrix() const;
};

/// Image corners c0..c3 in the order (0,0), (0,L), (W,L), (W,0). Shrunken
/// variants keep the ordering. Coordinates are real-valued pixels.
using CornerMatrix = std::array<Pixel, 4>;
using RayQuad = std::array<Vec3, 4>;

CornerMatrix nominal_corners(double width, double length);

/// Unit rays through each corner: normalize(K^-1 [c; 1]) with positive z.
RayQuad view_lines(const Intrinsics& intrinsics, const CornerMatrix& corners);

/// Inward unit normals a_i = normalize(-l_i x l_{i+1 mod 4}).
RayQuad visibility_normals(const RayQuad& lines);

/// Pixel of a point with z > 0. Throws GeometryError otherwise.
Pixel project(const Intrinsics& intrinsics, const Vec3& point);

struct FovMembership {
  bool inside = false;
  std::array<double, 4> margins{};  // a_i^T p, meters
};

/// Field of view spanned by a corner matrix. Immutable after construction.
class CameraModel {
 public:
  CameraModel(const Intrinsics& intrinsics, double width, double length);
  CameraModel(const Intrinsics& intrinsics, double width, double length, const CornerMatrix& corners);

  const Intrinsics& intrinsics() const noexcept { return intrinsics_; }
  double width() const noexcept { return width_; }
  double length() const noexcept { return length_; }
  const CornerMatrix& corners() const noexcept { return corners_; }
  const RayQuad& lines() const noexcept { return lines_; }
  const RayQuad& normals() const noexcept { return normals_; }

  /// Same intrinsics and image size, different corners.
  CameraModel with_corners(const CornerMatrix& corners) const;

 private:
  Intrinsics intrinsics_;
  double width_;
  double length_;
  CornerMatrix corners_;
  RayQuad lines_;
  RayQuad normals_;
};

FovMembership fov_contains(const CameraModel& camera, const Vec3& point);

/// fx = fy = 1, principal point (1, 1), 2 x 2 image. Its normals are
/// (1,0,1)/sqrt2, (0,-1,1)/sqrt2, (-1,0,1)/sqrt2, (0,1,1)/sqrt2.
CameraModel unit_camera();

}  // namespace fovcbf
