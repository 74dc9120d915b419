#include "fovcbf/camera.hpp"

#include <cmath>
#include <string>

#include "fovcbf/errors.hpp"

namespace fovcbf {

Mat3 Intrinsics::matrix() const {
  Mat3 k;
  k << fx, skew, cx,
       0.0, fy, cy,
       0.0, 0.0, 1.0;
  return k;
}

CornerMatrix nominal_corners(double width, double length) {
  return {Pixel(0.0, 0.0), Pixel(0.0, length), Pixel(width, length), Pixel(width, 0.0)};
}

RayQuad view_lines(const Intrinsics& intrinsics, const CornerMatrix& corners) {
  if (!(intrinsics.fx > 0.0) || !(intrinsics.fy > 0.0)) {
    throw GeometryError("intrinsics require fx > 0 and fy > 0");
  }
  const Mat3 k_inv = intrinsics.matrix().inverse();
  RayQuad lines;
  for (std::size_t i = 0; i < 4; ++i) {
    const Vec3 d = k_inv * Vec3(corners[i].x(), corners[i].y(), 1.0);
    if (d.z() == 0.0 || !d.allFinite()) {
      throw GeometryError("corner " + std::to_string(i) + " back-projects with d_z = 0");
    }
    lines[i] = d.normalized() * (d.z() > 0.0 ? 1.0 : -1.0);
  }
  return lines;
}

RayQuad visibility_normals(const RayQuad& lines) {
  RayQuad normals;
  for (std::size_t i = 0; i < 4; ++i) {
    const Vec3 a = -lines[i].cross(lines[(i + 1) % 4]);
    const double n = a.norm();
    if (n < 1e-12) {
      throw GeometryError("view lines " + std::to_string(i) + " and " + std::to_string((i + 1) % 4) +
                          " are parallel");
    }
    normals[i] = a / n;
  }
  return normals;
}

Pixel project(const Intrinsics& intrinsics, const Vec3& point) {
  if (!(point.z() > 0.0)) throw GeometryError("cannot project a point with z <= 0");
  const Vec3 h = intrinsics.matrix() * point;
  return Pixel(h.x() / h.z(), h.y() / h.z());
}

CameraModel::CameraModel(const Intrinsics& intrinsics, double width, double length)
    : CameraModel(intrinsics, width, length, nominal_corners(width, length)) {}

CameraModel::CameraModel(const Intrinsics& intrinsics, double width, double length,
                         const CornerMatrix& corners)
    : intrinsics_(intrinsics),
      width_(width),
      length_(length),
      corners_(corners),
      lines_(view_lines(intrinsics, corners)),
      normals_(visibility_normals(lines_)) {
  if (!(width > 0.0) || !(length > 0.0)) throw GeometryError("image size must be positive");
  Vec3 mean = Vec3::Zero();
  for (const auto& l : lines_) mean += 0.25 * l;
  for (std::size_t i = 0; i < 4; ++i) {
    if (!(normals_[i].dot(mean) > 0.0)) {
      throw GeometryError("normal " + std::to_string(i) + " does not point into the field of view");
    }
  }
}

CameraModel CameraModel::with_corners(const CornerMatrix& corners) const {
  return CameraModel(intrinsics_, width_, length_, corners);
}

FovMembership fov_contains(const CameraModel& camera, const Vec3& point) {
  FovMembership out;
  out.inside = true;
  for (std::size_t i = 0; i < 4; ++i) {
    out.margins[i] = camera.normals()[i].dot(point);
    if (out.margins[i] < 0.0) out.inside = false;
  }
  return out;
}

CameraModel unit_camera() {
  Intrinsics k;
  k.fx = 1.0;
  k.fy = 1.0;
  k.cx = 1.0;
  k.cy = 1.0;
  return CameraModel(k, 2.0, 2.0);
}

}  // namespace fovcbf
