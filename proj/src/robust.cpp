#include "fovcbf/robust.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <string>

#include "fovcbf/errors.hpp"

namespace fovcbf {

namespace {

Vec3 corner_ray(const Intrinsics& k, const Pixel& c) { return view_lines(k, {c, c, c, c})[0]; }

Pixel inward(const CameraModel& camera, std::size_t j) {
  const Pixel center(0.5 * camera.width(), 0.5 * camera.length());
  const Pixel d = center - camera.corners()[j];
  return Pixel(d.x() >= 0.0 ? 1.0 : -1.0, d.y() >= 0.0 ? 1.0 : -1.0);
}

Vec3 any_perpendicular(const Vec3& x) {
  const Vec3 seed = std::abs(x.x()) < 0.9 * x.norm() ? Vec3::UnitX() : Vec3::UnitY();
  return x.cross(seed).normalized();
}

}  // namespace

void ErrorBounds::validate() const {
  if (!std::isfinite(delta) || delta < 0.0) throw ConfigError("bounds.delta", "must be finite and >= 0");
  if (!std::isfinite(epsilon) || epsilon < 0.0 || epsilon >= 0.5 * std::numbers::pi) {
    throw ConfigError("bounds.epsilon", "must lie in [0, pi/2)");
  }
}

bool ErrorBounds::admits(const RigidTransform& error, double tol) const {
  return error.translation.norm() <= delta + tol && log_rotation(error.rotation).vector.norm() <= epsilon + tol;
}

double robust_z_offset(const CameraModel& camera, double delta) {
  double min_az = std::numeric_limits<double>::infinity();
  for (const auto& a : camera.normals()) min_az = std::min(min_az, a.z());
  if (!(min_az > 0.0)) throw GeometryError("field of view too wide: min a_z <= 0");
  return delta / min_az;
}

double conservative_z_offset(const CameraModel& camera, const ErrorBounds& bounds) {
  double worst = std::numeric_limits<double>::infinity();
  for (const auto& a : camera.normals()) {
    const double elevation = std::asin(std::clamp(a.z(), -1.0, 1.0));
    worst = std::min(worst, std::sin(elevation - bounds.epsilon));
  }
  if (!(worst > 0.0)) throw GeometryError("field of view too wide for the rotation bound");
  return bounds.delta / worst;
}

std::array<double, 4> shrink_radii(const CameraModel& camera, double epsilon) {
  std::array<double, 4> r{};
  if (epsilon == 0.0) return r;
  for (std::size_t j = 0; j < 4; ++j) {
    const Vec3& l = camera.lines()[j];
    Vec3 o(l.x(), -l.y(), 0.0);
    o = o.norm() > 0.0 ? Vec3(epsilon * o.normalized()) : Vec3(epsilon, 0.0, 0.0);
    const Pixel t = project(camera.intrinsics(), rotation_from_vector(o) * l);
    r[j] = (t - camera.corners()[j]).norm();
  }
  return r;
}

CornerMatrix shrink_corners(const CameraModel& camera, double epsilon) {
  if (epsilon == 0.0) return camera.corners();
  const auto r = shrink_radii(camera, epsilon);
  const double limit = std::min(camera.width(), camera.length()) / std::numbers::sqrt2;
  CornerMatrix out = camera.corners();
  for (std::size_t j = 0; j < 4; ++j) {
    if (r[j] >= limit) {
      throw GeometryError("corner radius " + std::to_string(j) + " exceeds min(W, L)/sqrt2");
    }
    const double inset = 0.5 * std::numbers::sqrt2 * r[j];
    out[j] += inset * inward(camera, j);
  }
  return out;
}

CornerMatrix conservative_corners(const CameraModel& camera, double epsilon) {
  if (epsilon == 0.0) return camera.corners();
  const double need = std::sin(epsilon);
  CornerMatrix out = camera.corners();
  for (std::size_t j = 0; j < 4; ++j) {
    const Pixel dir = inward(camera, j);
    auto margin = [&](double k) {
      const Vec3 l = corner_ray(camera.intrinsics(), camera.corners()[j] + k * dir);
      double m = std::numeric_limits<double>::infinity();
      for (const auto& a : camera.normals()) m = std::min(m, a.dot(l));
      return m - need;
    };
    double lo = 0.0;
    double hi = 0.5 * std::min(camera.width(), camera.length()) * (1.0 - 1e-9);
    if (margin(hi) < 0.0) throw GeometryError("rotation bound leaves no usable field of view");
    for (int it = 0; it < 200 && hi - lo > 1e-13 * (1.0 + hi); ++it) {
      const double mid = 0.5 * (lo + hi);
      (margin(mid) >= 0.0 ? hi : lo) = mid;
    }
    out[j] += hi * dir;
  }
  return out;
}

MarkerObservation RobustCamera::shift(const MarkerObservation& obs) const {
  MarkerObservation out;
  const RigidTransform back = inverse(frame_shift);
  for (std::size_t j = 0; j < 4; ++j) out.corners[j] = transform_point(back, obs.corners[j]);
  out.marker_pose = back * obs.marker_pose;
  return out;
}

RobustCamera robust_camera(const CameraModel& camera, const ErrorBounds& bounds, Construction construction) {
  bounds.validate();
  double z = 0.0;
  CornerMatrix corners;
  if (construction == Construction::radius) {
    z = robust_z_offset(camera, bounds.delta);
    corners = shrink_corners(camera, bounds.epsilon);
  } else {
    z = conservative_z_offset(camera, bounds);
    corners = conservative_corners(camera, bounds.epsilon);
  }
  RigidTransform shift;
  shift.translation = Vec3(0.0, 0.0, z);
  return {shift, corners, camera.with_corners(corners), bounds, construction};
}

RotatedMin rotated_min(const Vec3& mu, const Vec3& x, double epsilon, BranchRule rule) {
  const double nm = mu.norm();
  const double nx = x.norm();
  if (nm == 0.0 || nx == 0.0) return {0.0, x};

  const Vec3 c = mu.cross(x);
  const double phi = std::atan2(c.norm(), mu.dot(x));
  const bool wraps = phi + epsilon > std::numbers::pi;

  auto rotate_away = [&] {
    // rotating x about mu x x increases its angle to mu
    const Vec3 axis = c.norm() > 1e-14 * nm * nx ? Vec3(c.normalized()) : any_perpendicular(x);
    return Vec3(rotation_from_vector(epsilon * axis) * x);
  };
  const Vec3 antipode = -nx * mu / nm;

  if (rule == BranchRule::swapped) {
    if (wraps) {
      const Vec3 y = rotate_away();
      return {mu.dot(y), y};
    }
    return {-nm * nx, antipode};
  }
  if (wraps) return {-nm * nx, antipode};
  return {nm * nx * std::cos(phi + epsilon), rotate_away()};
}

double rotated_min_sweep(const Vec3& mu, const Vec3& x, double epsilon, int directions) {
  double best = mu.dot(x);
  const double golden = std::numbers::pi * (3.0 - std::sqrt(5.0));
  for (int k = 0; k < directions; ++k) {
    const double z = 1.0 - (2.0 * k + 1.0) / directions;
    const double rho = std::sqrt(std::max(0.0, 1.0 - z * z));
    const Vec3 d(rho * std::cos(golden * k), rho * std::sin(golden * k), z);
    best = std::min(best, mu.dot(rotation_from_vector(epsilon * d) * x));
  }
  return best;
}

ThetaBoundRow::ThetaBoundRow(const Vec3& normal, const Vec3& corner, const RigidTransform& estimated,
                             double z_offset, const ErrorBounds& bounds, double alpha_gain, BranchRule rule)
    : b_(normal),
      x_(corner),
      r_e_(estimated.rotation),
      tau_(estimated.rotation.transpose() * estimated.translation),
      a_(-skew(normal) * estimated.rotation.transpose()),
      z_offset_(z_offset),
      bounds_(bounds),
      alpha_(alpha_gain),
      rule_(rule),
      t3_(alpha_gain * rotated_min(normal, corner, bounds.epsilon, rule).value) {}

ThetaTerms ThetaBoundRow::terms(const Twist& u) const {
  const Vec3 v_hat = r_e_.transpose() * u.v;
  const Vec3 w_hat = r_e_.transpose() * u.w;
  const Vec3 m = w_hat.cross(b_);
  ThetaTerms out;
  out.t0 = -b_.dot(v_hat) + b_.dot(tau_.cross(w_hat)) - alpha_ * z_offset_ * b_.z();
  out.t1 = -bounds_.delta * m.norm();
  out.t2 = rotated_min(m, x_, bounds_.epsilon, rule_).value;
  out.t3 = t3_;
  out.t4 = -alpha_ * bounds_.delta;
  return out;
}

Vec6 ThetaBoundRow::supergradient(const Twist& u) const {
  const Vec3 m = mu(u.w);
  Vec3 gw = r_e_ * b_.cross(tau_);
  const double nm = m.norm();
  if (nm > 0.0) gw -= bounds_.delta * a_.transpose() * (m / nm);
  gw += a_.transpose() * rotated_min(m, x_, bounds_.epsilon, rule_).minimizer;
  Vec6 g;
  g << -r_e_ * b_, gw;
  return g;
}

ThetaSweep ThetaBoundRow::sweep(const Twist& u, int directions) const {
  const Vec3 m = mu(u.w);
  const double eps = bounds_.epsilon;
  ThetaSweep out;
  out.gap2 = rotated_min_sweep(m, x_, eps, directions) - rotated_min(m, x_, eps, rule_).value;
  out.gap3 = alpha_ * rotated_min_sweep(b_, x_, eps, directions) - t3_;
  return out;
}

std::array<ThetaBoundRow, 16> theta_lower_bounds(const RobustCamera& robust, const MarkerObservation& obs,
                                                 const RigidTransform& estimated, double alpha_gain,
                                                 BranchRule rule) {
  std::array<ThetaBoundRow, 16> rows;
  for (std::size_t i = 0; i < 4; ++i) {
    for (std::size_t j = 0; j < 4; ++j) {
      rows[4 * i + j] = ThetaBoundRow(robust.camera.normals()[i], obs.corners[j], estimated, robust.z_offset(),
                                      robust.bounds, alpha_gain, rule);
    }
  }
  return rows;
}

}  // namespace fovcbf
