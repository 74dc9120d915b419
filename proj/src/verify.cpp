#include "fovcbf/verify.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include <nlohmann/json.hpp>

namespace fovcbf {

namespace {

Vec3 random_unit(std::mt19937_64& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  Vec3 v;
  do {
    v = Vec3(n(rng), n(rng), n(rng));
  } while (v.norm() < 1e-9);
  return v.normalized();
}

// Even indices sit on the boundary of the admissible set, odd ones inside.
RigidTransform sample_error(std::mt19937_64& rng, const ErrorBounds& b, std::uint64_t index) {
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  const bool boundary = index % 2 == 0;
  const double r_t = boundary ? b.delta : b.delta * std::cbrt(u01(rng));
  const double r_a = (boundary || index % 4 == 1) ? b.epsilon : b.epsilon * std::cbrt(u01(rng));
  const Vec3 t = r_t * random_unit(rng);
  return {rotation_from_vector(r_a * random_unit(rng)), t};
}

}  // namespace

nlohmann::ordered_json VerifyReport::to_json() const {
  return {{"violations", violations}, {"samples", samples}, {"worst_margin", worst_margin}, {"seed", seed}};
}

VerifyReport fov_containment_check(const CameraModel& inner, const RigidTransform& inner_pose,
                                   const CameraModel& outer, const ErrorBounds& bounds,
                                   const ContainmentOptions& options) {
  VerifyReport report;
  report.samples = options.samples;
  report.seed = options.seed;

  std::vector<RigidTransform> adversarial;
  for (const auto& a : outer.normals()) {
    const Vec3 t = -bounds.delta * a;
    adversarial.push_back({Mat3::Identity(), t});
    const Vec3 axis = a.cross(Vec3::UnitZ());
    if (axis.norm() > 1e-12) {
      for (double sign : {1.0, -1.0}) {
        adversarial.push_back({rotation_from_vector(sign * bounds.epsilon * axis.normalized()), t});
      }
    }
  }

  for (std::uint64_t k = 0; k < options.samples; ++k) {
    std::mt19937_64 rng(stream_seed(options.seed, k));
    std::uniform_real_distribution<double> u01(0.0, 1.0);
    const RigidTransform error = k < adversarial.size() ? adversarial[k] : sample_error(rng, bounds, k);
    const Mat3 rt = error.rotation.transpose();

    bool violated = false;
    for (std::size_t p = 0; p < options.points; ++p) {
      Vec3 dir = Vec3::Zero();
      const std::size_t kind = p % 4;
      const auto j = static_cast<std::size_t>(u01(rng) * 4.0) % 4;
      if (kind == 0) {
        dir = inner.lines()[j];
      } else if (kind == 1) {
        const double s = u01(rng);
        dir = (1.0 - s) * inner.lines()[j] + s * inner.lines()[(j + 1) % 4];
      } else {
        double sum = 0.0;
        for (std::size_t m = 0; m < 4; ++m) {
          const double w = -std::log(1.0 - u01(rng));
          dir += w * inner.lines()[m];
          sum += w;
        }
        dir /= sum;
      }
      const double lambda = p == 0 ? 0.0 : std::pow(10.0, -3.0 + 6.0 * u01(rng));
      const Vec3 in_est = transform_point(inner_pose, lambda * dir);
      const Vec3 in_true = rt * (in_est - error.translation);
      const double scale = 1.0 + in_est.norm();
      for (const auto& a : outer.normals()) {
        const double m = a.dot(in_true) / scale;
        report.worst_margin = std::min(report.worst_margin, m);
        if (m < -options.tolerance) violated = true;
      }
    }
    if (violated) ++report.violations;
  }
  return report;
}

double exact_theta(const RobustCamera& robust, const MarkerObservation& obs, const RigidTransform& estimated,
                   double alpha_gain, const RigidTransform& error, std::size_t row, const Twist& u) {
  MarkerObservation shifted = obs;
  const Vec3& q = robust.frame_shift.translation;
  for (std::size_t j = 0; j < 4; ++j) shifted.corners[j] = transform_point(error, obs.corners[j]) - q;
  const auto rows = visibility_constraint_rows(robust.camera, shifted, robust.extrinsics(estimated), alpha_gain);
  return rows[row].evaluate(u);
}

BoundsReport theta_bounds_check(const ScenarioConfig& base, const BoundsOptions& options) {
  const CameraModel camera = base.camera();
  const RobustCamera robust = robust_camera(camera, base.bounds, options.construction);
  const double alpha = base.gains.alpha_gain;

  BoundsReport out;
  out.report.samples = options.samples;
  out.report.seed = options.seed;
  double gap_sum = 0.0;

  for (std::uint64_t k = 0; k < options.samples; ++k) {
    std::mt19937_64 rng(stream_seed(options.seed, k));
    std::uniform_real_distribution<double> u01(0.0, 1.0);
    std::normal_distribution<double> n01(0.0, 1.0);

    const RigidTransform estimated{rotation_from_vector(3.1 * u01(rng) * random_unit(rng)),
                                   Vec3(0.05 * n01(rng), 0.05 * n01(rng), 0.05 * n01(rng))};
    const double depth = 0.15 + 1.05 * u01(rng);
    const Vec3 center(depth * (1.2 * u01(rng) - 0.6), depth * (1.2 * u01(rng) - 0.6), depth);
    const RigidTransform pose{rot_x(3.14159265358979) * rotation_from_vector(u01(rng) * random_unit(rng)), center};
    const MarkerObservation obs = make_observation(pose, base.marker_side);

    Twist u{Vec3(0.3 * n01(rng), 0.3 * n01(rng), 0.3 * n01(rng)),
            Vec3(0.6 * n01(rng), 0.6 * n01(rng), 0.6 * n01(rng))};
    if (k % 10 == 0) u.w.setZero();
    const RigidTransform error = sample_error(rng, base.bounds, k);

    const auto rows = theta_lower_bounds(robust, obs, estimated, alpha, options.rule);
    bool violated = false;
    for (std::size_t r = 0; r < rows.size(); ++r) {
      const double margin = exact_theta(robust, obs, estimated, alpha, error, r, u) - rows[r].value(u);
      out.report.worst_margin = std::min(out.report.worst_margin, margin);
      if (margin < -options.tolerance) violated = true;
    }
    if (violated) ++out.report.violations;

    if (options.sweep_directions > 0) {
      const ThetaSweep s = rows[k % rows.size()].sweep(u, options.sweep_directions);
      if (s.gap2 < -options.tolerance || s.gap3 < -options.tolerance) ++out.sweep_below;
      const double gap = s.gap2 + s.gap3;
      out.max_gap = std::max(out.max_gap, gap);
      gap_sum += gap;
      ++out.swept;
    }
  }
  if (out.swept > 0) out.mean_gap = gap_sum / static_cast<double>(out.swept);
  return out;
}

VerifyReport invariance_check(const ScenarioConfig& base, const InvarianceOptions& options) {
  VerifyReport report;
  report.samples = options.samples;
  report.seed = options.seed;
  for (std::uint64_t k = 0; k < options.samples; ++k) {
    const ScenarioConfig c = random_scenario(base, stream_seed(options.seed, k));
    const ScenarioResult res = run_scenario(c);
    double worst = std::numeric_limits<double>::infinity();
    for (const auto& rec : res.trace) worst = std::min({worst, rec.h.minCoeff(), rec.h_z});
    report.worst_margin = std::min(report.worst_margin, worst);
    if (res.detection_lost || worst < -options.tolerance) ++report.violations;
  }
  return report;
}

}  // namespace fovcbf
