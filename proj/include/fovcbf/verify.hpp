#pragma once

#include <cstdint>
#include <limits>
#include <string>

#include <nlohmann/json_fwd.hpp>

#include "fovcbf/camera.hpp"
#include "fovcbf/robust.hpp"
#include "fovcbf/sim.hpp"

namespace fovcbf {

struct VerifyReport {
  std::uint64_t violations = 0;
  std::uint64_t samples = 0;
  double worst_margin = std::numeric_limits<double>::infinity();
  std::uint64_t seed = 0;

  /// Exactly {violations, samples, worst_margin, seed}.
  nlohmann::ordered_json to_json() const;
};

struct ContainmentOptions {
  std::uint64_t samples = 10000;  // perturbed frames
  std::size_t points = 1000;      // field-of-view points per frame
  std::uint64_t seed = 0;
  double tolerance = 1e-9;        // on a_i . p / (1 + |p|)
};

/// Samples frames (R, t) with |t| <= delta and |theta u| <= epsilon, half on
/// the boundary, plus translations against each visibility normal, and
/// checks that points of the inner field of view lie in the perturbed outer
/// one. inner_pose is ^{C^} T_{inner}. A frame counts as one violation if any
/// of its points falls outside. worst_margin is the smallest
/// a_i . p / (1 + |p|) over all points.
VerifyReport fov_containment_check(const CameraModel& inner, const RigidTransform& inner_pose,
                                   const CameraModel& outer, const ErrorBounds& bounds,
                                   const ContainmentOptions& options);

inline VerifyReport fov_containment_check(const RobustCamera& robust, const CameraModel& outer,
                                          const ContainmentOptions& options) {
  return fov_containment_check(robust.camera, robust.frame_shift, outer, robust.bounds, options);
}

struct BoundsOptions {
  std::uint64_t samples = 100000;
  std::uint64_t seed = 0;
  int sweep_directions = 64;  // 0 disables the brute-force rotation sweep
  double tolerance = 1e-9;
  BranchRule rule = BranchRule::corrected;
  Construction construction = Construction::conservative;
};

struct BoundsReport {
  VerifyReport report;          // worst_margin = min over rows of Theta - lower bound
  std::uint64_t swept = 0;      // rows compared against the sweep
  std::uint64_t sweep_below = 0;  // sweep found a value under the analytic bound
  double max_gap = 0.0;         // largest sweep-minus-bound gap of the rotation terms
  double mean_gap = 0.0;
};

/// Exact constraint value of the robust barrier for plane i, corner j, under
/// the error (^{C^} R_C, ^{C^} t_C), evaluated by re-deriving the affine rows
/// in the shifted frame.
double exact_theta(const RobustCamera& robust, const MarkerObservation& obs, const RigidTransform& estimated,
                   double alpha_gain, const RigidTransform& error, std::size_t row, const Twist& u);

/// Draws random estimated extrinsics, marker observations, twists and
/// admissible errors; every one of the 16 lower bounds must not exceed the
/// exact value by more than the tolerance.
BoundsReport theta_bounds_check(const ScenarioConfig& base, const BoundsOptions& options);

struct InvarianceOptions {
  std::uint64_t samples = 100;  // scenarios
  std::uint64_t seed = 0;
  double tolerance = 1e-9;
};

/// Runs random scenarios in the configured robust mode; a scenario violates
/// when any true barrier drops below -tolerance or detection is lost.
VerifyReport invariance_check(const ScenarioConfig& base, const InvarianceOptions& options);

}  // namespace fovcbf
