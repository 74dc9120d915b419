#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "fovcbf/camera.hpp"
#include "fovcbf/hil.hpp"
#include "fovcbf/qp.hpp"
#include "fovcbf/robust.hpp"
#include "fovcbf/visibility_cbf.hpp"

namespace fovcbf {

enum class RobustMode { off, frame_shift_only, full_theta };

std::string_view to_string(RobustMode mode);
/// Accepts off | frame_shift_only | full_theta and the short forms frame | full.
std::optional<RobustMode> parse_robust_mode(std::string_view text);

struct Gains {
  double sigma = 0.8;       // 1/s
  double alpha_gain = 2.0;  // 1/s
  double zeta = 0.05;       // m
};

struct SimParams {
  double dt = 0.01;
  double duration = 10.0;
  std::uint64_t seed = 0;

  std::size_t steps() const;  // duration / dt, rounded
};

struct ScenarioConfig {
  Intrinsics intrinsics{615.0, 615.0, 320.0, 240.0, 0.0};
  double width = 640.0;
  double length = 480.0;
  RigidTransform true_extrinsics;       // ^E T_C
  RigidTransform estimated_extrinsics;  // ^E T_{C^}
  ErrorBounds bounds{0.02, 0.0872664625997164788};
  double marker_side = 0.1;
  RigidTransform marker_pose;   // ^W T_A
  RigidTransform grasp_offset;  // ^A T_{E*}
  Gains gains;
  HilParams hil;
  RobustMode robust_mode = RobustMode::full_theta;
  SimParams sim;
  RigidTransform initial_pose;  // ^W T_E

  CameraModel camera() const { return CameraModel(intrinsics, width, length); }
  /// ^{C^} T_C, the injected calibration error.
  RigidTransform extrinsic_error() const { return inverse(estimated_extrinsics) * true_extrinsics; }
  /// Throws ConfigError naming the offending key.
  void validate() const;
};

/// Desk-scale defaults: marker 0.4 m below a downward-looking end effector.
ScenarioConfig default_scenario();

ScenarioConfig config_from_json(const nlohmann::json& j);
nlohmann::json config_to_json(const ScenarioConfig& config);
/// Throws ConfigError for unreadable files, malformed JSON or invalid fields.
ScenarioConfig load_config(const std::string& path);

struct WorldState {
  RigidTransform ee_pose;      // ^W T_E
  RigidTransform marker_pose;  // ^W T_A
  double t = 0.0;
};

/// Holds the body twist constant over dt and applies the exact exponential.
WorldState step(const WorldState& state, const Twist& u, double dt);

struct Observation {
  bool detected = false;
  MarkerObservation true_frame;       // in C, what the sensor images
  MarkerObservation estimated_frame;  // in C^, what the controller reasons with
};

/// Detection is lost once a corner leaves the true field of view by more
/// than 1e-9 m or the camera is behind the marker.
Observation observe(const WorldState& state, const ScenarioConfig& config);

struct TraceRecord {
  double t = 0.0;
  Eigen::Matrix4d h = Eigen::Matrix4d::Zero();  // true camera
  double h_z = 0.0;
  double h_min = 0.0;
  Eigen::Matrix4d h_est = Eigen::Matrix4d::Zero();  // estimated camera, as the controller sees it
  double h_z_est = 0.0;
  double beta = 0.0;
  Twist u;
  Twist u_nom;
  Vec6 e = Vec6::Zero();
  QpStatus status = QpStatus::bypassed;
  bool fallback = false;
  bool guarded = false;  // the sampled-data guard scaled u down
  bool detection_ok = true;
};

/// Closed loop for a single scenario. Owns all mutable state; one instance
/// per thread.
class Simulation {
 public:
  explicit Simulation(ScenarioConfig config, bool cbf_enabled = true);

  const ScenarioConfig& config() const { return config_; }
  const WorldState& state() const { return state_; }
  const RobustCamera& robust() const { return robust_; }
  const Observation& observation() const { return obs_; }
  bool cbf_enabled() const { return cbf_enabled_; }

  void set_cbf_enabled(bool on) { cbf_enabled_ = on; }
  void set_robust_mode(RobustMode mode) { config_.robust_mode = mode; }
  void set_gains(const Gains& gains) { config_.gains = gains; }
  void set_hil(const HilParams& hil) { config_.hil = hil; }
  void reset();

  /// Observe, blend, filter. Does not move the world.
  TraceRecord control(const Twist& u_hil);
  void integrate(const Twist& u);
  /// control + integrate; the world stays put once detection is lost.
  TraceRecord tick(const Twist& u_hil);

 private:
  Twist filter(const Twist& u_nom, TraceRecord& rec);
  bool next_sample_safe(const Twist& u) const;

  ScenarioConfig config_;
  CameraModel camera_;
  RobustCamera robust_;
  bool cbf_enabled_;
  WorldState state_;
  Observation obs_;
  SafetyQp qp_;
};

using HilScript = std::function<Twist(double t, const Simulation& sim)>;

struct RunOptions {
  bool cbf_enabled = true;
  std::optional<RobustMode> robust_mode;
  HilScript hil;
};

struct ScenarioResult {
  std::vector<TraceRecord> trace;
  bool detection_lost = false;
  std::string diagnostic;
};

/// One record per step, duration/dt + 1 records unless detection is lost.
ScenarioResult run_scenario(const ScenarioConfig& config, const RunOptions& options = {});

/// Header: t,h00..h33,hz,hmin,beta,u0..u5,unom0..unom5,e0..e5,status,fallback
void write_trace_csv(std::ostream& out, const std::vector<TraceRecord>& trace);
void write_trace_jsonl(std::ostream& out, const std::vector<TraceRecord>& trace);
nlohmann::json record_to_json(const TraceRecord& rec);

/// Base scenario with a random initial pose around the grasp target and an
/// injected extrinsic error on the boundary of the bounds. The initial state
/// keeps the marker inside the worst-case robust field of view.
ScenarioConfig random_scenario(const ScenarioConfig& base, std::uint64_t seed);

/// Marker pushed toward the image edge by the grasp target.
ScenarioConfig adversarial_scenario();

/// Per-sample generator seeded from (seed, index).
std::uint64_t stream_seed(std::uint64_t seed, std::uint64_t index);

}  // namespace fovcbf
