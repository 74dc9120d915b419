#pragma once

#include <array>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "fovcbf/sim.hpp"

namespace fovcbf {

struct Snapshot {
  double t = 0.0;
  std::vector<Pixel> corners;  // marker corners in the estimated image; empty when behind the camera
  Eigen::Matrix4d h = Eigen::Matrix4d::Zero();  // as the controller sees them
  double h_z = 0.0;
  double beta = 0.0;
  Twist u;
  Twist u_nom;
  RigidTransform ee_pose;
  bool cbf_enabled = true;
  RobustMode robust_mode = RobustMode::off;
  bool detection_ok = true;
};

struct HilMessage {
  Twist twist;
};

/// name is one of sigma, alpha_gain, zeta, beta_max, h_safe, robust_mode.
/// robust_mode takes a string, the rest numbers.
struct SetParamMessage {
  std::string name;
  std::variant<double, std::string> value;
};

struct ToggleCbfMessage {
  bool enabled = true;
};

struct ResetMessage {};

using ClientMessage = std::variant<HilMessage, SetParamMessage, ToggleCbfMessage, ResetMessage>;

struct Decoded {
  std::optional<ClientMessage> message;
  std::string error;  // set when message is empty
};

std::string encode(const Snapshot& s);
std::string encode(const ClientMessage& m);
std::string encode_error(std::string_view reason);

/// Never throws: malformed input comes back as an error reason.
Decoded decode_client(std::string_view text);
std::optional<Snapshot> decode_snapshot(std::string_view text);

/// The deterministic half of the service: owns the simulation, applies
/// client messages and advances one control period per tick. Time is
/// injected so the staleness rule is testable.
class TeleopSession {
 public:
  static constexpr double kStaleAfter = 0.5;  // s

  TeleopSession(ScenarioConfig config, double rate_hz);

  void apply(const ClientMessage& message, double now);
  Snapshot tick(double now);
  Snapshot snapshot() const;

  const Simulation& simulation() const { return sim_; }
  int substeps() const { return substeps_; }
  /// u_HIL in effect at time now.
  Twist effective_hil(double now) const;

 private:
  Simulation sim_;
  int substeps_;
  Twist hil_;
  double hil_stamp_;
  TraceRecord last_;
};

}  // namespace fovcbf
