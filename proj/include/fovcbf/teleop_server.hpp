#pragma once

#include <cstdint>
#include <memory>
#include <string>

#include "fovcbf/sim.hpp"

namespace fovcbf {

struct ServiceOptions {
  std::string address = "0.0.0.0";
  std::uint16_t port = 8080;  // 0 picks a free port
  double rate_hz = 50.0;
  std::string static_dir;     // served under / when set
};

/// HTTP + WebSocket front end for a TeleopSession.
///   GET /healthz   200 {"status":"ok","t":...}
///   GET /scenario  camera size, robust corners and the loaded config
///   GET /ws        snapshot stream out, client messages in
/// One network thread and one control thread, joined by single-slot
/// mailboxes; the control loop never waits on a socket.
class TeleopServer {
 public:
  TeleopServer(ScenarioConfig config, ServiceOptions options);
  ~TeleopServer();
  TeleopServer(const TeleopServer&) = delete;
  TeleopServer& operator=(const TeleopServer&) = delete;

  /// Binds and starts both threads. Throws std::system_error if binding fails.
  void start();
  std::uint16_t port() const;
  void stop();
  /// Blocks until stop() or SIGINT/SIGTERM.
  void run_until_signal();

  struct Impl;

 private:
  std::unique_ptr<Impl> impl_;
};

}  // namespace fovcbf
