// fovcbf: run scenarios, export traces, run the Monte-Carlo verifiers and
// host the teleoperation service.
//
// Exit codes: 0 clean, 1 configuration error, 2 detection lost,
// 3 verifier violations.

#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <string>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "fovcbf/errors.hpp"
#include "fovcbf/sim.hpp"
#include "fovcbf/verify.hpp"

#ifdef FOVCBF_HAVE_SERVICE
#include "fovcbf/teleop_server.hpp"
#endif

using namespace fovcbf;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 1;
constexpr int kExitLost = 2;
constexpr int kExitViolations = 3;

ScenarioConfig base_config(const std::string& path) {
  return path.empty() ? default_scenario() : load_config(path);
}

int report(const VerifyReport& r, bool json, const std::string& title, const std::string& extra = {}) {
  if (json) {
    std::cout << r.to_json().dump() << '\n';
  } else {
    char line[256];
    std::snprintf(line, sizeof line, "%s: %llu violations in %llu samples, worst margin %.6g, seed %llu\n",
                  title.c_str(), static_cast<unsigned long long>(r.violations),
                  static_cast<unsigned long long>(r.samples), r.worst_margin,
                  static_cast<unsigned long long>(r.seed));
    std::cout << line << extra;
  }
  return r.violations == 0 ? kExitOk : kExitViolations;
}

struct RunArgs {
  std::string config;
  std::string trace;
  std::string format = "csv";
  bool disable_cbf = false;
  std::string robust;
};

int cmd_run(const RunArgs& a) {
  const ScenarioConfig config = base_config(a.config);
  RunOptions options;
  options.cbf_enabled = !a.disable_cbf;
  if (!a.robust.empty()) options.robust_mode = parse_robust_mode(a.robust);
  const ScenarioResult result = run_scenario(config, options);

  if (!a.trace.empty()) {
    std::ofstream out(a.trace);
    if (!out) throw ConfigError("--trace", "cannot open " + a.trace);
    if (a.format == "jsonl") {
      write_trace_jsonl(out, result.trace);
    } else {
      write_trace_csv(out, result.trace);
    }
  }
  if (result.detection_lost) {
    std::cerr << "fovcbf run: " << result.diagnostic << '\n';
    return kExitLost;
  }
  double h_min = INFINITY;
  for (const auto& r : result.trace) h_min = std::min(h_min, r.h_min);
  const auto& last = result.trace.back();
  std::cerr << "fovcbf run: " << result.trace.size() << " records, min h " << h_min << ", final |e| "
            << last.e.norm() << '\n';
  return kExitOk;
}

struct VerifyArgs {
  std::string config;
  std::uint64_t samples = 0;
  std::uint64_t seed = 0;
  double delta = NAN;
  double epsilon = NAN;
  bool json = false;
};

ScenarioConfig verify_config(const VerifyArgs& a) {
  ScenarioConfig c = base_config(a.config);
  if (!std::isnan(a.delta)) c.bounds.delta = a.delta;
  if (!std::isnan(a.epsilon)) c.bounds.epsilon = a.epsilon;
  c.bounds.validate();
  if (a.samples == 0) throw ConfigError("--samples", "must be > 0");
  return c;
}

Construction parse_construction(const std::string& s) {
  return s == "radius" ? Construction::radius : Construction::conservative;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Visibility-preserving visual servoing: simulation and verification"};
  app.require_subcommand(1);
  app.get_formatter()->column_width(40);

  RunArgs run;
  auto* run_cmd = app.add_subcommand("run", "Run one scenario closed loop and optionally write its trace");
  run_cmd->add_option("--config", run.config, "Scenario JSON (default: built-in desk scenario)");
  run_cmd->add_option("--trace", run.trace, "Trace output path");
  run_cmd->add_option("--format", run.format, "Trace format")->check(CLI::IsMember({"csv", "jsonl"}))->capture_default_str();
  run_cmd->add_flag("--disable-cbf", run.disable_cbf, "Bypass the safety filter");
  run_cmd->add_option("--robust", run.robust, "Override robust_mode (config default: full)")
      ->check(CLI::IsMember({"off", "frame", "full", "frame_shift_only", "full_theta"}));

  VerifyArgs vc;
  vc.samples = 10000;
  std::size_t points = 1000;
  std::string construction = "conservative";
  bool nominal = false;
  auto* vc_cmd = app.add_subcommand("verify-containment",
                                    "Check that the robust field of view stays inside every perturbed true one");
  vc_cmd->add_option("--samples", vc.samples, "Perturbed frames")->capture_default_str();
  vc_cmd->add_option("--points", points, "Field-of-view points per frame")->capture_default_str();
  vc_cmd->add_option("--seed", vc.seed, "RNG seed")->capture_default_str();
  vc_cmd->add_option("--delta", vc.delta, "Translation bound in m (default: config, 0.02)");
  vc_cmd->add_option("--epsilon", vc.epsilon, "Rotation bound in rad (default: config, 5 deg = 0.0872665)");
  vc_cmd->add_option("--construction", construction, "Corner shrinking")
      ->check(CLI::IsMember({"conservative", "radius"}))
      ->capture_default_str();
  vc_cmd->add_flag("--nominal", nominal, "Check the unmodified camera instead (expected to fail)");
  vc_cmd->add_option("--config", vc.config, "Scenario JSON supplying the camera");
  vc_cmd->add_flag("--json", vc.json, "Print {violations, samples, worst_margin, seed}");

  VerifyArgs vb;
  vb.samples = 100000;
  int sweep = 64;
  std::string branch = "corrected";
  std::string vb_construction = "conservative";
  auto* vb_cmd = app.add_subcommand("verify-bounds", "Check the robust constraint lower bounds against exact values");
  vb_cmd->add_option("--samples", vb.samples, "Random (error, state, twist) draws")->capture_default_str();
  vb_cmd->add_option("--seed", vb.seed, "RNG seed")->capture_default_str();
  vb_cmd->add_option("--delta", vb.delta, "Translation bound in m (default: config, 0.02)");
  vb_cmd->add_option("--epsilon", vb.epsilon, "Rotation bound in rad (default: config, 5 deg = 0.0872665)");
  vb_cmd->add_option("--sweep", sweep, "Brute-force rotation sweep directions, 0 disables")->capture_default_str();
  vb_cmd->add_option("--branch-rule", branch, "Rotated-minimum case split")
      ->check(CLI::IsMember({"corrected", "swapped"}))
      ->capture_default_str();
  vb_cmd->add_option("--construction", vb_construction, "Corner shrinking")
      ->check(CLI::IsMember({"conservative", "radius"}))
      ->capture_default_str();
  vb_cmd->add_option("--config", vb.config, "Scenario JSON supplying camera and gains");
  vb_cmd->add_flag("--json", vb.json, "Print {violations, samples, worst_margin, seed}");

  VerifyArgs vi;
  vi.samples = 100;
  auto* vi_cmd = app.add_subcommand("verify-invariance",
                                    "Run random scenarios and check every true barrier stays non-negative");
  vi_cmd->add_option("--samples", vi.samples, "Scenarios")->capture_default_str();
  vi_cmd->add_option("--seed", vi.seed, "RNG seed")->capture_default_str();
  vi_cmd->add_option("--delta", vi.delta, "Translation bound in m (default: config, 0.02)");
  vi_cmd->add_option("--epsilon", vi.epsilon, "Rotation bound in rad (default: config, 5 deg = 0.0872665)");
  vi_cmd->add_option("--config", vi.config, "Base scenario JSON (robust_mode taken from it, default full)");
  vi_cmd->add_flag("--json", vi.json, "Print {violations, samples, worst_margin, seed}");

#ifdef FOVCBF_HAVE_SERVICE
  std::string serve_config;
  ServiceOptions service;
  auto* serve_cmd = app.add_subcommand("serve", "Real-time teleoperation service (HTTP + /ws)");
  serve_cmd->add_option("--config", serve_config, "Scenario JSON");
  serve_cmd->add_option("--address", service.address, "Bind address")->capture_default_str();
  serve_cmd->add_option("--port", service.port, "TCP port, 0 picks one")->capture_default_str();
  serve_cmd->add_option("--rate", service.rate_hz, "Control and publish rate in Hz")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  serve_cmd->add_option("--static", service.static_dir, "Directory served under /");
#endif

  CLI11_PARSE(app, argc, argv);

  try {
    if (run_cmd->parsed()) return cmd_run(run);

    if (vc_cmd->parsed()) {
      const ScenarioConfig c = verify_config(vc);
      const CameraModel camera = c.camera();
      ContainmentOptions o;
      o.samples = vc.samples;
      o.points = points;
      o.seed = vc.seed;
      if (points == 0) throw ConfigError("--points", "must be > 0");
      if (nominal) {
        return report(fov_containment_check(camera, RigidTransform{}, camera, c.bounds, o), vc.json,
                      "containment (nominal camera)");
      }
      const RobustCamera robust = robust_camera(camera, c.bounds, parse_construction(construction));
      return report(fov_containment_check(robust, camera, o), vc.json, "containment (" + construction + ")");
    }

    if (vb_cmd->parsed()) {
      const ScenarioConfig c = verify_config(vb);
      BoundsOptions o;
      o.samples = vb.samples;
      o.seed = vb.seed;
      o.sweep_directions = sweep;
      o.rule = branch == "swapped" ? BranchRule::swapped : BranchRule::corrected;
      o.construction = parse_construction(vb_construction);
      const BoundsReport r = theta_bounds_check(c, o);
      std::string extra;
      if (sweep > 0) {
        char line[256];
        std::snprintf(line, sizeof line, "rotation sweep: %llu rows, %llu below bound, gap max %.6g mean %.6g\n",
                      static_cast<unsigned long long>(r.swept), static_cast<unsigned long long>(r.sweep_below),
                      r.max_gap, r.mean_gap);
        extra = line;
      }
      return report(r.report, vb.json, "bounds (" + branch + ")", extra);
    }

    if (vi_cmd->parsed()) {
      const ScenarioConfig c = verify_config(vi);
      InvarianceOptions o;
      o.samples = vi.samples;
      o.seed = vi.seed;
      return report(invariance_check(c, o), vi.json, "invariance (" + std::string(to_string(c.robust_mode)) + ")");
    }

#ifdef FOVCBF_HAVE_SERVICE
    if (serve_cmd->parsed()) {
      TeleopServer server(base_config(serve_config), service);
      server.start();
      std::cerr << "fovcbf serve: listening on " << service.address << ':' << server.port() << '\n';
      server.run_until_signal();
      return kExitOk;
    }
#endif
  } catch (const ConfigError& e) {
    std::cerr << "fovcbf: config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const GeometryError& e) {
    std::cerr << "fovcbf: " << e.what() << '\n';
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "fovcbf: " << e.what() << '\n';
    return kExitConfig;
  }
  return kExitOk;
}
