// Acceptance runner: one PASS/FAIL line per criterion, exit status 0 only
// when every line passes.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "fovcbf/hil.hpp"
#include "fovcbf/pbvs.hpp"
#include "fovcbf/qp.hpp"
#include "fovcbf/robust.hpp"
#include "fovcbf/sim.hpp"
#include "fovcbf/teleop.hpp"
#include "fovcbf/verify.hpp"
#include "oracles.hpp"

using namespace fovcbf;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3g", v);
  return buf;
}

std::string report(const VerifyReport& r) {
  return std::to_string(r.violations) + "/" + std::to_string(r.samples) + " violations, worst " + num(r.worst_margin);
}

struct Extremes {
  double true_h = 1e300;
  double est_h = 1e300;
};

Extremes extremes(const ScenarioResult& r) {
  Extremes e;
  for (const auto& rec : r.trace) {
    e.true_h = std::min({e.true_h, rec.h_min, rec.h_z});
    e.est_h = std::min({e.est_h, rec.h_est.minCoeff(), rec.h_z_est});
  }
  return e;
}

Outcome forward_invariance() {
  const VerifyReport r = invariance_check(default_scenario(), {100, 0, 1e-9});
  return {r.violations == 0, "full_theta, error at the bound: " + report(r)};
}

Outcome necessity() {
  RunOptions off;
  off.cbf_enabled = false;
  const ScenarioResult unfiltered = run_scenario(adversarial_scenario(), off);

  const ScenarioConfig c = load_config(std::string(FOVCBF_SCENARIO_DIR) + "/robust_off_violation.json");
  const Extremes e = extremes(run_scenario(c));
  const bool pass = unfiltered.detection_lost && c.robust_mode == RobustMode::off && e.true_h < 0.0 && e.est_h >= 0.0;
  return {pass, "no CBF: " + (unfiltered.detection_lost ? unfiltered.diagnostic : std::string("still visible")) +
                    "; robust off: min true h " + num(e.true_h) + ", min estimated h " + num(e.est_h)};
}

Outcome containment() {
  const ScenarioConfig c = default_scenario();
  const CameraModel cam = c.camera();
  const ContainmentOptions opt;
  const ErrorBounds full = c.bounds;
  std::string detail;
  bool pass = true;
  for (const ErrorBounds b : {ErrorBounds{full.delta, 0.0}, ErrorBounds{0.0, full.epsilon}, full}) {
    const VerifyReport r = fov_containment_check(robust_camera(cam, b), cam, opt);
    pass = pass && r.violations == 0;
    detail += "(" + num(b.delta) + ", " + num(b.epsilon) + ") " + report(r) + "; ";
  }
  const VerifyReport nominal = fov_containment_check(cam, RigidTransform{}, cam, full, opt);
  pass = pass && nominal.violations > 0;
  return {pass, detail + "nominal " + report(nominal)};
}

Outcome bound_soundness() {
  const BoundsReport r = theta_bounds_check(default_scenario(), BoundsOptions{});
  const bool pass = r.report.violations == 0 && r.sweep_below == 0;
  return {pass, report(r.report) + "; sweep over " + std::to_string(r.swept) + " rows, " +
                    std::to_string(r.sweep_below) + " below bound, gap max " + num(r.max_gap) + " mean " +
                    num(r.mean_gap)};
}

Outcome controller() {
  const ScenarioConfig c = default_scenario();
  const double sigma = c.gains.sigma;
  const RigidTransform goal = c.marker_pose * c.grasp_offset;
  auto servo = [&](const RigidTransform& x) {
    const RigidTransform rel = inverse(goal) * x;
    return servo_twist(feature_error(rel), rel.rotation, sigma);
  };
  RigidTransform x = c.initial_pose;
  const Vec6 e0 = feature_error(inverse(goal) * x).vector();
  const double dt = 1e-3;
  const int n = static_cast<int>(std::lround(1.0 / sigma / dt));
  for (int k = 0; k < n; ++k) {
    const Twist u_mid = servo(x * exp_twist(0.5 * dt * servo(x).v, 0.5 * dt * servo(x).w));
    x = x * exp_twist(dt * u_mid.v, dt * u_mid.w);
  }
  const Vec6 e1 = feature_error(inverse(goal) * x).vector();
  const double decay = (e1 - std::exp(-1.0) * e0).norm() / (std::exp(-1.0) * e0.norm());

  std::mt19937_64 rng(31);
  double fd_worst = 0.0;
  for (int k = 0; k < 100; ++k) {
    const RigidTransform T = oracle::random_transform(rng, 2.9, 0.5);
    const Twist u = Twist::from_vector(oracle::random_vec6(rng, 1.0));
    const double h = 1e-6;
    const Vec6 plus = feature_error(T * oracle::integrate_body_twist({}, u, h, 4)).vector();
    const Vec6 minus = feature_error(T * oracle::integrate_body_twist({}, {-u.v, -u.w}, h, 4)).vector();
    const Vec6 fd = (plus - minus) / (2 * h);
    const Vec6 predicted = interaction_matrix(feature_error(T), T.rotation) * u.vector();
    fd_worst = std::max(fd_worst, (predicted - fd).norm() / std::max(1.0, fd.norm()));
  }
  return {decay <= 1e-6 && fd_worst < 1e-4,
          "decay error at 1/sigma " + num(decay) + ", interaction FD residual " + num(fd_worst)};
}

Outcome qp_oracle() {
  std::mt19937_64 rng(61);
  SafetyQp qp;
  double du = 0.0;
  double kkt = 0.0;
  int failures = 0;
  for (int k = 0; k < 1000; ++k) {
    const oracle::RandomQp q = oracle::random_qp(rng, 1 + static_cast<int>(rng() % 10));
    const QpSolution s = qp.solve_affine(q.problem);
    const auto ref = oracle::enumerate_qp(q.problem.nominal.vector(), q.A, q.b);
    if (!ref || s.status != QpStatus::optimal) {
      ++failures;
      continue;
    }
    du = std::max(du, (s.u.vector() - ref->u).norm());
    kkt = std::max(kkt, kkt_residual(q.problem, s));
  }
  return {failures == 0 && du < 1e-6 && kkt < 1e-8,
          "1000 problems, " + std::to_string(failures) + " mismatched status, max |du| " + num(du) + ", max KKT " +
              num(kkt)};
}

Outcome hil_rule() {
  const HilParams p{0.8, 0.1};
  bool exact = hil_beta(0.0, p) == 0.0 && hil_beta(-0.2, p) == 0.0 && hil_beta(0.1, p) == 0.8 &&
               hil_beta(0.3, p) == 0.8 && hil_beta(0.05, p) == 0.4;
  for (double h = 0.0; h <= 0.1; h += 0.01) exact = exact && std::abs(hil_beta(h, p) - 8.0 * h) < 1e-15;

  // operator pushing toward the image edge, through the simulator hook and
  // through the teleoperation session
  const ScenarioConfig adv = adversarial_scenario();
  const Twist push{Vec3(0.4, 0.0, 0.0), Vec3::Zero()};
  double worst = 1e300;
  bool lost = false;
  for (RobustMode mode : {RobustMode::off, RobustMode::full_theta}) {
    ScenarioConfig cfg = adv;
    cfg.robust_mode = mode;
    RunOptions opt;
    opt.hil = [&](double, const Simulation&) { return push; };
    const ScenarioResult r = run_scenario(cfg, opt);
    lost = lost || r.detection_lost;
    worst = std::min(worst, extremes(r).true_h);
  }
  TeleopSession session(adv, 50.0);
  for (int k = 0; k < 250; ++k) {
    session.apply(HilMessage{push}, 0.02 * k);
    const Snapshot s = session.tick(0.02 * k);
    lost = lost || !s.detection_ok;
    worst = std::min({worst, s.h.minCoeff(), s.h_z});
  }
  return {exact && !lost && worst >= -1e-9, std::string("beta values ") + (exact ? "exact" : "WRONG") +
                                                 ", scripted operator min h " + num(worst) +
                                                 (lost ? ", detection lost" : ", no detection loss")};
}

}  // namespace

int main() {
  const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria{
      {"A1 forward invariance", forward_invariance}, {"A2 necessity ablation", necessity},
      {"A3 containment", containment},               {"A4 bound soundness", bound_soundness},
      {"A5 controller", controller},                 {"A6 QP oracle", qp_oracle},
      {"A7 HIL rule", hil_rule}};
  bool all = true;
  for (const auto& [name, check] : criteria) {
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = check();
    } catch (const std::exception& e) {
      o = {false, std::string("threw: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::printf("%s %s: %s (%.1f s)\n", o.pass ? "PASS" : "FAIL", name, o.detail.c_str(), secs);
    std::fflush(stdout);
    all = all && o.pass;
  }
  return all ? 0 : 1;
}
