#include "fovcbf/sim.hpp"

#include <array>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>
#include <ostream>
#include <random>
#include <sstream>

#include <nlohmann/json.hpp>

#include "fovcbf/errors.hpp"

namespace fovcbf {

using nlohmann::json;

namespace {

constexpr double kDetectionTol = 1e-9;

// Strict reader: unknown keys and wrong types are reported with their path.
class Reader {
 public:
  Reader(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw ConfigError(path_.empty() ? "<root>" : path_, "expected an object");
  }

  void allow(std::initializer_list<std::string_view> keys) const {
    for (const auto& [key, value] : j_.items()) {
      bool known = false;
      for (auto k : keys) known = known || key == k;
      if (!known) throw ConfigError(join(key), "unknown key");
    }
  }

  bool has(const std::string& key) const { return j_.contains(key); }

  double number(const std::string& key, double fallback) const {
    if (!j_.contains(key)) return fallback;
    const json& v = j_.at(key);
    if (!v.is_number()) throw ConfigError(join(key), "expected a number");
    const double d = v.get<double>();
    if (!std::isfinite(d)) throw ConfigError(join(key), "must be finite");
    return d;
  }

  std::uint64_t unsigned_integer(const std::string& key, std::uint64_t fallback) const {
    if (!j_.contains(key)) return fallback;
    const json& v = j_.at(key);
    if (!v.is_number_unsigned() && !(v.is_number_integer() && v.get<std::int64_t>() >= 0)) {
      throw ConfigError(join(key), "expected a non-negative integer");
    }
    return v.get<std::uint64_t>();
  }

  std::string string(const std::string& key, const std::string& fallback) const {
    if (!j_.contains(key)) return fallback;
    const json& v = j_.at(key);
    if (!v.is_string()) throw ConfigError(join(key), "expected a string");
    return v.get<std::string>();
  }

  Vec3 vec3(const std::string& key, const Vec3& fallback) const {
    if (!j_.contains(key)) return fallback;
    const json& v = j_.at(key);
    if (!v.is_array() || v.size() != 3) throw ConfigError(join(key), "expected an array of 3 numbers");
    Vec3 out;
    for (int k = 0; k < 3; ++k) {
      if (!v[k].is_number()) throw ConfigError(join(key), "expected an array of 3 numbers");
      out(k) = v[k].get<double>();
      if (!std::isfinite(out(k))) throw ConfigError(join(key), "must be finite");
    }
    return out;
  }

  Reader child(const std::string& key) const { return Reader(j_.at(key), join(key)); }

  RigidTransform transform(const std::string& key, const RigidTransform& fallback) const {
    if (!j_.contains(key)) return fallback;
    const Reader r = child(key);
    r.allow({"rotation_vector", "translation"});
    return RigidTransform::from_vector(r.vec3("rotation_vector", rotation_to_vector(fallback.rotation)),
                                       r.vec3("translation", fallback.translation));
  }

 private:
  std::string join(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

  const json& j_;
  std::string path_;
};

json vec_json(const Eigen::VectorXd& v) {
  json a = json::array();
  for (Eigen::Index k = 0; k < v.size(); ++k) a.push_back(v(k));
  return a;
}

json transform_json(const RigidTransform& t) {
  return {{"rotation_vector", vec_json(rotation_to_vector(t.rotation))}, {"translation", vec_json(t.translation)}};
}

std::uint64_t splitmix64(std::uint64_t z) {
  z += 0x9E3779B97F4A7C15ULL;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

Vec3 random_unit(std::mt19937_64& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  Vec3 v;
  do {
    v = Vec3(n(rng), n(rng), n(rng));
  } while (v.norm() < 1e-9);
  return v.normalized();
}

MarkerObservation estimated_view(const WorldState& s, const ScenarioConfig& c) {
  const RigidTransform cam = s.ee_pose * c.estimated_extrinsics;
  return make_observation(inverse(cam) * s.marker_pose, c.marker_side);
}

std::string fmt(double v, int digits = 17) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.*g", digits, v);
  return buf;
}

}  // namespace

std::string_view to_string(RobustMode mode) {
  switch (mode) {
    case RobustMode::off: return "off";
    case RobustMode::frame_shift_only: return "frame_shift_only";
    case RobustMode::full_theta: return "full_theta";
  }
  return "off";
}

std::optional<RobustMode> parse_robust_mode(std::string_view text) {
  if (text == "off") return RobustMode::off;
  if (text == "frame_shift_only" || text == "frame") return RobustMode::frame_shift_only;
  if (text == "full_theta" || text == "full") return RobustMode::full_theta;
  return std::nullopt;
}

std::size_t SimParams::steps() const { return static_cast<std::size_t>(std::llround(duration / dt)); }

void ScenarioConfig::validate() const {
  if (!(intrinsics.fx > 0.0)) throw ConfigError("camera.intrinsics.fx", "must be > 0");
  if (!(intrinsics.fy > 0.0)) throw ConfigError("camera.intrinsics.fy", "must be > 0");
  if (!(width > 0.0)) throw ConfigError("camera.width", "must be > 0");
  if (!(length > 0.0)) throw ConfigError("camera.length", "must be > 0");
  bounds.validate();
  if (!(marker_side > 0.0)) throw ConfigError("marker.side_length", "must be > 0");
  if (!(gains.sigma > 0.0)) throw ConfigError("gains.sigma", "must be > 0");
  if (!(gains.alpha_gain > 0.0)) throw ConfigError("gains.alpha_gain", "must be > 0");
  if (!(gains.zeta > 0.0)) throw ConfigError("gains.zeta", "must be > 0");
  hil.validate();
  if (!(sim.dt > 0.0)) throw ConfigError("sim.dt", "must be > 0");
  if (!(sim.duration >= 0.0)) throw ConfigError("sim.duration", "must be >= 0");
  // Assumption on ^C T_{C^}; its norms equal those of the inverse.
  if (!bounds.admits(inverse(extrinsic_error()), 1e-9)) {
    throw ConfigError("true_extrinsics", "calibration error exceeds bounds (delta, epsilon)");
  }
  try {
    robust_camera(camera(), bounds);
  } catch (const GeometryError& e) {
    throw ConfigError("bounds", e.what());
  }
}

ScenarioConfig default_scenario() {
  ScenarioConfig c;
  c.true_extrinsics.translation = Vec3(0.0, 0.03, 0.02);
  c.estimated_extrinsics = c.true_extrinsics;
  c.grasp_offset = {rot_x(std::numbers::pi), Vec3(0.0, 0.0, 0.4)};
  const RigidTransform goal = c.marker_pose * c.grasp_offset;
  c.initial_pose = goal * RigidTransform{rot_y(0.15) * rot_x(-0.1), Vec3(0.05, -0.04, -0.1)};
  return c;
}

ScenarioConfig adversarial_scenario() {
  ScenarioConfig c = default_scenario();
  c.robust_mode = RobustMode::off;
  c.bounds = {0.0, 0.0};
  // goal: camera pitched away from the marker, which then exits the image
  c.grasp_offset = {rot_x(std::numbers::pi) * rot_x(-0.6), Vec3(0.0, 0.1, 0.35)};
  c.initial_pose = c.marker_pose * RigidTransform{rot_x(std::numbers::pi), Vec3(0.0, 0.0, 0.45)};
  c.sim.duration = 8.0;
  return c;
}

ScenarioConfig config_from_json(const json& j) {
  ScenarioConfig c = default_scenario();
  const Reader root(j, "");
  root.allow({"camera", "true_extrinsics", "estimated_extrinsics", "bounds", "marker", "grasp_offset", "gains", "hil",
              "robust_mode", "sim", "initial_pose"});

  if (root.has("camera")) {
    const Reader cam = root.child("camera");
    cam.allow({"intrinsics", "width", "length"});
    if (cam.has("intrinsics")) {
      const Reader k = cam.child("intrinsics");
      k.allow({"fx", "fy", "cx", "cy", "s"});
      c.intrinsics.fx = k.number("fx", c.intrinsics.fx);
      c.intrinsics.fy = k.number("fy", c.intrinsics.fy);
      c.intrinsics.cx = k.number("cx", c.intrinsics.cx);
      c.intrinsics.cy = k.number("cy", c.intrinsics.cy);
      c.intrinsics.skew = k.number("s", c.intrinsics.skew);
    }
    c.width = cam.number("width", c.width);
    c.length = cam.number("length", c.length);
  }
  c.true_extrinsics = root.transform("true_extrinsics", c.true_extrinsics);
  c.estimated_extrinsics = root.transform("estimated_extrinsics", c.estimated_extrinsics);
  if (root.has("bounds")) {
    const Reader b = root.child("bounds");
    b.allow({"delta", "epsilon"});
    c.bounds.delta = b.number("delta", c.bounds.delta);
    c.bounds.epsilon = b.number("epsilon", c.bounds.epsilon);
  }
  if (root.has("marker")) {
    const Reader m = root.child("marker");
    m.allow({"side_length", "pose"});
    c.marker_side = m.number("side_length", c.marker_side);
    c.marker_pose = m.transform("pose", c.marker_pose);
  }
  c.grasp_offset = root.transform("grasp_offset", c.grasp_offset);
  if (root.has("gains")) {
    const Reader g = root.child("gains");
    g.allow({"sigma", "alpha_gain", "zeta"});
    c.gains.sigma = g.number("sigma", c.gains.sigma);
    c.gains.alpha_gain = g.number("alpha_gain", c.gains.alpha_gain);
    c.gains.zeta = g.number("zeta", c.gains.zeta);
  }
  if (root.has("hil")) {
    const Reader h = root.child("hil");
    h.allow({"beta_max", "h_safe"});
    c.hil.beta_max = h.number("beta_max", c.hil.beta_max);
    c.hil.h_safe = h.number("h_safe", c.hil.h_safe);
  }
  if (root.has("robust_mode")) {
    const auto mode = parse_robust_mode(root.string("robust_mode", ""));
    if (!mode) throw ConfigError("robust_mode", "expected off, frame_shift_only or full_theta");
    c.robust_mode = *mode;
  }
  if (root.has("sim")) {
    const Reader s = root.child("sim");
    s.allow({"dt", "duration", "seed"});
    c.sim.dt = s.number("dt", c.sim.dt);
    c.sim.duration = s.number("duration", c.sim.duration);
    c.sim.seed = s.unsigned_integer("seed", c.sim.seed);
  }
  c.initial_pose = root.transform("initial_pose", c.initial_pose);
  c.validate();
  return c;
}

json config_to_json(const ScenarioConfig& c) {
  return {
      {"camera",
       {{"intrinsics",
         {{"fx", c.intrinsics.fx}, {"fy", c.intrinsics.fy}, {"cx", c.intrinsics.cx}, {"cy", c.intrinsics.cy},
          {"s", c.intrinsics.skew}}},
        {"width", c.width},
        {"length", c.length}}},
      {"true_extrinsics", transform_json(c.true_extrinsics)},
      {"estimated_extrinsics", transform_json(c.estimated_extrinsics)},
      {"bounds", {{"delta", c.bounds.delta}, {"epsilon", c.bounds.epsilon}}},
      {"marker", {{"side_length", c.marker_side}, {"pose", transform_json(c.marker_pose)}}},
      {"grasp_offset", transform_json(c.grasp_offset)},
      {"gains", {{"sigma", c.gains.sigma}, {"alpha_gain", c.gains.alpha_gain}, {"zeta", c.gains.zeta}}},
      {"hil", {{"beta_max", c.hil.beta_max}, {"h_safe", c.hil.h_safe}}},
      {"robust_mode", std::string(to_string(c.robust_mode))},
      {"sim", {{"dt", c.sim.dt}, {"duration", c.sim.duration}, {"seed", c.sim.seed}}},
      {"initial_pose", transform_json(c.initial_pose)},
  };
}

ScenarioConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config", "cannot open " + path);
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError("config", std::string("malformed JSON: ") + e.what());
  }
  return config_from_json(j);
}

WorldState step(const WorldState& state, const Twist& u, double dt) {
  WorldState next = state;
  next.ee_pose = state.ee_pose * exp_twist(dt * u.v, dt * u.w);
  next.t = state.t + dt;
  return next;
}

Observation observe(const WorldState& state, const ScenarioConfig& config) {
  Observation obs;
  const RigidTransform cam = state.ee_pose * config.true_extrinsics;
  obs.true_frame = make_observation(inverse(cam) * state.marker_pose, config.marker_side);
  obs.estimated_frame = estimated_view(state, config);

  const CameraModel camera = config.camera();
  obs.detected = inverse(obs.true_frame.marker_pose).translation.z() > 0.0;
  for (const auto& x : obs.true_frame.corners) {
    if (!(x.z() > 0.0)) obs.detected = false;
    for (const auto& a : camera.normals()) {
      if (a.dot(x) < -kDetectionTol) obs.detected = false;
    }
  }
  return obs;
}

Simulation::Simulation(ScenarioConfig config, bool cbf_enabled)
    : config_(std::move(config)),
      camera_(config_.camera()),
      robust_(robust_camera(camera_, config_.bounds)),
      cbf_enabled_(cbf_enabled) {
  reset();
}

void Simulation::reset() {
  state_ = WorldState{config_.initial_pose, config_.marker_pose, 0.0};
  obs_ = observe(state_, config_);
}

namespace {

// Barrier values the filter is responsible for, in a fixed order: 16 corner
// barriers, then the depth barrier.
std::array<double, 17> controller_barriers(const MarkerObservation& est, RobustMode mode, const CameraModel& nominal,
                                           const RobustCamera& robust, const Gains& gains) {
  std::array<double, 17> out{};
  BarrierState b;
  if (mode == RobustMode::off) {
    b = barrier_values(nominal, est, gains.zeta);
  } else {
    b = barrier_values(robust.camera, robust.shift(est), gains.zeta);
    b.h_z = inverse(est.marker_pose).translation.z() - gains.zeta - robust.bounds.delta;
  }
  for (int k = 0; k < 16; ++k) out[k] = b.h(k / 4, k % 4);
  out[16] = b.h_z;
  return out;
}

}  // namespace

bool Simulation::next_sample_safe(const Twist& u) const {
  const auto now = controller_barriers(obs_.estimated_frame, config_.robust_mode, camera_, robust_, config_.gains);
  const WorldState next = step(state_, u, config_.sim.dt);
  const auto later =
      controller_barriers(estimated_view(next, config_), config_.robust_mode, camera_, robust_, config_.gains);
  for (std::size_t k = 0; k < now.size(); ++k) {
    if (now[k] >= 0.0 && later[k] < 0.0) return false;
  }
  return true;
}

Twist Simulation::filter(const Twist& u_nom, TraceRecord& rec) {
  if (!cbf_enabled_) {
    rec.status = QpStatus::bypassed;
    return saturate(u_nom, {});
  }
  const MarkerObservation& est = obs_.estimated_frame;
  const RigidTransform& extr = config_.estimated_extrinsics;
  const Gains& g = config_.gains;

  QpProblem problem;
  problem.nominal = u_nom;
  QpSolution sol;
  if (config_.robust_mode == RobustMode::off) {
    const auto rows = visibility_constraint_rows(camera_, est, extr, g.alpha_gain);
    problem.rows.assign(rows.begin(), rows.end());
    problem.rows.push_back(z_constraint_row(est, extr, g.zeta, g.alpha_gain));
    sol = qp_.solve_affine(problem);
  } else {
    const auto rows =
        visibility_constraint_rows(robust_.camera, robust_.shift(est), robust_.extrinsics(extr), g.alpha_gain);
    problem.rows.assign(rows.begin(), rows.end());
    problem.rows.push_back(z_constraint_row(est, extr, g.zeta + config_.bounds.delta, g.alpha_gain));
    if (config_.robust_mode == RobustMode::frame_shift_only) {
      sol = qp_.solve_affine(problem);
    } else {
      const auto theta = theta_lower_bounds(robust_, est, extr, g.alpha_gain);
      std::array<const ConcaveConstraint*, 16> ptrs;
      for (std::size_t k = 0; k < 16; ++k) ptrs[k] = &theta[k];
      sol = qp_.solve_robust(problem, ptrs);
    }
  }
  rec.status = sol.status;
  rec.fallback = sol.fallback;

  Twist u = sol.status == QpStatus::infeasible ? Twist::zero() : saturate(sol.u, {});
  if (!next_sample_safe(u)) {
    // sampled-data guard: shrink toward zero until the next sample is safe
    double lo = 0.0;
    double hi = 1.0;
    for (int it = 0; it < 50; ++it) {
      const double mid = 0.5 * (lo + hi);
      (next_sample_safe({mid * u.v, mid * u.w}) ? lo : hi) = mid;
    }
    u = {lo * u.v, lo * u.w};
    rec.guarded = true;
  }
  return u;
}

TraceRecord Simulation::control(const Twist& u_hil) {
  obs_ = observe(state_, config_);
  TraceRecord rec;
  rec.t = state_.t;
  rec.detection_ok = obs_.detected;

  const BarrierState truth = barrier_values(camera_, obs_.true_frame, config_.gains.zeta);
  rec.h = truth.h;
  rec.h_z = truth.h_z;
  rec.h_min = truth.h_min;
  const BarrierState est = barrier_values(camera_, obs_.estimated_frame, config_.gains.zeta);
  rec.h_est = est.h;
  rec.h_z_est = est.h_z;

  const RigidTransform ee_to_marker = config_.estimated_extrinsics * obs_.estimated_frame.marker_pose;
  const RigidTransform target_to_current = inverse(config_.grasp_offset) * inverse(ee_to_marker);
  const FeatureError err = feature_error(target_to_current);
  rec.e = err.vector();
  const Twist u_servo = servo_twist(err, target_to_current.rotation, config_.gains.sigma);

  const BlendResult mix = blend_adaptive(u_servo, u_hil, est.h_min, config_.hil);
  rec.beta = mix.beta;
  rec.u_nom = mix.u_nom;
  rec.u = filter(mix.u_nom, rec);
  return rec;
}

void Simulation::integrate(const Twist& u) { state_ = step(state_, u, config_.sim.dt); }

TraceRecord Simulation::tick(const Twist& u_hil) {
  TraceRecord rec = control(u_hil);
  if (rec.detection_ok) integrate(rec.u);
  return rec;
}

ScenarioResult run_scenario(const ScenarioConfig& config, const RunOptions& options) {
  ScenarioConfig c = config;
  if (options.robust_mode) c.robust_mode = *options.robust_mode;
  Simulation sim(c, options.cbf_enabled);

  ScenarioResult result;
  const std::size_t n = c.sim.steps();
  result.trace.reserve(n + 1);
  for (std::size_t k = 0; k <= n; ++k) {
    const Twist u_hil = options.hil ? options.hil(sim.state().t, sim) : Twist::zero();
    TraceRecord rec = sim.control(u_hil);
    rec.t = static_cast<double>(k) * c.sim.dt;
    result.trace.push_back(rec);
    if (!rec.detection_ok) {
      result.detection_lost = true;
      result.diagnostic = "detection lost at t=" + fmt(rec.t, 6) + " (h_min " + fmt(rec.h_min, 6) + ")";
      break;
    }
    if (k < n) sim.integrate(rec.u);
  }
  return result;
}

void write_trace_csv(std::ostream& out, const std::vector<TraceRecord>& trace) {
  out << "t";
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 4; ++j) out << ",h" << i << j;
  out << ",hz,hmin,beta";
  for (int k = 0; k < 6; ++k) out << ",u" << k;
  for (int k = 0; k < 6; ++k) out << ",unom" << k;
  for (int k = 0; k < 6; ++k) out << ",e" << k;
  out << ",status,fallback\n";

  for (const auto& r : trace) {
    out << fmt(r.t);
    for (int i = 0; i < 4; ++i)
      for (int j = 0; j < 4; ++j) out << ',' << fmt(r.h(i, j));
    out << ',' << fmt(r.h_z) << ',' << fmt(r.h_min) << ',' << fmt(r.beta);
    const Vec6 u = r.u.vector();
    const Vec6 un = r.u_nom.vector();
    for (int k = 0; k < 6; ++k) out << ',' << fmt(u(k));
    for (int k = 0; k < 6; ++k) out << ',' << fmt(un(k));
    for (int k = 0; k < 6; ++k) out << ',' << fmt(r.e(k));
    out << ',' << to_string(r.status) << ',' << (r.fallback ? 1 : 0) << '\n';
  }
}

json record_to_json(const TraceRecord& r) {
  json h = json::array();
  json h_est = json::array();
  for (int i = 0; i < 4; ++i) {
    h.push_back(vec_json(r.h.row(i).transpose()));
    h_est.push_back(vec_json(r.h_est.row(i).transpose()));
  }
  return {{"t", r.t},
          {"h", h},
          {"hz", r.h_z},
          {"hmin", r.h_min},
          {"h_est", h_est},
          {"hz_est", r.h_z_est},
          {"beta", r.beta},
          {"u", vec_json(r.u.vector())},
          {"unom", vec_json(r.u_nom.vector())},
          {"e", vec_json(r.e)},
          {"status", std::string(to_string(r.status))},
          {"fallback", r.fallback},
          {"guarded", r.guarded},
          {"detection_ok", r.detection_ok}};
}

void write_trace_jsonl(std::ostream& out, const std::vector<TraceRecord>& trace) {
  for (const auto& r : trace) out << record_to_json(r).dump() << '\n';
}

std::uint64_t stream_seed(std::uint64_t seed, std::uint64_t index) {
  return splitmix64(splitmix64(seed) ^ (index * 0xD1B54A32D192ED03ULL));
}

ScenarioConfig random_scenario(const ScenarioConfig& base, std::uint64_t seed) {
  std::mt19937_64 rng(stream_seed(seed, 0));
  std::uniform_real_distribution<double> uni(-1.0, 1.0);
  ScenarioConfig c = base;
  c.sim.seed = seed;

  const RigidTransform error{rotation_from_vector(c.bounds.epsilon * random_unit(rng)),
                             c.bounds.delta * random_unit(rng)};
  c.true_extrinsics = c.estimated_extrinsics * error;

  // tilt the goal so some runs end with the marker near the image border
  const double tilt = 0.35 * std::abs(uni(rng));
  c.grasp_offset = base.grasp_offset * RigidTransform{rotation_from_vector(tilt * random_unit(rng)), Vec3::Zero()};

  const CameraModel camera = c.camera();
  const RobustCamera robust = robust_camera(camera, c.bounds);
  const RigidTransform goal = c.marker_pose * c.grasp_offset;
  for (int attempt = 0; attempt < 100000; ++attempt) {
    const Vec3 offset(0.12 * uni(rng), 0.12 * uni(rng), 0.04 + 0.1 * uni(rng));
    const double angle = 0.6 * std::abs(uni(rng));
    c.initial_pose = goal * RigidTransform{rotation_from_vector(angle * random_unit(rng)), -offset};

    const WorldState s{c.initial_pose, c.marker_pose, 0.0};
    if (!observe(s, c).detected) continue;
    const MarkerObservation est = estimated_view(s, c);
    if (inverse(est.marker_pose).translation.z() < c.gains.zeta + c.bounds.delta + 0.05) continue;
    // the worst case over admissible errors must start nonnegative
    const auto theta = theta_lower_bounds(robust, est, c.estimated_extrinsics, c.gains.alpha_gain);
    bool ok = true;
    for (const auto& row : theta) ok = ok && row.value(Twist::zero()) >= 1e-3;
    if (ok) return c;
  }
  throw GeometryError("could not sample a visible initial pose");
}

}  // namespace fovcbf
