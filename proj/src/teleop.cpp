#include "fovcbf/teleop.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <nlohmann/json.hpp>

namespace fovcbf {

using nlohmann::json;

namespace {

json vec_json(const Vec6& v) {
  json a = json::array();
  for (int k = 0; k < 6; ++k) a.push_back(v(k));
  return a;
}

json vec3_json(const Vec3& v) { return json::array({v.x(), v.y(), v.z()}); }

bool read_vec(const json& j, Eigen::Index n, Eigen::VectorXd& out) {
  if (!j.is_array() || static_cast<Eigen::Index>(j.size()) != n) return false;
  out.resize(n);
  for (Eigen::Index k = 0; k < n; ++k) {
    if (!j[k].is_number()) return false;
    out(k) = j[k].get<double>();
    if (!std::isfinite(out(k))) return false;
  }
  return true;
}

std::optional<std::string> check_param(const std::string& name, const json& value) {
  if (name == "robust_mode") {
    if (!value.is_string() || !parse_robust_mode(value.get<std::string>())) {
      return "robust_mode expects off, frame_shift_only or full_theta";
    }
    return std::nullopt;
  }
  if (name != "sigma" && name != "alpha_gain" && name != "zeta" && name != "beta_max" && name != "h_safe") {
    return "unknown parameter '" + name + "'";
  }
  if (!value.is_number() || !std::isfinite(value.get<double>())) return name + " expects a finite number";
  const double v = value.get<double>();
  if (name == "beta_max") {
    if (v < 0.0 || v > 1.0) return "beta_max must lie in [0, 1]";
  } else if (!(v > 0.0)) {
    return name + " must be > 0";
  }
  return std::nullopt;
}

}  // namespace

std::string encode(const Snapshot& s) {
  json corners = json::array();
  for (const auto& c : s.corners) corners.push_back(json::array({c.x(), c.y()}));
  json h = json::array();
  for (int i = 0; i < 4; ++i) h.push_back(json::array({s.h(i, 0), s.h(i, 1), s.h(i, 2), s.h(i, 3)}));
  const json j = {{"type", "snapshot"},
                  {"t", s.t},
                  {"corners", corners},
                  {"h", h},
                  {"h_z", s.h_z},
                  {"beta", s.beta},
                  {"u", vec_json(s.u.vector())},
                  {"u_nom", vec_json(s.u_nom.vector())},
                  {"ee_pose",
                   {{"rotation_vector", vec3_json(rotation_to_vector(s.ee_pose.rotation))},
                    {"translation", vec3_json(s.ee_pose.translation)}}},
                  {"cbf_enabled", s.cbf_enabled},
                  {"robust_mode", std::string(to_string(s.robust_mode))},
                  {"detection_ok", s.detection_ok}};
  return j.dump();
}

std::string encode(const ClientMessage& m) {
  json j;
  if (const auto* hil = std::get_if<HilMessage>(&m)) {
    j = {{"type", "hil"}, {"twist", vec_json(hil->twist.vector())}};
  } else if (const auto* p = std::get_if<SetParamMessage>(&m)) {
    j = {{"type", "set_param"}, {"name", p->name}};
    std::visit([&](const auto& v) { j["value"] = v; }, p->value);
  } else if (const auto* t = std::get_if<ToggleCbfMessage>(&m)) {
    j = {{"type", "toggle_cbf"}, {"enabled", t->enabled}};
  } else {
    j = {{"type", "reset"}};
  }
  return j.dump();
}

std::string encode_error(std::string_view reason) {
  return json{{"type", "error"}, {"reason", std::string(reason)}}.dump();
}

Decoded decode_client(std::string_view text) {
  const json j = json::parse(text, nullptr, false);
  if (j.is_discarded()) return {std::nullopt, "malformed JSON"};
  if (!j.is_object()) return {std::nullopt, "expected a JSON object"};
  if (!j.contains("type") || !j["type"].is_string()) return {std::nullopt, "missing string field 'type'"};
  const std::string type = j["type"].get<std::string>();

  if (type == "hil") {
    if (!j.contains("twist") || !j["twist"].is_array()) return {std::nullopt, "hil requires an array 'twist'"};
    if (j["twist"].size() != 6) {
      return {std::nullopt, "hil twist must have 6 entries, got " + std::to_string(j["twist"].size())};
    }
    Eigen::VectorXd v;
    if (!read_vec(j["twist"], 6, v)) return {std::nullopt, "hil twist entries must be finite numbers"};
    return {HilMessage{Twist::from_vector(v)}, ""};
  }
  if (type == "set_param") {
    if (!j.contains("name") || !j["name"].is_string()) return {std::nullopt, "set_param requires a string 'name'"};
    if (!j.contains("value")) return {std::nullopt, "set_param requires 'value'"};
    const std::string name = j["name"].get<std::string>();
    if (auto err = check_param(name, j["value"])) return {std::nullopt, *err};
    SetParamMessage p{name, 0.0};
    if (j["value"].is_string()) {
      p.value = j["value"].get<std::string>();
    } else {
      p.value = j["value"].get<double>();
    }
    return {p, ""};
  }
  if (type == "toggle_cbf") {
    if (!j.contains("enabled") || !j["enabled"].is_boolean()) {
      return {std::nullopt, "toggle_cbf requires a boolean 'enabled'"};
    }
    return {ToggleCbfMessage{j["enabled"].get<bool>()}, ""};
  }
  if (type == "reset") return {ResetMessage{}, ""};
  return {std::nullopt, "unknown message type '" + type + "'"};
}

std::optional<Snapshot> decode_snapshot(std::string_view text) {
  const json j = json::parse(text, nullptr, false);
  if (j.is_discarded() || !j.is_object() || j.value("type", "") != "snapshot") return std::nullopt;
  try {
    Snapshot s;
    s.t = j.at("t").get<double>();
    for (const auto& c : j.at("corners")) s.corners.emplace_back(c.at(0).get<double>(), c.at(1).get<double>());
    for (int i = 0; i < 4; ++i)
      for (int k = 0; k < 4; ++k) s.h(i, k) = j.at("h").at(i).at(k).get<double>();
    s.h_z = j.at("h_z").get<double>();
    s.beta = j.at("beta").get<double>();
    Eigen::VectorXd v;
    if (!read_vec(j.at("u"), 6, v)) return std::nullopt;
    s.u = Twist::from_vector(v);
    if (!read_vec(j.at("u_nom"), 6, v)) return std::nullopt;
    s.u_nom = Twist::from_vector(v);
    Eigen::VectorXd rv, tr;
    if (!read_vec(j.at("ee_pose").at("rotation_vector"), 3, rv)) return std::nullopt;
    if (!read_vec(j.at("ee_pose").at("translation"), 3, tr)) return std::nullopt;
    s.ee_pose = RigidTransform::from_vector(rv, tr);
    s.cbf_enabled = j.at("cbf_enabled").get<bool>();
    const auto mode = parse_robust_mode(j.at("robust_mode").get<std::string>());
    if (!mode) return std::nullopt;
    s.robust_mode = *mode;
    s.detection_ok = j.at("detection_ok").get<bool>();
    return s;
  } catch (const json::exception&) {
    return std::nullopt;
  }
}

TeleopSession::TeleopSession(ScenarioConfig config, double rate_hz)
    : sim_(std::move(config)),
      substeps_(std::max(1, static_cast<int>(std::lround(1.0 / (rate_hz * sim_.config().sim.dt))))),
      hil_stamp_(-std::numeric_limits<double>::infinity()) {
  last_ = sim_.control(Twist::zero());
}

Twist TeleopSession::effective_hil(double now) const {
  return now - hil_stamp_ < kStaleAfter ? hil_ : Twist::zero();
}

void TeleopSession::apply(const ClientMessage& message, double now) {
  if (const auto* hil = std::get_if<HilMessage>(&message)) {
    hil_ = hil->twist;
    hil_stamp_ = now;
  } else if (const auto* p = std::get_if<SetParamMessage>(&message)) {
    if (p->name == "robust_mode") {
      sim_.set_robust_mode(*parse_robust_mode(std::get<std::string>(p->value)));
      return;
    }
    const double v = std::get<double>(p->value);
    Gains g = sim_.config().gains;
    HilParams h = sim_.config().hil;
    if (p->name == "sigma") g.sigma = v;
    if (p->name == "alpha_gain") g.alpha_gain = v;
    if (p->name == "zeta") g.zeta = v;
    if (p->name == "beta_max") h.beta_max = v;
    if (p->name == "h_safe") h.h_safe = v;
    sim_.set_gains(g);
    sim_.set_hil(h);
  } else if (const auto* t = std::get_if<ToggleCbfMessage>(&message)) {
    sim_.set_cbf_enabled(t->enabled);
  } else {
    sim_.reset();
    hil_ = Twist::zero();
    hil_stamp_ = -std::numeric_limits<double>::infinity();
    last_ = sim_.control(Twist::zero());
  }
}

Snapshot TeleopSession::tick(double now) {
  const Twist u_hil = effective_hil(now);
  for (int k = 0; k < substeps_; ++k) last_ = sim_.tick(u_hil);
  return snapshot();
}

Snapshot TeleopSession::snapshot() const {
  Snapshot s;
  s.t = last_.t;
  const Observation& obs = sim_.observation();
  bool in_front = true;
  for (const auto& x : obs.estimated_frame.corners) in_front = in_front && x.z() > 0.0;
  if (in_front) {
    for (const auto& x : obs.estimated_frame.corners) s.corners.push_back(project(sim_.config().intrinsics, x));
  }
  s.h = last_.h_est;
  s.h_z = last_.h_z_est;
  s.beta = last_.beta;
  s.u = last_.u;
  s.u_nom = last_.u_nom;
  s.ee_pose = sim_.state().ee_pose;
  s.cbf_enabled = sim_.cbf_enabled();
  s.robust_mode = sim_.config().robust_mode;
  s.detection_ok = last_.detection_ok;
  return s;
}

}  // namespace fovcbf
