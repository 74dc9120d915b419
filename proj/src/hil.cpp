#include "fovcbf/hil.hpp"

#include <algorithm>
#include <cmath>

#include "fovcbf/errors.hpp"

namespace fovcbf {

void HilParams::validate() const {
  if (!(beta_max >= 0.0 && beta_max <= 1.0)) throw ConfigError("hil.beta_max", "must lie in [0, 1]");
  if (!(h_safe > 0.0) || !std::isfinite(h_safe)) throw ConfigError("hil.h_safe", "must be finite and > 0");
}

double hil_beta(double h_min, const HilParams& params) {
  if (!(h_min > 0.0)) return 0.0;
  if (h_min >= params.h_safe) return params.beta_max;
  return params.beta_max * (h_min / params.h_safe);
}

Twist blend(const Twist& u_servo, const Twist& u_hil, double beta) {
  return {(1.0 - beta) * u_servo.v + beta * u_hil.v, (1.0 - beta) * u_servo.w + beta * u_hil.w};
}

}  // namespace fovcbf
