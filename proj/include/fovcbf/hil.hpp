#pragma once

#include "fovcbf/pbvs.hpp"

namespace fovcbf {

struct HilParams {
  double beta_max = 0.8;
  double h_safe = 0.1;  // m

  /// Throws ConfigError unless beta_max in [0, 1] and h_safe > 0.
  void validate() const;
};

struct BlendResult {
  double beta = 0.0;
  Twist u_nom;
};

/// beta_max * sat(h_min / h_safe), sat clamping to [0, 1].
double hil_beta(double h_min, const HilParams& params);

/// (1 - beta) u_servo + beta u_hil.
Twist blend(const Twist& u_servo, const Twist& u_hil, double beta);

inline BlendResult blend_adaptive(const Twist& u_servo, const Twist& u_hil, double h_min, const HilParams& params) {
  const double beta = hil_beta(h_min, params);
  return {beta, blend(u_servo, u_hil, beta)};
}

}  // namespace fovcbf
