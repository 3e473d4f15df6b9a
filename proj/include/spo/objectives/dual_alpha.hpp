#pragma once

#include <algorithm>

#include "spo/core/error.hpp"

namespace spo {

// Projected dual ascent on the multiplier of a previous-dimension reward
// constraint E[R_i] >= H_i: alpha grows while the measured reward sits below H.
inline double dual_alpha_update(double alpha, double measured_prev_reward, double threshold, double step,
                                double alpha_max) {
  require(step > 0.0, "dual_alpha_update: step must be positive");
  require(alpha >= 0.0 && alpha <= alpha_max, "dual_alpha_update: alpha outside [0, alpha_max]");
  return std::clamp(alpha + step * (threshold - measured_prev_reward), 0.0, alpha_max);
}

}  // namespace spo
