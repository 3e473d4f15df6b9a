#pragma once

#include <cmath>
#include <span>

#include "spo/core/error.hpp"
#include "spo/core/math.hpp"

namespace spo {

// mean(-log sigmoid(logit)) = mean(softplus(-logit)).
inline double preference_loss(std::span<const double> logits) {
  require(!logits.empty(), "preference_loss: empty batch");
  double total = 0.0;
  for (double z : logits) {
    require(std::isfinite(z), "preference_loss: non-finite logit");
    total += math::softplus(-z);
  }
  return total / static_cast<double>(logits.size());
}

// d/dz softplus(-z) = -sigmoid(-z).
inline double preference_loss_derivative(double logit) { return -math::sigmoid(-logit); }

}  // namespace spo
