#pragma once

#include <span>
#include <vector>

#include "spo/core/error.hpp"
#include "spo/core/math.hpp"
#include "spo/objectives/kappa.hpp"
#include "spo/tabular/categorical.hpp"

namespace spo {

// One round-2 training pair over an enumerated space, with the frozen
// log-probabilities of pi_0 and pi_1 for both responses.
struct TabularPair {
  std::size_t prompt = 0;
  std::size_t chosen = 0;
  std::size_t rejected = 0;
  double pi0_chosen = 0.0;
  double pi0_rejected = 0.0;
  double pi1_chosen = 0.0;
  double pi1_rejected = 0.0;
};

struct Round2Gradient {
  tabular::Table gradient;      // d loss / d logits, same shape as the policy
  std::vector<double> weights;  // sigma(-xi2 phi2 + xi1 phi1) per pair
};

// Closed-form gradient of the two-dimensional loss:
//   -xi2 mean[ w (grad log pi2(y_w|x) - grad log pi2(y_l|x)) ],
//   w = sigmoid(-xi2 phi2 + xi1 phi1), xi1 = alpha1 beta, xi2 = beta.
// For a softmax table the two score functions share pi2(.|x), so the
// difference reduces to e_{y_w} - e_{y_l}.
inline Round2Gradient analytic_gradient_round2(std::span<const TabularPair> batch,
                                               const tabular::CategoricalPolicy& pi2,
                                               const KappaSchedule& schedule) {
  require(schedule.round_n == 2, "analytic_gradient_round2: schedule is not a round-2 schedule");
  require(!batch.empty(), "analytic_gradient_round2: empty batch");
  const double xi1 = schedule.alphas[0] * schedule.beta;
  const double xi2 = schedule.beta;
  const double inv_b = 1.0 / static_cast<double>(batch.size());

  Round2Gradient out{tabular::Table(pi2.num_prompts(), pi2.num_responses()), {}};
  out.weights.reserve(batch.size());
  for (const auto& p : batch) {
    const double phi2 = (pi2.log_prob(p.prompt, p.chosen) - p.pi1_chosen) -
                        (pi2.log_prob(p.prompt, p.rejected) - p.pi1_rejected);
    const double phi1 = (p.pi1_chosen - p.pi0_chosen) - (p.pi1_rejected - p.pi0_rejected);
    const double w = math::sigmoid(-xi2 * phi2 + xi1 * phi1);
    out.weights.push_back(w);
    out.gradient(p.prompt, p.chosen) += -xi2 * w * inv_b;
    out.gradient(p.prompt, p.rejected) -= -xi2 * w * inv_b;
  }
  return out;
}

}  // namespace spo
