#pragma once

#include <cmath>
#include <span>
#include <vector>

#include "spo/core/error.hpp"
#include "spo/core/math.hpp"
#include "spo/tabular/categorical.hpp"

namespace spo::tabular {

// Bradley-Terry: P(first preferred) = exp(r1) / (exp(r1) + exp(r2)).
inline double bt_preference_prob(double r_first, double r_second) {
  require(std::isfinite(r_first) && std::isfinite(r_second), "bt_preference_prob: non-finite reward");
  return math::sigmoid(r_first - r_second);
}

inline double kl_divergence(const CategoricalPolicy& p, const CategoricalPolicy& q, std::size_t prompt) {
  require(p.same_support(q), "kl_divergence: support mismatch");
  require(prompt < p.num_prompts(), "kl_divergence: prompt out of range");
  double kl = 0.0;
  for (std::size_t y = 0; y < p.num_responses(); ++y) {
    const double lp = p.log_prob(prompt, y);
    kl += std::exp(lp) * (lp - q.log_prob(prompt, y));
  }
  return std::max(kl, 0.0);
}

// pi2*(y|x) = pi1(y|x) exp(alpha1 R1 / beta + R2 / beta) / Z2(x).
// Built as log-probabilities so the softmax max-shift handles large R/beta.
inline CategoricalPolicy optimal_policy_round2(const CategoricalPolicy& pi1, const RewardTable& r1,
                                               const RewardTable& r2, double alpha1, double beta) {
  require(beta > 0.0, "optimal_policy_round2: beta must be positive");
  require(alpha1 >= 0.0, "optimal_policy_round2: alpha1 must be nonnegative");
  require(r1.table().same_shape(pi1.logits()) && r2.table().same_shape(pi1.logits()),
          "optimal_policy_round2: shape mismatch");
  Table logits(pi1.num_prompts(), pi1.num_responses());
  for (std::size_t x = 0; x < logits.num_prompts(); ++x) {
    for (std::size_t y = 0; y < logits.num_responses(); ++y) {
      logits(x, y) = pi1.log_prob(x, y) + (alpha1 * r1(x, y) + r2(x, y)) / beta;
    }
  }
  return CategoricalPolicy(std::move(logits));
}

// E_x[ E_{y~pi}[R_cur + sum_i alpha_i R_prev_i] - beta KL(pi(.|x) || pi_ref(.|x)) ],
// with prompts weighted uniformly.
inline double lagrangian_objective(const CategoricalPolicy& pi, const CategoricalPolicy& pi_ref,
                                   const RewardTable& r_current, const std::vector<RewardTable>& r_previous,
                                   const std::vector<double>& alphas, double beta) {
  require(alphas.size() == r_previous.size(), "lagrangian_objective: alphas/rewards length mismatch");
  require(pi.same_support(pi_ref) && r_current.table().same_shape(pi.logits()),
          "lagrangian_objective: shape mismatch");
  for (const auto& r : r_previous) {
    require(r.table().same_shape(pi.logits()), "lagrangian_objective: shape mismatch");
  }
  double total = 0.0;
  for (std::size_t x = 0; x < pi.num_prompts(); ++x) {
    double reward = 0.0;
    for (std::size_t y = 0; y < pi.num_responses(); ++y) {
      double r = r_current(x, y);
      for (std::size_t i = 0; i < r_previous.size(); ++i) r += alphas[i] * r_previous[i](x, y);
      reward += pi.prob(x, y) * r;
    }
    total += reward - beta * kl_divergence(pi, pi_ref, x);
  }
  return total / static_cast<double>(pi.num_prompts());
}

// beta [log pi/pi_ref (y_first) - log pi/pi_ref (y_second)]; the beta log Z(x)
// shift of the implicit reward cancels in the difference.
inline double implicit_reward_delta(const CategoricalPolicy& pi, const CategoricalPolicy& pi_ref, double beta,
                                    std::size_t prompt, std::size_t y_first, std::size_t y_second) {
  require(pi.same_support(pi_ref), "implicit_reward_delta: support mismatch");
  require(prompt < pi.num_prompts() && y_first < pi.num_responses() && y_second < pi.num_responses(),
          "implicit_reward_delta: index out of range");
  const double first = pi.log_prob(prompt, y_first) - pi_ref.log_prob(prompt, y_first);
  const double second = pi.log_prob(prompt, y_second) - pi_ref.log_prob(prompt, y_second);
  return beta * (first - second);
}

}  // namespace spo::tabular
