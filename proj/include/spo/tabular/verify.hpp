#pragma once

#include <algorithm>
#include <cstdint>
#include <limits>
#include <vector>

#include "spo/core/rng.hpp"
#include "spo/tabular/exact.hpp"

namespace spo::tabular {

struct Round2Instance {
  CategoricalPolicy pi1;
  RewardTable r1;
  RewardTable r2;
  double alpha1 = 0.1;
  double beta = 0.1;
};

inline Round2Instance random_round2_instance(std::uint64_t seed, std::size_t max_prompts = 5,
                                             std::size_t max_responses = 20) {
  Rng rng(seed, "round2-instance");
  const std::size_t prompts = 1 + rng.uniform_int(max_prompts);
  const std::size_t responses = 2 + rng.uniform_int(max_responses - 1);
  Round2Instance inst;
  inst.pi1 = CategoricalPolicy::random(prompts, responses, rng);
  Table a(prompts, responses), b(prompts, responses);
  for (double& v : a.values()) v = rng.normal();
  for (double& v : b.values()) v = rng.normal();
  inst.r1 = RewardTable(std::move(a));
  inst.r2 = RewardTable(std::move(b));
  inst.alpha1 = rng.uniform();
  inst.beta = 0.05 + rng.uniform();
  return inst;
}

struct OptimalityResult {
  double closed_form_objective = 0.0;
  double best_challenger_objective = -std::numeric_limits<double>::infinity();
  std::size_t challengers = 0;
  // best challenger minus closed form; <= 0 means the closed form wins.
  double slack() const { return best_challenger_objective - closed_form_objective; }
};

// Brute-force certificate for the round-2 closed form: random policies with
// N(0,1) logits, plus +-step perturbations of every logit of pi2*.
inline OptimalityResult check_round2_optimality(const Round2Instance& inst, std::size_t random_policies,
                                                double perturbation, std::uint64_t seed) {
  const std::vector<RewardTable> prev{inst.r1};
  const std::vector<double> alphas{inst.alpha1};
  auto objective = [&](const CategoricalPolicy& pi) {
    return lagrangian_objective(pi, inst.pi1, inst.r2, prev, alphas, inst.beta);
  };

  const CategoricalPolicy star = optimal_policy_round2(inst.pi1, inst.r1, inst.r2, inst.alpha1, inst.beta);
  OptimalityResult result;
  result.closed_form_objective = objective(star);

  auto consider = [&](const CategoricalPolicy& pi) {
    result.best_challenger_objective = std::max(result.best_challenger_objective, objective(pi));
    ++result.challengers;
  };

  Rng rng(seed, "round2-challengers");
  for (std::size_t k = 0; k < random_policies; ++k) {
    consider(CategoricalPolicy::random(star.num_prompts(), star.num_responses(), rng));
  }
  for (std::size_t i = 0; i < star.logits().values().size(); ++i) {
    for (double sign : {1.0, -1.0}) {
      Table t = star.logits();
      t.values()[i] += sign * perturbation;
      consider(CategoricalPolicy(std::move(t)));
    }
  }
  return result;
}

}  // namespace spo::tabular
