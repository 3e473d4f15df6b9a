#pragma once

#include <cmath>
#include <memory>
#include <span>
#include <vector>

#include "spo/core/policy.hpp"

namespace spo {

// Weight-space interpolation: theta = sum_i w_i theta_i. For tabular
// policies this averages logits, not probabilities.
inline std::unique_ptr<Policy> merge_parameters(std::span<const Policy* const> policies,
                                                std::span<const double> weights) {
  require(!policies.empty(), "merge_parameters: no policies");
  require(policies.size() == weights.size(), "merge_parameters: one weight per policy required");
  double total = 0.0;
  for (double w : weights) {
    require(w >= 0.0, "merge_parameters: negative weight");
    total += w;
  }
  require(std::abs(total - 1.0) <= 1e-9, "merge_parameters: weights must sum to 1");
  const auto arch = policies.front()->architecture();
  for (const Policy* p : policies) {
    require(p->kind() == policies.front()->kind() && p->architecture() == arch,
            "merge_parameters: architecture mismatch");
  }
  auto merged = policies.front()->clone();
  auto out = merged->mutable_parameters();
  std::fill(out.begin(), out.end(), 0.0);
  for (std::size_t i = 0; i < policies.size(); ++i) {
    const auto src = policies[i]->parameters();
    for (std::size_t k = 0; k < out.size(); ++k) out[k] += weights[i] * src[k];
  }
  return merged;
}

}  // namespace spo
