#pragma once

#include <cmath>
#include <memory>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "spo/core/math.hpp"
#include "spo/core/policy.hpp"
#include "spo/models/optimizer.hpp"
#include "spo/models/train.hpp"

namespace spo::verify {

struct ReferenceTrace {
  std::unique_ptr<Policy> policy;
  std::vector<double> losses;  // one per step
};

// Plain DPO written directly from -log sigmoid(beta (log-ratio(y_w) -
// log-ratio(y_l))) with the reference policy evaluated on the fly. Batch
// order and optimizer follow train_round so traces can be compared step by
// step.
inline ReferenceTrace reference_dpo(const Policy& start, const Policy& reference, const PreferenceDataset& ds,
                                    const std::string& dimension, double beta, const TrainConfig& config) {
  config.check();
  ReferenceTrace out{start.clone(), {}};
  Policy& policy = *out.policy;
  Optimizer optimizer(config.optimizer, config.learning_rate, policy.num_parameters());
  std::vector<double> grad(policy.num_parameters());
  std::vector<std::size_t> order = ds.indices_in_scope(dimension);

  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    Rng shuffler(config.seed, "batch-order", epoch);
    shuffler.shuffle(std::span<std::size_t>(order));
    for (std::size_t begin = 0; begin < order.size(); begin += config.batch_size) {
      const std::size_t end = std::min(order.size(), begin + config.batch_size);
      const double inv_b = 1.0 / static_cast<double>(end - begin);
      std::fill(grad.begin(), grad.end(), 0.0);
      double loss = 0.0;
      for (std::size_t k = begin; k < end; ++k) {
        const auto& ex = ds.examples[order[k]];
        const Side w = preferred_side(ex.label(dimension));
        const TokenSeq& yw = ex.response(w);
        const TokenSeq& yl = ex.response(other(w));
        const double ratio_w = policy.log_prob(ex.prompt, yw) - reference.log_prob(ex.prompt, yw);
        const double ratio_l = policy.log_prob(ex.prompt, yl) - reference.log_prob(ex.prompt, yl);
        const double z = beta * (ratio_w - ratio_l);
        loss += math::softplus(-z) * inv_b;
        const double coef = -math::sigmoid(-z) * beta * inv_b;
        policy.log_prob_and_grad(ex.prompt, yw, coef, grad);
        policy.log_prob_and_grad(ex.prompt, yl, -coef, grad);
      }
      optimizer.step(policy.mutable_parameters(), grad);
      out.losses.push_back(loss);
    }
  }
  return out;
}

inline double max_abs_difference(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) return INFINITY;
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

inline std::vector<double> losses_of(const std::vector<StepMetrics>& steps) {
  std::vector<double> out;
  out.reserve(steps.size());
  for (const auto& m : steps) out.push_back(m.loss);
  return out;
}

}  // namespace spo::verify
