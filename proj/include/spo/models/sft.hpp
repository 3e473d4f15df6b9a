#pragma once

#include <memory>
#include <utility>
#include <vector>

#include "spo/models/train.hpp"

namespace spo {

struct Demonstration {
  TokenSeq prompt;
  TokenSeq response;
};

// Every response of the dataset, both sides, in example order.
inline std::vector<Demonstration> demonstrations_from(const PreferenceDataset& ds) {
  std::vector<Demonstration> out;
  out.reserve(2 * ds.examples.size());
  for (const auto& ex : ds.examples) {
    out.push_back({ex.prompt, ex.response_a});
    out.push_back({ex.prompt, ex.response_b});
  }
  return out;
}

struct SftResult {
  std::unique_ptr<Policy> policy;
  std::vector<double> epoch_mean_nll;
};

// Maximum-likelihood fine-tuning; produces the starting policy pi_0.
inline SftResult sft_train(const Policy& initial, const std::vector<Demonstration>& demos, const TrainConfig& config) {
  config.check();
  require(!demos.empty() || config.epochs == 0, "sft_train: no demonstrations");
  SftResult out{initial.clone(), {}};
  Policy& policy = *out.policy;
  Optimizer optimizer(config.optimizer, config.learning_rate, policy.num_parameters());
  std::vector<double> grad(policy.num_parameters());
  std::vector<std::size_t> order(demos.size());
  std::iota(order.begin(), order.end(), std::size_t{0});

  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    Rng shuffler(config.seed, "sft-order", epoch);
    shuffler.shuffle(std::span<std::size_t>(order));
    double total = 0.0;
    for (std::size_t begin = 0; begin < order.size(); begin += config.batch_size) {
      const std::size_t end = std::min(order.size(), begin + config.batch_size);
      const double inv_b = 1.0 / static_cast<double>(end - begin);
      std::fill(grad.begin(), grad.end(), 0.0);
      for (std::size_t b = begin; b < end; ++b) {
        const auto& d = demos[order[b]];
        total -= policy.log_prob_and_grad(d.prompt, d.response, -inv_b, grad);
      }
      optimizer.step(policy.mutable_parameters(), grad);
    }
    out.epoch_mean_nll.push_back(total / static_cast<double>(demos.size()));
  }
  return out;
}

}  // namespace spo
