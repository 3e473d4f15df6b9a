#pragma once

#include <memory>
#include <vector>

#include "spo/models/neural_policy.hpp"
#include "spo/models/tabular_policy.hpp"

namespace spo {

inline std::unique_ptr<Policy> policy_from_architecture(const nlohmann::json& arch, std::vector<double> params) {
  const auto kind = arch.at("kind").get<std::string>();
  const Vocab vocab = detail::vocab_from_json(arch.at("vocab"));
  if (kind == "neural") {
    return std::make_unique<NeuralPolicy>(vocab, NeuralPolicyConfig::from_json(arch.at("config")), std::move(params));
  }
  if (kind == "tabular") {
    auto space = std::make_shared<const tabular::EnumeratedSpace>(tabular::EnumeratedSpace::from_json(arch.at("space")));
    auto p = std::make_unique<TabularPolicy>(vocab, space);
    require(params.size() == p->num_parameters(), "tabular checkpoint: parameter count mismatch");
    std::copy(params.begin(), params.end(), p->mutable_parameters().begin());
    return p;
  }
  throw InputError("unknown policy kind '" + kind + "'");
}

}  // namespace spo
