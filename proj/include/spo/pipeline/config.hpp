#pragma once

#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "spo/core/rng.hpp"
#include "spo/core/sha256.hpp"
#include "spo/models/neural_policy.hpp"
#include "spo/models/train.hpp"

namespace spo::pipeline {

enum class Method { SPO, SDPO, DPOMix, DPOSingle, MergeDPO };

inline const char* to_string(Method m) {
  switch (m) {
    case Method::SPO: return "spo";
    case Method::SDPO: return "s-dpo";
    case Method::DPOMix: return "dpo-mix";
    case Method::DPOSingle: return "dpo-single";
    case Method::MergeDPO: return "merge-dpo";
  }
  return "?";
}

inline Method method_from_string(const std::string& s) {
  for (Method m : {Method::SPO, Method::SDPO, Method::DPOMix, Method::DPOSingle, Method::MergeDPO}) {
    if (s == to_string(m)) return m;
  }
  throw InputError("unknown method '" + s + "' (expected spo, s-dpo, dpo-mix, dpo-single or merge-dpo)");
}

struct DualConfig {
  bool enabled = false;
  std::vector<double> thresholds;  // H_i per dimension in training order; the last one is unused
  double step = 0.05;
  double alpha_max = 0.9;
};

struct PipelineConfig {
  Method method = Method::SPO;
  std::vector<std::string> dimensions;  // training order
  double beta = 0.1;
  // alpha_k for the k-th dimension in training order. A single value is
  // broadcast to every previous dimension.
  std::vector<double> alphas{0.1};
  std::vector<std::size_t> round_epochs;  // per round; empty means train.epochs everywhere
  TrainConfig train;
  std::string single_dimension;        // dpo-single
  std::vector<std::string> mix_priority;  // dpo-mix, highest priority first
  std::uint64_t tie_seed = 0;
  DualConfig dual;
  std::size_t probe_interval = 0;
  std::uint64_t seed = 0;

  // alpha_1 .. alpha_{n-1} for round n. Zero under S-DPO.
  std::vector<double> alphas_for_round(std::size_t n) const {
    std::vector<double> out(n - 1, 0.0);
    if (method == Method::SDPO) return out;
    for (std::size_t k = 0; k + 1 < n; ++k) {
      if (alphas.size() == 1) {
        out[k] = alphas[0];
      } else {
        require(k < alphas.size(), "pipeline config: no alpha for dimension " + std::to_string(k + 1));
        out[k] = alphas[k];
      }
    }
    return out;
  }

  std::size_t epochs_for_round(std::size_t n) const {
    if (round_epochs.empty()) return train.epochs;
    require(n - 1 < round_epochs.size(), "pipeline config: no epoch count for round " + std::to_string(n));
    return round_epochs[n - 1];
  }

  // Training config of round n: the batch order is seeded per round.
  TrainConfig train_for_round(std::size_t n) const {
    TrainConfig c = train;
    c.epochs = epochs_for_round(n);
    c.seed = derive_seed(seed, "round", n);
    return c;
  }

  void check() const {
    require(!dimensions.empty(), "pipeline config: no dimensions");
    require(beta > 0.0, "pipeline config: beta must be positive");
    for (double a : alphas) require(a >= 0.0 && a < 1.0, "pipeline config: alpha outside [0, 1)");
    train.check();
    if (method == Method::DPOSingle) {
      require(!single_dimension.empty(), "pipeline config: dpo-single needs single_dimension");
    }
    if (method == Method::DPOMix) {
      auto a = mix_priority, b = dimensions;
      std::sort(a.begin(), a.end());
      std::sort(b.begin(), b.end());
      require(a == b, "pipeline config: mix priority must be a permutation of the dimensions");
    }
    if (dual.enabled) {
      require(method == Method::SPO, "pipeline config: dual alpha only applies to spo");
      require(dual.thresholds.size() + 1 >= dimensions.size(), "pipeline config: need a threshold per previous dimension");
    }
  }

  nlohmann::json to_json() const {
    return {{"method", to_string(method)},
            {"dimensions", dimensions},
            {"beta", beta},
            {"alphas", alphas},
            {"round_epochs", round_epochs},
            {"train", train.to_json()},
            {"single_dimension", single_dimension},
            {"mix_priority", mix_priority},
            {"tie_seed", tie_seed},
            {"dual",
             {{"enabled", dual.enabled}, {"thresholds", dual.thresholds}, {"step", dual.step},
              {"alpha_max", dual.alpha_max}}},
            {"probe_interval", probe_interval},
            {"seed", seed}};
  }

  static PipelineConfig from_json(const nlohmann::json& j) {
    try {
      PipelineConfig c;
      c.method = method_from_string(j.value("method", std::string("spo")));
      c.dimensions = j.at("dimensions").get<std::vector<std::string>>();
      c.beta = j.value("beta", c.beta);
      c.alphas = j.value("alphas", c.alphas);
      c.round_epochs = j.value("round_epochs", c.round_epochs);
      if (j.contains("train")) c.train = TrainConfig::from_json(j.at("train"));
      c.single_dimension = j.value("single_dimension", c.single_dimension);
      c.mix_priority = j.value("mix_priority", c.mix_priority);
      c.tie_seed = j.value("tie_seed", c.tie_seed);
      if (j.contains("dual")) {
        const auto& d = j.at("dual");
        c.dual.enabled = d.value("enabled", false);
        c.dual.thresholds = d.value("thresholds", std::vector<double>{});
        c.dual.step = d.value("step", c.dual.step);
        c.dual.alpha_max = d.value("alpha_max", c.dual.alpha_max);
      }
      c.probe_interval = j.value("probe_interval", c.probe_interval);
      c.seed = j.value("seed", c.seed);
      return c;
    } catch (const nlohmann::json::exception& e) {
      throw InputError(std::string("pipeline config: ") + e.what());
    }
  }

  std::string hash() const { return sha256_hex(to_json().dump()); }
};

}  // namespace spo::pipeline
