#pragma once

#include <map>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "spo/core/policy.hpp"
#include "spo/core/rng.hpp"
#include "spo/datagen/latent.hpp"

namespace spo::pipeline {

struct EvalOptions {
  std::size_t samples_per_prompt = 4;
  std::uint64_t seed = 0;
  std::size_t max_len = 16;
  SampleMode mode = SampleMode::Stochastic;
};

struct EvalReport {
  std::vector<TokenId> special_tokens;
  std::vector<double> presence;  // per special token
  double pareto = 0.0;           // all special tokens present
  std::vector<std::string> dimensions;
  std::vector<double> rewards;  // mean latent score per dimension
  double refusal_rate = 0.0;
  std::map<std::string, double> win_rates;
  std::size_t samples = 0;
  std::uint64_t seed = 0;

  double reward(const std::string& dim) const {
    for (std::size_t i = 0; i < dimensions.size(); ++i) {
      if (dimensions[i] == dim) return rewards[i];
    }
    throw InputError("eval report has no dimension '" + dim + "'");
  }

  nlohmann::json to_json() const {
    nlohmann::json pres = nlohmann::json::object(), rew = nlohmann::json::object();
    for (std::size_t i = 0; i < special_tokens.size(); ++i) pres[std::to_string(special_tokens[i])] = presence[i];
    for (std::size_t i = 0; i < dimensions.size(); ++i) rew[dimensions[i]] = rewards[i];
    return {{"presence", pres},           {"pareto", pareto},   {"rewards", rew},
            {"refusal_rate", refusal_rate}, {"win_rates", win_rates}, {"samples", samples},
            {"seed", seed}};
  }
};

// Sample j of prompt i draws from its own stream, so reports do not depend
// on evaluation order.
inline Rng eval_stream(std::uint64_t seed, std::size_t prompt, std::size_t sample) {
  return Rng(seed, "eval-sample", (static_cast<std::uint64_t>(prompt) << 20) ^ sample);
}

inline EvalReport evaluate_policy(const Policy& policy, const std::vector<TokenSeq>& prompts,
                                  const datagen::LatentRewardSpec& latent, const std::vector<TokenId>& special_tokens,
                                  const EvalOptions& opt) {
  require(opt.samples_per_prompt >= 1, "evaluate_policy: samples_per_prompt must be >= 1");
  require(!prompts.empty(), "evaluate_policy: no prompts");
  EvalReport r;
  r.special_tokens = special_tokens;
  r.presence.assign(special_tokens.size(), 0.0);
  r.dimensions = latent.names();
  r.rewards.assign(r.dimensions.size(), 0.0);
  r.seed = opt.seed;

  std::size_t pareto = 0, refusals = 0;
  std::vector<std::size_t> present(special_tokens.size(), 0);
  for (std::size_t i = 0; i < prompts.size(); ++i) {
    for (std::size_t s = 0; s < opt.samples_per_prompt; ++s) {
      Rng rng = eval_stream(opt.seed, i, s);
      const TokenSeq y = policy.sample(prompts[i], opt.max_len, opt.mode, rng);
      bool all = !special_tokens.empty();
      for (std::size_t k = 0; k < special_tokens.size(); ++k) {
        const bool has = datagen::contains_token(y, special_tokens[k]);
        present[k] += has;
        all = all && has;
      }
      pareto += all;
      refusals += latent.is_refusal(y);
      for (std::size_t d = 0; d < r.dimensions.size(); ++d) r.rewards[d] += latent.score(r.dimensions[d], prompts[i], y);
      ++r.samples;
    }
  }
  const double n = static_cast<double>(r.samples);
  for (std::size_t k = 0; k < present.size(); ++k) r.presence[k] = static_cast<double>(present[k]) / n;
  for (double& v : r.rewards) v /= n;
  r.pareto = static_cast<double>(pareto) / n;
  r.refusal_rate = static_cast<double>(refusals) / n;
  return r;
}

// Per prompt, one response from each policy drawn from the same stream; a
// wins if its weighted latent score is strictly higher, ties count half.
inline double compare_policies(const Policy& a, const Policy& b, const std::vector<TokenSeq>& prompts,
                               const datagen::LatentRewardSpec& latent, const std::map<std::string, double>& weights,
                               const EvalOptions& opt) {
  require(a.vocab() == b.vocab(), "compare_policies: policies do not share a vocabulary");
  require(!prompts.empty(), "compare_policies: no prompts");
  require(!weights.empty(), "compare_policies: no judge weights");
  auto judge = [&](const TokenSeq& x, const TokenSeq& y) {
    double s = 0.0;
    for (const auto& [d, w] : weights) s += w * latent.score(d, x, y);
    return s;
  };
  double wins = 0.0;
  for (std::size_t i = 0; i < prompts.size(); ++i) {
    Rng ra = eval_stream(opt.seed, i, 0);
    Rng rb = eval_stream(opt.seed, i, 0);
    const double sa = judge(prompts[i], a.sample(prompts[i], opt.max_len, opt.mode, ra));
    const double sb = judge(prompts[i], b.sample(prompts[i], opt.max_len, opt.mode, rb));
    wins += sa > sb ? 1.0 : (sa == sb ? 0.5 : 0.0);
  }
  return wins / static_cast<double>(prompts.size());
}

}  // namespace spo::pipeline
