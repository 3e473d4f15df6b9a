#pragma once

#include <memory>
#include <string>
#include <vector>

#include "spo/models/train.hpp"
#include "spo/pipeline/evaluate.hpp"

namespace spo::pipeline {

struct CurvePoint {
  std::size_t round = 0;
  std::size_t step = 0;
  std::size_t epoch = 0;
  bool epoch_end = false;
  std::vector<double> rewards;  // per latent dimension
  double refusal_rate = 0.0;
  std::vector<double> presence;
};

struct RewardCurve {
  std::vector<std::string> dimensions;
  std::vector<CurvePoint> points;
};

// Probe that evaluates the policy with the latent judge. Every call reuses
// the same sampling streams, so a policy that does not change gives a flat
// curve.
inline Probe reward_probe(std::shared_ptr<RewardCurve> curve, std::size_t round, std::vector<TokenSeq> prompts,
                          datagen::LatentRewardSpec latent, std::vector<TokenId> special_tokens, EvalOptions opt) {
  curve->dimensions = latent.names();
  return [=](const Policy& p, const ProbePoint& at) {
    const auto r = evaluate_policy(p, prompts, latent, special_tokens, opt);
    curve->points.push_back({round, at.step, at.epoch, at.epoch_end, r.rewards, r.refusal_rate, r.presence});
  };
}

// CSV: round,step,epoch,epoch_end,<dimension rewards...>,refusal_rate
inline std::string curve_csv(const RewardCurve& c) {
  std::string out = "round,step,epoch,epoch_end";
  for (const auto& d : c.dimensions) out += "," + d;
  out += ",refusal_rate\n";
  for (const auto& p : c.points) {
    out += std::to_string(p.round) + "," + std::to_string(p.step) + "," + std::to_string(p.epoch) + "," +
           (p.epoch_end ? "1" : "0");
    for (double r : p.rewards) out += "," + format_double(r);
    out += "," + format_double(p.refusal_rate) + "\n";
  }
  return out;
}

}  // namespace spo::pipeline
