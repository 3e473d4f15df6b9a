#pragma once

#include <memory>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "spo/datagen/bt.hpp"
#include "spo/datagen/conflicting.hpp"
#include "spo/datagen/special_token.hpp"
#include "spo/models/neural_policy.hpp"
#include "spo/models/sft.hpp"
#include "spo/models/tabular_policy.hpp"
#include "spo/pipeline/evaluate.hpp"
#include "spo/pipeline/sequential.hpp"
#include "spo/pipeline/track.hpp"

namespace spo::pipeline {

// pi_0: a fresh neural policy fitted by maximum likelihood to every response
// in the dataset.
inline std::unique_ptr<Policy> make_initial_policy(const PreferenceDataset& ds, NeuralPolicyConfig net,
                                                   const TrainConfig& sft, std::uint64_t seed) {
  net.init_seed = derive_seed(seed, "init");
  TrainConfig c = sft;
  c.seed = derive_seed(seed, "sft");
  const NeuralPolicy fresh(ds.vocab, net);
  return sft_train(fresh, demonstrations_from(ds), c).policy;
}

struct ExperimentSetup {
  NeuralPolicyConfig net;
  TrainConfig sft;
  TrainConfig train;
  double beta = 0.1;
  double alpha = 0.1;
  std::size_t eval_samples = 4;

  ExperimentSetup() {
    net.embed_dim = 16;
    net.hidden_dim = 32;
    net.layers = 1;
    net.context_length = 16;
    sft.epochs = 10;
    sft.batch_size = 16;
    sft.learning_rate = 0.01;
    train.epochs = 1;
    train.batch_size = 16;
    train.learning_rate = 3e-4;
  }

  nlohmann::json to_json() const {
    return {{"net", net.to_json()}, {"sft", sft.to_json()},      {"train", train.to_json()},
            {"beta", beta},         {"alpha", alpha},            {"eval_samples", eval_samples}};
  }
};

// Special-token experiment: SPO and S-DPO over the same pi_0 and data.
struct SpecialTokenOutcome {
  EvalReport spo;
  EvalReport sdpo;
  EvalReport pi0;
};

inline SpecialTokenOutcome run_special_token_experiment(const datagen::SpecialTokenParams& data,
                                                        const ExperimentSetup& setup) {
  const auto g = datagen::gen_special_token_dataset(data);
  const auto pi0 = make_initial_policy(g.dataset, setup.net, setup.sft, data.seed);
  PipelineConfig cfg;
  cfg.dimensions = g.dataset.dimensions;
  cfg.beta = setup.beta;
  cfg.alphas = {setup.alpha};
  cfg.train = setup.train;
  cfg.seed = data.seed;
  EvalOptions opt{setup.eval_samples, derive_seed(data.seed, "eval"), g.dataset.max_response_length,
                  SampleMode::Stochastic};
  const auto& specials = g.dataset.vocab.special_tokens;

  SpecialTokenOutcome out;
  out.pi0 = evaluate_policy(*pi0, g.eval_prompts, g.latent, specials, opt);
  cfg.method = Method::SPO;
  out.spo = evaluate_policy(run_sequential(cfg, g.dataset, *pi0).final_policy(), g.eval_prompts, g.latent, specials, opt);
  cfg.method = Method::SDPO;
  out.sdpo = evaluate_policy(run_sequential(cfg, g.dataset, *pi0).final_policy(), g.eval_prompts, g.latent, specials, opt);
  return out;
}

// Conflicting data, dimensions helpful then harmless. Round 1 is shared by
// every alpha; round 2 is trained once per alpha.
struct AlphaPoint {
  double alpha = 0.0;
  std::uint64_t seed = 0;
  double helpful = 0.0;
  double harmless = 0.0;
  double refusal_rate = 0.0;
};

struct ConflictingSetup {
  datagen::ConflictingParams data;
  ExperimentSetup setup;
  std::vector<std::string> order{"helpful", "harmless"};
};

inline std::vector<AlphaPoint> run_alpha_sweep(const ConflictingSetup& s, const std::vector<double>& grid) {
  const auto g = datagen::gen_conflicting_dataset(s.data);
  const auto pi0 = make_initial_policy(g.dataset, s.setup.net, s.setup.sft, s.data.seed);
  EvalOptions opt{s.setup.eval_samples, derive_seed(s.data.seed, "eval"), g.dataset.max_response_length,
                  SampleMode::Stochastic};
  std::vector<AlphaPoint> out;
  for (double a : grid) {
    PipelineConfig cfg;
    cfg.method = Method::SPO;
    cfg.dimensions = s.order;
    cfg.beta = s.setup.beta;
    cfg.alphas = {a};
    cfg.train = s.setup.train;
    cfg.seed = s.data.seed;
    const auto run = run_sequential(cfg, g.dataset, *pi0);
    const auto r = evaluate_policy(run.final_policy(), g.eval_prompts, g.latent, {}, opt);
    out.push_back({a, s.data.seed, r.reward(s.order[0]), r.reward(s.order[1]), r.refusal_rate});
  }
  return out;
}

// Refusal rate on held-out prompts after each epoch of an extended round 2.
struct OverfitOutcome {
  std::vector<double> spo;   // index e = after epoch e+1
  std::vector<double> sdpo;
  double pi1_refusal = 0.0;
};

inline OverfitOutcome run_overfitting_study(const ConflictingSetup& s, std::size_t epochs) {
  const auto g = datagen::gen_conflicting_dataset(s.data);
  const auto pi0 = make_initial_policy(g.dataset, s.setup.net, s.setup.sft, s.data.seed);
  EvalOptions opt{s.setup.eval_samples, derive_seed(s.data.seed, "eval"), g.dataset.max_response_length,
                  SampleMode::Stochastic};
  OverfitOutcome out;
  for (Method m : {Method::SPO, Method::SDPO}) {
    PipelineConfig cfg;
    cfg.method = m;
    cfg.dimensions = s.order;
    cfg.beta = s.setup.beta;
    cfg.alphas = {s.setup.alpha};
    cfg.train = s.setup.train;
    cfg.round_epochs = {s.setup.train.epochs, epochs};
    cfg.seed = s.data.seed;
    auto curve = std::make_shared<RewardCurve>();
    RunOptions ro;
    ro.probe_for_round = [&](std::size_t round, const std::string&) -> Probe {
      if (round != 2) return {};
      return reward_probe(curve, round, g.eval_prompts, g.latent, {}, opt);
    };
    run_sequential(cfg, g.dataset, *pi0, ro);
    auto& dest = m == Method::SPO ? out.spo : out.sdpo;
    for (const auto& p : curve->points) {
      if (p.epoch_end) dest.push_back(p.refusal_rate);
      else if (p.step == 0) out.pi1_refusal = p.refusal_rate;
    }
  }
  return out;
}

// Tabular DPO from a uniform pi_0 on Bradley-Terry labels, compared with the
// generating rewards over every (prompt, response pair) in the space.
struct RecoveryOutcome {
  double max_error = 0.0;  // max |implicit delta - latent delta|
  double max_delta = 0.0;  // max |latent delta|
  std::size_t pairs = 0;
  double final_loss = 0.0;
};

inline RecoveryOutcome run_reward_recovery(const datagen::BtParams& data, double beta, const TrainConfig& train) {
  const auto g = datagen::gen_bt_dataset(data);
  const auto& space = *g.latent.space;
  const std::string& dim = g.dataset.dimensions.front();
  const TabularPolicy pi0(g.dataset.vocab, g.latent.space);
  PipelineConfig cfg;
  cfg.method = Method::DPOSingle;
  cfg.single_dimension = dim;
  cfg.dimensions = {dim};
  cfg.beta = beta;
  cfg.train = train;
  cfg.seed = data.seed;
  const auto run = run_pipeline(cfg, g.dataset, pi0);
  const Policy& pi = run.final_policy();

  RecoveryOutcome out;
  out.final_loss = run.rounds.back().epoch_mean_loss.back();
  for (std::size_t x = 0; x < space.num_prompts(); ++x) {
    const auto& prompt = space.prompt(x);
    for (std::size_t a = 0; a < space.num_responses(); ++a) {
      for (std::size_t b = a + 1; b < space.num_responses(); ++b) {
        const auto& ya = space.response(a);
        const auto& yb = space.response(b);
        const double implicit = beta * ((pi.log_prob(prompt, ya) - pi0.log_prob(prompt, ya)) -
                                        (pi.log_prob(prompt, yb) - pi0.log_prob(prompt, yb)));
        const double latent = g.latent.score(dim, prompt, ya) - g.latent.score(dim, prompt, yb);
        out.max_error = std::max(out.max_error, std::abs(implicit - latent));
        out.max_delta = std::max(out.max_delta, std::abs(latent));
        ++out.pairs;
      }
    }
  }
  return out;
}

}  // namespace spo::pipeline
