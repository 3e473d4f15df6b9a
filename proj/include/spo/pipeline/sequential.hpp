#pragma once

#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "spo/core/logprob_cache.hpp"
#include "spo/datagen/latent.hpp"
#include "spo/models/history.hpp"
#include "spo/models/merge.hpp"
#include "spo/models/train.hpp"
#include "spo/pipeline/config.hpp"

namespace spo::pipeline {

struct RoundRecord {
  std::size_t round = 0;  // 1-based
  std::string dimension;
  KappaSchedule schedule;        // schedule the round started with
  KappaSchedule final_schedule;  // differs only under dual alpha
  std::vector<StepMetrics> steps;
  std::vector<double> epoch_mean_loss;
  std::uint64_t history_forward_passes = 0;  // evaluations of pi_0..pi_{n-1} during the round
};

struct RunResult {
  // checkpoints[k] is the policy after round k; checkpoints[0] is pi_0.
  // For merge-dpo the last checkpoint is the merged policy.
  std::vector<std::unique_ptr<Policy>> checkpoints;
  LogProbCache cache;
  std::vector<RoundRecord> rounds;

  const Policy& final_policy() const { return *checkpoints.back(); }
};

struct RunOptions {
  // Probe installed for round n (1-based), e.g. a reward tracker.
  std::function<Probe(std::size_t round, const std::string& dimension)> probe_for_round;
  // Read history by re-evaluating checkpoints instead of the cache.
  bool recompute_history = false;
};

namespace detail {

inline std::vector<const Policy*> raw(const std::vector<std::unique_ptr<Policy>>& ps, std::size_t count) {
  std::vector<const Policy*> out;
  for (std::size_t i = 0; i < count; ++i) out.push_back(ps[i].get());
  return out;
}

// Trains round n against the given history view and records the outcome.
inline void run_round(RunResult& run, const PipelineConfig& config, const PreferenceDataset& ds,
                      const std::string& dimension, std::size_t n, const KappaSchedule& schedule,
                      const HistorySource& history, const RunOptions& options, const Policy& start,
                      const DualAlphaConfig& dual = {}) {
  RoundOptions ro;
  ro.dual = dual;
  ro.probe_interval = config.probe_interval;
  if (options.probe_for_round) ro.probe = options.probe_for_round(n, dimension);

  for (const auto& p : run.checkpoints) p->reset_forward_count();
  auto result = train_round(start, ds, dimension, schedule, history, config.train_for_round(n), ro);
  RoundRecord rec{n, dimension, schedule, result.final_schedule, std::move(result.steps),
                  std::move(result.epoch_mean_loss), 0};
  for (const auto& p : run.checkpoints) rec.history_forward_passes += p->forward_count();
  run.rounds.push_back(std::move(rec));
  run.checkpoints.push_back(std::move(result.policy));
}

inline void require_dimension(const PreferenceDataset& ds, const std::string& d) {
  require(ds.has_dimension(d), "dimension '" + d + "' absent from dataset");
}

}  // namespace detail

// SPO / S-DPO: one round per dimension in order. Before round n the cache is
// extended with pi_{n-1}; round n then reads pi_0..pi_{n-1} only from the
// cache. Round 1 is plain DPO. S-DPO uses pi_{n-1} alone as the reference.
inline RunResult run_sequential(const PipelineConfig& config, const PreferenceDataset& ds, const Policy& pi0,
                                const RunOptions& options = {}) {
  config.check();
  require(config.method == Method::SPO || config.method == Method::SDPO,
          "run_sequential: method must be spo or s-dpo");
  for (const auto& d : config.dimensions) detail::require_dimension(ds, d);

  RunResult run;
  run.cache = LogProbCache(dataset_fingerprint(ds), ds.examples.size());
  run.checkpoints.push_back(pi0.clone());
  std::vector<double> carried = config.alphas_for_round(config.dimensions.size());

  for (std::size_t n = 1; n <= config.dimensions.size(); ++n) {
    run.cache.append(build_logprob_cache(*run.checkpoints[n - 1], ds, n - 1));
    const std::string& dim = config.dimensions[n - 1];

    const bool sdpo = config.method == Method::SDPO;
    std::vector<double> alphas(carried.begin(), carried.begin() + static_cast<std::ptrdiff_t>(n - 1));
    const KappaSchedule schedule = sdpo ? kappa_schedule(1, config.beta, {}) : kappa_schedule(n, config.beta, alphas);

    DualAlphaConfig dual;
    if (config.dual.enabled && n >= 2) {
      dual.enabled = true;
      dual.thresholds.assign(config.dual.thresholds.begin(),
                             config.dual.thresholds.begin() + static_cast<std::ptrdiff_t>(n - 1));
      dual.previous_dimensions.assign(config.dimensions.begin(),
                                      config.dimensions.begin() + static_cast<std::ptrdiff_t>(n - 1));
      dual.step = config.dual.step;
      dual.alpha_max = config.dual.alpha_max;
    }

    const Policy& start = *run.checkpoints[n - 1];
    if (options.recompute_history) {
      auto history_policies = detail::raw(run.checkpoints, n);
      if (sdpo) history_policies = {run.checkpoints[n - 1].get()};
      const RecomputedHistory history(history_policies, ds);
      detail::run_round(run, config, ds, dim, n, schedule, history, options, start, dual);
    } else {
      const CachedHistory history = sdpo ? CachedHistory(run.cache, ds, n - 1, 1) : CachedHistory(run.cache, ds);
      detail::run_round(run, config, ds, dim, n, schedule, history, options, start, dual);
    }
    if (dual.enabled) {
      for (std::size_t k = 0; k + 1 < n; ++k) carried[k] = run.rounds.back().final_schedule.alphas[k];
    }
  }
  return run;
}

// One dimension's labels collapsed by priority: the first dimension in
// `priority` decides. When a latent spec is supplied and that dimension's
// scores tie exactly, the label is a coin seeded by (tie_seed, example).
inline PreferenceDataset mix_dataset(const PreferenceDataset& ds, const std::vector<std::string>& priority,
                                     std::uint64_t tie_seed, const datagen::LatentRewardSpec* latent = nullptr) {
  require(!priority.empty(), "mix_dataset: empty priority order");
  for (const auto& d : priority) detail::require_dimension(ds, d);
  PreferenceDataset out = ds;
  out.dimensions = {"mix"};
  out.provenance.generator = ds.provenance.generator + "+mix";
  const std::string& top = priority.front();
  for (std::size_t i = 0; i < out.examples.size(); ++i) {
    auto& ex = out.examples[i];
    Label l = ex.label(top);
    if (latent != nullptr &&
        latent->score(top, ex.prompt, ex.response_a) == latent->score(top, ex.prompt, ex.response_b)) {
      Rng coin(tie_seed, "mix-tie", i);
      l = coin.bernoulli(0.5) ? Label::AFirst : Label::BFirst;
    }
    ex.labels = {{"mix", l}};
    ex.scope.clear();
  }
  return out;
}

// Single DPO round on `dimension` with pi_0 as the reference.
inline RunResult run_dpo(const PipelineConfig& config, const PreferenceDataset& ds, const std::string& dimension,
                         const Policy& pi0, const RunOptions& options = {}) {
  config.train.check();
  detail::require_dimension(ds, dimension);
  RunResult run;
  run.cache = LogProbCache(dataset_fingerprint(ds), ds.examples.size());
  run.checkpoints.push_back(pi0.clone());
  run.cache.append(build_logprob_cache(pi0, ds, 0));
  const CachedHistory history(run.cache, ds);
  detail::run_round(run, config, ds, dimension, 1, kappa_schedule(1, config.beta, {}), history, options, pi0);
  return run;
}

inline RunResult run_dpo_mix(const PipelineConfig& config, const PreferenceDataset& ds, const Policy& pi0,
                             const datagen::LatentRewardSpec* latent = nullptr, const RunOptions& options = {}) {
  config.check();
  return run_dpo(config, mix_dataset(ds, config.mix_priority, config.tie_seed, latent), "mix", pi0, options);
}

// One DPO policy per dimension from pi_0, merged in parameter space with
// equal weights.
inline RunResult run_merge_dpo(const PipelineConfig& config, const PreferenceDataset& ds, const Policy& pi0,
                               const RunOptions& options = {}) {
  config.check();
  RunResult run;
  run.cache = LogProbCache(dataset_fingerprint(ds), ds.examples.size());
  run.checkpoints.push_back(pi0.clone());
  run.cache.append(build_logprob_cache(pi0, ds, 0));
  const CachedHistory history(run.cache, ds);
  const auto schedule = kappa_schedule(1, config.beta, {});
  for (std::size_t k = 0; k < config.dimensions.size(); ++k) {
    detail::require_dimension(ds, config.dimensions[k]);
    detail::run_round(run, config, ds, config.dimensions[k], k + 1, schedule, history, options, pi0);
  }
  const auto members = detail::raw(run.checkpoints, run.checkpoints.size());
  const std::vector<const Policy*> trained(members.begin() + 1, members.end());
  const std::vector<double> weights(trained.size(), 1.0 / static_cast<double>(trained.size()));
  run.checkpoints.push_back(merge_parameters(trained, weights));
  return run;
}

inline RunResult run_pipeline(const PipelineConfig& config, const PreferenceDataset& ds, const Policy& pi0,
                              const datagen::LatentRewardSpec* latent = nullptr, const RunOptions& options = {}) {
  switch (config.method) {
    case Method::SPO:
    case Method::SDPO: return run_sequential(config, ds, pi0, options);
    case Method::DPOMix: return run_dpo_mix(config, ds, pi0, latent, options);
    case Method::DPOSingle: return run_dpo(config, ds, config.single_dimension, pi0, options);
    case Method::MergeDPO: return run_merge_dpo(config, ds, pi0, options);
  }
  throw InputError("unknown method");
}

}  // namespace spo::pipeline
