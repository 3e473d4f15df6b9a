#pragma once

#include <algorithm>
#include <cmath>
#include <memory>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "spo/core/logprob_cache.hpp"
#include "spo/core/rng.hpp"
#include "spo/models/history.hpp"
#include "spo/models/neural_policy.hpp"
#include "spo/models/tabular_policy.hpp"
#include "spo/models/train.hpp"
#include "spo/objectives/gradcheck.hpp"
#include "spo/objectives/gradient_round2.hpp"

namespace spo::verify {

// Prompts [1+i], responses [1+P+j, eos]; ids never collide.
inline std::shared_ptr<const tabular::EnumeratedSpace> small_space(std::size_t prompts, std::size_t responses) {
  std::vector<TokenSeq> ps, rs;
  for (std::size_t i = 0; i < prompts; ++i) ps.push_back({static_cast<TokenId>(1 + i)});
  for (std::size_t j = 0; j < responses; ++j) rs.push_back({static_cast<TokenId>(1 + prompts + j), 0});
  return std::make_shared<const tabular::EnumeratedSpace>(std::move(ps), std::move(rs));
}

inline TabularPolicy random_tabular(const Vocab& v, std::shared_ptr<const tabular::EnumeratedSpace> space, Rng& rng,
                                    double scale = 1.0) {
  TabularPolicy p(v, std::move(space));
  for (double& x : p.mutable_parameters()) x = scale * rng.normal();
  return p;
}

// Random pairs over the space with random labels on each dimension.
inline PreferenceDataset random_tabular_dataset(const tabular::EnumeratedSpace& space, const Vocab& vocab,
                                                std::vector<std::string> dims, std::size_t n, std::uint64_t seed) {
  PreferenceDataset ds;
  ds.dimensions = std::move(dims);
  ds.vocab = vocab;
  ds.provenance = {"random-pairs", seed};
  Rng rng(seed, "random-pairs");
  for (std::size_t i = 0; i < n; ++i) {
    PreferenceExample ex;
    ex.prompt = space.prompt(rng.uniform_int(space.num_prompts()));
    const std::size_t a = rng.uniform_int(space.num_responses());
    std::size_t b = rng.uniform_int(space.num_responses() - 1);
    if (b >= a) ++b;
    ex.response_a = space.response(a);
    ex.response_b = space.response(b);
    for (const auto& d : ds.dimensions) ex.labels[d] = rng.bernoulli(0.5) ? Label::AFirst : Label::BFirst;
    ds.examples.push_back(std::move(ex));
  }
  return ds;
}

inline LogProbCache cache_from(const std::vector<const Policy*>& policies, const PreferenceDataset& ds) {
  LogProbCache cache(dataset_fingerprint(ds), ds.examples.size());
  for (std::size_t r = 0; r < policies.size(); ++r) cache.append(build_logprob_cache(*policies[r], ds, r));
  return cache;
}

// Round-n tabular setup: random pi_0..pi_{n-1} frozen in a cache, a random
// current policy, and one minibatch covering the whole dataset.
struct TabularRound {
  Vocab vocab;
  std::shared_ptr<const tabular::EnumeratedSpace> space;
  PreferenceDataset ds;
  std::vector<TabularPolicy> history;
  LogProbCache cache{"", 0};
  KappaSchedule schedule;
  TabularPolicy current{Vocab{2, {}, 0}, std::make_shared<const tabular::EnumeratedSpace>(
                                             std::vector<TokenSeq>{{1}}, std::vector<TokenSeq>{{1, 0}})};
  std::vector<std::size_t> batch;

  TabularRound(std::size_t n, double beta, std::vector<double> alphas, std::uint64_t seed, std::size_t prompts = 3,
               std::size_t responses = 5, std::size_t examples = 24)
      : vocab(Vocab{prompts + responses + 3, {}, 0}), space(small_space(prompts, responses)),
        ds(random_tabular_dataset(*space, vocab, {"d"}, examples, seed)),
        schedule(kappa_schedule(n, beta, std::move(alphas))), current(vocab, space) {
    Rng rng(seed, "tabular-round");
    for (std::size_t r = 0; r < n; ++r) history.push_back(random_tabular(vocab, space, rng));
    std::vector<const Policy*> ptrs;
    for (const auto& h : history) ptrs.push_back(&h);
    cache = cache_from(ptrs, ds);
    current = random_tabular(vocab, space, rng);
    for (std::size_t i = 0; i < ds.examples.size(); ++i) batch.push_back(i);
  }

  // Built from the objective primitives, independently of the trainer.
  double loss_at(std::span<const double> params) const {
    const tabular::CategoricalPolicy table(tabular::Table(space->num_prompts(), space->num_responses(),
                                                          std::vector<double>(params.begin(), params.end())));
    std::vector<double> logits;
    for (const std::size_t e : batch) {
      const auto& ex = ds.examples[e];
      const Side w = preferred_side(ex.label("d"));
      const std::size_t x = space->prompt_index(ex.prompt);
      const std::size_t yw = space->response_index(ex.response(w));
      const std::size_t yl = space->response_index(ex.response(other(w)));
      PairLogitInputs in{{table.log_prob(x, yw), table.log_prob(x, yl)}, {}};
      for (std::size_t r = 0; r < schedule.round_n; ++r) {
        in.history.push_back({cache.log_prob(r, e, w), cache.log_prob(r, e, other(w))});
      }
      logits.push_back(spo_pair_logit(in, schedule));
    }
    return preference_loss(logits);
  }

  std::vector<double> trainer_gradient() const {
    std::vector<double> g(current.num_parameters(), 0.0);
    const CachedHistory h(cache, ds);
    batch_loss_and_gradient(current, ds, batch, "d", schedule, h, g);
    return g;
  }

  GradcheckResult check(double step = 1e-5) const {
    const auto g = trainer_gradient();
    return gradcheck([this](std::span<const double> p) { return loss_at(p); }, current.parameters(), g, step);
  }
};


inline tabular::CategoricalPolicy table_of(const TabularPolicy& p) {
  return tabular::CategoricalPolicy(tabular::Table(p.space().num_prompts(), p.space().num_responses(),
                                                   std::vector<double>(p.parameters().begin(), p.parameters().end())));
}

// Round-2 pairs of a TabularRound in the form analytic_gradient_round2 takes.
inline std::vector<TabularPair> round2_pairs(const TabularRound& r) {
  std::vector<TabularPair> out;
  for (std::size_t e : r.batch) {
    const auto& ex = r.ds.examples[e];
    const Side w = preferred_side(ex.label("d"));
    const Side l = other(w);
    out.push_back({r.space->prompt_index(ex.prompt), r.space->response_index(ex.response(w)),
                   r.space->response_index(ex.response(l)), r.cache.log_prob(0, e, w), r.cache.log_prob(0, e, l),
                   r.cache.log_prob(1, e, w), r.cache.log_prob(1, e, l)});
  }
  return out;
}

// Largest |analytic - trainer| over all coordinates for a random round-2 problem.
inline double round2_gradient_gap(double beta, double alpha, std::uint64_t seed) {
  const TabularRound r(2, beta, {alpha}, seed);
  const auto analytic = analytic_gradient_round2(round2_pairs(r), table_of(r.current), r.schedule);
  const auto trainer = r.trainer_gradient();
  double gap = 0.0;
  for (std::size_t i = 0; i < trainer.size(); ++i) gap = std::max(gap, std::abs(analytic.gradient.values()[i] - trainer[i]));
  return gap;
}

// DPO loss of a small neural policy against a frozen reference on random
// token pairs; the numeric side rebuilds the policy from raw parameters.
inline GradcheckResult neural_dpo_gradcheck(std::uint64_t seed, double beta = 0.5) {
  const Vocab v{9, {1, 2}, 0};
  NeuralPolicyConfig cfg;
  cfg.embed_dim = 4;
  cfg.hidden_dim = 6;
  cfg.layers = 2;
  cfg.context_length = 8;
  cfg.init_seed = derive_seed(seed, "reference");
  const NeuralPolicy ref(v, cfg);
  cfg.init_seed = derive_seed(seed, "current");
  const NeuralPolicy cur(v, cfg);

  PreferenceDataset ds;
  ds.dimensions = {"d"};
  ds.vocab = v;
  Rng rng(seed, "neural-pairs");
  auto seq = [&](std::size_t len) {
    TokenSeq s(len);
    for (auto& t : s) t = static_cast<TokenId>(1 + rng.uniform_int(8));
    return s;
  };
  for (int i = 0; i < 6; ++i) {
    PreferenceExample ex{seq(2), seq(1 + rng.uniform_int(3)), seq(1 + rng.uniform_int(3)), {}, {}};
    ex.response_a.push_back(0);
    ex.response_b.push_back(0);
    ex.labels["d"] = rng.bernoulli(0.5) ? Label::AFirst : Label::BFirst;
    ds.examples.push_back(std::move(ex));
  }
  const auto cache = cache_from({&ref}, ds);
  const CachedHistory history(cache, ds);
  const auto schedule = kappa_schedule(1, beta, {});
  std::vector<std::size_t> batch(ds.examples.size());
  std::iota(batch.begin(), batch.end(), std::size_t{0});

  std::vector<double> g(cur.num_parameters(), 0.0);
  batch_loss_and_gradient(cur, ds, batch, "d", schedule, history, g);
  auto loss = [&](std::span<const double> params) {
    const NeuralPolicy q(v, cfg, std::vector<double>(params.begin(), params.end()));
    double total = 0.0;
    for (const auto& ex : ds.examples) {
      const Side w = preferred_side(ex.label("d"));
      const TokenSeq& yw = ex.response(w);
      const TokenSeq& yl = ex.response(other(w));
      const double z = beta * ((q.log_prob(ex.prompt, yw) - ref.log_prob(ex.prompt, yw)) -
                               (q.log_prob(ex.prompt, yl) - ref.log_prob(ex.prompt, yl)));
      total += math::softplus(-z);
    }
    return total / static_cast<double>(ds.examples.size());
  };
  return gradcheck(loss, cur.parameters(), g, 1e-5);
}

}  // namespace spo::verify
