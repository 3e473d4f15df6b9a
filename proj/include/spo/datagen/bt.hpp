#pragma once

#include <memory>
#include <string>
#include <vector>

#include "spo/core/rng.hpp"
#include "spo/datagen/generated.hpp"
#include "spo/tabular/exact.hpp"

namespace spo::datagen {

struct BtParams {
  std::size_t prompts = 4;
  std::size_t responses = 8;
  std::size_t num_dims = 1;
  double reward_scale = 1.0;
  std::size_t num_examples = 1000;
  std::size_t draws_per_pair = 64;
  std::uint64_t seed = 0;

  nlohmann::json to_json() const {
    return {{"prompts", prompts},           {"responses", responses},           {"num_dims", num_dims},
            {"reward_scale", reward_scale}, {"num_examples", num_examples},     {"draws_per_pair", draws_per_pair},
            {"seed", seed}};
  }
};

// Prompts [1 + i], responses [1 + P + j, eos]; eos = 0.
inline std::shared_ptr<const tabular::EnumeratedSpace> bt_space(std::size_t prompts, std::size_t responses) {
  std::vector<TokenSeq> ps, rs;
  for (std::size_t i = 0; i < prompts; ++i) ps.push_back({static_cast<TokenId>(1 + i)});
  for (std::size_t j = 0; j < responses; ++j) rs.push_back({static_cast<TokenId>(1 + prompts + j), 0});
  return std::make_shared<const tabular::EnumeratedSpace>(std::move(ps), std::move(rs));
}

inline Vocab bt_vocab(const tabular::EnumeratedSpace& space) {
  return Vocab{1 + space.num_prompts() + space.num_responses(), {}, 0};
}

// Latent rewards drawn i.i.d. N(0, reward_scale^2), one table per dimension.
inline LatentRewardSpec random_bt_latent(const BtParams& p) {
  require(p.prompts >= 1 && p.responses >= 2, "bt generator: need at least one prompt and two responses");
  LatentRewardSpec spec;
  spec.space = bt_space(p.prompts, p.responses);
  for (std::size_t d = 0; d < p.num_dims; ++d) {
    Rng rng(p.seed, "bt-latent", d);
    tabular::Table t(p.prompts, p.responses);
    for (double& v : t.values()) v = p.reward_scale * rng.normal();
    spec.tables.emplace_back(std::move(t));
    spec.dimensions.push_back({"d" + std::to_string(d + 1), std::nullopt, d});
  }
  return spec;
}

// Ordered pairs of distinct responses, uniform over the space; each pair is
// repeated draws_per_pair times with independent labels per dimension drawn
// from the Bradley-Terry probability of the latent rewards.
inline GeneratedDataset gen_bt_dataset(const LatentRewardSpec& latent, std::size_t num_examples,
                                       std::size_t draws_per_pair, std::uint64_t seed) {
  require(draws_per_pair >= 1, "bt generator: draws_per_pair must be >= 1");
  require(latent.space != nullptr, "bt generator: latent spec has no enumerated space");
  const auto& space = *latent.space;
  require(space.num_responses() >= 2, "bt generator: need at least two responses");

  GeneratedDataset g;
  g.latent = latent;
  PreferenceDataset& ds = g.dataset;
  ds.dimensions = latent.names();
  TokenId max_id = 0;
  std::size_t max_len = 0;
  for (const auto& s : space.prompts()) max_id = std::max(max_id, *std::max_element(s.begin(), s.end()));
  for (const auto& s : space.responses()) {
    max_id = std::max(max_id, *std::max_element(s.begin(), s.end()));
    max_len = std::max(max_len, s.size());
  }
  ds.vocab = Vocab{static_cast<std::size_t>(max_id) + 1, {}, 0};
  ds.max_response_length = max_len;
  ds.provenance = {"bt", seed};

  ds.examples.reserve(num_examples * draws_per_pair);
  for (std::size_t i = 0; i < num_examples; ++i) {
    Rng rng(seed, "bt-pair", i);
    const std::size_t x = rng.uniform_int(space.num_prompts());
    const std::size_t a = rng.uniform_int(space.num_responses());
    std::size_t b = rng.uniform_int(space.num_responses() - 1);
    if (b >= a) ++b;
    for (std::size_t k = 0; k < draws_per_pair; ++k) {
      PreferenceExample ex{space.prompt(x), space.response(a), space.response(b), {}, {}};
      for (const auto& name : ds.dimensions) {
        const double pa = tabular::bt_preference_prob(latent.score(name, ex.prompt, ex.response_a),
                                                       latent.score(name, ex.prompt, ex.response_b));
        ex.labels[name] = rng.bernoulli(pa) ? Label::AFirst : Label::BFirst;
      }
      ds.examples.push_back(std::move(ex));
    }
  }
  g.eval_prompts = space.prompts();
  g.parameters = {{"num_examples", num_examples}, {"draws_per_pair", draws_per_pair}, {"seed", seed}};
  ensure_valid(ds);
  return g;
}

inline GeneratedDataset gen_bt_dataset(const BtParams& p) {
  auto g = gen_bt_dataset(random_bt_latent(p), p.num_examples, p.draws_per_pair, p.seed);
  g.parameters = p.to_json();
  return g;
}

}  // namespace spo::datagen
