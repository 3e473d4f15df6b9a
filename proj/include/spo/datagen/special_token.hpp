#pragma once

#include <algorithm>
#include <string>
#include <vector>

#include "spo/core/rng.hpp"
#include "spo/datagen/generated.hpp"

namespace spo::datagen {

inline constexpr std::size_t kReservedSpecialTokens = 8;

struct SpecialTokenParams {
  std::size_t num_examples = 2000;  // base samples; each yields one example per dimension
  std::size_t num_dims = 4;
  double noise = 0.1;
  std::size_t base_length = 4;
  std::size_t prompt_length = 2;
  std::size_t content_tokens = 16;
  std::size_t eval_prompts = 200;
  std::uint64_t seed = 0;

  nlohmann::json to_json() const {
    return {{"num_examples", num_examples}, {"num_dims", num_dims},         {"noise", noise},
            {"base_length", base_length},   {"prompt_length", prompt_length}, {"content_tokens", content_tokens},
            {"eval_prompts", eval_prompts}, {"seed", seed},
            {"own_token_noise", false}};
  }
};

// Token layout: eos = 0, special tokens 1..num_dims, content tokens after.
inline Vocab special_token_vocab(const SpecialTokenParams& p) {
  Vocab v{1 + p.num_dims + p.content_tokens, {}, 0};
  for (std::size_t d = 0; d < p.num_dims; ++d) v.special_tokens.push_back(static_cast<TokenId>(1 + d));
  return v;
}

inline std::string special_dimension_name(std::size_t d) { return "token_" + std::to_string(d + 1); }

// One example per (base sample, dimension d), scoped to d. Both responses
// share the base body. The d-preferred response carries token d; every other
// special token is added to each response independently with probability
// `noise`. Tokens go after the body in id order, then eos. The dispreferred
// response never receives token d, so presence of token d decides dimension d.
// Labels on the other dimensions follow token presence when it separates the
// pair and a seeded coin otherwise.
inline GeneratedDataset gen_special_token_dataset(const SpecialTokenParams& p) {
  require(p.num_dims >= 1, "special-token generator: need at least one dimension");
  require(p.num_dims <= kReservedSpecialTokens, "special-token generator: vocab too small for " +
                                                    std::to_string(p.num_dims) + " special tokens");
  require(p.content_tokens >= 1, "special-token generator: vocab too small, no content tokens");
  require(p.noise >= 0.0 && p.noise < 1.0, "special-token generator: noise must lie in [0, 1)");
  require(p.base_length >= 1 && p.prompt_length >= 1, "special-token generator: lengths must be positive");
  require(p.num_examples >= 1, "special-token generator: need at least one example");

  GeneratedDataset g;
  PreferenceDataset& ds = g.dataset;
  ds.vocab = special_token_vocab(p);
  for (std::size_t d = 0; d < p.num_dims; ++d) ds.dimensions.push_back(special_dimension_name(d));
  ds.max_response_length = p.base_length + p.num_dims + 1;
  ds.provenance = {"special-token", p.seed};
  const auto& specials = ds.vocab.special_tokens;
  const TokenId first_content = static_cast<TokenId>(1 + p.num_dims);

  auto content = [&](Rng& rng) { return static_cast<TokenId>(first_content + rng.uniform_int(p.content_tokens)); };
  auto random_seq = [&](Rng& rng, std::size_t len) {
    TokenSeq s(len);
    for (auto& t : s) t = content(rng);
    return s;
  };

  ds.examples.reserve(p.num_examples * p.num_dims);
  for (std::size_t i = 0; i < p.num_examples; ++i) {
    Rng rng(p.seed, "special-token", i);
    const TokenSeq prompt = random_seq(rng, p.prompt_length);
    const TokenSeq body = random_seq(rng, p.base_length);
    for (std::size_t d = 0; d < p.num_dims; ++d) {
      std::vector<TokenId> win{specials[d]}, lose;
      for (std::size_t k = 0; k < p.num_dims; ++k) {
        if (k == d) continue;
        if (rng.bernoulli(p.noise)) win.push_back(specials[k]);
        if (rng.bernoulli(p.noise)) lose.push_back(specials[k]);
      }
      std::sort(win.begin(), win.end());
      std::sort(lose.begin(), lose.end());
      auto finish = [&](const std::vector<TokenId>& extra) {
        TokenSeq r = body;
        r.insert(r.end(), extra.begin(), extra.end());
        r.push_back(ds.vocab.eos);
        return r;
      };
      const bool a_wins = rng.bernoulli(0.5);
      PreferenceExample ex;
      ex.prompt = prompt;
      ex.response_a = finish(a_wins ? win : lose);
      ex.response_b = finish(a_wins ? lose : win);
      ex.scope = {ds.dimensions[d]};
      for (std::size_t k = 0; k < p.num_dims; ++k) {
        const bool in_a = contains_token(ex.response_a, specials[k]);
        const bool in_b = contains_token(ex.response_b, specials[k]);
        const bool a_first = in_a != in_b ? in_a : rng.bernoulli(0.5);
        ex.labels[ds.dimensions[k]] = a_first ? Label::AFirst : Label::BFirst;
      }
      ds.examples.push_back(std::move(ex));
    }
  }

  for (std::size_t d = 0; d < p.num_dims; ++d) {
    RuleScorer r;
    r.presence[specials[d]] = 1.0;
    g.latent.dimensions.push_back({ds.dimensions[d], r, std::nullopt});
  }
  for (std::size_t i = 0; i < p.eval_prompts; ++i) {
    Rng rng(p.seed, "special-token-eval", i);
    g.eval_prompts.push_back(random_seq(rng, p.prompt_length));
  }
  g.parameters = p.to_json();
  ensure_valid(ds);
  return g;
}

}  // namespace spo::datagen
