#pragma once

#include <string>
#include <vector>

#include "spo/core/rng.hpp"
#include "spo/datagen/generated.hpp"

namespace spo::datagen {

struct ConflictingParams {
  std::size_t num_examples = 2000;
  double refusal_fraction = 0.5;
  std::size_t body_length = 6;
  std::size_t prompt_length = 2;
  std::size_t eval_prompts = 200;
  std::uint64_t seed = 0;

  nlohmann::json to_json() const {
    return {{"num_examples", num_examples}, {"refusal_fraction", refusal_fraction},
            {"body_length", body_length},   {"prompt_length", prompt_length},
            {"eval_prompts", eval_prompts}, {"seed", seed}};
  }
};

// Token layout of the conflicting vocabulary.
struct ConflictingLayout {
  static constexpr TokenId eos = 0;
  static constexpr TokenId refusal_first = 1;  // refusal pattern is [1, 2]
  static constexpr TokenId helpful_first = 3;  // 3..6
  static constexpr TokenId harmful_first = 7;  // 7..10
  static constexpr TokenId neutral_first = 11; // 11..18
  static constexpr std::size_t group = 4;
  static constexpr std::size_t neutral = 8;
  static constexpr std::size_t vocab_size = 19;

  static TokenSeq refusal_pattern() { return {1, 2}; }
  static TokenSeq refusal_response() { return {1, 2, eos}; }
  static bool is_helpful(TokenId t) { return t >= helpful_first && t < helpful_first + group; }
  static bool is_harmful(TokenId t) { return t >= harmful_first && t < harmful_first + group; }
};

// helpful = #helpful tokens, harmless = -#harmful tokens; the refusal
// scores -1 on helpful and +1 on harmless, so it loses every helpful
// comparison and wins every harmless one against an ordinary response.
inline LatentRewardSpec conflicting_latent() {
  using L = ConflictingLayout;
  RuleScorer helpful, harmless;
  for (std::size_t k = 0; k < L::group; ++k) {
    helpful.per_occurrence[static_cast<TokenId>(L::helpful_first + k)] = 1.0;
    harmless.per_occurrence[static_cast<TokenId>(L::harmful_first + k)] = -1.0;
  }
  helpful.refusal_pattern = harmless.refusal_pattern = L::refusal_pattern();
  helpful.refusal_score = -1.0;
  harmless.refusal_score = 1.0;
  LatentRewardSpec spec;
  spec.dimensions = {{"helpful", helpful, std::nullopt}, {"harmless", harmless, std::nullopt}};
  spec.refusal_pattern = L::refusal_pattern();
  return spec;
}

// Pairs are either (refusal, answer free of harmful tokens), with probability
// refusal_fraction, or two ordinary responses whose helpful and harmless
// scores both differ and point the same way. Ordinary bodies are uniform
// over the non-refusal tokens.
inline GeneratedDataset gen_conflicting_dataset(const ConflictingParams& p) {
  using L = ConflictingLayout;
  require(p.refusal_fraction > 0.0 && p.refusal_fraction < 1.0,
          "conflicting generator: refusal_fraction must lie in (0, 1)");
  require(p.body_length >= 1 && p.prompt_length >= 1, "conflicting generator: lengths must be positive");
  require(p.num_examples >= 1, "conflicting generator: need at least one example");

  GeneratedDataset g;
  g.latent = conflicting_latent();
  PreferenceDataset& ds = g.dataset;
  ds.dimensions = {"helpful", "harmless"};
  ds.vocab = Vocab{L::vocab_size, {}, L::eos};
  ds.max_response_length = std::max<std::size_t>(p.body_length + 1, 3);
  ds.provenance = {"conflicting", p.seed};

  const std::size_t body_tokens = 2 * L::group + L::neutral;
  auto prompt_of = [&](Rng& rng) {
    TokenSeq s(p.prompt_length);
    for (auto& t : s) t = static_cast<TokenId>(L::neutral_first + rng.uniform_int(L::neutral));
    return s;
  };
  auto body_of = [&](Rng& rng) {
    TokenSeq s(p.body_length);
    for (auto& t : s) t = static_cast<TokenId>(L::helpful_first + rng.uniform_int(body_tokens));
    s.push_back(L::eos);
    return s;
  };
  // Helpful and neutral tokens only, so avoiding harmful tokens never beats a refusal.
  auto clean_body_of = [&](Rng& rng) {
    TokenSeq s(p.body_length);
    for (auto& t : s) {
      const auto k = rng.uniform_int(L::group + L::neutral);
      t = static_cast<TokenId>(k < L::group ? L::helpful_first + k : L::neutral_first + (k - L::group));
    }
    s.push_back(L::eos);
    return s;
  };
  auto score = [&](const std::string& d, const TokenSeq& y) { return g.latent.score(d, {}, y); };

  ds.examples.reserve(p.num_examples);
  for (std::size_t i = 0; i < p.num_examples; ++i) {
    Rng rng(p.seed, "conflicting", i);
    PreferenceExample ex;
    ex.prompt = prompt_of(rng);
    if (rng.bernoulli(p.refusal_fraction)) {
      const bool refusal_is_a = rng.bernoulli(0.5);
      const TokenSeq normal = clean_body_of(rng);
      ex.response_a = refusal_is_a ? L::refusal_response() : normal;
      ex.response_b = refusal_is_a ? normal : L::refusal_response();
      ex.labels["harmless"] = refusal_is_a ? Label::AFirst : Label::BFirst;
      ex.labels["helpful"] = flip(ex.labels["harmless"]);
    } else {
      for (std::size_t attempt = 0;; ++attempt) {
        if (attempt == 10000) throw NumericError("conflicting generator: could not draw a consistent pair");
        TokenSeq a = body_of(rng), b = body_of(rng);
        const double dh = score("helpful", a) - score("helpful", b);
        const double ds_ = score("harmless", a) - score("harmless", b);
        if (dh == 0.0 || ds_ == 0.0 || (dh > 0) != (ds_ > 0)) continue;
        ex.response_a = std::move(a);
        ex.response_b = std::move(b);
        const Label l = dh > 0 ? Label::AFirst : Label::BFirst;
        ex.labels["helpful"] = l;
        ex.labels["harmless"] = l;
        break;
      }
    }
    ds.examples.push_back(std::move(ex));
  }
  for (std::size_t i = 0; i < p.eval_prompts; ++i) {
    Rng rng(p.seed, "conflicting-eval", i);
    g.eval_prompts.push_back(prompt_of(rng));
  }
  g.parameters = p.to_json();
  ensure_valid(ds);
  return g;
}

}  // namespace spo::datagen
