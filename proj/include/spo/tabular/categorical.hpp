#pragma once

#include <cmath>
#include <vector>

#include "spo/core/error.hpp"
#include "spo/core/math.hpp"
#include "spo/core/rng.hpp"
#include "spo/tabular/space.hpp"

namespace spo::tabular {

// Latent or implicit reward r(x, y) over an enumerated space.
class RewardTable {
 public:
  RewardTable() = default;
  explicit RewardTable(Table values) : values_(std::move(values)) {
    require(math::all_finite(values_.values()), "reward table: non-finite entry");
  }
  static RewardTable zeros(std::size_t prompts, std::size_t responses) {
    return RewardTable(Table(prompts, responses));
  }

  double operator()(std::size_t x, std::size_t y) const { return values_(x, y); }
  const Table& table() const { return values_; }
  std::size_t num_prompts() const { return values_.num_prompts(); }
  std::size_t num_responses() const { return values_.num_responses(); }

  RewardTable scaled(double c) const {
    Table t = values_;
    for (double& v : t.values()) v *= c;
    return RewardTable(std::move(t));
  }

 private:
  Table values_;
};

// pi(y | x) = softmax_y(logits[x, :]). Log-probabilities are kept alongside
// the logits so every consumer sees the same normalized values.
class CategoricalPolicy {
 public:
  CategoricalPolicy() = default;
  explicit CategoricalPolicy(Table logits) : logits_(std::move(logits)) { renormalize(); }

  static CategoricalPolicy uniform(std::size_t prompts, std::size_t responses) {
    return CategoricalPolicy(Table(prompts, responses));
  }

  static CategoricalPolicy random(std::size_t prompts, std::size_t responses, Rng& rng, double scale = 1.0) {
    Table t(prompts, responses);
    for (double& v : t.values()) v = scale * rng.normal();
    return CategoricalPolicy(std::move(t));
  }

  static CategoricalPolicy from_log_probs(Table log_probs) { return CategoricalPolicy(std::move(log_probs)); }

  std::size_t num_prompts() const { return logits_.num_prompts(); }
  std::size_t num_responses() const { return logits_.num_responses(); }
  const Table& logits() const { return logits_; }
  double log_prob(std::size_t x, std::size_t y) const { return log_probs_(x, y); }
  double prob(std::size_t x, std::size_t y) const { return std::exp(log_probs_(x, y)); }

  std::vector<double> probs(std::size_t x) const {
    std::vector<double> out(num_responses());
    for (std::size_t y = 0; y < out.size(); ++y) out[y] = prob(x, y);
    return out;
  }

  bool same_support(const CategoricalPolicy& o) const { return logits_.same_shape(o.logits_); }

  void set_logits(Table logits) {
    logits_ = std::move(logits);
    renormalize();
  }

 private:
  void renormalize() {
    require(math::all_finite(logits_.values()), "categorical policy: non-finite logit");
    log_probs_ = logits_;
    for (std::size_t x = 0; x < log_probs_.num_prompts(); ++x) math::log_softmax_inplace(log_probs_.row(x));
  }

  Table logits_;
  Table log_probs_;
};

}  // namespace spo::tabular
