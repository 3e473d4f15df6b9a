#pragma once

#include <memory>
#include <vector>

#include "spo/core/math.hpp"
#include "spo/core/policy.hpp"
#include "spo/tabular/categorical.hpp"

namespace spo {

namespace detail {
inline nlohmann::json vocab_to_json(const Vocab& v) {
  return {{"size", v.size}, {"special_tokens", v.special_tokens}, {"eos", v.eos}};
}
inline Vocab vocab_from_json(const nlohmann::json& j) {
  Vocab v{j.at("size").get<std::size_t>(), j.at("special_tokens").get<std::vector<TokenId>>(),
          j.at("eos").get<TokenId>()};
  v.check();
  return v;
}
}  // namespace detail

// Softmax over an enumerated response list, one logit per (prompt, response).
class TabularPolicy final : public Policy {
 public:
  TabularPolicy(Vocab vocab, std::shared_ptr<const tabular::EnumeratedSpace> space)
      : vocab_(std::move(vocab)),
        space_(std::move(space)),
        logits_(space_->num_prompts() * space_->num_responses(), 0.0) {
    vocab_.check();
    for (const auto& seq : space_->prompts()) check_tokens(seq);
    for (const auto& seq : space_->responses()) check_tokens(seq);
  }

  TabularPolicy(Vocab vocab, std::shared_ptr<const tabular::EnumeratedSpace> space,
                const tabular::CategoricalPolicy& table)
      : TabularPolicy(std::move(vocab), std::move(space)) {
    require(table.num_prompts() == space_->num_prompts() && table.num_responses() == space_->num_responses(),
            "tabular policy: table shape does not match space");
    logits_ = table.logits().values();
  }

  PolicyKind kind() const override { return PolicyKind::Tabular; }
  const Vocab& vocab() const override { return vocab_; }
  std::span<const double> parameters() const override { return logits_; }
  std::span<double> mutable_parameters() override { return logits_; }
  const tabular::EnumeratedSpace& space() const { return *space_; }
  std::shared_ptr<const tabular::EnumeratedSpace> shared_space() const { return space_; }

  double log_prob(const TokenSeq& prompt, const TokenSeq& response) const override {
    note_forward();
    const std::size_t x = space_->prompt_index(prompt);
    const std::size_t y = space_->response_index(response);
    const auto row = logits_row(x);
    return row[y] - math::log_sum_exp(row);
  }

  double log_prob_and_grad(const TokenSeq& prompt, const TokenSeq& response, double scale,
                           std::span<double> grad) const override {
    note_forward();
    require(grad.size() == logits_.size(), "tabular policy: gradient buffer has wrong size");
    const std::size_t x = space_->prompt_index(prompt);
    const std::size_t y = space_->response_index(response);
    const auto row = logits_row(x);
    const double lse = math::log_sum_exp(row);
    const std::size_t r = space_->num_responses();
    for (std::size_t j = 0; j < r; ++j) grad[x * r + j] -= scale * std::exp(row[j] - lse);
    grad[x * r + y] += scale;
    return row[y] - lse;
  }

  // Greedy picks the most likely response, lowest index on ties.
  TokenSeq sample(const TokenSeq& prompt, std::size_t max_len, SampleMode mode, Rng& rng) const override {
    note_forward();
    const std::size_t x = space_->prompt_index(prompt);
    const auto row = logits_row(x);
    std::size_t pick = 0;
    if (mode == SampleMode::Greedy) {
      for (std::size_t j = 1; j < row.size(); ++j) {
        if (row[j] > row[pick]) pick = j;
      }
    } else {
      pick = rng.categorical(math::softmax(row));
    }
    TokenSeq out = space_->response(pick);
    if (out.size() > max_len) out.resize(max_len);
    return out;
  }

  std::unique_ptr<Policy> clone() const override { return std::make_unique<TabularPolicy>(*this); }

  nlohmann::json architecture() const override {
    return {{"kind", "tabular"}, {"vocab", detail::vocab_to_json(vocab_)}, {"space", space_->to_json()}};
  }

  tabular::CategoricalPolicy table() const {
    return tabular::CategoricalPolicy(tabular::Table(space_->num_prompts(), space_->num_responses(), logits_));
  }

 private:
  std::span<const double> logits_row(std::size_t x) const {
    const std::size_t r = space_->num_responses();
    return {logits_.data() + x * r, r};
  }
  void check_tokens(const TokenSeq& seq) const {
    for (TokenId t : seq) require(vocab_.contains(t), "tabular policy: token outside vocab");
  }

  Vocab vocab_;
  std::shared_ptr<const tabular::EnumeratedSpace> space_;
  std::vector<double> logits_;
};

}  // namespace spo
