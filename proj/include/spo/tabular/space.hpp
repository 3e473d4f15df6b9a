#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "spo/core/error.hpp"
#include "spo/core/types.hpp"

namespace spo::tabular {

// A finite set of prompts sharing one finite set of candidate responses,
// small enough that every partition function is an explicit sum.
class EnumeratedSpace {
 public:
  static constexpr std::size_t kMaxPairs = 10000;

  EnumeratedSpace() = default;
  EnumeratedSpace(std::vector<TokenSeq> prompts, std::vector<TokenSeq> responses)
      : prompts_(std::move(prompts)), responses_(std::move(responses)) {
    require(!prompts_.empty() && !responses_.empty(), "enumerated space: empty prompt or response list");
    require(prompts_.size() * responses_.size() <= kMaxPairs, "enumerated space: too large to enumerate");
    for (std::size_t i = 0; i < prompts_.size(); ++i) {
      require(prompt_index_.emplace(prompts_[i], i).second, "enumerated space: duplicate prompt");
    }
    for (std::size_t j = 0; j < responses_.size(); ++j) {
      require(response_index_.emplace(responses_[j], j).second, "enumerated space: duplicate response");
    }
  }

  std::size_t num_prompts() const { return prompts_.size(); }
  std::size_t num_responses() const { return responses_.size(); }
  const std::vector<TokenSeq>& prompts() const { return prompts_; }
  const std::vector<TokenSeq>& responses() const { return responses_; }
  const TokenSeq& prompt(std::size_t i) const { return prompts_.at(i); }
  const TokenSeq& response(std::size_t j) const { return responses_.at(j); }

  std::optional<std::size_t> find_prompt(const TokenSeq& p) const {
    auto it = prompt_index_.find(p);
    return it == prompt_index_.end() ? std::nullopt : std::optional(it->second);
  }
  std::optional<std::size_t> find_response(const TokenSeq& r) const {
    auto it = response_index_.find(r);
    return it == response_index_.end() ? std::nullopt : std::optional(it->second);
  }
  std::size_t prompt_index(const TokenSeq& p) const {
    auto i = find_prompt(p);
    require(i.has_value(), "prompt is not in the enumerated space");
    return *i;
  }
  std::size_t response_index(const TokenSeq& r) const {
    auto i = find_response(r);
    require(i.has_value(), "response is not in the enumerated space");
    return *i;
  }

  nlohmann::json to_json() const { return {{"prompts", prompts_}, {"responses", responses_}}; }
  static EnumeratedSpace from_json(const nlohmann::json& j) {
    return {j.at("prompts").get<std::vector<TokenSeq>>(), j.at("responses").get<std::vector<TokenSeq>>()};
  }

  bool operator==(const EnumeratedSpace& o) const {
    return prompts_ == o.prompts_ && responses_ == o.responses_;
  }

 private:
  std::vector<TokenSeq> prompts_;
  std::vector<TokenSeq> responses_;
  std::map<TokenSeq, std::size_t> prompt_index_;
  std::map<TokenSeq, std::size_t> response_index_;
};

// Row-major (prompt, response) table of reals.
class Table {
 public:
  Table() = default;
  Table(std::size_t prompts, std::size_t responses, double fill = 0.0)
      : prompts_(prompts), responses_(responses), values_(prompts * responses, fill) {}
  Table(std::size_t prompts, std::size_t responses, std::vector<double> values)
      : prompts_(prompts), responses_(responses), values_(std::move(values)) {
    require(values_.size() == prompts_ * responses_, "table: value count does not match shape");
  }

  std::size_t num_prompts() const { return prompts_; }
  std::size_t num_responses() const { return responses_; }
  double operator()(std::size_t x, std::size_t y) const { return values_[x * responses_ + y]; }
  double& operator()(std::size_t x, std::size_t y) { return values_[x * responses_ + y]; }
  std::span<const double> row(std::size_t x) const { return {values_.data() + x * responses_, responses_}; }
  std::span<double> row(std::size_t x) { return {values_.data() + x * responses_, responses_}; }
  const std::vector<double>& values() const { return values_; }
  std::vector<double>& values() { return values_; }
  bool same_shape(const Table& o) const { return prompts_ == o.prompts_ && responses_ == o.responses_; }

 private:
  std::size_t prompts_ = 0;
  std::size_t responses_ = 0;
  std::vector<double> values_;
};

}  // namespace spo::tabular
