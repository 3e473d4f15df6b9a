#pragma once

#include <optional>
#include <vector>

#include "spo/core/logprob_cache.hpp"
#include "spo/core/policy.hpp"

namespace spo {

// Log-probabilities of earlier policies pi_0 .. pi_{rounds()-1} on the
// responses of a dataset.
class HistorySource {
 public:
  virtual ~HistorySource() = default;
  virtual std::size_t rounds() const = 0;
  virtual double log_prob(std::size_t round, std::size_t example, Side side) const = 0;
};

// Reads frozen values from a LogProbCache. A window [first, first + count)
// re-bases the rounds, e.g. to treat pi_{k-1} alone as the reference.
class CachedHistory final : public HistorySource {
 public:
  CachedHistory(const LogProbCache& cache, const PreferenceDataset& ds, std::size_t first = 0,
                std::optional<std::size_t> count = std::nullopt)
      : cache_(cache), first_(first), count_(count.value_or(cache.rounds() - std::min(first, cache.rounds()))) {
    cache.check_matches(ds);
    require(first_ + count_ <= cache.rounds(), "cached history: window exceeds cached rounds");
  }

  std::size_t rounds() const override { return count_; }
  double log_prob(std::size_t round, std::size_t example, Side side) const override {
    require(round < count_, "cached history: round out of window");
    return cache_.log_prob(first_ + round, example, side);
  }

 private:
  const LogProbCache& cache_;
  std::size_t first_;
  std::size_t count_;
};

// Re-evaluates checkpoints on demand instead of reading a cache.
class RecomputedHistory final : public HistorySource {
 public:
  RecomputedHistory(std::vector<const Policy*> policies, const PreferenceDataset& ds)
      : policies_(std::move(policies)), ds_(ds) {}

  std::size_t rounds() const override { return policies_.size(); }
  double log_prob(std::size_t round, std::size_t example, Side side) const override {
    require(round < policies_.size(), "recomputed history: round out of range");
    const auto& ex = ds_.examples.at(example);
    return policies_[round]->log_prob(ex.prompt, ex.response(side));
  }

 private:
  std::vector<const Policy*> policies_;
  const PreferenceDataset& ds_;
};

}  // namespace spo
