#pragma once

#include <atomic>
#include <cstdint>
#include <memory>
#include <span>

#include <nlohmann/json.hpp>

#include "spo/core/rng.hpp"
#include "spo/core/types.hpp"

namespace spo {

enum class PolicyKind : std::uint8_t { Tabular, Neural };
enum class SampleMode : std::uint8_t { Greedy, Stochastic };

inline const char* to_string(PolicyKind k) { return k == PolicyKind::Tabular ? "tabular" : "neural"; }

// An autoregressive categorical distribution over responses given a prompt,
// with a flat parameter vector and differentiable log-probabilities.
//
// Every log-probability evaluation bumps a counter, which lets callers check
// that a training round never touches historical policies.
class Policy {
 public:
  Policy() = default;
  Policy(const Policy&) {}
  Policy& operator=(const Policy&) { return *this; }
  virtual ~Policy() = default;

  virtual PolicyKind kind() const = 0;
  virtual const Vocab& vocab() const = 0;
  virtual std::span<const double> parameters() const = 0;
  virtual std::span<double> mutable_parameters() = 0;

  virtual double log_prob(const TokenSeq& prompt, const TokenSeq& response) const = 0;

  // Returns log pi(response | prompt) and adds scale * d/dtheta of it into grad.
  virtual double log_prob_and_grad(const TokenSeq& prompt, const TokenSeq& response, double scale,
                                   std::span<double> grad) const = 0;

  // Stops at eos (included) or after max_len tokens.
  virtual TokenSeq sample(const TokenSeq& prompt, std::size_t max_len, SampleMode mode,
                          Rng& rng) const = 0;

  virtual std::unique_ptr<Policy> clone() const = 0;

  // Everything except the parameter values needed to rebuild the policy.
  virtual nlohmann::json architecture() const = 0;

  std::size_t num_parameters() const { return parameters().size(); }
  std::uint64_t forward_count() const { return forwards_.load(std::memory_order_relaxed); }
  void reset_forward_count() const { forwards_.store(0, std::memory_order_relaxed); }

 protected:
  void note_forward() const { forwards_.fetch_add(1, std::memory_order_relaxed); }

 private:
  mutable std::atomic<std::uint64_t> forwards_{0};
};

inline TokenSeq sample_response(const Policy& policy, const TokenSeq& prompt, std::size_t max_len,
                                SampleMode mode, std::uint64_t seed) {
  require(max_len >= 1, "sample_response: max_len must be >= 1");
  Rng rng(seed);
  return policy.sample(prompt, max_len, mode, rng);
}

}  // namespace spo
