#pragma once

#include <vector>

#include "spo/core/error.hpp"
#include "spo/objectives/kappa.hpp"

namespace spo {

// Log-probabilities of the chosen (y_w) and rejected (y_l) response.
struct ChosenRejected {
  double chosen = 0.0;
  double rejected = 0.0;
};

struct PairLogitInputs {
  ChosenRejected current;               // pi_n, the policy being trained
  std::vector<ChosenRejected> history;  // pi_0 .. pi_{n-1}

  PairLogitInputs swapped() const {
    PairLogitInputs out{{current.rejected, current.chosen}, {}};
    for (const auto& h : history) out.history.push_back({h.rejected, h.chosen});
    return out;
  }
};

// phi_i = [log pi_i(y_w) - log pi_{i-1}(y_w)] - [log pi_i(y_l) - log pi_{i-1}(y_l)].
inline double phi(const ChosenRejected& newer, const ChosenRejected& older) {
  return (newer.chosen - older.chosen) - (newer.rejected - older.rejected);
}

// R_n(y_w) - R_n(y_l) = sum_i kappa_i phi_i, summed in order i = 1..n.
inline double spo_pair_logit(const PairLogitInputs& in, const KappaSchedule& schedule) {
  const std::size_t n = schedule.round_n;
  require(in.history.size() >= n, "spo_pair_logit: cache missing round " + std::to_string(in.history.size()));
  double logit = 0.0;
  for (std::size_t i = 1; i <= n; ++i) {
    const ChosenRejected& newer = i == n ? in.current : in.history[i];
    logit += schedule.kappa(i) * phi(newer, in.history[i - 1]);
  }
  return logit;
}

}  // namespace spo
