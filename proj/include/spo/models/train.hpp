#pragma once

#include <cmath>
#include <cstdio>
#include <functional>
#include <memory>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "spo/core/math.hpp"
#include "spo/core/policy.hpp"
#include "spo/models/history.hpp"
#include "spo/models/optimizer.hpp"
#include "spo/objectives/dual_alpha.hpp"
#include "spo/objectives/kappa.hpp"
#include "spo/objectives/loss.hpp"
#include "spo/objectives/pair_logit.hpp"

namespace spo {

struct TrainConfig {
  std::size_t epochs = 1;
  std::size_t batch_size = 32;
  double learning_rate = 1e-5;
  OptimizerKind optimizer = OptimizerKind::Adam;
  std::uint64_t seed = 0;
  std::string precision = "f64";

  void check() const {
    require(learning_rate > 0.0, "train config: learning rate must be positive");
    require(batch_size > 0, "train config: batch size must be positive");
    require(precision == "f64", "train config: only f64 precision is supported");
  }

  nlohmann::json to_json() const {
    return {{"epochs", epochs},       {"batch_size", batch_size},
            {"learning_rate", learning_rate}, {"optimizer", to_string(optimizer)},
            {"seed", seed},           {"precision", precision}};
  }
  static TrainConfig from_json(const nlohmann::json& j) {
    TrainConfig c;
    c.epochs = j.value("epochs", c.epochs);
    c.batch_size = j.value("batch_size", c.batch_size);
    c.learning_rate = j.value("learning_rate", c.learning_rate);
    c.optimizer = optimizer_from_string(j.value("optimizer", std::string(to_string(c.optimizer))));
    c.seed = j.value("seed", c.seed);
    c.precision = j.value("precision", c.precision);
    return c;
  }
};

struct StepMetrics {
  std::size_t step = 0;
  std::size_t round = 0;
  std::size_t epoch = 0;
  double loss = 0.0;
  double grad_norm = 0.0;
  double mean_pair_logit = 0.0;
  double mean_implicit_reward = 0.0;  // beta * phi_n, the current-round margin
  double accuracy = 0.0;              // fraction of pairs with positive logit
  std::vector<double> alphas;
};

struct ProbePoint {
  std::size_t step = 0;
  std::size_t epoch = 0;  // epochs completed
  bool epoch_end = false;
};

using Probe = std::function<void(const Policy&, const ProbePoint&)>;

struct DualAlphaConfig {
  bool enabled = false;
  std::vector<double> thresholds;             // H_i, one per previous dimension
  std::vector<std::string> previous_dimensions;
  double step = 0.05;
  double alpha_max = 0.9;
};

struct RoundOptions {
  DualAlphaConfig dual;
  Probe probe;
  std::size_t probe_interval = 0;  // 0: probe only at start and at epoch ends
};

struct TrainResult {
  std::unique_ptr<Policy> policy;
  std::vector<StepMetrics> steps;
  std::vector<double> epoch_mean_loss;
  KappaSchedule final_schedule;
};

struct BatchTerms {
  double loss = 0.0;
  double mean_pair_logit = 0.0;
  double mean_implicit_reward = 0.0;
  double accuracy = 0.0;
  std::vector<double> previous_margins;  // filled when dual dimensions are given
};

// Loss of one minibatch and its gradient (accumulated into `grad`). y_w/y_l
// come from `dimension`; earlier policies are read only through `history`.
// For each name in `margin_dimensions` the beta-scaled implicit margin of the
// current policy relative to pi_0 is averaged into previous_margins.
inline BatchTerms batch_loss_and_gradient(const Policy& policy, const PreferenceDataset& ds,
                                          std::span<const std::size_t> batch, const std::string& dimension,
                                          const KappaSchedule& sched, const HistorySource& history,
                                          std::span<double> grad,
                                          const std::vector<std::string>& margin_dimensions = {}) {
  require(!batch.empty(), "batch_loss_and_gradient: empty batch");
  const std::size_t n = sched.round_n;
  const double inv_b = 1.0 / static_cast<double>(batch.size());
  const double kappa_n = sched.kappa(n);
  BatchTerms t;
  t.previous_margins.assign(margin_dimensions.size(), 0.0);

  for (const std::size_t e : batch) {
    const auto& ex = ds.examples[e];
    const Side w = preferred_side(ex.label(dimension));
    const Side l = other(w);

    PairLogitInputs in;
    in.current = {policy.log_prob(ex.prompt, ex.response(w)), policy.log_prob(ex.prompt, ex.response(l))};
    in.history.reserve(n);
    for (std::size_t r = 0; r < n; ++r) in.history.push_back({history.log_prob(r, e, w), history.log_prob(r, e, l)});

    const double logit = spo_pair_logit(in, sched);
    if (!std::isfinite(logit)) throw NumericError("non-finite pair logit on example " + std::to_string(e));
    const double coef = preference_loss_derivative(logit) * kappa_n * inv_b;
    policy.log_prob_and_grad(ex.prompt, ex.response(w), coef, grad);
    policy.log_prob_and_grad(ex.prompt, ex.response(l), -coef, grad);

    t.loss += math::softplus(-logit) * inv_b;
    t.mean_pair_logit += logit * inv_b;
    t.mean_implicit_reward += kappa_n * phi(in.current, in.history[n - 1]) * inv_b;
    t.accuracy += (logit > 0.0 ? 1.0 : 0.0) * inv_b;

    const double lp_a = w == Side::A ? in.current.chosen : in.current.rejected;
    const double lp_b = w == Side::A ? in.current.rejected : in.current.chosen;
    for (std::size_t i = 0; i < margin_dimensions.size(); ++i) {
      const Side wi = preferred_side(ex.label(margin_dimensions[i]));
      const double cur_w = wi == Side::A ? lp_a : lp_b;
      const double cur_l = wi == Side::A ? lp_b : lp_a;
      const double margin = (cur_w - history.log_prob(0, e, wi)) - (cur_l - history.log_prob(0, e, other(wi)));
      t.previous_margins[i] += sched.beta * margin * inv_b;
    }
  }
  return t;
}

// Minimizes -mean log sigmoid(R_n(y_w) - R_n(y_l)) over the examples scoped to
// `dimension`, reading earlier policies only through `history`.
inline TrainResult train_round(const Policy& initial, const PreferenceDataset& ds, const std::string& dimension,
                               const KappaSchedule& schedule, const HistorySource& history,
                               const TrainConfig& config, const RoundOptions& options = {}) {
  config.check();
  require(ds.has_dimension(dimension), "train_round: dimension '" + dimension + "' not in dataset");
  require(history.rounds() >= schedule.round_n,
          "train_round: cache incomplete, need rounds 0.." + std::to_string(schedule.round_n - 1));
  require(initial.vocab() == ds.vocab, "train_round: policy vocab does not match dataset");

  const auto& dual = options.dual;
  if (dual.enabled) {
    require(schedule.round_n >= 2, "dual alpha needs at least one previous dimension");
    require(dual.thresholds.size() == schedule.round_n - 1 && dual.previous_dimensions.size() == schedule.round_n - 1,
            "dual alpha: need one threshold and dimension per previous round");
    require(dual.alpha_max < 1.0, "dual alpha: alpha_max must be < 1");
  }
  const std::vector<std::string> no_margins;
  const auto& margin_dims = dual.enabled ? dual.previous_dimensions : no_margins;

  TrainResult result;
  result.policy = initial.clone();
  result.final_schedule = schedule;
  Policy& policy = *result.policy;
  KappaSchedule sched = schedule;
  const std::size_t n = sched.round_n;

  std::vector<std::size_t> order = ds.indices_in_scope(dimension);
  require(!order.empty() || config.epochs == 0, "train_round: no examples in scope for '" + dimension + "'");

  Optimizer optimizer(config.optimizer, config.learning_rate, policy.num_parameters());
  std::vector<double> grad(policy.num_parameters());
  std::size_t step = 0;

  if (options.probe) options.probe(policy, {0, 0, false});

  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    Rng shuffler(config.seed, "batch-order", epoch);
    shuffler.shuffle(std::span<std::size_t>(order));
    double epoch_loss = 0.0;
    std::size_t epoch_steps = 0;

    for (std::size_t begin = 0; begin < order.size(); begin += config.batch_size) {
      const std::size_t end = std::min(order.size(), begin + config.batch_size);
      std::fill(grad.begin(), grad.end(), 0.0);
      ++step;
      BatchTerms t;
      try {
        t = batch_loss_and_gradient(policy, ds, std::span<const std::size_t>(order).subspan(begin, end - begin),
                                    dimension, sched, history, grad, margin_dims);
      } catch (const NumericError& err) {
        throw NumericError("train_round: step " + std::to_string(step) + ": " + err.what());
      }
      if (!std::isfinite(t.loss)) throw NumericError("train_round: non-finite loss at step " + std::to_string(step));

      StepMetrics m;
      m.step = step;
      m.round = n;
      m.epoch = epoch + 1;
      m.loss = t.loss;
      m.mean_pair_logit = t.mean_pair_logit;
      m.mean_implicit_reward = t.mean_implicit_reward;
      m.accuracy = t.accuracy;
      m.grad_norm = math::l2_norm(grad);
      optimizer.step(policy.mutable_parameters(), grad);

      if (dual.enabled) {
        std::vector<double> alphas = sched.alphas;
        for (std::size_t i = 0; i < n - 1; ++i) {
          alphas[i] = dual_alpha_update(alphas[i], t.previous_margins[i], dual.thresholds[i], dual.step, dual.alpha_max);
        }
        sched = kappa_schedule(n, sched.beta, alphas);
      }
      m.alphas = sched.alphas;

      epoch_loss += m.loss;
      ++epoch_steps;
      result.steps.push_back(std::move(m));
      if (options.probe && options.probe_interval > 0 && step % options.probe_interval == 0) {
        options.probe(policy, {step, epoch, false});
      }
    }
    result.epoch_mean_loss.push_back(epoch_steps ? epoch_loss / static_cast<double>(epoch_steps) : 0.0);
    if (options.probe) options.probe(policy, {step, epoch + 1, true});
  }
  result.final_schedule = sched;
  return result;
}

inline std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

// CSV: step,round,epoch,loss,grad_norm,mean_pair_logit
inline std::string metrics_csv(const std::vector<StepMetrics>& steps) {
  std::string out = "step,round,epoch,loss,grad_norm,mean_pair_logit\n";
  for (const auto& m : steps) {
    out += std::to_string(m.step) + "," + std::to_string(m.round) + "," + std::to_string(m.epoch) + "," +
           format_double(m.loss) + "," + format_double(m.grad_norm) + "," + format_double(m.mean_pair_logit) + "\n";
  }
  return out;
}

}  // namespace spo
