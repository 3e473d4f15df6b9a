#pragma once

#include <cstdio>
#include <string>
#include <vector>

#include "spo/datagen/bt.hpp"
#include "spo/objectives/kappa.hpp"
#include "spo/pipeline/sequential.hpp"
#include "spo/tabular/verify.hpp"
#include "spo/verify/problems.hpp"
#include "spo/verify/reference_dpo.hpp"

namespace spo::verify {

struct Check {
  std::string group;
  std::string name;
  double value = 0.0;      // measured error or slack
  double tolerance = 0.0;  // passes when value <= tolerance
  bool passed = false;
};

struct OptimalityRow {
  std::size_t instance = 0;
  std::size_t prompts = 0;
  std::size_t responses = 0;
  double alpha1 = 0.0;
  double beta = 0.0;
  double closed_form = 0.0;
  double best_challenger = 0.0;
  double slack = 0.0;
};

struct SuiteOptions {
  std::size_t optimality_instances = 100;
  std::size_t random_policies = 1000;
  double perturbation = 1e-3;
  std::uint64_t seed = 0;
};

struct SuiteResult {
  std::vector<Check> checks;
  std::vector<OptimalityRow> optimality;

  bool all_passed() const {
    for (const auto& c : checks) {
      if (!c.passed) return false;
    }
    return !checks.empty();
  }

  std::string table() const {
    std::string out;
    char line[256];
    std::snprintf(line, sizeof line, "%-12s %-50s %-12s %-12s %s\n", "group", "check", "value", "tolerance", "result");
    out += line;
    for (const auto& c : checks) {
      std::snprintf(line, sizeof line, "%-12s %-50s %-12.3e %-12.3e %s\n", c.group.c_str(), c.name.c_str(), c.value,
                    c.tolerance, c.passed ? "PASS" : "FAIL");
      out += line;
    }
    return out;
  }

  std::string optimality_csv() const {
    std::string out = "instance,prompts,responses,alpha1,beta,closed_form,best_challenger,slack\n";
    for (const auto& r : optimality) {
      out += std::to_string(r.instance) + "," + std::to_string(r.prompts) + "," + std::to_string(r.responses) + "," +
             format_double(r.alpha1) + "," + format_double(r.beta) + "," + format_double(r.closed_form) + "," +
             format_double(r.best_challenger) + "," + format_double(r.slack) + "\n";
    }
    return out;
  }
};

inline const std::vector<std::string>& suite_names() {
  static const std::vector<std::string> names{"all", "gradcheck", "optimality", "kappa", "reductions"};
  return names;
}

namespace detail {

inline void add(SuiteResult& r, std::string group, std::string name, double value, double tol) {
  r.checks.push_back({std::move(group), std::move(name), value, tol, value <= tol});
}

inline void gradient_checks(SuiteResult& out, std::uint64_t seed) {
  struct Case {
    const char* label;
    std::size_t n;
    std::vector<double> alphas;
  };
  const std::vector<Case> cases{{"dpo n=1", 1, {}},
                                {"spo n=2", 2, {0.1}},
                                {"spo n=3 unequal alpha", 3, {0.1, 0.35}},
                                {"spo n=4 equal alpha", 4, {0.2, 0.2, 0.2}}};
  for (const auto& c : cases) {
    double worst = 0.0;
    for (double beta : {0.1, 1.0}) {
      const TabularRound r(c.n, beta, c.alphas, derive_seed(seed, "gradcheck", c.n));
      worst = std::max(worst, r.check(1e-5).max_relative_error);
    }
    add(out, "gradcheck", std::string("tabular ") + c.label, worst, 1e-6);
  }
  double gap = 0.0;
  for (std::uint64_t k = 0; k < 5; ++k) {
    gap = std::max(gap, round2_gradient_gap(0.1 * static_cast<double>(k + 1), 0.1 + 0.1 * static_cast<double>(k),
                                            derive_seed(seed, "round2-gap", k)));
  }
  add(out, "gradcheck", "round-2 analytic gradient vs trainer", gap, 1e-10);
  add(out, "gradcheck", "neural dpo", neural_dpo_gradcheck(derive_seed(seed, "neural")).max_relative_error, 1e-4);
}

inline void optimality_checks(SuiteResult& out, const SuiteOptions& opt) {
  double worst = -INFINITY;
  for (std::size_t i = 0; i < opt.optimality_instances; ++i) {
    const auto inst = tabular::random_round2_instance(derive_seed(opt.seed, "optimality", i));
    const auto res =
        tabular::check_round2_optimality(inst, opt.random_policies, opt.perturbation, derive_seed(opt.seed, "challengers", i));
    out.optimality.push_back({i, inst.pi1.num_prompts(), inst.pi1.num_responses(), inst.alpha1, inst.beta,
                              res.closed_form_objective, res.best_challenger_objective, res.slack()});
    worst = std::max(worst, res.slack());
  }
  add(out, "optimality",
      "closed form beats challengers (" + std::to_string(opt.optimality_instances) + " instances)", worst, 1e-9);
}

inline void kappa_checks(SuiteResult& out) {
  double worst = 0.0;
  for (std::size_t n = 1; n <= 8; ++n) {
    for (double a : {0.05, 0.1, 0.3, 0.5}) {
      const auto rec = kappa_schedule(n, 0.1, std::vector<double>(n - 1, a)).kappas;
      const auto closed = equal_alpha_kappas(n, 0.1, a);
      for (std::size_t i = 0; i < n; ++i) worst = std::max(worst, std::abs(rec[i] - closed[i]));
    }
  }
  add(out, "kappa", "recursion vs equal-alpha closed form, n<=8", worst, 1e-12);
  double two = 0.0;
  for (double a : {0.05, 0.1, 0.3, 0.5}) {
    for (double beta : {0.1, 0.5}) {
      const auto k = kappa_schedule(2, beta, {a}).kappas;
      if (k[0] != -a * beta || k[1] != beta) two = 1.0;
    }
  }
  add(out, "kappa", "n=2 gives (-alpha beta, beta) exactly", two, 0.0);
}

// Two-dimension Bradley-Terry data over a small space with a random tabular pi_0.
struct ReductionSetup {
  datagen::GeneratedDataset data;
  std::unique_ptr<Policy> pi0;
  pipeline::PipelineConfig config;
};

inline ReductionSetup reduction_setup(std::uint64_t seed) {
  datagen::BtParams p;
  p.num_dims = 2;
  p.num_examples = 200;
  p.draws_per_pair = 1;
  p.seed = seed;
  ReductionSetup s;
  s.data = datagen::gen_bt_dataset(p);
  Rng rng(seed, "reduction-pi0");
  s.pi0 = std::make_unique<TabularPolicy>(random_tabular(s.data.dataset.vocab, s.data.latent.space, rng, 0.5));
  s.config.dimensions = s.data.dataset.dimensions;
  s.config.train.epochs = 2;
  s.config.train.batch_size = 16;
  s.config.train.learning_rate = 0.05;
  s.config.seed = seed;
  return s;
}

inline void reduction_checks(SuiteResult& out, std::uint64_t seed) {
  const auto s = reduction_setup(derive_seed(seed, "reductions"));
  const auto& ds = s.data.dataset;
  auto cfg = s.config;

  cfg.method = pipeline::Method::SPO;
  cfg.alphas = {0.0};
  const auto spo0 = pipeline::run_sequential(cfg, ds, *s.pi0);
  cfg.method = pipeline::Method::SDPO;
  cfg.alphas = {0.1};
  const auto sdpo = pipeline::run_sequential(cfg, ds, *s.pi0);

  const auto& d1 = cfg.dimensions[0];
  const auto& d2 = cfg.dimensions[1];
  const auto dpo1 = reference_dpo(*s.pi0, *s.pi0, ds, d1, cfg.beta, cfg.train_for_round(1));
  const auto dpo2 =
      reference_dpo(*spo0.checkpoints[1], *spo0.checkpoints[1], ds, d2, cfg.beta, cfg.train_for_round(2));

  add(out, "reductions", "spo n=1 vs reference dpo: loss trace",
      max_abs_difference(losses_of(spo0.rounds[0].steps), dpo1.losses), 1e-12);
  add(out, "reductions", "spo n=1 vs reference dpo: parameters",
      max_abs_difference(spo0.checkpoints[1]->parameters(), dpo1.policy->parameters()), 1e-12);
  add(out, "reductions", "spo alpha=0 vs s-dpo: round-2 loss trace",
      max_abs_difference(losses_of(spo0.rounds[1].steps), losses_of(sdpo.rounds[1].steps)), 1e-12);
  add(out, "reductions", "spo alpha=0 vs reference dpo on pi_1: trace",
      max_abs_difference(losses_of(spo0.rounds[1].steps), dpo2.losses), 1e-12);
  add(out, "reductions", "spo alpha=0 vs s-dpo: final parameters",
      max_abs_difference(spo0.final_policy().parameters(), sdpo.final_policy().parameters()), 1e-12);

  // Cached history against re-evaluated checkpoints, with alpha > 0 so the
  // history terms matter.
  cfg.method = pipeline::Method::SPO;
  cfg.alphas = {0.3};
  const auto cached = pipeline::run_sequential(cfg, ds, *s.pi0);
  pipeline::RunOptions ro;
  ro.recompute_history = true;
  const auto recomputed = pipeline::run_sequential(cfg, ds, *s.pi0, ro);
  add(out, "reductions", "cached vs recomputed history: round-2 trace",
      max_abs_difference(losses_of(cached.rounds[1].steps), losses_of(recomputed.rounds[1].steps)), 1e-12);
  double forwards = 0.0;
  for (const auto& r : cached.rounds) forwards += static_cast<double>(r.history_forward_passes);
  add(out, "reductions", "historical forward passes with cache", forwards, 0.0);
}

}  // namespace detail

// Runs one named suite: all, gradcheck, optimality, kappa or reductions.
inline SuiteResult run_suite(const std::string& suite, const SuiteOptions& opt = {}) {
  bool known = false;
  for (const auto& n : suite_names()) known = known || n == suite;
  require(known, "unknown suite '" + suite + "' (expected all, gradcheck, optimality, kappa or reductions)");
  SuiteResult out;
  const bool all = suite == "all";
  if (all || suite == "gradcheck") detail::gradient_checks(out, opt.seed);
  if (all || suite == "optimality") detail::optimality_checks(out, opt);
  if (all || suite == "kappa") detail::kappa_checks(out);
  if (all || suite == "reductions") detail::reduction_checks(out, opt.seed);
  return out;
}

}  // namespace spo::verify
