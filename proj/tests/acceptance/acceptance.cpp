// Runs the ten acceptance criteria and prints one PASS/FAIL line for each.
//
//   spo_acceptance [--only 1,4,9] [--known-failures 6,7,8] [--seeds N]
//
// Exit status is 0 when every criterion passes, or fails only among those
// given in --known-failures. Known failures still print FAIL.

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "spo/core/math.hpp"
#include "spo/datagen/bt.hpp"
#include "spo/pipeline/experiments.hpp"
#include "spo/pipeline/run_dir.hpp"
#include "spo/verify/suite.hpp"

using namespace spo;
using namespace spo::pipeline;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool passed = false;
  std::string detail;
};

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

std::string join(const std::vector<double>& xs, const char* f = "%.3f") {
  std::string s;
  for (double x : xs) s += (s.empty() ? "" : "/") + fmt(f, x);
  return s;
}

Outcome from_suite(const std::string& group, const verify::SuiteOptions& opt = {}) {
  const auto r = verify::run_suite(group, opt);
  std::string worst;
  for (const auto& c : r.checks) {
    if (!c.passed) worst += " [" + c.name + " " + fmt("%.3e", c.value) + " > " + fmt("%.1e", c.tolerance) + "]";
  }
  std::string detail = std::to_string(r.checks.size()) + " checks";
  if (!worst.empty()) detail += ", failing:" + worst;
  else {
    double m = 0.0;
    for (const auto& c : r.checks) m = std::max(m, c.value);
    detail += ", largest error/slack " + fmt("%.2e", m);
  }
  return {r.all_passed(), detail};
}

// ---- 4: reductions over a desk-scale neural run ------------------------------

Outcome reductions(std::uint64_t seed) {
  const auto tab = from_suite("reductions", {100, 1000, 1e-3, seed});

  datagen::SpecialTokenParams p;
  p.num_dims = 2;
  p.seed = seed;
  const auto g = datagen::gen_special_token_dataset(p);
  const ExperimentSetup s;
  const auto pi0 = make_initial_policy(g.dataset, s.net, s.sft, seed);
  PipelineConfig cfg;
  cfg.dimensions = g.dataset.dimensions;
  cfg.train = s.train;
  cfg.seed = seed;
  cfg.alphas = {0.0};
  const auto spo0 = run_sequential(cfg, g.dataset, *pi0);
  cfg.method = Method::SDPO;
  cfg.alphas = {s.alpha};
  const auto sdpo = run_sequential(cfg, g.dataset, *pi0);
  const auto dpo = verify::reference_dpo(*pi0, *pi0, g.dataset, cfg.dimensions[0], cfg.beta, cfg.train_for_round(1));

  const double round2 = verify::max_abs_difference(verify::losses_of(spo0.rounds[1].steps), verify::losses_of(sdpo.rounds[1].steps));
  const double round1 = verify::max_abs_difference(verify::losses_of(spo0.rounds[0].steps), dpo.losses);
  const double params = verify::max_abs_difference(spo0.checkpoints[1]->parameters(), dpo.policy->parameters());
  const bool ok = tab.passed && round2 <= 1e-12 && round1 <= 1e-12 && params <= 1e-12;
  return {ok, "tabular: " + tab.detail + "; neural " + std::to_string(g.dataset.examples.size()) +
                  " pairs: spo(a=0) vs s-dpo round-2 trace " + fmt("%.1e", round2) + ", spo(n=1) vs dpo trace " +
                  fmt("%.1e", round1) + ", params " + fmt("%.1e", params)};
}

// ---- 5: reward recovery --------------------------------------------------------

// Bradley-Terry maximum likelihood on the pair counts, by full-gradient
// ascent. The DPO optimum must agree with it.
double bt_mle_error(const datagen::GeneratedDataset& g) {
  const auto& sp = *g.latent.space;
  const auto& dim = g.dataset.dimensions.front();
  const std::size_t P = sp.num_prompts(), R = sp.num_responses();
  std::vector<double> wins(P * R * R, 0.0), r(P * R, 0.0);
  for (const auto& ex : g.dataset.examples) {
    const auto x = sp.prompt_index(ex.prompt);
    auto w = sp.response_index(ex.response_a), l = sp.response_index(ex.response_b);
    if (ex.label(dim) == Label::BFirst) std::swap(w, l);
    wins[(x * R + w) * R + l] += 1.0;
  }
  for (int it = 0; it < 20000; ++it) {
    std::vector<double> grad(P * R, 0.0);
    for (std::size_t x = 0; x < P; ++x) {
      for (std::size_t i = 0; i < R; ++i) {
        for (std::size_t j = 0; j < R; ++j) {
          const double w = wins[(x * R + i) * R + j];
          if (w == 0.0) continue;
          const double miss = 1.0 / (1.0 + std::exp(r[x * R + i] - r[x * R + j]));
          grad[x * R + i] += w * miss;
          grad[x * R + j] -= w * miss;
        }
      }
    }
    for (std::size_t k = 0; k < r.size(); ++k) r[k] += 2e-4 * grad[k];
  }
  double err = 0.0;
  for (std::size_t x = 0; x < P; ++x) {
    for (std::size_t i = 0; i < R; ++i) {
      for (std::size_t j = i + 1; j < R; ++j) {
        const double truth =
            g.latent.score(dim, sp.prompt(x), sp.response(i)) - g.latent.score(dim, sp.prompt(x), sp.response(j));
        err = std::max(err, std::abs(r[x * R + i] - r[x * R + j] - truth));
      }
    }
  }
  return err;
}

Outcome reward_recovery(std::size_t seeds) {
  bool ok = true;
  std::string detail;
  for (std::uint64_t seed = 0; seed < seeds; ++seed) {
    datagen::BtParams p;  // 4 prompts x 8 responses, 64 draws per pair
    p.seed = seed;
    TrainConfig t;
    t.epochs = 150;
    t.batch_size = p.num_examples * p.draws_per_pair;  // full batch, so training settles at the optimum
    t.learning_rate = 0.05;
    const auto r = run_reward_recovery(p, 1.0, t);
    const double mle = bt_mle_error(datagen::gen_bt_dataset(p));
    const double ratio = r.max_error / r.max_delta;
    ok = ok && ratio <= 0.05;
    detail += (detail.empty() ? "" : "; ") + std::string("seed ") + std::to_string(seed) + " max|err| " +
              fmt("%.3f", r.max_error) + " = " + fmt("%.1f", 100 * ratio) + "% of max|delta| (bt mle " +
              fmt("%.1f", 100 * mle / r.max_delta) + "%)";
  }
  return {ok, detail};
}

// ---- 6-8: synthetic experiments -------------------------------------------------

Outcome special_tokens(std::size_t seeds) {
  const ExperimentSetup s;
  std::vector<double> spo(4, 0.0), sdpo(4, 0.0);
  double spo_pareto = 0.0, sdpo_pareto = 0.0;
  std::string per_seed;
  for (std::uint64_t seed = 0; seed < seeds; ++seed) {
    datagen::SpecialTokenParams p;
    p.seed = seed;
    const auto o = run_special_token_experiment(p, s);
    const double w = 1.0 / static_cast<double>(seeds);
    for (std::size_t k = 0; k < 4; ++k) spo[k] += w * o.spo.presence[k], sdpo[k] += w * o.sdpo.presence[k];
    spo_pareto += w * o.spo.pareto;
    sdpo_pareto += w * o.sdpo.pareto;
    per_seed += " seed" + std::to_string(seed) + " spo " + join(o.spo.presence) + " p " + fmt("%.3f", o.spo.pareto) +
                ", s-dpo " + join(o.sdpo.presence) + " p " + fmt("%.3f", o.sdpo.pareto) + ";";
  }
  const double spo_min = *std::min_element(spo.begin(), spo.end());
  const double sdpo_earlier_min = *std::min_element(sdpo.begin(), sdpo.end() - 1);
  const bool spo_ok = spo_min >= 0.40 && spo_pareto >= 0.20;
  const bool sdpo_ok = sdpo.back() >= 0.90 && sdpo_pareto <= 0.05 && sdpo_earlier_min <= 0.15;
  return {spo_ok && sdpo_ok, "pooled over " + std::to_string(seeds) + " seeds: SPO presence " + join(spo) +
                                 " pareto " + fmt("%.3f", spo_pareto) + (spo_ok ? " (ok)" : " (needs min>=0.40, pareto>=0.20)") +
                                 "; S-DPO presence " + join(sdpo) + " pareto " + fmt("%.3f", sdpo_pareto) +
                                 (sdpo_ok ? " (ok)" : " (needs last>=0.90, pareto<=0.05, an earlier<=0.15)") + ";" +
                                 per_seed};
}

Outcome alpha_monotonicity(std::size_t seeds) {
  const std::vector<double> grid{0.0, 0.05, 0.1, 0.3, 0.5};
  std::vector<double> helpful(grid.size(), 0.0), harmless(grid.size(), 0.0), refusal(grid.size(), 0.0);
  for (std::uint64_t seed = 0; seed < seeds; ++seed) {
    ConflictingSetup c;
    c.data.seed = seed;
    const auto pts = run_alpha_sweep(c, grid);
    for (std::size_t i = 0; i < grid.size(); ++i) {
      const double w = 1.0 / static_cast<double>(seeds);
      helpful[i] += w * pts[i].helpful;
      harmless[i] += w * pts[i].harmless;
      refusal[i] += w * pts[i].refusal_rate;
    }
  }
  const double rho_help = math::spearman(grid, helpful), rho_harm = math::spearman(grid, harmless);
  const bool ok = rho_help >= 0.8 && rho_harm <= -0.8;
  return {ok, "seed means over alpha 0/0.05/0.1/0.3/0.5: helpful " + join(helpful) + " (rho " + fmt("%.2f", rho_help) +
                  ", needs >=0.8), harmless " + join(harmless) + " (rho " + fmt("%.2f", rho_harm) +
                  ", needs <=-0.8), refusal " + join(refusal)};
}

Outcome overfitting(std::size_t seeds) {
  const std::size_t epochs = 5;
  std::vector<double> spo(epochs, 0.0), sdpo(epochs, 0.0);
  double pi1 = 0.0;
  for (std::uint64_t seed = 0; seed < seeds; ++seed) {
    ConflictingSetup c;
    c.data.seed = seed;
    const auto o = run_overfitting_study(c, epochs);
    const double w = 1.0 / static_cast<double>(seeds);
    for (std::size_t e = 0; e < epochs; ++e) spo[e] += w * o.spo[e], sdpo[e] += w * o.sdpo[e];
    pi1 += w * o.pi1_refusal;
  }
  bool spo_ok = true, sdpo_ok = true;
  for (std::size_t e = 0; e < epochs; ++e) {
    spo_ok = spo_ok && spo[e] < 0.10;
    if (e >= 1) sdpo_ok = sdpo_ok && sdpo[e] > 0.30;
  }
  return {spo_ok && sdpo_ok, "held-out refusal rate by epoch (seed means): SPO " + join(spo) +
                                 (spo_ok ? " (ok)" : " (needs <0.10 every epoch)") + ", S-DPO " + join(sdpo) +
                                 (sdpo_ok ? " (ok)" : " (needs >0.30 from epoch 2)") + ", pi_1 " + fmt("%.3f", pi1)};
}

// ---- 9-10: cache and determinism -------------------------------------------------

Outcome cache_equivalence(std::uint64_t seed) {
  datagen::SpecialTokenParams p;
  p.seed = seed;
  const auto g = datagen::gen_special_token_dataset(p);
  const ExperimentSetup s;
  const auto pi0 = make_initial_policy(g.dataset, s.net, s.sft, seed);
  PipelineConfig cfg;
  cfg.dimensions = g.dataset.dimensions;
  cfg.train = s.train;
  cfg.alphas = {0.3};
  cfg.seed = seed;
  const auto cached = run_sequential(cfg, g.dataset, *pi0);
  RunOptions ro;
  ro.recompute_history = true;
  const auto recomputed = run_sequential(cfg, g.dataset, *pi0, ro);
  double gap = 0.0;
  std::uint64_t cached_forwards = 0, recomputed_forwards = 0;
  for (std::size_t n = 0; n < cached.rounds.size(); ++n) {
    gap = std::max(gap, verify::max_abs_difference(verify::losses_of(cached.rounds[n].steps),
                                                   verify::losses_of(recomputed.rounds[n].steps)));
    cached_forwards += cached.rounds[n].history_forward_passes;
    recomputed_forwards += recomputed.rounds[n].history_forward_passes;
  }
  const auto tab = from_suite("reductions", {100, 1000, 1e-3, seed});
  const bool ok = gap <= 1e-12 && cached_forwards == 0 && recomputed_forwards > 0 && tab.passed;
  return {ok, "neural 4-round run, alpha 0.3: max trace gap " + fmt("%.1e", gap) + ", historical forwards cached " +
                  std::to_string(cached_forwards) + " vs recomputed " + std::to_string(recomputed_forwards) +
                  "; tabular " + tab.detail};
}

std::vector<std::pair<fs::path, std::string>> snapshot(const fs::path& root) {
  std::vector<std::pair<fs::path, std::string>> out;
  for (const auto& e : fs::recursive_directory_iterator(root)) {
    if (e.is_regular_file()) out.emplace_back(fs::relative(e.path(), root), spo::detail::read_file(e.path()));
  }
  std::sort(out.begin(), out.end());
  return out;
}

Outcome determinism(std::uint64_t seed) {
  const fs::path base = fs::temp_directory_path() / "spo_acceptance_determinism";
  fs::remove_all(base);
  const std::vector<Method> methods{Method::SPO, Method::SDPO, Method::DPOMix, Method::MergeDPO};
  bool ok = true;
  std::size_t files = 0;
  std::string mismatches;
  for (Method m : methods) {
    for (int copy = 0; copy < 2; ++copy) {
      datagen::SpecialTokenParams p;
      p.num_examples = 500;
      p.seed = seed;
      const auto g = datagen::gen_special_token_dataset(p);
      const ExperimentSetup s;
      const auto pi0 = make_initial_policy(g.dataset, s.net, s.sft, seed);
      PipelineConfig cfg;
      cfg.method = m;
      cfg.dimensions = g.dataset.dimensions;
      cfg.mix_priority = cfg.dimensions;
      cfg.train = s.train;
      cfg.seed = seed;
      const EvalOptions eopt{1, derive_seed(seed, "eval"), g.dataset.max_response_length, SampleMode::Stochastic};
      auto curve = std::make_shared<RewardCurve>();
      RunOptions ro;
      ro.probe_for_round = [&](std::size_t round, const std::string&) {
        return reward_probe(curve, round, g.eval_prompts, g.latent, g.dataset.vocab.special_tokens, eopt);
      };
      const auto run = run_pipeline(cfg, g.dataset, *pi0, &g.latent, ro);
      const auto report =
          evaluate_policy(run.final_policy(), g.eval_prompts, g.latent, g.dataset.vocab.special_tokens, eopt);
      write_run(base / (std::string(to_string(m)) + "_" + std::to_string(copy)), cfg, g.dataset, run,
                {"special-token", seed, {{"source", "sft"}}}, curve.get(), &report);
    }
    const auto a = snapshot(base / (std::string(to_string(m)) + "_0"));
    const auto b = snapshot(base / (std::string(to_string(m)) + "_1"));
    files += a.size();
    if (a != b) {
      ok = false;
      mismatches += std::string(" ") + to_string(m);
    }
  }
  fs::remove_all(base);
  return {ok, std::to_string(methods.size()) + " methods run twice, " + std::to_string(files) +
                  " files per copy compared byte for byte" + (ok ? "" : "; differing:" + mismatches)};
}

struct Criterion {
  int id;
  std::string title;
  double budget_seconds;
  std::function<Outcome()> run;
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Acceptance criteria"};
  std::vector<int> only, known;
  std::size_t seeds = 3;
  app.add_option("--only", only, "criteria to run")->delimiter(',');
  app.add_option("--known-failures", known, "criteria whose failure does not fail the run")->delimiter(',');
  app.add_option("--seeds", seeds, "seeds for criteria 5-8")->capture_default_str();
  CLI11_PARSE(app, argc, argv);

  const std::vector<Criterion> criteria{
      {1, "gradient correctness", 60, [] { return from_suite("gradcheck"); }},
      {2, "closed-form optimality", 120, [] { return from_suite("optimality", {100, 1000, 1e-3, 0}); }},
      {3, "kappa schedule", 1, [] { return from_suite("kappa"); }},
      {4, "reduction identities", 300, [] { return reductions(0); }},
      {5, "dpo reward recovery", 120, [&] { return reward_recovery(seeds); }},
      {6, "special-token experiment", 1200, [&] { return special_tokens(seeds); }},
      {7, "alpha monotonicity", 900, [&] { return alpha_monotonicity(seeds); }},
      {8, "overfitting direction", 1200, [&] { return overfitting(seeds); }},
      {9, "cache equivalence", 300, [] { return cache_equivalence(0); }},
      {10, "determinism", 0, [] { return determinism(0); }},
  };

  const std::set<int> selected(only.begin(), only.end()), tolerated(known.begin(), known.end());
  int unexpected = 0;
  for (const auto& c : criteria) {
    if (!selected.empty() && !selected.count(c.id)) continue;
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("error: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    const bool in_time = c.budget_seconds <= 0 || secs < c.budget_seconds;
    const bool passed = o.passed && in_time;
    std::string timing = fmt("%.1fs", secs);
    if (c.budget_seconds > 0) timing += " of " + fmt("%.0fs", c.budget_seconds) + (in_time ? "" : " OVER BUDGET");
    std::printf("criterion %2d %-26s %s%s  [%s] %s\n", c.id, c.title.c_str(), passed ? "PASS" : "FAIL",
                !passed && tolerated.count(c.id) ? " (known failure)" : "", timing.c_str(), o.detail.c_str());
    std::fflush(stdout);
    if (!passed && !tolerated.count(c.id)) ++unexpected;
  }
  return unexpected == 0 ? 0 : 1;
}
