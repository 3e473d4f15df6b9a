#pragma once

#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <map>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "spo/datagen/bt.hpp"
#include "spo/datagen/conflicting.hpp"
#include "spo/datagen/special_token.hpp"
#include "spo/models/checkpoint.hpp"
#include "spo/pipeline/experiments.hpp"
#include "spo/pipeline/report.hpp"
#include "spo/pipeline/run_dir.hpp"
#include "spo/verify/suite.hpp"

namespace spo::cli {

namespace fs = std::filesystem;

inline constexpr const char* kOutDirEnv = "SPO_OUT_DIR";

// Base directory for outputs whose path was not given explicitly.
inline fs::path output_base() {
  const char* env = std::getenv(kOutDirEnv);
  return env != nullptr && *env != '\0' ? fs::path(env) : fs::path("spo-out");
}

inline std::vector<TokenId> specials_of(const PreferenceDataset& ds) { return ds.vocab.special_tokens; }

// A run directory (its final checkpoint) or a checkpoint file.
inline std::unique_ptr<Policy> load_policy(const fs::path& p) {
  if (fs::is_directory(p)) return pipeline::load_final_policy(p);
  return load_checkpoint(p).policy;
}

inline std::map<std::string, double> parse_weights(const std::vector<std::string>& items) {
  std::map<std::string, double> out;
  for (const auto& item : items) {
    const auto eq = item.find('=');
    require(eq != std::string::npos && eq > 0, "weight '" + item + "' is not of the form dimension=value");
    try {
      out[item.substr(0, eq)] = std::stod(item.substr(eq + 1));
    } catch (const std::exception&) {
      throw InputError("weight '" + item + "' has a non-numeric value");
    }
  }
  return out;
}

struct GenOptions {
  std::string out;
  std::uint64_t seed = 0;
  datagen::SpecialTokenParams special;
  datagen::ConflictingParams conflicting;
  datagen::BtParams bt;
};

struct TrainOptions {
  std::string data;
  std::string out;
  std::string method = "spo";
  std::vector<std::string> dims;
  std::vector<double> alphas{0.1};
  double beta = 0.1;
  std::vector<std::size_t> round_epochs;
  std::string policy = "neural";
  std::string init;
  std::string optimizer = "adam";
  std::uint64_t seed = 0;
  std::vector<std::string> mix_priority;
  std::string single_dim;
  std::uint64_t tie_seed = 0;
  bool dual = false;
  std::vector<double> dual_thresholds;
  double dual_step = 0.05;
  double dual_max = 0.9;
  std::size_t probe_interval = 0;
  bool no_eval = false;
  pipeline::ExperimentSetup setup;
};

struct EvalCmdOptions {
  std::string run;
  std::string checkpoint;
  std::string data;
  std::string out;
  std::size_t samples = 4;
  std::uint64_t seed = 0;
  std::string mode = "stochastic";
  std::size_t max_len = 0;
};

struct CompareOptions {
  std::string a, b, data, mode = "stochastic";
  std::vector<std::string> weights;
  std::uint64_t seed = 0;
  std::size_t max_len = 0;
};

struct VerifyOptions {
  std::string suite = "all";
  std::string out;
  verify::SuiteOptions suite_options;
};

struct SweepOptions {
  std::vector<double> grid{0.0, 0.05, 0.1, 0.3, 0.5};
  std::size_t seeds = 3;
  std::uint64_t seed = 0;
  std::string out;
  pipeline::ConflictingSetup setup;
};

struct ReportOptions {
  std::vector<std::string> runs;
  std::string out;
};

inline SampleMode mode_from(const std::string& s) {
  if (s == "greedy") return SampleMode::Greedy;
  if (s == "stochastic") return SampleMode::Stochastic;
  throw InputError("unknown sampling mode '" + s + "' (expected greedy or stochastic)");
}

inline std::string dataset_stem(const std::string& given) {
  require(!given.empty(), "no dataset given (use --data)");
  require(fs::exists(DatasetFiles::from_stem(given).header), "dataset not found: " + given + ".header.json");
  return given;
}

inline std::optional<datagen::GeneratedDataset> load_with_sidecar(const std::string& stem) {
  if (!fs::exists(datagen::sidecar_path(stem))) return std::nullopt;
  return datagen::load_generated(stem);
}

// ---- commands --------------------------------------------------------------

inline int cmd_gen(const std::string& kind, GenOptions o, std::ostream& out) {
  datagen::GeneratedDataset g;
  if (kind == "special-token") {
    o.special.seed = o.seed;
    g = datagen::gen_special_token_dataset(o.special);
  } else if (kind == "conflicting") {
    o.conflicting.seed = o.seed;
    g = datagen::gen_conflicting_dataset(o.conflicting);
  } else {
    o.bt.seed = o.seed;
    g = datagen::gen_bt_dataset(o.bt);
  }
  const fs::path stem =
      o.out.empty() ? output_base() / "data" / (kind + "-seed" + std::to_string(o.seed)) : fs::path(o.out);
  if (stem.has_parent_path()) fs::create_directories(stem.parent_path());
  datagen::save_generated(g, stem);
  const auto files = DatasetFiles::from_stem(stem);
  out << "wrote " << g.dataset.examples.size() << " examples\n"
      << "  " << files.header.string() << "\n  " << files.examples.string() << "\n  "
      << datagen::sidecar_path(stem).string() << "\n"
      << "fingerprint " << dataset_fingerprint(g.dataset) << "\n";
  return 0;
}

inline int cmd_train(TrainOptions o, std::ostream& out) {
  const std::string stem = dataset_stem(o.data);
  const auto generated = load_with_sidecar(stem);
  const PreferenceDataset ds = generated ? generated->dataset : load_dataset(DatasetFiles::from_stem(stem));

  pipeline::PipelineConfig cfg;
  cfg.method = pipeline::method_from_string(o.method);
  cfg.dimensions = o.dims.empty() ? ds.dimensions : o.dims;
  cfg.beta = o.beta;
  cfg.alphas = o.alphas;
  cfg.round_epochs = o.round_epochs;
  cfg.train = o.setup.train;
  cfg.train.optimizer = optimizer_from_string(o.optimizer);
  cfg.single_dimension = o.single_dim;
  cfg.mix_priority = o.mix_priority.empty() ? cfg.dimensions : o.mix_priority;
  cfg.tie_seed = o.tie_seed;
  cfg.dual = {o.dual, o.dual_thresholds, o.dual_step, o.dual_max};
  cfg.probe_interval = o.probe_interval;
  cfg.seed = o.seed;
  cfg.check();

  std::unique_ptr<Policy> pi0;
  nlohmann::json init_info;
  if (!o.init.empty()) {
    pi0 = load_policy(o.init);
    require(pi0->vocab() == ds.vocab, "initial policy vocab does not match the dataset");
    init_info = {{"source", "checkpoint"}, {"path", o.init}};
  } else if (o.policy == "tabular") {
    require(generated && generated->latent.space, "a tabular policy needs a dataset with an enumerated space");
    pi0 = std::make_unique<TabularPolicy>(ds.vocab, generated->latent.space);
    init_info = {{"source", "uniform-tabular"}};
  } else if (o.policy == "neural") {
    pi0 = pipeline::make_initial_policy(ds, o.setup.net, o.setup.sft, o.seed);
    init_info = {{"source", "sft"}, {"net", o.setup.net.to_json()}, {"sft", o.setup.sft.to_json()}};
  } else {
    throw InputError("unknown policy kind '" + o.policy + "' (expected neural or tabular)");
  }

  const pipeline::EvalOptions eopt{o.setup.eval_samples, derive_seed(o.seed, "eval"), ds.max_response_length,
                                   SampleMode::Stochastic};
  auto curve = std::make_shared<pipeline::RewardCurve>();
  pipeline::RunOptions ro;
  if (generated && !o.no_eval) {
    ro.probe_for_round = [&](std::size_t round, const std::string&) {
      return pipeline::reward_probe(curve, round, generated->eval_prompts, generated->latent, specials_of(ds), eopt);
    };
  }
  const auto run = pipeline::run_pipeline(cfg, ds, *pi0, generated ? &generated->latent : nullptr, ro);

  std::optional<pipeline::EvalReport> report;
  if (generated && !o.no_eval) {
    report = pipeline::evaluate_policy(run.final_policy(), generated->eval_prompts, generated->latent, specials_of(ds),
                                       eopt);
  }
  const fs::path dir = o.out.empty() ? output_base() / "runs" / (o.method + "-seed" + std::to_string(o.seed))
                                     : fs::path(o.out);
  pipeline::write_run(dir, cfg, ds, run, {stem, o.seed, init_info}, report ? curve.get() : nullptr,
                      report ? &*report : nullptr);
  out << "run written to " << dir.string() << "\n";
  for (const auto& r : run.rounds) {
    out << "  round " << r.round << " (" << r.dimension << "): " << r.steps.size() << " steps, final loss "
        << (r.steps.empty() ? 0.0 : r.steps.back().loss) << "\n";
  }
  if (report) out << report->to_json().dump(2) << "\n";
  return 0;
}

inline int cmd_eval(const EvalCmdOptions& o, std::ostream& out) {
  require(o.run.empty() != o.checkpoint.empty(), "eval: give exactly one of --run or --checkpoint");
  std::string stem = o.data;
  if (stem.empty() && !o.run.empty()) stem = pipeline::read_manifest(o.run).at("dataset").at("path").get<std::string>();
  const auto generated = load_with_sidecar(dataset_stem(stem));
  require(generated.has_value(), "eval: dataset has no latent sidecar: " + stem);
  const auto policy = load_policy(o.run.empty() ? o.checkpoint : o.run);
  require(policy->vocab() == generated->dataset.vocab, "eval: policy vocab does not match the dataset");
  const pipeline::EvalOptions eopt{o.samples, o.seed, o.max_len ? o.max_len : generated->dataset.max_response_length,
                                   mode_from(o.mode)};
  const auto r = pipeline::evaluate_policy(*policy, generated->eval_prompts, generated->latent,
                                           specials_of(generated->dataset), eopt);
  const std::string text = r.to_json().dump(2) + "\n";
  if (!o.out.empty()) {
    const fs::path p(o.out);
    if (p.has_parent_path()) fs::create_directories(p.parent_path());
    spo::detail::write_file(p, text);
  }
  out << text;
  return 0;
}

inline int cmd_compare(const CompareOptions& o, std::ostream& out) {
  const auto generated = load_with_sidecar(dataset_stem(o.data));
  require(generated.has_value(), "compare: dataset has no latent sidecar: " + o.data);
  const auto a = load_policy(o.a);
  const auto b = load_policy(o.b);
  auto weights = parse_weights(o.weights);
  if (weights.empty()) {
    for (const auto& d : generated->latent.names()) weights[d] = 1.0;
  }
  const pipeline::EvalOptions eopt{1, o.seed, o.max_len ? o.max_len : generated->dataset.max_response_length,
                                   mode_from(o.mode)};
  const double w = pipeline::compare_policies(*a, *b, generated->eval_prompts, generated->latent, weights, eopt);
  out << nlohmann::json{{"a", o.a}, {"b", o.b}, {"win_rate_a", w}, {"prompts", generated->eval_prompts.size()},
                        {"weights", weights}, {"seed", o.seed}}
             .dump(2)
      << "\n";
  return 0;
}

inline int cmd_verify(const VerifyOptions& o, std::ostream& out) {
  const auto r = verify::run_suite(o.suite, o.suite_options);
  out << r.table();
  if (!o.out.empty()) {
    fs::create_directories(o.out);
    spo::detail::write_file(fs::path(o.out) / "verify.txt", r.table());
    if (!r.optimality.empty()) spo::detail::write_file(fs::path(o.out) / "optimality.csv", r.optimality_csv());
  }
  const bool ok = r.all_passed();
  out << (ok ? "all checks passed\n" : "some checks FAILED\n");
  return ok ? 0 : 2;
}

inline int cmd_sweep(SweepOptions o, std::ostream& out) {
  require(o.seeds >= 1, "sweep-alpha: --seeds must be >= 1");
  require(!o.grid.empty(), "sweep-alpha: empty grid");
  for (double a : o.grid) require(a >= 0.0 && a < 1.0, "sweep-alpha: alpha outside [0, 1)");
  std::string csv = "alpha,seed,helpful,harmless,refusal_rate\n";
  for (std::size_t k = 0; k < o.seeds; ++k) {
    o.setup.data.seed = o.seed + k;
    for (const auto& p : pipeline::run_alpha_sweep(o.setup, o.grid)) {
      csv += format_double(p.alpha) + "," + std::to_string(p.seed) + "," + format_double(p.helpful) + "," +
             format_double(p.harmless) + "," + format_double(p.refusal_rate) + "\n";
    }
  }
  const fs::path path = o.out.empty() ? output_base() / "sweep-alpha.csv" : fs::path(o.out);
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  spo::detail::write_file(path, csv);
  out << csv << "written to " << path.string() << "\n";
  return 0;
}

inline int cmd_report(const ReportOptions& o, std::ostream& out) {
  std::vector<fs::path> runs(o.runs.begin(), o.runs.end());
  const fs::path dir = o.out.empty() ? output_base() / "report" : fs::path(o.out);
  const auto r = pipeline::write_report(runs, dir);
  for (const auto& f : r.files) out << f.string() << "\n";
  return 0;
}

// ---- parser ----------------------------------------------------------------

inline void add_net_flags(CLI::App* c, pipeline::ExperimentSetup& s) {
  c->add_option("--embed", s.net.embed_dim, "neural embedding width")->capture_default_str();
  c->add_option("--hidden", s.net.hidden_dim, "neural hidden width")->capture_default_str();
  c->add_option("--layers", s.net.layers, "neural feed-forward blocks")->capture_default_str();
  c->add_option("--context", s.net.context_length, "neural context length")->capture_default_str();
  c->add_option("--sft-epochs", s.sft.epochs, "SFT epochs for pi_0")->capture_default_str();
  c->add_option("--sft-lr", s.sft.learning_rate, "SFT learning rate")->capture_default_str();
  c->add_option("--sft-batch", s.sft.batch_size, "SFT batch size")->capture_default_str();
  c->add_option("--epochs", s.train.epochs, "epochs per round")->capture_default_str();
  c->add_option("--batch", s.train.batch_size, "minibatch size")->capture_default_str();
  c->add_option("--lr", s.train.learning_rate, "learning rate")->capture_default_str();
  c->add_option("--eval-samples", s.eval_samples, "samples per eval prompt")->capture_default_str();
}

inline int run(int argc, const char* const* argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  CLI::App app{"Sequential multi-dimensional preference optimization toolkit", "spo"};
  app.set_config("--config", "", "TOML/INI file with option values; flags override it");
  app.require_subcommand(1);
  app.fallthrough(false);

  GenOptions gen;
  auto* g = app.add_subcommand("gen-data", "generate a synthetic preference dataset");
  g->require_subcommand(1);
  auto* g_st = g->add_subcommand("special-token", "one special token per dimension");
  auto* g_cf = g->add_subcommand("conflicting", "helpful vs. harmless with refusals");
  auto* g_bt = g->add_subcommand("bt", "Bradley-Terry labels from random reward tables");
  for (auto* c : {g_st, g_cf, g_bt}) {
    c->add_option("--seed", gen.seed, "generator seed")->capture_default_str();
    c->add_option("--out", gen.out, "output stem (writes <stem>.header.json, .jsonl, .latent.json)");
  }
  g_st->add_option("--num", gen.special.num_examples, "base samples (one example per dimension each)")->capture_default_str();
  g_st->add_option("--dims", gen.special.num_dims, "dimensions / special tokens")->capture_default_str();
  g_st->add_option("--noise", gen.special.noise, "probability of each other token per response")->capture_default_str();
  g_st->add_option("--base-length", gen.special.base_length, "response body length")->capture_default_str();
  g_st->add_option("--prompt-length", gen.special.prompt_length, "prompt length")->capture_default_str();
  g_st->add_option("--content-tokens", gen.special.content_tokens, "ordinary vocabulary size")->capture_default_str();
  g_st->add_option("--eval-prompts", gen.special.eval_prompts, "held-out prompts")->capture_default_str();
  g_cf->add_option("--num", gen.conflicting.num_examples, "pairs")->capture_default_str();
  g_cf->add_option("--refusal-fraction", gen.conflicting.refusal_fraction, "fraction of refusal pairs")->capture_default_str();
  g_cf->add_option("--body-length", gen.conflicting.body_length, "answer length")->capture_default_str();
  g_cf->add_option("--prompt-length", gen.conflicting.prompt_length, "prompt length")->capture_default_str();
  g_cf->add_option("--eval-prompts", gen.conflicting.eval_prompts, "held-out prompts")->capture_default_str();
  g_bt->add_option("--prompts", gen.bt.prompts, "prompts in the space")->capture_default_str();
  g_bt->add_option("--responses", gen.bt.responses, "responses per prompt")->capture_default_str();
  g_bt->add_option("--dims", gen.bt.num_dims, "dimensions")->capture_default_str();
  g_bt->add_option("--reward-scale", gen.bt.reward_scale, "std. dev. of latent rewards")->capture_default_str();
  g_bt->add_option("--num", gen.bt.num_examples, "distinct pairs")->capture_default_str();
  g_bt->add_option("--draws", gen.bt.draws_per_pair, "label draws per pair")->capture_default_str();

  TrainOptions tr;
  auto* t = app.add_subcommand("train", "run SPO or a baseline and persist the run");
  t->add_option("--data", tr.data, "dataset stem")->required();
  t->add_option("--out", tr.out, "run directory");
  t->add_option("--method", tr.method, "spo, s-dpo, dpo-mix, dpo-single or merge-dpo")->capture_default_str();
  t->add_option("--dims", tr.dims, "training order (default: dataset order)")->delimiter(',');
  t->add_option("--alpha", tr.alphas, "alpha per previous dimension, or one value for all")->delimiter(',');
  t->add_option("--beta", tr.beta, "KL weight")->capture_default_str();
  t->add_option("--round-epochs", tr.round_epochs, "epochs per round, overriding --epochs")->delimiter(',');
  t->add_option("--policy", tr.policy, "neural or tabular")->capture_default_str();
  t->add_option("--init", tr.init, "start from this checkpoint or run instead of SFT");
  t->add_option("--optimizer", tr.optimizer, "adam or sgd")->capture_default_str();
  t->add_option("--seed", tr.seed, "run seed")->capture_default_str();
  t->add_option("--mix-priority", tr.mix_priority, "dpo-mix: dimensions, highest priority first")->delimiter(',');
  t->add_option("--single-dim", tr.single_dim, "dpo-single: the dimension to train");
  t->add_option("--tie-seed", tr.tie_seed, "dpo-mix tie-break seed")->capture_default_str();
  t->add_flag("--dual", tr.dual, "adjust alpha by dual ascent");
  t->add_option("--dual-thresholds", tr.dual_thresholds, "margin thresholds per dimension")->delimiter(',');
  t->add_option("--dual-step", tr.dual_step, "dual ascent step")->capture_default_str();
  t->add_option("--dual-max", tr.dual_max, "upper bound on alpha")->capture_default_str();
  t->add_option("--probe-interval", tr.probe_interval, "steps between reward probes (0: epoch ends)")->capture_default_str();
  t->add_flag("--no-eval", tr.no_eval, "skip evaluation and reward curves");
  add_net_flags(t, tr.setup);

  EvalCmdOptions ev;
  auto* e = app.add_subcommand("eval", "evaluate a policy with the latent judge");
  e->add_option("--run", ev.run, "run directory (final checkpoint)");
  e->add_option("--checkpoint", ev.checkpoint, "checkpoint file");
  e->add_option("--data", ev.data, "dataset stem (default: the run's dataset)");
  e->add_option("--out", ev.out, "also write the report here");
  e->add_option("--samples", ev.samples, "samples per prompt")->capture_default_str();
  e->add_option("--seed", ev.seed, "sampling seed")->capture_default_str();
  e->add_option("--mode", ev.mode, "stochastic or greedy")->capture_default_str();
  e->add_option("--max-len", ev.max_len, "generation limit (default: dataset maximum)");

  CompareOptions cp;
  auto* c = app.add_subcommand("compare", "win rate of policy a over policy b");
  c->add_option("--a", cp.a, "checkpoint or run directory")->required();
  c->add_option("--b", cp.b, "checkpoint or run directory")->required();
  c->add_option("--data", cp.data, "dataset stem with latent sidecar")->required();
  c->add_option("--weights", cp.weights, "judge weights dim=w (default: 1 each)")->delimiter(',');
  c->add_option("--seed", cp.seed, "sampling seed")->capture_default_str();
  c->add_option("--mode", cp.mode, "stochastic or greedy")->capture_default_str();
  c->add_option("--max-len", cp.max_len, "generation limit (default: dataset maximum)");

  VerifyOptions vf;
  auto* v = app.add_subcommand("verify", "run the oracle suite and print a pass/fail table");
  v->add_option("--suite", vf.suite, "all, gradcheck, optimality, kappa or reductions")->capture_default_str();
  v->add_option("--out", vf.out, "directory for verify.txt and optimality.csv");
  v->add_option("--instances", vf.suite_options.optimality_instances, "closed-form instances")->capture_default_str();
  v->add_option("--random-policies", vf.suite_options.random_policies, "challengers per instance")->capture_default_str();
  v->add_option("--seed", vf.suite_options.seed, "suite seed")->capture_default_str();

  SweepOptions sw;
  auto* s = app.add_subcommand("sweep-alpha", "SPO on conflicting data over an alpha grid");
  s->add_option("--grid", sw.grid, "alpha values")->delimiter(',');
  s->add_option("--seeds", sw.seeds, "number of seeds")->capture_default_str();
  s->add_option("--seed", sw.seed, "first seed")->capture_default_str();
  s->add_option("--out", sw.out, "CSV path");
  s->add_option("--num", sw.setup.data.num_examples, "pairs")->capture_default_str();
  s->add_option("--refusal-fraction", sw.setup.data.refusal_fraction, "fraction of refusal pairs")->capture_default_str();
  s->add_option("--beta", sw.setup.setup.beta, "KL weight")->capture_default_str();
  add_net_flags(s, sw.setup.setup);

  ReportOptions rp;
  auto* r = app.add_subcommand("report", "tables and charts from persisted runs");
  r->add_option("runs", rp.runs, "run directories")->required();
  r->add_option("--out", rp.out, "output directory");

  std::vector<std::string> args(argv, argv + argc);
  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    out << (app.get_subcommands().empty() ? app.help() : app.get_subcommands().back()->help());
    return 0;
  } catch (const CLI::ParseError& ex) {
    err << "error: " << ex.what() << "\n\n" << app.help();
    return 1;
  }

  try {
    if (g->parsed()) {
      for (auto* k : {g_st, g_cf, g_bt}) {
        if (k->parsed()) return cmd_gen(k->get_name(), gen, out);
      }
    }
    if (t->parsed()) return cmd_train(tr, out);
    if (e->parsed()) return cmd_eval(ev, out);
    if (c->parsed()) return cmd_compare(cp, out);
    if (v->parsed()) return cmd_verify(vf, out);
    if (s->parsed()) return cmd_sweep(sw, out);
    if (r->parsed()) return cmd_report(rp, out);
  } catch (const InputError& ex) {
    err << "error: " << ex.what() << "\n";
    return 1;
  } catch (const std::exception& ex) {
    err << "internal error: " << ex.what() << "\n";
    return 2;
  }
  err << app.help();
  return 1;
}

}  // namespace spo::cli
