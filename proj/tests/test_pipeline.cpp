#include <gtest/gtest.h>

#include <filesystem>

#include "spo/datagen/bt.hpp"
#include "spo/datagen/special_token.hpp"
#include "spo/pipeline/experiments.hpp"
#include "spo/pipeline/report.hpp"
#include "spo/pipeline/run_dir.hpp"
#include "spo/verify/suite.hpp"
#include "test_helpers.hpp"

using namespace spo;
using namespace spo::pipeline;
namespace fs = std::filesystem;

namespace {

fs::path fresh_dir(const std::string& name) {
  const auto p = fs::temp_directory_path() / ("spo_test_pipeline_" + name);
  fs::remove_all(p);
  return p;
}

std::vector<fs::path> files_under(const fs::path& root) {
  std::vector<fs::path> out;
  for (const auto& e : fs::recursive_directory_iterator(root)) {
    if (e.is_regular_file()) out.push_back(fs::relative(e.path(), root));
  }
  std::sort(out.begin(), out.end());
  return out;
}

// Always answers with the same response, whatever the prompt.
class FixedPolicy final : public Policy {
 public:
  FixedPolicy(Vocab v, TokenSeq answer) : vocab_(std::move(v)), answer_(std::move(answer)) {}
  PolicyKind kind() const override { return PolicyKind::Tabular; }
  const Vocab& vocab() const override { return vocab_; }
  std::span<const double> parameters() const override { return {}; }
  std::span<double> mutable_parameters() override { return {}; }
  double log_prob(const TokenSeq&, const TokenSeq& y) const override { return y == answer_ ? 0.0 : -INFINITY; }
  double log_prob_and_grad(const TokenSeq& x, const TokenSeq& y, double, std::span<double>) const override {
    return log_prob(x, y);
  }
  TokenSeq sample(const TokenSeq&, std::size_t max_len, SampleMode, Rng&) const override {
    return TokenSeq(answer_.begin(), answer_.begin() + static_cast<std::ptrdiff_t>(std::min(max_len, answer_.size())));
  }
  std::unique_ptr<Policy> clone() const override { return std::make_unique<FixedPolicy>(*this); }
  nlohmann::json architecture() const override { return {{"kind", "fixed"}}; }

 private:
  Vocab vocab_;
  TokenSeq answer_;
};

datagen::GeneratedDataset small_special(std::uint64_t seed) {
  datagen::SpecialTokenParams p;
  p.num_examples = 40;
  p.eval_prompts = 20;
  p.seed = seed;
  return datagen::gen_special_token_dataset(p);
}

PipelineConfig small_config(const PreferenceDataset& ds) {
  PipelineConfig c;
  c.dimensions = ds.dimensions;
  c.train.epochs = 1;
  c.train.batch_size = 16;
  c.train.learning_rate = 1e-2;
  c.seed = 11;
  return c;
}

std::unique_ptr<Policy> small_pi0(const PreferenceDataset& ds, std::uint64_t seed) {
  NeuralPolicyConfig net;
  net.embed_dim = 8;
  net.hidden_dim = 12;
  TrainConfig sft;
  sft.epochs = 1;
  sft.batch_size = 16;
  sft.learning_rate = 1e-2;
  return make_initial_policy(ds, net, sft, seed);
}

}  // namespace

TEST(Sequential, AlphaZeroMatchesSDpoOnNeuralPolicy) {
  const auto g = small_special(1);
  const auto pi0 = small_pi0(g.dataset, 1);
  auto cfg = small_config(g.dataset);
  cfg.alphas = {0.0};
  const auto spo0 = run_sequential(cfg, g.dataset, *pi0);
  cfg.method = Method::SDPO;
  cfg.alphas = {0.1};
  const auto sdpo = run_sequential(cfg, g.dataset, *pi0);
  ASSERT_EQ(spo0.checkpoints.size(), sdpo.checkpoints.size());
  for (std::size_t k = 0; k < spo0.checkpoints.size(); ++k) {
    EXPECT_LE(verify::max_abs_difference(spo0.checkpoints[k]->parameters(), sdpo.checkpoints[k]->parameters()), 1e-12)
        << "checkpoint " << k;
  }
}

TEST(Sequential, FourDimensionRunCachesEveryEarlierRound) {
  const auto g = small_special(2);
  const auto pi0 = small_pi0(g.dataset, 2);
  const auto run = run_sequential(small_config(g.dataset), g.dataset, *pi0);
  EXPECT_EQ(run.rounds.size(), 4u);
  EXPECT_EQ(run.checkpoints.size(), 5u);
  ASSERT_GE(run.cache.rounds(), 4u);
  for (std::size_t k = 0; k < 4; ++k) {
    const auto direct = build_logprob_cache(*run.checkpoints[k], g.dataset, k);
    const auto& cached = run.cache.round(k);
    for (std::size_t i = 0; i < cached.size(); ++i) {
      EXPECT_DOUBLE_EQ(cached[i].get(Side::A), direct.values[i].get(Side::A));
      EXPECT_DOUBLE_EQ(cached[i].get(Side::B), direct.values[i].get(Side::B));
    }
  }
  for (const auto& r : run.rounds) EXPECT_EQ(r.history_forward_passes, 0u);
}

TEST(Sequential, RecomputedHistoryMatchesCacheOnNeuralPolicy) {
  const auto g = small_special(3);
  const auto pi0 = small_pi0(g.dataset, 3);
  auto cfg = small_config(g.dataset);
  cfg.alphas = {0.3};
  const auto cached = run_sequential(cfg, g.dataset, *pi0);
  RunOptions ro;
  ro.recompute_history = true;
  const auto recomputed = run_sequential(cfg, g.dataset, *pi0, ro);
  EXPECT_LE(verify::max_abs_difference(cached.final_policy().parameters(), recomputed.final_policy().parameters()),
            1e-12);
  EXPECT_GT(recomputed.rounds.back().history_forward_passes, 0u);
}

TEST(Sequential, SameInputsGiveIdenticalRunFiles) {
  const auto g = small_special(4);
  const auto cfg = small_config(g.dataset);
  const fs::path a = fresh_dir("det_a"), b = fresh_dir("det_b");
  for (const auto& dir : {a, b}) {
    const auto pi0 = small_pi0(g.dataset, 4);
    const auto run = run_sequential(cfg, g.dataset, *pi0);
    write_run(dir, cfg, g.dataset, run, {"data/st", 4, {{"source", "sft"}}});
  }
  const auto fa = files_under(a), fb = files_under(b);
  ASSERT_EQ(fa, fb);
  ASSERT_FALSE(fa.empty());
  for (const auto& f : fa) EXPECT_EQ(spo::detail::read_file(a / f), spo::detail::read_file(b / f)) << f;
}

TEST(Baselines, MergeDpoAppendsMergedPolicy) {
  const auto g = small_special(5);
  const auto pi0 = small_pi0(g.dataset, 5);
  auto cfg = small_config(g.dataset);
  cfg.method = Method::MergeDPO;
  const auto run = run_pipeline(cfg, g.dataset, *pi0);
  ASSERT_EQ(run.checkpoints.size(), 6u);
  const auto p = run.final_policy().parameters();
  for (std::size_t j = 0; j < p.size(); j += 97) {
    double mean = 0.0;
    for (std::size_t k = 1; k <= 4; ++k) mean += run.checkpoints[k]->parameters()[j] / 4.0;
    EXPECT_NEAR(p[j], mean, 1e-12);
  }
}

TEST(Baselines, DpoSingleTrainsOneRound) {
  const auto g = small_special(6);
  const auto pi0 = small_pi0(g.dataset, 6);
  auto cfg = small_config(g.dataset);
  cfg.method = Method::DPOSingle;
  cfg.single_dimension = g.dataset.dimensions[2];
  const auto run = run_pipeline(cfg, g.dataset, *pi0);
  ASSERT_EQ(run.rounds.size(), 1u);
  EXPECT_EQ(run.rounds[0].dimension, g.dataset.dimensions[2]);
}

namespace {

PreferenceDataset two_dim_pairs() {
  PreferenceDataset ds;
  ds.dimensions = {"helpful", "harmless"};
  ds.vocab = fixtures::plain_vocab(4);
  ds.max_response_length = 2;
  ds.examples = {
      {{1}, {2}, {3}, {{"helpful", Label::AFirst}, {"harmless", Label::AFirst}}, {}},
      {{1}, {2}, {3}, {{"helpful", Label::BFirst}, {"harmless", Label::BFirst}}, {}},
      {{1}, {2}, {3}, {{"helpful", Label::AFirst}, {"harmless", Label::BFirst}}, {}},
      {{1}, {2}, {3}, {{"helpful", Label::BFirst}, {"harmless", Label::AFirst}}, {}},
  };
  return ds;
}

}  // namespace

TEST(Mix, AgreeingLabelsAreKept) {
  const auto mixed = mix_dataset(two_dim_pairs(), {"harmless", "helpful"}, 0);
  EXPECT_EQ(mixed.dimensions, std::vector<std::string>{"mix"});
  EXPECT_EQ(mixed.examples[0].label("mix"), Label::AFirst);
  EXPECT_EQ(mixed.examples[1].label("mix"), Label::BFirst);
}

TEST(Mix, ConflictsFollowThePriorityDimension) {
  const auto ds = two_dim_pairs();
  const auto harmless_first = mix_dataset(ds, {"harmless", "helpful"}, 0);
  EXPECT_EQ(harmless_first.examples[2].label("mix"), Label::BFirst);
  EXPECT_EQ(harmless_first.examples[3].label("mix"), Label::AFirst);
  const auto helpful_first = mix_dataset(ds, {"helpful", "harmless"}, 0);
  EXPECT_EQ(helpful_first.examples[2].label("mix"), Label::AFirst);
  EXPECT_EQ(helpful_first.examples[3].label("mix"), Label::BFirst);
}

TEST(Mix, TieBreaksDependOnlyOnTieSeed) {
  datagen::SpecialTokenParams p;
  p.num_examples = 200;
  const auto g = datagen::gen_special_token_dataset(p);
  const auto& top = g.dataset.dimensions[0];
  std::size_t ties = 0;
  for (const auto& ex : g.dataset.examples) {
    ties += g.latent.score(top, ex.prompt, ex.response_a) == g.latent.score(top, ex.prompt, ex.response_b);
  }
  ASSERT_GT(ties, 10u);
  const auto a = mix_dataset(g.dataset, g.dataset.dimensions, 7, &g.latent);
  const auto b = mix_dataset(g.dataset, g.dataset.dimensions, 7, &g.latent);
  const auto c = mix_dataset(g.dataset, g.dataset.dimensions, 8, &g.latent);
  EXPECT_EQ(a, b);
  std::size_t differ = 0;
  for (std::size_t i = 0; i < a.examples.size(); ++i) differ += a.examples[i].labels != c.examples[i].labels;
  EXPECT_GT(differ, 0u);
  EXPECT_LE(differ, ties);
}

TEST(Evaluate, ResponseWithEverySpecialTokenIsParetoOptimal) {
  const auto g = small_special(7);
  const auto& specials = g.dataset.vocab.special_tokens;
  TokenSeq answer(specials.begin(), specials.end());
  answer.push_back(g.dataset.vocab.eos);
  const FixedPolicy all(g.dataset.vocab, answer);
  const auto r = evaluate_policy(all, g.eval_prompts, g.latent, specials, {2, 0, 16, SampleMode::Stochastic});
  for (double p : r.presence) EXPECT_DOUBLE_EQ(p, 1.0);
  EXPECT_DOUBLE_EQ(r.pareto, 1.0);
  EXPECT_EQ(r.samples, 2 * g.eval_prompts.size());

  const FixedPolicy some(g.dataset.vocab, {specials[0], specials[2], g.dataset.vocab.eos});
  const auto s = evaluate_policy(some, g.eval_prompts, g.latent, specials, {1, 0, 16, SampleMode::Stochastic});
  EXPECT_DOUBLE_EQ(s.presence[0], 1.0);
  EXPECT_DOUBLE_EQ(s.presence[1], 0.0);
  EXPECT_DOUBLE_EQ(s.pareto, 0.0);
}

TEST(Evaluate, ParetoNeverExceedsAnyPresence) {
  const auto g = small_special(8);
  const auto pi0 = small_pi0(g.dataset, 8);
  const auto r = evaluate_policy(*pi0, g.eval_prompts, g.latent, g.dataset.vocab.special_tokens,
                                 {4, 3, g.dataset.max_response_length, SampleMode::Stochastic});
  for (double p : r.presence) EXPECT_LE(r.pareto, p);
}

TEST(Compare, PolicyAgainstItselfIsHalfInGreedyMode) {
  const auto g = small_special(9);
  const auto pi0 = small_pi0(g.dataset, 9);
  std::map<std::string, double> w;
  for (const auto& d : g.latent.names()) w[d] = 1.0;
  EXPECT_DOUBLE_EQ(compare_policies(*pi0, *pi0, g.eval_prompts, g.latent, w, {1, 0, 8, SampleMode::Greedy}), 0.5);
}

TEST(Compare, DominatingPolicyAlwaysWins) {
  const auto g = small_special(10);
  const auto& v = g.dataset.vocab;
  TokenSeq all(v.special_tokens.begin(), v.special_tokens.end());
  all.push_back(v.eos);
  const FixedPolicy best(v, all), none(v, {v.eos});
  std::map<std::string, double> w;
  for (const auto& d : g.latent.names()) w[d] = 1.0;
  EXPECT_DOUBLE_EQ(compare_policies(best, none, g.eval_prompts, g.latent, w, {1, 0, 8, SampleMode::Stochastic}), 1.0);
  EXPECT_DOUBLE_EQ(compare_policies(none, best, g.eval_prompts, g.latent, w, {1, 0, 8, SampleMode::Stochastic}), 0.0);
}

TEST(Compare, GreedyWinRateMatchesBruteForce) {
  datagen::BtParams p;
  p.num_dims = 2;
  p.num_examples = 50;
  p.seed = 12;
  const auto g = datagen::gen_bt_dataset(p);
  const auto& space = *g.latent.space;
  Rng rng(12, "compare-policies");
  const auto a = fixtures::random_tabular(g.dataset.vocab, g.latent.space, rng, 2.0);
  const auto b = fixtures::random_tabular(g.dataset.vocab, g.latent.space, rng, 2.0);
  const std::map<std::string, double> w{{g.latent.names()[0], 0.7}, {g.latent.names()[1], 0.3}};

  // Greedy picks the largest logit in the prompt's row.
  auto judge = [&](std::size_t x, std::size_t y) {
    double s = 0.0;
    for (std::size_t d = 0; d < 2; ++d) s += w.at(g.latent.names()[d]) * g.latent.tables[d](x, y);
    return s;
  };
  auto argmax = [&](const TabularPolicy& pol, std::size_t x) {
    const auto row = pol.parameters().subspan(x * space.num_responses(), space.num_responses());
    return static_cast<std::size_t>(std::max_element(row.begin(), row.end()) - row.begin());
  };
  std::vector<TokenSeq> prompts;
  double wins = 0.0;
  for (std::size_t x = 0; x < space.num_prompts(); ++x) {
    prompts.push_back(space.prompts()[x]);
    const double sa = judge(x, argmax(a, x)), sb = judge(x, argmax(b, x));
    wins += sa > sb ? 1.0 : sa == sb ? 0.5 : 0.0;
  }
  const double expected = wins / static_cast<double>(space.num_prompts());
  EXPECT_DOUBLE_EQ(compare_policies(a, b, prompts, g.latent, w, {1, 0, 4, SampleMode::Greedy}), expected);
}

TEST(Curves, ConstantPolicyGivesFlatCurve) {
  const auto g = small_special(13);
  const auto pi0 = small_pi0(g.dataset, 13);
  auto curve = std::make_shared<RewardCurve>();
  const auto probe = reward_probe(curve, 1, g.eval_prompts, g.latent, g.dataset.vocab.special_tokens,
                                  {2, 5, g.dataset.max_response_length, SampleMode::Stochastic});
  for (std::size_t s = 0; s < 4; ++s) probe(*pi0, {s, 0, s == 3});
  ASSERT_EQ(curve->points.size(), 4u);
  for (const auto& pt : curve->points) {
    EXPECT_EQ(pt.rewards, curve->points[0].rewards);
    EXPECT_EQ(pt.refusal_rate, curve->points[0].refusal_rate);
    EXPECT_EQ(pt.presence, curve->points[0].presence);
  }
}

TEST(RunDir, RoundTripAndReport) {
  const auto g = small_special(14);
  const auto pi0 = small_pi0(g.dataset, 14);
  auto cfg = small_config(g.dataset);
  const EvalOptions eopt{1, 0, g.dataset.max_response_length, SampleMode::Stochastic};
  auto curve = std::make_shared<RewardCurve>();
  RunOptions ro;
  ro.probe_for_round = [&](std::size_t round, const std::string&) {
    return reward_probe(curve, round, g.eval_prompts, g.latent, g.dataset.vocab.special_tokens, eopt);
  };
  const auto run = run_sequential(cfg, g.dataset, *pi0, ro);
  const auto report = evaluate_policy(run.final_policy(), g.eval_prompts, g.latent, g.dataset.vocab.special_tokens, eopt);
  const fs::path dir = fresh_dir("rundir");
  write_run(dir, cfg, g.dataset, run, {"data/st", 14, {{"source", "sft"}}}, curve.get(), &report);

  const auto m = read_manifest(dir);
  EXPECT_EQ(m.at("config_hash").get<std::string>(), cfg.hash());
  EXPECT_EQ(m.at("dataset").at("fingerprint").get<std::string>(), dataset_fingerprint(g.dataset));
  EXPECT_EQ(m.at("checkpoints").size(), 5u);
  EXPECT_EQ(PipelineConfig::from_json(m.at("config")).hash(), cfg.hash());
  const auto final_policy = load_final_policy(dir);
  EXPECT_EQ(verify::max_abs_difference(final_policy->parameters(), run.final_policy().parameters()), 0.0);
  for (std::size_t k = 0; k < run.cache.rounds(); ++k) {
    const auto slice = load_cache_slice(dir / m.at("cache").at("slices")[k].get<std::string>());
    EXPECT_EQ(slice.values, run.cache.round(k));
  }

  const fs::path out = fresh_dir("report");
  const auto r = write_report({dir}, out);
  EXPECT_EQ(r.files.size(), 5u);
  const auto rounds = parse_csv(spo::detail::read_file(out / "rounds.csv"));
  EXPECT_EQ(rounds.rows.size(), 4u);
  const auto eval = parse_csv(spo::detail::read_file(out / "eval.csv"));
  ASSERT_EQ(eval.rows.size(), 1u);
  EXPECT_DOUBLE_EQ(eval.numbers("pareto")[0], report.pareto);
  EXPECT_NE(spo::detail::read_file(out / "loss.svg").find("<polyline"), std::string::npos);
}

TEST(RunDir, MalformedManifestIsAnInputError) {
  const fs::path dir = fresh_dir("bad_manifest");
  fs::create_directories(dir);
  spo::detail::write_file(dir / "manifest.json", "{ not json");
  EXPECT_THROW(read_manifest(dir), InputError);
  spo::detail::write_file(dir / "manifest.json", "{\"format\": \"other\"}");
  EXPECT_THROW(read_manifest(dir), InputError);
}

TEST(VerifySuite, KappaAndReductionsPass) {
  for (const char* s : {"kappa", "reductions"}) {
    const auto r = verify::run_suite(s);
    EXPECT_TRUE(r.all_passed()) << r.table();
  }
  EXPECT_THROW(verify::run_suite("nope"), InputError);
}

TEST(VerifySuite, ReferenceDpoMatchesPipelineOnNeuralPolicy) {
  const auto g = small_special(15);
  const auto pi0 = small_pi0(g.dataset, 15);
  auto cfg = small_config(g.dataset);
  cfg.method = Method::DPOSingle;
  cfg.single_dimension = g.dataset.dimensions[0];
  const auto run = run_pipeline(cfg, g.dataset, *pi0);
  const auto ref = verify::reference_dpo(*pi0, *pi0, g.dataset, cfg.single_dimension, cfg.beta, cfg.train_for_round(1));
  EXPECT_LE(verify::max_abs_difference(verify::losses_of(run.rounds[0].steps), ref.losses), 1e-12);
  EXPECT_LE(verify::max_abs_difference(run.final_policy().parameters(), ref.policy->parameters()), 1e-12);
}
