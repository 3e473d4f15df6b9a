#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <limits>

#include "spo/core/dataset_io.hpp"
#include "spo/core/math.hpp"
#include "spo/core/logprob_cache.hpp"
#include "spo/core/validate.hpp"
#include "test_helpers.hpp"

using namespace spo;

namespace {

PreferenceDataset two_dim_dataset() {
  PreferenceDataset ds;
  ds.dimensions = {"helpful", "harmless"};
  ds.vocab = Vocab{10, {8, 9}, 0};
  ds.max_response_length = 6;
  ds.provenance = {"hand", 1};
  ds.examples.push_back({{1, 2}, {3, 4, 0}, {5, 0}, {{"helpful", Label::AFirst}, {"harmless", Label::BFirst}}, {}});
  ds.examples.push_back({{2}, {6, 8, 0}, {6, 0}, {{"helpful", Label::BFirst}, {"harmless", Label::BFirst}}, {"helpful"}});
  return ds;
}

}  // namespace

TEST(Validate, WellFormedDatasetIsOk) {
  const auto report = validate_dataset(two_dim_dataset());
  EXPECT_TRUE(report.ok());
}

TEST(Validate, MissingLabelIsReportedWithIndex) {
  auto ds = two_dim_dataset();
  ds.examples[1].labels.erase("harmless");
  const auto report = validate_dataset(ds);
  ASSERT_FALSE(report.ok());
  ASSERT_TRUE(report.has("missing label"));
  EXPECT_EQ(report.violations.front().example, std::optional<std::size_t>(1));
}

TEST(Validate, DuplicatePair) {
  auto ds = two_dim_dataset();
  ds.examples[0].response_b = ds.examples[0].response_a;
  EXPECT_TRUE(validate_dataset(ds).has("duplicate pair"));
}

TEST(Validate, OtherInvariants) {
  auto ds = two_dim_dataset();
  ds.examples[0].prompt = {};
  ds.examples[1].response_a = {42};
  ds.dimensions.push_back("helpful");
  ds.vocab.special_tokens = {0};
  const auto r = validate_dataset(ds);
  EXPECT_TRUE(r.has("empty prompt"));
  EXPECT_TRUE(r.has("token out of range in response_a"));
  EXPECT_TRUE(r.has("duplicate dimension"));
  EXPECT_TRUE(r.has("vocab: special token collides with eos"));

  auto ds2 = two_dim_dataset();
  ds2.examples[0].response_a = {1, 1, 1, 1, 1, 1, 1, 0};
  EXPECT_TRUE(validate_dataset(ds2).has("response too long"));
}

TEST(DatasetIo, SerializeParseSerializeIsByteIdentical) {
  // Property over random datasets, including scoped examples.
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    auto space = fixtures::small_space(3, 5);
    auto ds = fixtures::random_tabular_dataset(*space, fixtures::plain_vocab(10), {"x", "y", "z"}, 15, seed);
    Rng rng(seed);
    for (auto& ex : ds.examples) {
      if (rng.bernoulli(0.3)) ex.scope = {"y"};
    }
    const std::string header = serialize_header(ds);
    const std::string body = serialize_examples(ds);
    const auto parsed = parse_dataset(header, body);
    EXPECT_EQ(parsed, ds);
    EXPECT_EQ(serialize_header(parsed), header);
    EXPECT_EQ(serialize_examples(parsed), body);
  }
}

TEST(DatasetIo, FileRoundTripAndFingerprint) {
  const auto dir = std::filesystem::temp_directory_path() / "spo_test_core_io";
  std::filesystem::remove_all(dir);
  const auto ds = two_dim_dataset();
  const auto files = DatasetFiles::from_stem(dir / "data");
  save_dataset(ds, files);
  const auto loaded = load_dataset(files);
  EXPECT_EQ(loaded, ds);
  EXPECT_EQ(dataset_fingerprint(loaded), dataset_fingerprint(ds));
  EXPECT_EQ(dataset_fingerprint(ds).size(), 64u);

  auto changed = ds;
  changed.examples[0].labels["helpful"] = Label::BFirst;
  EXPECT_NE(dataset_fingerprint(changed), dataset_fingerprint(ds));
  std::filesystem::remove_all(dir);
}

TEST(DatasetIo, MalformedInputThrowsInputError) {
  EXPECT_THROW(parse_dataset("{not json", ""), InputError);
  const std::string header = serialize_header(two_dim_dataset());
  EXPECT_THROW(parse_dataset(header, "{\"prompt\":[1]}\n"), InputError);
  EXPECT_THROW(parse_dataset(header, "{\"prompt\":[1],\"response_a\":[2],\"response_b\":[3],\"labels\":{\"helpful\":\"c\"}}\n"),
               InputError);
}

class CacheTest : public ::testing::Test {
 protected:
  Vocab vocab = fixtures::plain_vocab(12);
  std::shared_ptr<const tabular::EnumeratedSpace> space = fixtures::small_space(2, 4);
  PreferenceDataset ds = fixtures::random_tabular_dataset(*space, vocab, {"d"}, 30, 3);
};

TEST_F(CacheTest, UniformPolicyGivesMinusLogFour) {
  TabularPolicy uniform(vocab, space);
  const auto slice = build_logprob_cache(uniform, ds, 0);
  ASSERT_EQ(slice.values.size(), ds.examples.size());
  for (const auto& v : slice.values) {
    EXPECT_DOUBLE_EQ(v.a, -std::log(4.0));
    EXPECT_DOUBLE_EQ(v.b, -std::log(4.0));
  }
}

TEST_F(CacheTest, RebuildIsBitIdenticalAndMatchesRecomputation) {
  Rng rng(5);
  const auto policy = fixtures::random_tabular(vocab, space, rng);
  const auto s1 = build_logprob_cache(policy, ds, 0);
  const auto s2 = build_logprob_cache(policy, ds, 0);
  EXPECT_EQ(serialize_cache_slice(s1), serialize_cache_slice(s2));
  for (std::size_t i = 0; i < ds.examples.size(); ++i) {
    EXPECT_EQ(s1.values[i], s2.values[i]);
    EXPECT_LE(std::abs(s1.values[i].a - policy.log_prob(ds.examples[i].prompt, ds.examples[i].response_a)), 1e-12);
  }
}

TEST_F(CacheTest, FileRoundTripIsExact) {
  Rng rng(6);
  const auto policy = fixtures::random_tabular(vocab, space, rng, 3.0);
  const auto slice = build_logprob_cache(policy, ds, 2);
  const auto parsed = parse_cache_slice(serialize_cache_slice(slice));
  EXPECT_EQ(parsed.round, 2u);
  EXPECT_EQ(parsed.fingerprint, slice.fingerprint);
  EXPECT_EQ(parsed.values, slice.values);
}

TEST_F(CacheTest, CompletenessAndFingerprintChecks) {
  TabularPolicy uniform(vocab, space);
  LogProbCache cache(dataset_fingerprint(ds), ds.examples.size());
  EXPECT_THROW(cache.append(build_logprob_cache(uniform, ds, 1)), InputError);  // round 0 first
  cache.append(build_logprob_cache(uniform, ds, 0));
  EXPECT_EQ(cache.rounds(), 1u);
  EXPECT_THROW(cache.log_prob(1, 0, Side::A), InputError);

  auto other = ds;
  other.examples.pop_back();
  EXPECT_THROW(cache.check_matches(other), InputError);
  EXPECT_NO_THROW(cache.check_matches(ds));
  EXPECT_THROW(cache.append(build_logprob_cache(uniform, other, 1)), InputError);
}

TEST_F(CacheTest, Errors) {
  TabularPolicy wrong_vocab(fixtures::plain_vocab(13), space);
  EXPECT_THROW(build_logprob_cache(wrong_vocab, ds, 0), InputError);

  TabularPolicy degenerate(vocab, space);
  for (double& x : degenerate.mutable_parameters()) x = -std::numeric_limits<double>::infinity();
  EXPECT_THROW(build_logprob_cache(degenerate, ds, 0), NumericError);
}

TEST(Rng, DerivedStreamsAreStableAndDistinct) {
  EXPECT_EQ(derive_seed(7, "a", 1), derive_seed(7, "a", 1));
  EXPECT_NE(derive_seed(7, "a", 1), derive_seed(7, "a", 2));
  EXPECT_NE(derive_seed(7, "a", 1), derive_seed(7, "b", 1));
  Rng r(1);
  for (int i = 0; i < 1000; ++i) {
    const double u = r.uniform();
    ASSERT_GE(u, 0.0);
    ASSERT_LT(u, 1.0);
    ASSERT_LT(r.uniform_int(7), 7u);
  }
}

TEST(Math, SpearmanMatchesHandComputedValues) {
  const std::vector<double> x{1, 2, 3, 4, 5};
  EXPECT_DOUBLE_EQ(math::spearman(x, std::vector<double>{2, 4, 6, 8, 10}), 1.0);
  EXPECT_DOUBLE_EQ(math::spearman(x, std::vector<double>{5, 4, 3, 2, 1}), -1.0);
  // Ranks (1,2,3,4,5) vs (2,1,4,3,5): d^2 sums to 4, rho = 1 - 6*4/(5*24) = 0.8.
  EXPECT_NEAR(math::spearman(x, std::vector<double>{0.2, 0.1, 0.4, 0.3, 0.5}), 0.8, 1e-15);
  // Ties take mean ranks: (1, 2.5, 2.5, 4).
  EXPECT_EQ(math::ranks(std::vector<double>{0.0, 7.0, 7.0, 9.0}), (std::vector<double>{1, 2.5, 2.5, 4}));
  EXPECT_TRUE(std::isnan(math::spearman(x, std::vector<double>{1, 1, 1, 1, 1})));
}
