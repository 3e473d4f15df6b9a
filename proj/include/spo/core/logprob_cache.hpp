#pragma once

#include <cmath>
#include <filesystem>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "spo/core/dataset_io.hpp"
#include "spo/core/error.hpp"
#include "spo/core/policy.hpp"

namespace spo {

struct PairLogProbs {
  double a = 0.0;
  double b = 0.0;
  double get(Side s) const { return s == Side::A ? a : b; }
  bool operator==(const PairLogProbs&) const = default;
};

// Log-probabilities of both responses of every example under one policy.
struct CacheSlice {
  std::size_t round = 0;
  std::string fingerprint;
  std::vector<PairLogProbs> values;
};

// Frozen log-probabilities under pi_0 .. pi_{n-1}, keyed by (round, example).
class LogProbCache {
 public:
  LogProbCache() = default;
  LogProbCache(std::string fingerprint, std::size_t num_examples)
      : fingerprint_(std::move(fingerprint)), num_examples_(num_examples) {}

  const std::string& fingerprint() const { return fingerprint_; }
  std::size_t num_examples() const { return num_examples_; }
  std::size_t rounds() const { return rounds_.size(); }

  void append(CacheSlice slice) {
    require(slice.round == rounds_.size(),
            "cache: expected round " + std::to_string(rounds_.size()) + ", got " + std::to_string(slice.round));
    require(slice.fingerprint == fingerprint_, "cache: slice built from a different dataset");
    require(slice.values.size() == num_examples_, "cache: slice is incomplete");
    rounds_.push_back(std::move(slice.values));
  }

  double log_prob(std::size_t round, std::size_t example, Side side) const {
    require(round < rounds_.size(), "cache: round " + std::to_string(round) + " not cached");
    require(example < num_examples_, "cache: example index out of range");
    return rounds_[round][example].get(side);
  }

  const std::vector<PairLogProbs>& round(std::size_t r) const {
    require(r < rounds_.size(), "cache: round " + std::to_string(r) + " not cached");
    return rounds_[r];
  }

  CacheSlice slice(std::size_t r) const { return {r, fingerprint_, round(r)}; }

  void check_matches(const PreferenceDataset& ds) const {
    require(dataset_fingerprint(ds) == fingerprint_, "cache fingerprint does not match dataset");
  }

 private:
  std::string fingerprint_;
  std::size_t num_examples_ = 0;
  std::vector<std::vector<PairLogProbs>> rounds_;
};

inline CacheSlice build_logprob_cache(const Policy& policy, const PreferenceDataset& ds, std::size_t round) {
  require(policy.vocab() == ds.vocab, "build_logprob_cache: policy vocab does not match dataset");
  CacheSlice slice{round, dataset_fingerprint(ds), {}};
  slice.values.reserve(ds.examples.size());
  for (std::size_t i = 0; i < ds.examples.size(); ++i) {
    const auto& ex = ds.examples[i];
    PairLogProbs lp{policy.log_prob(ex.prompt, ex.response_a), policy.log_prob(ex.prompt, ex.response_b)};
    if (!std::isfinite(lp.a) || !std::isfinite(lp.b)) {
      throw NumericError("build_logprob_cache: non-finite log-probability at example " + std::to_string(i));
    }
    slice.values.push_back(lp);
  }
  return slice;
}

inline std::string serialize_cache_slice(const CacheSlice& s) {
  using nlohmann::json;
  std::string out =
      json{{"fingerprint", s.fingerprint}, {"round", s.round}, {"num_examples", s.values.size()}}.dump() + "\n";
  for (std::size_t i = 0; i < s.values.size(); ++i) {
    out += json{{"round", s.round}, {"example", i}, {"logp_a", s.values[i].a}, {"logp_b", s.values[i].b}}.dump();
    out += '\n';
  }
  return out;
}

inline CacheSlice parse_cache_slice(const std::string& text) {
  using nlohmann::json;
  std::istringstream in(text);
  std::string line;
  require(static_cast<bool>(std::getline(in, line)), "cache file: missing header");
  CacheSlice s;
  try {
    const json h = json::parse(line);
    s.fingerprint = h.at("fingerprint").get<std::string>();
    s.round = h.at("round").get<std::size_t>();
    const auto n = h.at("num_examples").get<std::size_t>();
    s.values.resize(n);
    std::vector<bool> seen(n, false);
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      const json r = json::parse(line);
      const auto e = r.at("example").get<std::size_t>();
      require(r.at("round").get<std::size_t>() == s.round, "cache file: mixed rounds");
      require(e < n, "cache file: example index out of range");
      s.values[e] = {r.at("logp_a").get<double>(), r.at("logp_b").get<double>()};
      seen[e] = true;
    }
    for (bool b : seen) require(b, "cache file: incomplete slice");
  } catch (const json::exception& e) {
    throw InputError(std::string("cache file: ") + e.what());
  }
  return s;
}

inline void save_cache_slice(const CacheSlice& s, const std::filesystem::path& p) {
  detail::write_file(p, serialize_cache_slice(s));
}

inline CacheSlice load_cache_slice(const std::filesystem::path& p) {
  return parse_cache_slice(detail::read_file(p));
}

}  // namespace spo
