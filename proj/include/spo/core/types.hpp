#pragma once

#include <algorithm>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "spo/core/error.hpp"

namespace spo {

using TokenId = std::uint32_t;
using TokenSeq = std::vector<TokenId>;

struct Vocab {
  std::size_t size = 0;
  std::vector<TokenId> special_tokens;  // preference markers, in canonical order
  TokenId eos = 0;

  bool contains(TokenId t) const { return t < size; }
  bool is_special(TokenId t) const {
    return std::find(special_tokens.begin(), special_tokens.end(), t) != special_tokens.end();
  }

  // Throws InputError on the first broken invariant.
  void check() const {
    require(size > 0, "vocab: size must be positive");
    require(eos < size, "vocab: eos id out of range");
    for (std::size_t i = 0; i < special_tokens.size(); ++i) {
      require(special_tokens[i] < size, "vocab: special token out of range");
      require(special_tokens[i] != eos, "vocab: special token collides with eos");
      for (std::size_t j = 0; j < i; ++j) {
        require(special_tokens[i] != special_tokens[j], "vocab: duplicate special token");
      }
    }
  }

  bool operator==(const Vocab&) const = default;
};

enum class Side : std::uint8_t { A, B };
enum class Label : std::uint8_t { AFirst, BFirst };

constexpr Side preferred_side(Label l) { return l == Label::AFirst ? Side::A : Side::B; }
constexpr Side other(Side s) { return s == Side::A ? Side::B : Side::A; }
constexpr Label flip(Label l) { return l == Label::AFirst ? Label::BFirst : Label::AFirst; }

struct PreferenceExample {
  TokenSeq prompt;
  TokenSeq response_a;
  TokenSeq response_b;
  std::map<std::string, Label> labels;
  // Dimensions this pair was constructed to teach. Empty means every
  // dimension; training on dimension d skips examples scoped elsewhere.
  std::vector<std::string> scope;

  const TokenSeq& response(Side s) const { return s == Side::A ? response_a : response_b; }

  bool in_scope(const std::string& dimension) const {
    return scope.empty() || std::find(scope.begin(), scope.end(), dimension) != scope.end();
  }

  Label label(const std::string& dimension) const {
    auto it = labels.find(dimension);
    require(it != labels.end(), "example has no label for dimension '" + dimension + "'");
    return it->second;
  }

  bool operator==(const PreferenceExample&) const = default;
};

struct Provenance {
  std::string generator;
  std::uint64_t seed = 0;
  bool operator==(const Provenance&) const = default;
};

struct PreferenceDataset {
  std::vector<std::string> dimensions;
  Vocab vocab;
  std::size_t max_response_length = 0;
  std::vector<PreferenceExample> examples;
  Provenance provenance;

  bool has_dimension(const std::string& d) const {
    return std::find(dimensions.begin(), dimensions.end(), d) != dimensions.end();
  }

  std::vector<std::size_t> indices_in_scope(const std::string& dimension) const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < examples.size(); ++i) {
      if (examples[i].in_scope(dimension)) out.push_back(i);
    }
    return out;
  }

  bool operator==(const PreferenceDataset&) const = default;
};

}  // namespace spo
