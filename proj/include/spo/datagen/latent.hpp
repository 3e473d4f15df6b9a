#pragma once

#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "spo/core/error.hpp"
#include "spo/core/types.hpp"
#include "spo/tabular/categorical.hpp"

namespace spo::datagen {

inline bool starts_with(const TokenSeq& seq, const TokenSeq& prefix) {
  return !prefix.empty() && seq.size() >= prefix.size() && std::equal(prefix.begin(), prefix.end(), seq.begin());
}

inline bool contains_token(const TokenSeq& seq, TokenId t) { return std::find(seq.begin(), seq.end(), t) != seq.end(); }

// Score computed from the tokens of a response:
//   sum over presence tokens t of magnitude_t * [t in y]
//   + sum over counted tokens t of weight_t * count(t, y),
// replaced by `refusal_score` when y starts with the refusal pattern.
struct RuleScorer {
  std::map<TokenId, double> presence;
  std::map<TokenId, double> per_occurrence;
  TokenSeq refusal_pattern;
  double refusal_score = 0.0;

  double score(const TokenSeq& response) const {
    if (starts_with(response, refusal_pattern)) return refusal_score;
    double s = 0.0;
    for (const auto& [t, m] : presence) {
      if (contains_token(response, t)) s += m;
    }
    for (TokenId t : response) {
      auto it = per_occurrence.find(t);
      if (it != per_occurrence.end()) s += it->second;
    }
    return s;
  }

  nlohmann::json to_json() const {
    auto pairs = [](const std::map<TokenId, double>& m) {
      nlohmann::json a = nlohmann::json::array();
      for (const auto& [t, v] : m) a.push_back({t, v});
      return a;
    };
    return {{"type", "rule"},
            {"presence", pairs(presence)},
            {"per_occurrence", pairs(per_occurrence)},
            {"refusal_pattern", refusal_pattern},
            {"refusal_score", refusal_score}};
  }
  static RuleScorer from_json(const nlohmann::json& j) {
    auto pairs = [](const nlohmann::json& a) {
      std::map<TokenId, double> m;
      for (const auto& p : a) m[p.at(0).get<TokenId>()] = p.at(1).get<double>();
      return m;
    };
    RuleScorer r;
    r.presence = pairs(j.at("presence"));
    r.per_occurrence = pairs(j.at("per_occurrence"));
    r.refusal_pattern = j.at("refusal_pattern").get<TokenSeq>();
    r.refusal_score = j.at("refusal_score").get<double>();
    return r;
  }
};

struct DimensionScorer {
  std::string name;
  std::optional<RuleScorer> rule;
  std::optional<std::size_t> table;  // index into LatentRewardSpec::tables
};

// Ground-truth per-dimension rewards a generator labeled its data with.
struct LatentRewardSpec {
  std::vector<DimensionScorer> dimensions;
  std::vector<tabular::RewardTable> tables;
  std::shared_ptr<const tabular::EnumeratedSpace> space;  // shared by all tables
  TokenSeq refusal_pattern;                                // empty if the generator has none

  std::vector<std::string> names() const {
    std::vector<std::string> out;
    for (const auto& d : dimensions) out.push_back(d.name);
    return out;
  }

  const DimensionScorer& dimension(const std::string& name) const {
    for (const auto& d : dimensions) {
      if (d.name == name) return d;
    }
    throw InputError("latent spec has no dimension '" + name + "'");
  }

  double score(const std::string& name, const TokenSeq& prompt, const TokenSeq& response) const {
    const auto& d = dimension(name);
    if (d.rule) return d.rule->score(response);
    require(d.table && space, "latent spec: dimension '" + name + "' has no scorer");
    return tables.at(*d.table)(space->prompt_index(prompt), space->response_index(response));
  }

  bool is_refusal(const TokenSeq& response) const { return starts_with(response, refusal_pattern); }

  nlohmann::json to_json() const {
    nlohmann::json dims = nlohmann::json::array();
    for (const auto& d : dimensions) {
      nlohmann::json j{{"name", d.name}};
      if (d.rule) j["scorer"] = d.rule->to_json();
      if (d.table) j["scorer"] = {{"type", "table"}, {"table", *d.table}};
      dims.push_back(std::move(j));
    }
    nlohmann::json out{{"dimensions", dims}, {"refusal_pattern", refusal_pattern}};
    if (space) {
      out["space"] = space->to_json();
      nlohmann::json t = nlohmann::json::array();
      for (const auto& r : tables) {
        t.push_back({{"prompts", r.num_prompts()}, {"responses", r.num_responses()}, {"values", r.table().values()}});
      }
      out["tables"] = std::move(t);
    }
    return out;
  }

  static LatentRewardSpec from_json(const nlohmann::json& j) {
    try {
      LatentRewardSpec s;
      s.refusal_pattern = j.value("refusal_pattern", TokenSeq{});
      if (j.contains("space")) {
        s.space = std::make_shared<const tabular::EnumeratedSpace>(tabular::EnumeratedSpace::from_json(j.at("space")));
        for (const auto& t : j.at("tables")) {
          s.tables.emplace_back(tabular::Table(t.at("prompts").get<std::size_t>(), t.at("responses").get<std::size_t>(),
                                               t.at("values").get<std::vector<double>>()));
        }
      }
      for (const auto& d : j.at("dimensions")) {
        DimensionScorer ds{d.at("name").get<std::string>(), std::nullopt, std::nullopt};
        const auto& sc = d.at("scorer");
        if (sc.at("type") == "rule") {
          ds.rule = RuleScorer::from_json(sc);
        } else {
          ds.table = sc.at("table").get<std::size_t>();
          require(*ds.table < s.tables.size(), "latent spec: table index out of range");
        }
        s.dimensions.push_back(std::move(ds));
      }
      return s;
    } catch (const nlohmann::json::exception& e) {
      throw InputError(std::string("latent spec: ") + e.what());
    }
  }
};

}  // namespace spo::datagen
