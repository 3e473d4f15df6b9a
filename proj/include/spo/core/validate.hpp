#pragma once

#include <optional>
#include <set>
#include <string>
#include <vector>

#include "spo/core/types.hpp"

namespace spo {

struct Violation {
  std::optional<std::size_t> example;  // empty for dataset-level problems
  std::string reason;
};

struct ValidationReport {
  std::vector<Violation> violations;
  bool ok() const { return violations.empty(); }
  bool has(const std::string& reason) const {
    for (const auto& v : violations) {
      if (v.reason == reason) return true;
    }
    return false;
  }
};

namespace detail {

inline void check_tokens(const TokenSeq& seq, const Vocab& vocab, std::size_t index,
                         const char* what, std::vector<Violation>& out) {
  if (seq.empty()) {
    out.push_back({index, std::string("empty ") + what});
    return;
  }
  for (TokenId t : seq) {
    if (!vocab.contains(t)) {
      out.push_back({index, std::string("token out of range in ") + what});
      return;
    }
  }
}

}  // namespace detail

// Violations are data: a malformed dataset yields a report, never an exception.
inline ValidationReport validate_dataset(const PreferenceDataset& ds) {
  ValidationReport report;
  auto& out = report.violations;

  try {
    ds.vocab.check();
  } catch (const InputError& e) {
    out.push_back({std::nullopt, e.what()});
  }
  if (ds.dimensions.empty()) out.push_back({std::nullopt, "no dimensions"});
  std::set<std::string> dims(ds.dimensions.begin(), ds.dimensions.end());
  if (dims.size() != ds.dimensions.size()) out.push_back({std::nullopt, "duplicate dimension"});

  for (std::size_t i = 0; i < ds.examples.size(); ++i) {
    const auto& ex = ds.examples[i];
    detail::check_tokens(ex.prompt, ds.vocab, i, "prompt", out);
    detail::check_tokens(ex.response_a, ds.vocab, i, "response_a", out);
    detail::check_tokens(ex.response_b, ds.vocab, i, "response_b", out);
    if (ds.max_response_length > 0 && (ex.response_a.size() > ds.max_response_length ||
                                       ex.response_b.size() > ds.max_response_length)) {
      out.push_back({i, "response too long"});
    }
    if (ex.response_a == ex.response_b) out.push_back({i, "duplicate pair"});
    for (const auto& d : ds.dimensions) {
      if (!ex.labels.contains(d)) out.push_back({i, "missing label"});
    }
    for (const auto& [name, _] : ex.labels) {
      if (!dims.contains(name)) out.push_back({i, "unknown label dimension"});
    }
    for (const auto& s : ex.scope) {
      if (!dims.contains(s)) out.push_back({i, "unknown scope dimension"});
    }
  }
  return report;
}

}  // namespace spo
