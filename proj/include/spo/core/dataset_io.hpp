#pragma once

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <nlohmann/json.hpp>

#include "spo/core/error.hpp"
#include "spo/core/sha256.hpp"
#include "spo/core/types.hpp"

namespace spo {

using json = nlohmann::json;

// A dataset on disk is a JSON header plus one JSON object per line.
struct DatasetFiles {
  std::filesystem::path header;
  std::filesystem::path examples;

  static DatasetFiles from_stem(const std::filesystem::path& stem) {
    return {std::filesystem::path(stem.string() + ".header.json"),
            std::filesystem::path(stem.string() + ".jsonl")};
  }
};

inline json header_to_json(const PreferenceDataset& ds) {
  return json{{"dimensions", ds.dimensions},
              {"vocab_size", ds.vocab.size},
              {"special_tokens", ds.vocab.special_tokens},
              {"eos", ds.vocab.eos},
              {"max_response_length", ds.max_response_length},
              {"provenance", {{"generator", ds.provenance.generator}, {"seed", ds.provenance.seed}}}};
}

inline json example_to_json(const PreferenceExample& ex) {
  json labels = json::object();
  for (const auto& [dim, label] : ex.labels) labels[dim] = label == Label::AFirst ? "a" : "b";
  json j{{"prompt", ex.prompt},
         {"response_a", ex.response_a},
         {"response_b", ex.response_b},
         {"labels", labels}};
  if (!ex.scope.empty()) j["scope"] = ex.scope;
  return j;
}

// Canonical text: keys sorted, compact separators, '\n' after every line.
inline std::string serialize_header(const PreferenceDataset& ds) { return header_to_json(ds).dump() + "\n"; }

inline std::string serialize_examples(const PreferenceDataset& ds) {
  std::string out;
  for (const auto& ex : ds.examples) {
    out += example_to_json(ex).dump();
    out += '\n';
  }
  return out;
}

inline std::string dataset_fingerprint(const PreferenceDataset& ds) {
  return sha256_hex(serialize_header(ds) + serialize_examples(ds));
}

namespace detail {

inline TokenSeq tokens_from_json(const json& j, const char* field) {
  require(j.contains(field) && j.at(field).is_array(), std::string("missing array field '") + field + "'");
  TokenSeq out;
  for (const auto& t : j.at(field)) {
    require(t.is_number_unsigned(), std::string("non-integer token in '") + field + "'");
    out.push_back(t.get<TokenId>());
  }
  return out;
}

inline std::string read_file(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  require(static_cast<bool>(in), "cannot open " + p.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void write_file(const std::filesystem::path& p, const std::string& text) {
  if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path());
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  require(static_cast<bool>(out), "cannot write " + p.string());
  out << text;
  require(static_cast<bool>(out), "write failed for " + p.string());
}

}  // namespace detail

inline PreferenceExample example_from_json(const json& j) {
  require(j.is_object(), "example is not a JSON object");
  PreferenceExample ex;
  ex.prompt = detail::tokens_from_json(j, "prompt");
  ex.response_a = detail::tokens_from_json(j, "response_a");
  ex.response_b = detail::tokens_from_json(j, "response_b");
  require(j.contains("labels") && j.at("labels").is_object(), "missing object field 'labels'");
  for (const auto& [dim, v] : j.at("labels").items()) {
    require(v.is_string(), "label must be \"a\" or \"b\"");
    const auto s = v.get<std::string>();
    require(s == "a" || s == "b", "label must be \"a\" or \"b\"");
    ex.labels[dim] = s == "a" ? Label::AFirst : Label::BFirst;
  }
  if (j.contains("scope")) ex.scope = j.at("scope").get<std::vector<std::string>>();
  return ex;
}

inline PreferenceDataset parse_dataset(const std::string& header_text, const std::string& examples_text) {
  PreferenceDataset ds;
  try {
    const json h = json::parse(header_text);
    ds.dimensions = h.at("dimensions").get<std::vector<std::string>>();
    ds.vocab.size = h.at("vocab_size").get<std::size_t>();
    ds.vocab.special_tokens = h.at("special_tokens").get<std::vector<TokenId>>();
    ds.vocab.eos = h.at("eos").get<TokenId>();
    ds.max_response_length = h.value("max_response_length", std::size_t{0});
    if (h.contains("provenance")) {
      ds.provenance.generator = h.at("provenance").value("generator", std::string{});
      ds.provenance.seed = h.at("provenance").value("seed", std::uint64_t{0});
    }
    std::istringstream lines(examples_text);
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(lines, line)) {
      ++lineno;
      if (line.empty()) continue;
      try {
        ds.examples.push_back(example_from_json(json::parse(line)));
      } catch (const std::exception& e) {
        throw InputError("dataset line " + std::to_string(lineno) + ": " + e.what());
      }
    }
  } catch (const json::exception& e) {
    throw InputError(std::string("dataset header: ") + e.what());
  }
  return ds;
}

inline void save_dataset(const PreferenceDataset& ds, const DatasetFiles& files) {
  detail::write_file(files.header, serialize_header(ds));
  detail::write_file(files.examples, serialize_examples(ds));
}

inline PreferenceDataset load_dataset(const DatasetFiles& files) {
  return parse_dataset(detail::read_file(files.header), detail::read_file(files.examples));
}

}  // namespace spo
