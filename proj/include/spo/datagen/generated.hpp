#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "spo/core/dataset_io.hpp"
#include "spo/core/validate.hpp"
#include "spo/datagen/latent.hpp"

namespace spo::datagen {

// A generated dataset together with its ground truth and held-out prompts.
struct GeneratedDataset {
  PreferenceDataset dataset;
  LatentRewardSpec latent;
  nlohmann::json parameters;
  std::vector<TokenSeq> eval_prompts;
};

inline std::filesystem::path sidecar_path(const std::filesystem::path& stem) {
  return stem.string() + ".latent.json";
}

inline std::string serialize_sidecar(const GeneratedDataset& g) {
  const nlohmann::json j{{"generator", g.dataset.provenance.generator},
                         {"seed", g.dataset.provenance.seed},
                         {"parameters", g.parameters},
                         {"latent", g.latent.to_json()},
                         {"eval_prompts", g.eval_prompts}};
  return j.dump(2) + "\n";
}

// Writes <stem>.header.json, <stem>.jsonl and <stem>.latent.json.
inline void save_generated(const GeneratedDataset& g, const std::filesystem::path& stem) {
  save_dataset(g.dataset, DatasetFiles::from_stem(stem));
  detail::write_file(sidecar_path(stem), serialize_sidecar(g));
}

inline GeneratedDataset load_generated(const std::filesystem::path& stem) {
  GeneratedDataset g;
  g.dataset = load_dataset(DatasetFiles::from_stem(stem));
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(detail::read_file(sidecar_path(stem)));
    g.parameters = j.at("parameters");
    g.eval_prompts = j.at("eval_prompts").get<std::vector<TokenSeq>>();
  } catch (const nlohmann::json::exception& e) {
    throw InputError("sidecar " + sidecar_path(stem).string() + ": " + e.what());
  }
  g.latent = LatentRewardSpec::from_json(j.at("latent"));
  return g;
}

// Generators only hand out datasets that validate.
inline void ensure_valid(const PreferenceDataset& ds) {
  const auto report = validate_dataset(ds);
  if (!report.ok()) {
    throw NumericError("generator produced an invalid dataset: " + report.violations.front().reason);
  }
}

}  // namespace spo::datagen
