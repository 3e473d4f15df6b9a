#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "spo/core/dataset_io.hpp"
#include "spo/core/logprob_cache.hpp"
#include "spo/models/checkpoint.hpp"
#include "spo/pipeline/config.hpp"
#include "spo/pipeline/evaluate.hpp"
#include "spo/pipeline/sequential.hpp"
#include "spo/pipeline/track.hpp"

namespace spo::pipeline {

namespace fs = std::filesystem;

// Layout of a persisted run:
//   manifest.json
//   checkpoints/round_k.bin   k = 0 is pi_0
//   cache/round_k.jsonl       log-probs of pi_k on the training pairs
//   metrics/round_k.csv       per-step training metrics, k >= 1
//   eval/report.json          optional
//   curves.csv                optional reward curves
struct RunPaths {
  fs::path root;

  fs::path manifest() const { return root / "manifest.json"; }
  fs::path checkpoint(std::size_t k) const { return root / "checkpoints" / ("round_" + std::to_string(k) + ".bin"); }
  fs::path cache(std::size_t k) const { return root / "cache" / ("round_" + std::to_string(k) + ".jsonl"); }
  fs::path metrics(std::size_t k) const { return root / "metrics" / ("round_" + std::to_string(k) + ".csv"); }
  fs::path report() const { return root / "eval" / "report.json"; }
  fs::path curves() const { return root / "curves.csv"; }
};

inline std::string relative(const RunPaths& p, const fs::path& full) { return fs::relative(full, p.root).generic_string(); }

struct RunInputs {
  std::string dataset_path;  // stem the data was loaded from, recorded as given
  std::uint64_t seed = 0;
  nlohmann::json initial_policy;  // how pi_0 was obtained
};

// Writes checkpoints, cache slices, metrics and the manifest. Everything is a
// function of the inputs, so repeated runs produce identical bytes.
inline nlohmann::json write_run(const fs::path& root, const PipelineConfig& config, const PreferenceDataset& ds,
                                const RunResult& run, const RunInputs& inputs, const RewardCurve* curve = nullptr,
                                const EvalReport* report = nullptr) {
  const RunPaths p{root};
  fs::create_directories(root / "checkpoints");
  fs::create_directories(root / "cache");
  fs::create_directories(root / "metrics");

  nlohmann::json m;
  m["format"] = "spo-run-1";
  m["config"] = config.to_json();
  m["config_hash"] = config.hash();
  m["dataset"] = {{"path", inputs.dataset_path},
                  {"fingerprint", dataset_fingerprint(ds)},
                  {"examples", ds.examples.size()},
                  {"dimensions", ds.dimensions}};
  m["seeds"] = {{"run", inputs.seed}, {"rounds", nlohmann::json::array()}};
  for (std::size_t n = 1; n <= run.rounds.size(); ++n) m["seeds"]["rounds"].push_back(config.train_for_round(n).seed);
  m["initial_policy"] = inputs.initial_policy;

  m["checkpoints"] = nlohmann::json::array();
  for (std::size_t k = 0; k < run.checkpoints.size(); ++k) {
    save_checkpoint(*run.checkpoints[k], k, p.checkpoint(k));
    m["checkpoints"].push_back(relative(p, p.checkpoint(k)));
  }
  m["cache"] = {{"fingerprint", run.cache.fingerprint()}, {"slices", nlohmann::json::array()}};
  for (std::size_t k = 0; k < run.cache.rounds(); ++k) {
    save_cache_slice(run.cache.slice(k), p.cache(k));
    m["cache"]["slices"].push_back(relative(p, p.cache(k)));
  }
  m["rounds"] = nlohmann::json::array();
  for (const auto& r : run.rounds) {
    spo::detail::write_file(p.metrics(r.round), metrics_csv(r.steps));
    m["rounds"].push_back({{"round", r.round},
                           {"dimension", r.dimension},
                           {"schedule", r.schedule.to_json()},
                           {"final_schedule", r.final_schedule.to_json()},
                           {"epoch_mean_loss", r.epoch_mean_loss},
                           {"history_forward_passes", r.history_forward_passes},
                           {"metrics", relative(p, p.metrics(r.round))}});
  }
  if (curve != nullptr) {
    spo::detail::write_file(p.curves(), curve_csv(*curve));
    m["curves"] = relative(p, p.curves());
  }
  if (report != nullptr) {
    fs::create_directories(root / "eval");
    spo::detail::write_file(p.report(), report->to_json().dump(2) + "\n");
    m["eval"] = relative(p, p.report());
  }
  spo::detail::write_file(p.manifest(), m.dump(2) + "\n");
  return m;
}

inline nlohmann::json read_manifest(const fs::path& root) {
  const RunPaths p{root};
  try {
    auto m = nlohmann::json::parse(spo::detail::read_file(p.manifest()));
    if (m.value("format", std::string()) != "spo-run-1") throw InputError("not a run manifest: " + p.manifest().string());
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw InputError("malformed manifest " + p.manifest().string() + ": " + e.what());
  }
}

// The last checkpoint listed in a run manifest.
inline std::unique_ptr<Policy> load_final_policy(const fs::path& root) {
  const auto m = read_manifest(root);
  const auto& cks = m.at("checkpoints");
  require(!cks.empty(), "run has no checkpoints: " + root.string());
  return load_checkpoint(root / cks.back().get<std::string>()).policy;
}

}  // namespace spo::pipeline
