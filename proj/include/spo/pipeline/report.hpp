#pragma once

#include <filesystem>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "spo/core/dataset_io.hpp"
#include "spo/pipeline/charts.hpp"
#include "spo/pipeline/run_dir.hpp"

namespace spo::pipeline {

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  std::size_t column(const std::string& name) const {
    for (std::size_t i = 0; i < header.size(); ++i) {
      if (header[i] == name) return i;
    }
    throw InputError("csv: no column '" + name + "'");
  }
  std::vector<double> numbers(const std::string& name) const {
    const std::size_t c = column(name);
    std::vector<double> out;
    for (const auto& r : rows) out.push_back(c < r.size() ? std::stod(r[c]) : NAN);
    return out;
  }
};

// Comma-separated, no quoting; the files read here are all written by this
// library.
inline CsvTable parse_csv(const std::string& text) {
  CsvTable t;
  std::istringstream in(text);
  std::string line;
  auto split = [](const std::string& l) {
    std::vector<std::string> cells;
    std::string cell;
    std::istringstream ls(l);
    while (std::getline(ls, cell, ',')) cells.push_back(cell);
    return cells;
  };
  if (std::getline(in, line)) t.header = split(line);
  while (std::getline(in, line)) {
    if (!line.empty()) t.rows.push_back(split(line));
  }
  return t;
}

struct ReportOutputs {
  std::vector<std::filesystem::path> files;
};

// Tables and charts for a set of persisted runs, read only from their
// manifests, metrics, curves and eval reports.
inline ReportOutputs write_report(const std::vector<std::filesystem::path>& runs, const std::filesystem::path& out) {
  require(!runs.empty(), "report: no runs given");
  std::filesystem::create_directories(out);
  ReportOutputs result;
  auto emit = [&](const std::string& name, const std::string& text) {
    spo::detail::write_file(out / name, text);
    result.files.push_back(out / name);
  };

  std::string rounds_csv = "run,method,config_hash,round,dimension,steps,first_loss,last_loss,final_alphas\n";
  std::string eval_csv = "run,method,samples,refusal_rate,pareto,rewards,presence\n";
  std::vector<Series> loss_series;

  for (const auto& run : runs) {
    const auto m = read_manifest(run);
    const std::string name = run.filename().empty() ? run.parent_path().filename().string() : run.filename().string();
    const std::string method = m.at("config").at("method").get<std::string>();
    double offset = 0.0;
    Series loss{name, {}, {}};
    for (const auto& r : m.at("rounds")) {
      const auto t = parse_csv(spo::detail::read_file(run / r.at("metrics").get<std::string>()));
      const auto losses = t.numbers("loss");
      std::string alphas;
      for (const auto& a : r.at("final_schedule").at("alphas")) alphas += (alphas.empty() ? "" : ";") + format_double(a.get<double>());
      rounds_csv += name + "," + method + "," + m.at("config_hash").get<std::string>() + "," +
                    std::to_string(r.at("round").get<std::size_t>()) + "," + r.at("dimension").get<std::string>() + "," +
                    std::to_string(losses.size()) + "," + (losses.empty() ? "" : format_double(losses.front())) + "," +
                    (losses.empty() ? "" : format_double(losses.back())) + "," + alphas + "\n";
      for (std::size_t i = 0; i < losses.size(); ++i) {
        loss.x.push_back(offset + static_cast<double>(i + 1));
        loss.y.push_back(losses[i]);
      }
      offset += static_cast<double>(losses.size());
    }
    loss_series.push_back(std::move(loss));

    if (m.contains("eval")) {
      const auto e = nlohmann::json::parse(spo::detail::read_file(run / m.at("eval").get<std::string>()));
      std::string rewards, presence;
      for (const auto& [k, v] : e.at("rewards").items()) rewards += (rewards.empty() ? "" : ";") + k + "=" + format_double(v.get<double>());
      for (const auto& [k, v] : e.at("presence").items()) presence += (presence.empty() ? "" : ";") + k + "=" + format_double(v.get<double>());
      eval_csv += name + "," + method + "," + std::to_string(e.at("samples").get<std::size_t>()) + "," +
                  format_double(e.at("refusal_rate").get<double>()) + "," + format_double(e.at("pareto").get<double>()) +
                  "," + rewards + "," + presence + "\n";
    }

    if (m.contains("curves")) {
      const auto c = parse_csv(spo::detail::read_file(run / m.at("curves").get<std::string>()));
      std::vector<Series> reward_series;
      const std::size_t first_dim = c.column("epoch_end") + 1;
      const std::size_t refusal = c.column("refusal_rate");
      std::vector<double> xs;
      for (std::size_t i = 0; i < c.rows.size(); ++i) xs.push_back(static_cast<double>(i));
      for (std::size_t d = first_dim; d < refusal; ++d) reward_series.push_back({c.header[d], xs, c.numbers(c.header[d])});
      emit(name + "_rewards.svg", svg_line_chart({name + ": latent reward during training", "probe", "mean reward"},
                                                 reward_series));
      emit(name + "_refusal.svg", svg_line_chart({name + ": refusal rate during training", "probe", "rate"},
                                                 {{"refusal", xs, c.numbers("refusal_rate")}}));
    }
  }
  emit("rounds.csv", rounds_csv);
  emit("eval.csv", eval_csv);
  emit("loss.svg", svg_line_chart({"Training loss", "step (all rounds)", "loss"}, loss_series));
  return result;
}

}  // namespace spo::pipeline
