#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <sstream>
#include <sys/wait.h>

#include "spo_cli.hpp"

namespace fs = std::filesystem;

namespace {

struct Result {
  int code = 0;
  std::string out;
  std::string err;
};

Result run(std::vector<std::string> args) {
  args.insert(args.begin(), "spo");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = spo::cli::run(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

fs::path fresh_dir(const std::string& name) {
  const auto p = fs::temp_directory_path() / ("spo_test_cli_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::string slurp(const fs::path& p) { return spo::detail::read_file(p); }

// Exit status of the installed binary run through the shell.
int shell(const std::string& cmd) {
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

}  // namespace

TEST(Cli, GenDataIsByteIdenticalAcrossRuns) {
  const auto d = fresh_dir("gen");
  for (const char* kind : {"special-token", "conflicting", "bt"}) {
    const std::string a = (d / (std::string(kind) + "_a")).string(), b = (d / (std::string(kind) + "_b")).string();
    ASSERT_EQ(run({"gen-data", kind, "--num", "30", "--seed", "9", "--out", a}).code, 0);
    ASSERT_EQ(run({"gen-data", kind, "--num", "30", "--seed", "9", "--out", b}).code, 0);
    for (const char* ext : {".header.json", ".jsonl", ".latent.json"}) {
      EXPECT_EQ(slurp(a + ext), slurp(b + ext)) << kind << ext;
    }
  }
}

TEST(Cli, VerifyPassesAndWritesTable) {
  const auto d = fresh_dir("verify");
  const auto r = run({"verify", "--instances", "5", "--random-policies", "50", "--out", d.string()});
  EXPECT_EQ(r.code, 0) << r.out;
  EXPECT_NE(r.out.find("PASS"), std::string::npos);
  EXPECT_EQ(r.out.find("FAIL"), std::string::npos);
  EXPECT_TRUE(fs::exists(d / "verify.txt"));
  const auto csv = spo::pipeline::parse_csv(slurp(d / "optimality.csv"));
  EXPECT_EQ(csv.rows.size(), 5u);
}

TEST(Cli, SweepAlphaWritesOneRowPerAlphaAndSeed) {
  const auto d = fresh_dir("sweep");
  const auto csv_path = (d / "sweep.csv").string();
  const auto r = run({"sweep-alpha", "--grid", "0,0.3", "--seeds", "2", "--num", "60", "--sft-epochs", "1",
                      "--eval-samples", "1", "--out", csv_path});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto csv = spo::pipeline::parse_csv(slurp(csv_path));
  EXPECT_EQ(csv.header, (std::vector<std::string>{"alpha", "seed", "helpful", "harmless", "refusal_rate"}));
  ASSERT_EQ(csv.rows.size(), 4u);
  EXPECT_EQ(csv.numbers("seed"), (std::vector<double>{0, 0, 1, 1}));
  EXPECT_EQ(csv.numbers("alpha"), (std::vector<double>{0, 0.3, 0, 0.3}));
}

TEST(Cli, TrainEvalCompareReport) {
  const auto d = fresh_dir("train");
  const auto stem = (d / "st").string();
  ASSERT_EQ(run({"gen-data", "special-token", "--num", "30", "--seed", "2", "--out", stem}).code, 0);
  const auto run_dir = (d / "run").string();
  const auto t = run({"train", "--data", stem, "--out", run_dir, "--sft-epochs", "1", "--eval-samples", "1"});
  ASSERT_EQ(t.code, 0) << t.err;
  EXPECT_TRUE(fs::exists(d / "run" / "manifest.json"));
  EXPECT_TRUE(fs::exists(d / "run" / "checkpoints" / "round_4.bin"));
  EXPECT_TRUE(fs::exists(d / "run" / "cache" / "round_3.jsonl"));
  EXPECT_TRUE(fs::exists(d / "run" / "eval" / "report.json"));

  const auto e = run({"eval", "--run", run_dir, "--samples", "1"});
  ASSERT_EQ(e.code, 0) << e.err;
  const auto report = nlohmann::json::parse(e.out);
  EXPECT_TRUE(report.contains("pareto"));

  const auto c = run({"compare", "--a", run_dir, "--b", run_dir, "--data", stem, "--mode", "greedy"});
  ASSERT_EQ(c.code, 0) << c.err;
  EXPECT_DOUBLE_EQ(nlohmann::json::parse(c.out).at("win_rate_a").get<double>(), 0.5);

  const auto rep = run({"report", run_dir, "--out", (d / "report").string()});
  ASSERT_EQ(rep.code, 0) << rep.err;
  EXPECT_TRUE(fs::exists(d / "report" / "rounds.csv"));
  EXPECT_TRUE(fs::exists(d / "report" / "loss.svg"));
}

TEST(Cli, UsageErrorsExitOne) {
  EXPECT_EQ(run({"train", "--data", "x", "--no-such-flag"}).code, 1);
  EXPECT_EQ(run({"no-such-command"}).code, 1);
  EXPECT_EQ(run({}).code, 1);
  EXPECT_EQ(run({"verify", "--instances", "many"}).code, 1);
  EXPECT_EQ(run({"--help"}).code, 0);
  EXPECT_EQ(run({"train", "--help"}).code, 0);
}

TEST(Cli, BadInputsExitOne) {
  const auto d = fresh_dir("bad");
  EXPECT_EQ(run({"train", "--data", (d / "missing").string()}).code, 1);
  EXPECT_EQ(run({"eval", "--run", (d / "missing").string()}).code, 1);
  EXPECT_EQ(run({"verify", "--suite", "nope"}).code, 1);
  spo::detail::write_file(d / "broken.header.json", "{ not json");
  spo::detail::write_file(d / "broken.jsonl", "");
  const auto r = run({"train", "--data", (d / "broken").string()});
  EXPECT_EQ(r.code, 1);
  EXPECT_FALSE(r.err.empty());
  const auto stem = (d / "st").string();
  ASSERT_EQ(run({"gen-data", "special-token", "--num", "10", "--out", stem}).code, 0);
  EXPECT_EQ(run({"train", "--data", stem, "--method", "nonsense"}).code, 1);
  EXPECT_EQ(run({"compare", "--a", "x", "--b", "y", "--data", stem, "--weights", "token_1"}).code, 1);
}

TEST(Cli, FlagsOverrideConfigFileOverridesDefaults) {
  const auto d = fresh_dir("config");
  const auto cfg = (d / "spo.toml").string();
  spo::detail::write_file(cfg, "[gen-data.bt]\nnum = 12\nseed = 5\n");
  const auto from_file = (d / "file").string(), from_flags = (d / "flags").string(), mixed = (d / "mixed").string();
  ASSERT_EQ(run({"--config", cfg, "gen-data", "bt", "--out", from_file}).code, 0);
  ASSERT_EQ(run({"gen-data", "bt", "--num", "12", "--seed", "5", "--out", from_flags}).code, 0);
  ASSERT_EQ(run({"--config", cfg, "gen-data", "bt", "--seed", "6", "--out", mixed}).code, 0);
  EXPECT_EQ(slurp(from_file + ".jsonl"), slurp(from_flags + ".jsonl"));
  const auto header = nlohmann::json::parse(slurp(mixed + ".header.json"));
  EXPECT_EQ(header.at("provenance").at("seed").get<std::uint64_t>(), 6u);
  const auto file_lines = slurp(from_file + ".jsonl");
  EXPECT_EQ(std::count(file_lines.begin(), file_lines.end(), '\n'), 12 * 64);  // 64 draws per pair by default
}

TEST(Cli, OutputDirectoryEnvironmentVariable) {
  const auto d = fresh_dir("env");
  const std::string cmd = std::string("cd ") + d.string() + " && SPO_OUT_DIR=" + (d / "base").string() + " " +
                          SPO_CLI_PATH + " gen-data bt --num 5 > /dev/null";
  ASSERT_EQ(shell(cmd), 0);
  EXPECT_TRUE(fs::exists(d / "base" / "data" / "bt-seed0.jsonl"));
  EXPECT_FALSE(fs::exists(d / "spo-out"));
  EXPECT_EQ(shell(std::string(SPO_CLI_PATH) + " train --bogus > /dev/null 2>&1"), 1);
}
