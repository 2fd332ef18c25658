#include "perturblm/cli.hpp"
#include "perturblm/config.hpp"

#include <doctest.h>
#include <json.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

using namespace perturblm;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct Run {
  int code;
  std::string out;
  std::string err;
};

Run cli(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = run_cli(args, out, err);
  return {code, out.str(), err.str()};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void spit(const fs::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary);
  out << text;
}

// Fresh scratch directory per test case.
struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& name) : path(fs::temp_directory_path() / ("perturblm_cli_" + name)) {
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  std::string operator/(const std::string& f) const { return (path / f).string(); }
};

const char* kTinyExperiment = R"({
  "vocab_sizes": [10],
  "intensities": [0],
  "replications": 1,
  "model_dim": 4,
  "synthetic": {"n_sequences": 30},
  "train": {"epochs": 2, "batch_size": 64},
  "seed": 5
})";

std::set<std::string> listing(const fs::path& dir) {
  std::set<std::string> names;
  for (const auto& e : fs::directory_iterator(dir)) names.insert(e.path().filename().string());
  return names;
}

}  // namespace

TEST_CASE("minimal experiment writes one row and a manifest") {
  TempDir tmp("exp");
  spit(tmp / "cfg.json", kTinyExperiment);
  const Run r = cli({"experiment", "--config", tmp / "cfg.json", "--out", tmp / "out", "--threads", "1"});
  CHECK(r.code == 0);
  const std::string csv = slurp(tmp / "out/results.csv");
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 2);
  CHECK(listing(tmp.path / "out") == std::set<std::string>{"results.csv", "summary.csv", "mae_v10.svg", "manifest.json"});

  const json m = json::parse(slurp(tmp / "out/manifest.json"));
  CHECK(m["command"] == "experiment");
  CHECK(m["seed"] == 5);
  CHECK(m["outputs"].size() == 3);
  CHECK(m.contains("wall_clock_seconds"));
  // the manifest's config is itself a valid config
  CHECK_NOTHROW(experiment_config_from_json(m["config"]));
}

TEST_CASE("experiment CSVs are byte-identical across runs") {
  TempDir tmp("det");
  spit(tmp / "cfg.json", kTinyExperiment);
  REQUIRE(cli({"experiment", "--config", tmp / "cfg.json", "--out", tmp / "a"}).code == 0);
  REQUIRE(cli({"experiment", "--config", tmp / "cfg.json", "--out", tmp / "b", "--threads", "3"}).code == 0);
  CHECK(slurp(tmp / "a/results.csv") == slurp(tmp / "b/results.csv"));
  CHECK(slurp(tmp / "a/summary.csv") == slurp(tmp / "b/summary.csv"));
}

TEST_CASE("config errors exit 2 and name the problem") {
  TempDir tmp("bad");
  spit(tmp / "syntax.json", "{\n  \"vocab_sizes\": [10,\n}");
  Run r = cli({"experiment", "--config", tmp / "syntax.json", "--out", tmp / "o"});
  CHECK(r.code == 2);
  CHECK(r.err.find("line 3") != std::string::npos);

  spit(tmp / "unknown.json", R"({"vocab_sizes": [10], "replicatons": 3})");
  r = cli({"experiment", "--config", tmp / "unknown.json", "--out", tmp / "o"});
  CHECK(r.code == 2);
  CHECK(r.err.find("replicatons") != std::string::npos);

  spit(tmp / "type.json", R"({"train": {"epochs": "many"}})");
  r = cli({"experiment", "--config", tmp / "type.json", "--out", tmp / "o"});
  CHECK(r.code == 2);
  CHECK(r.err.find("train.epochs") != std::string::npos);

  spit(tmp / "nozero.json", R"({"intensities": [0.1]})");
  CHECK(cli({"experiment", "--config", tmp / "nozero.json", "--out", tmp / "o"}).code == 2);
  CHECK_FALSE(fs::exists(tmp.path / "o"));
}

TEST_CASE("usage errors exit 2") {
  CHECK(cli({}).code == 2);
  CHECK(cli({"bogus"}).code == 2);
  CHECK(cli({"train", "--out", "x"}).code == 2);
  CHECK(cli({"experiment", "--out", "x"}).code == 2);
  CHECK(cli({"theory"}).code == 2);
  CHECK(cli({"--help"}).code == 0);
}

TEST_CASE("runtime errors exit 1") {
  TempDir tmp("rt");
  const Run r = cli({"perturb", "--corpus", tmp / "missing.txt", "--out", tmp / "o"});
  CHECK(r.code == 1);
  CHECK(r.err.find("missing.txt") != std::string::npos);
}

TEST_CASE("perturb at intensity 0 copies the corpus") {
  TempDir tmp("perturb");
  spit(tmp / "c.txt", "1 2 3 4\n4 3\n0 0 0 1 2\n");
  spit(tmp / "syn.txt", "0: 1\n1: 2\n2: 3\n3: 4\n4: 0\n");
  for (const char* kind : {"insertion", "replacement", "deletion", "bigram"}) {
    const std::string out = tmp / (std::string("o_") + kind);
    const Run r = cli({"perturb", "--corpus", tmp / "c.txt", "--out", out, "--kind", kind, "--intensity", "0",
                       "--synonyms", tmp / "syn.txt"});
    CHECK(r.code == 0);
    CHECK(slurp(out + "/perturbed.txt") == slurp(tmp / "c.txt"));
  }
  const Run r = cli({"perturb", "--corpus", tmp / "c.txt", "--out", tmp / "full", "--kind", "replacement",
                     "--intensity", "1", "--synonyms", tmp / "syn.txt"});
  CHECK(r.code == 0);
  CHECK(slurp(tmp / "full/perturbed.txt") == "2 3 4 0\n0 4\n1 1 1 2 3\n");
}

TEST_CASE("theory reports") {
  Run r = cli({"theory", "verify-prop1"});
  REQUIRE(r.code == 0);
  json j = json::parse(r.out);
  CHECK(j["check"] == "verify-prop1");
  CHECK(j["holds"] == true);
  CHECK(j["exact_tv"].get<double>() == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(j["bound"].get<double>() == 0.5);

  for (const char* check : {"eta", "rho", "assumption2", "robustness"}) {
    r = cli({"theory", check, "--seed", "3"});
    CHECK(r.code == 0);
    j = json::parse(r.out);
    CHECK(j["check"] == check);
    CHECK(j.contains("parameters"));
  }
  j = json::parse(cli({"theory", "assumption2"}).out);
  CHECK(j["holds"] == true);
  j = json::parse(cli({"theory", "robustness"}).out);
  CHECK(j["holds"] == true);

  TempDir tmp("theory");
  spit(tmp / "id.json", R"({"perturber": "identity", "n_models": 3})");
  r = cli({"theory", "assumption2", "--config", tmp / "id.json", "--out", tmp / "o"});
  CHECK(r.code == 0);
  j = json::parse(slurp(tmp / "o/report.json"));
  CHECK(j["holds"] == false);
  CHECK(j.contains("counterexample"));
  CHECK(listing(tmp.path / "o") == std::set<std::string>{"report.json", "manifest.json"});

  spit(tmp / "big.json", R"({"vocab_size": 50, "length": 4})");
  r = cli({"theory", "eta", "--config", tmp / "big.json"});
  CHECK(r.code == 2);
  CHECK(r.err.find("1000000") != std::string::npos);
}

TEST_CASE("train then generate round-trips the checkpoint") {
  TempDir tmp("tg");
  std::string corpus;
  for (int i = 0; i < 40; ++i) corpus += std::to_string(i % 5) + " " + std::to_string((i + 1) % 5) + " " +
                                         std::to_string((i + 2) % 5) + " 5\n";
  spit(tmp / "c.txt", corpus);
  spit(tmp / "t.json", R"({"eos_id": 5, "model_dim": 6, "perturb": {"kind": "deletion", "intensity": 0.3},
                           "train": {"epochs": 3, "batch_size": 32, "rule": "brier"}})");
  Run r = cli({"train", "--corpus", tmp / "c.txt", "--config", tmp / "t.json", "--out", tmp / "run", "--seed", "9"});
  REQUIRE(r.code == 0);
  CHECK(listing(tmp.path / "run") ==
        std::set<std::string>{"checkpoint.json", "loss.csv", "diagnostics.json", "manifest.json"});
  const std::string loss = slurp(tmp / "run/loss.csv");
  CHECK(loss.rfind("epoch,loss\n", 0) == 0);
  CHECK(std::count(loss.begin(), loss.end(), '\n') == 4);
  const json m = json::parse(slurp(tmp / "run/manifest.json"));
  CHECK(m["seed"] == 9);
  CHECK(m["config"]["train"]["rule"] == "brier");

  // the same command again reproduces the checkpoint byte for byte
  REQUIRE(cli({"train", "--corpus", tmp / "c.txt", "--config", tmp / "t.json", "--out", tmp / "run2", "--seed", "9"})
              .code == 0);
  CHECK(slurp(tmp / "run/checkpoint.json") == slurp(tmp / "run2/checkpoint.json"));

  r = cli({"generate", "--checkpoint", tmp / "run/checkpoint.json", "--prompt", "0 1", "--seed", "2"});
  REQUIRE(r.code == 0);
  CHECK(!r.out.empty());
  CHECK(r.out.back() == '\n');
  const Run again = cli({"generate", "--checkpoint", tmp / "run/checkpoint.json", "--prompt", "0 1", "--seed", "2"});
  CHECK(again.out == r.out);

  spit(tmp / "prompts.txt", "0\n1 2\n3\n");
  r = cli({"generate", "--checkpoint", tmp / "run/checkpoint.json", "--prompt-file", tmp / "prompts.txt"});
  CHECK(r.code == 0);
  CHECK(std::count(r.out.begin(), r.out.end(), '\n') == 3);

  CHECK(cli({"generate", "--checkpoint", tmp / "run/checkpoint.json"}).code == 2);
  CHECK(cli({"generate", "--checkpoint", tmp / "run/checkpoint.json", "--prompt", "9"}).code == 1);
}

TEST_CASE("seed precedence: flag over environment over config") {
  CHECK(resolve_seed(7, std::nullopt) == 7);
  ::setenv("PERTURBLM_SEED", "11", 1);
  CHECK(resolve_seed(7, std::nullopt) == 11);
  CHECK(resolve_seed(7, 13) == 13);
  ::setenv("PERTURBLM_SEED", "eleven", 1);
  CHECK_THROWS_AS(resolve_seed(7, std::nullopt), ConfigError);
  ::unsetenv("PERTURBLM_SEED");
}
