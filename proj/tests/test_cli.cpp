#include <doctest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "hand_fixture.hpp"
#include "stqa/pipeline.hpp"
#include "support.hpp"

using namespace stqa;
using namespace stqa::test;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const auto dir = fs::temp_directory_path() / ("stqa_cli_test_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

int run(const std::string& args, const fs::path& log) {
  const std::string cmd = std::string(STQA_CLI_PATH) + " " + args + " >" + log.string() + " 2>&1";
  const int status = std::system(cmd.c_str());
  REQUIRE(WIFEXITED(status));
  return WEXITSTATUS(status);
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

void spit(const fs::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary);
  out << text;
}

std::string gold_predictions(const fs::path& dataset) {
  std::ifstream in(dataset);
  std::string out;
  for (const auto& s : load_dataset(in)) {
    out += nlohmann::json{{"sample_id", s.sample_id}, {"output", s.answer}}.dump() + "\n";
  }
  return out;
}

// synth -> ingest -> generate in `dir`, returns the dataset bytes.
std::string build_dataset(const fs::path& dir, const std::string& extra = "") {
  const auto log = dir / "log.txt";
  CHECK(run("synth --random 6 --seed 5 --out " + dir.string(), log) == 0);
  CHECK(run("ingest --in " + (dir / "annotations.jsonl").string() + " --out " + dir.string(), log) == 0);
  CHECK(run("generate --seed 11 --out " + dir.string() + " " + extra, log) == 0);
  return slurp(dir / "dataset.jsonl");
}

}  // namespace

TEST_CASE("cli: help and usage errors") {
  const auto dir = scratch("usage");
  const auto log = dir / "log.txt";
  CHECK(run("--help", log) == 0);
  CHECK(slurp(log).find("evaluate") != std::string::npos);
  CHECK(run("", log) == 2);
  CHECK(run("frobnicate", log) == 2);
  CHECK(run("evaluate --out " + dir.string(), log) == 2);  // --predictions is required
  CHECK(run("ingest --bogus-flag", log) == 2);
  CHECK(run("ingest --config /nonexistent/config.json", log) == 2);
}

TEST_CASE("cli: full pipeline, gold predictions score 100") {
  const auto dir = scratch("pipeline");
  const auto log = dir / "log.txt";
  const auto data = build_dataset(dir);
  REQUIRE_FALSE(data.empty());
  spit(dir / "gold.jsonl", gold_predictions(dir / "dataset.jsonl"));
  REQUIRE(run("evaluate --predictions " + (dir / "gold.jsonl").string() + " --label gold --out " +
                  dir.string(),
              log) == 0);
  const auto table = slurp(dir / "table.csv");
  std::istringstream lines(table);
  std::string header, row;
  std::getline(lines, header);
  std::getline(lines, row);
  CHECK(header.rfind("Model,", 0) == 0);
  CHECK(row == "gold,100.00,100.00,100.00,100.00,100.00,100.00,100.00,100.00");

  // report re-renders the same table from the score file.
  const auto again = scratch("pipeline_report");
  CHECK(run("report --scores " + (dir / "scores.jsonl").string() + " --label gold --out " + again.string(),
            log) == 0);
  CHECK(slurp(again / "table.csv") == table);

  // Empty predictions: every sample is missing and scores 0.
  spit(dir / "none.jsonl", "");
  CHECK(run("evaluate --predictions " + (dir / "none.jsonl").string() + " --label none --out " +
                dir.string(),
            log) == 0);
  std::istringstream zero(slurp(dir / "table.csv"));
  std::getline(zero, header);
  std::getline(zero, row);
  CHECK(row == "none,0.00,0.00,0.00,0.00,0.00,0.00,0.00,0.00");
}

TEST_CASE("cli: identical reruns are byte-identical; seeds matter; threads do not") {
  const auto a = scratch("det_a");
  const auto b = scratch("det_b");
  const auto c = scratch("det_c");
  const auto da = build_dataset(a);
  const auto db = build_dataset(b);
  CHECK(da == db);
  CHECK(slurp(a / "clips.jsonl") == slurp(b / "clips.jsonl"));
  CHECK(slurp(a / "shortfalls.jsonl") == slurp(b / "shortfalls.jsonl"));

  spit(c / "threads.json", R"({"threads": 4})");
  CHECK(build_dataset(c, "--config " + (c / "threads.json").string()) == da);

  CHECK(run("generate --seed 12 --out " + c.string(), c / "log.txt") == 0);
  CHECK(slurp(c / "dataset.jsonl") != da);
}

TEST_CASE("cli: data errors exit 1") {
  const auto dir = scratch("errors");
  const auto log = dir / "log.txt";
  build_dataset(dir);

  spit(dir / "bad.jsonl", "this is not json\n");
  CHECK(run("evaluate --predictions " + (dir / "bad.jsonl").string() + " --out " + dir.string(), log) == 1);

  std::ifstream in(dir / "dataset.jsonl");
  const auto first = load_dataset(in).front();
  const auto line = nlohmann::json{{"sample_id", first.sample_id}, {"output", "x"}}.dump() + "\n";
  spit(dir / "dup.jsonl", line + line);
  CHECK(run("evaluate --predictions " + (dir / "dup.jsonl").string() + " --out " + dir.string(), log) == 1);
  CHECK(slurp(log).find(first.sample_id) != std::string::npos);

  spit(dir / "unknown.jsonl", R"({"sample_id":"nope/locate/0000","output":"x"})"
                              "\n");
  CHECK(run("evaluate --predictions " + (dir / "unknown.jsonl").string() + " --out " + dir.string(), log) ==
        1);

  // Malformed annotation lines are rejected; with the default rejection
  // limit of 0 the ingest fails.
  spit(dir / "ann.jsonl", R"({"video_id":"v","fn":0,"instrument":"laser sword","bbox":[0.1,0.1,0.2,0.2]})"
                          "\n");
  CHECK(run("ingest --in " + (dir / "ann.jsonl").string() + " --out " + dir.string(), log) == 1);
  CHECK(slurp(log).find("laser sword") != std::string::npos);

  spit(dir / "cfg.json", R"({"colour": "red"})");
  CHECK(run("ingest --config " + (dir / "cfg.json").string() + " --out " + dir.string(), log) == 1);
}

TEST_CASE("cli: empty annotation stream gives empty outputs") {
  const auto dir = scratch("empty");
  const auto log = dir / "log.txt";
  spit(dir / "ann.jsonl", "");
  CHECK(run("ingest --in " + (dir / "ann.jsonl").string() + " --out " + dir.string(), log) == 0);
  CHECK(slurp(dir / "clips.jsonl").empty());
  CHECK(run("generate --out " + dir.string(), log) == 0);
  CHECK(slurp(dir / "dataset.jsonl").empty());
}

TEST_CASE("cli: hand fixture evaluation") {
  const auto dir = scratch("hand");
  const auto log = dir / "log.txt";
  const auto f = hand_fixture();
  emit_dataset(dir / "dataset.jsonl", f.dataset);
  std::string preds;
  for (const auto& [id, text] : f.predictions) {
    preds += nlohmann::json{{"sample_id", id}, {"output", text}}.dump() + "\n";
  }
  spit(dir / "preds.jsonl", preds);
  REQUIRE(run("evaluate --predictions " + (dir / "preds.jsonl").string() + " --label hand --out " +
                  dir.string(),
              log) == 0);
  CHECK(slurp(dir / "table.csv") ==
        "Model,ST Grounding,Ref.Int. Captioning,Velocity Est.,ST Rel. Comp.,MC Counting,MC Existence,"
        "MC Class,CoT\n"
        "hand,75.00,-,75.00,50.00,0.00,-,100.00,-\n");
  const auto report = nlohmann::json::parse(slurp(dir / "report.json"));
  CHECK(report.dump().find("ST Grounding") != std::string::npos);
}

TEST_CASE("cli: exemplar mapping") {
  const auto dir = scratch("exemplars");
  const auto log = dir / "log.txt";
  build_dataset(dir);
  std::ifstream in(dir / "dataset.jsonl");
  const auto data = load_dataset(in);
  const auto test_video = data.front().provenance.source_video_id;
  CHECK(run("exemplars --test-video " + test_video + " --out " + dir.string(), log) == 0);
  const auto first = slurp(dir / "exemplars.jsonl");
  CHECK_FALSE(first.empty());
  std::istringstream lines(first);
  std::string line;
  while (std::getline(lines, line)) {
    const auto rec = nlohmann::json::parse(line);
    CHECK(rec.at("exemplar_id").get<std::string>().find(test_video) == std::string::npos);
  }
  CHECK(run("exemplars --test-video " + test_video + " --out " + dir.string(), log) == 0);
  CHECK(slurp(dir / "exemplars.jsonl") == first);
}
