// stqa: ingest | generate | exemplars | evaluate | report | synth
//
// Exit codes: 0 success, 1 data or contract error, 2 usage error.

#include <CLI11.hpp>

#include <fstream>
#include <iostream>
#include <optional>
#include <set>
#include <sstream>
#include <string>

#include "stqa/config.hpp"
#include "stqa/pipeline.hpp"
#include "stqa/synth.hpp"

namespace fs = std::filesystem;
using namespace stqa;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitData = 1;
constexpr int kExitUsage = 2;

struct Common {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out;
};

void add_common(CLI::App* cmd, Common& c) {
  cmd->add_option("--config", c.config, "JSON configuration file")->check(CLI::ExistingFile);
  cmd->add_option("--seed", c.seed, "master seed (overrides the config)");
  cmd->add_option("--out", c.out, "output directory (overrides the config)");
}

Config resolve(const Common& c) {
  Config cfg = c.config.empty() ? Config{} : Config::load(c.config);
  if (c.seed) cfg.generation.master_seed = *c.seed;
  if (!c.out.empty()) cfg.paths.output = c.out;
  return cfg;
}

Vocabulary vocabulary(const Config& cfg) {
  return cfg.paths.vocabulary.empty() ? Vocabulary::builtin() : Vocabulary::load(cfg.paths.vocabulary);
}

TemplateRegistry templates(const Config& cfg) {
  return cfg.paths.templates.empty() ? TemplateRegistry::builtin()
                                     : TemplateRegistry::load(cfg.paths.templates);
}

std::ifstream open_in(const fs::path& p) {
  std::ifstream in(p);
  if (!in) throw std::runtime_error("cannot open " + p.string());
  return in;
}

std::ofstream open_out(const fs::path& p) {
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
  std::ofstream out(p, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + p.string());
  return out;
}

int cmd_ingest(const Config& cfg, const std::string& input) {
  const fs::path path = input.empty() ? cfg.paths.annotations : fs::path(input);
  if (path.empty()) throw std::invalid_argument("no annotation file (paths.annotations or --in)");
  auto in = open_in(path);
  IngestSummary s;
  const auto clips = ingest_stream(in, cfg, vocabulary(cfg), &s);
  for (const auto& e : s.errors) {
    log(LogLevel::warn, path.string() + ":" + std::to_string(e.line) + ": " + e.reason);
  }
  std::cout << "records " << s.records << "\nrejected " << s.rejected << "\nvideos " << s.videos
            << "\nclips " << s.clips << "\ntuples " << s.tuples << '\n';
  if (s.rejected_rate() > cfg.max_rejected_rate) {
    log(LogLevel::error, "rejected-record rate " + std::to_string(s.rejected_rate()) +
                             " exceeds the limit " + std::to_string(cfg.max_rejected_rate));
    return kExitData;
  }
  auto out = open_out(cfg.paths.output / "clips.jsonl");
  write_store(out, clips);
  return kExitOk;
}

int cmd_generate(const Config& cfg, const std::string& store_path) {
  const auto vocab = vocabulary(cfg);
  const fs::path store = store_path.empty() ? cfg.paths.output / "clips.jsonl" : fs::path(store_path);
  auto in = open_in(store);
  const auto clips = read_store(in, vocab);
  const auto result = generate_dataset(clips, templates(cfg), vocab, cfg.generation);
  emit_dataset(cfg.paths.output / "dataset.jsonl", result.samples);
  auto sf = open_out(cfg.paths.output / "shortfalls.jsonl");
  for (const auto& s : result.shortfalls) {
    sf << nlohmann::json{{"clip_id", s.clip_id},
                         {"subtask", to_string(s.subtask)},
                         {"requested", s.requested},
                         {"produced", s.produced},
                         {"candidates", s.candidates}}
              .dump()
       << '\n';
  }
  if (!result.shortfalls.empty()) {
    log(LogLevel::info, std::to_string(result.shortfalls.size()) + " quota shortfalls logged");
  }
  std::cout << "clips " << clips.size() << "\nsamples " << result.samples.size() << '\n';
  return kExitOk;
}

int cmd_exemplars(const Config& cfg, const std::string& dataset_path,
                  const std::vector<std::string>& test_videos, const std::string& split_path) {
  const fs::path dpath = dataset_path.empty() ? cfg.paths.output / "dataset.jsonl" : fs::path(dataset_path);
  const auto dataset = load_dataset(dpath);
  std::set<std::string> tests(test_videos.begin(), test_videos.end());
  if (!split_path.empty()) {
    auto in = open_in(split_path);
    const auto doc = nlohmann::json::parse(in);
    for (const auto& v : doc.at("test")) tests.insert(v.get<std::string>());
  }
  if (tests.empty()) throw std::invalid_argument("no test videos given (--test-video or --split)");
  const auto records = map_exemplars(dataset, tests, cfg.generation.master_seed);
  auto out = open_out(cfg.paths.output / "exemplars.jsonl");
  std::map<std::string, std::size_t> levels;
  for (const auto& r : records) {
    out << to_json(r).dump() << '\n';
    ++levels[to_string(r.level)];
  }
  std::cout << "test samples " << records.size() << '\n';
  for (const auto& [level, n] : levels) std::cout << level << ' ' << n << '\n';
  return kExitOk;
}

int cmd_evaluate(const Config& cfg, const std::string& dataset_path,
                 const std::string& predictions_path, const std::string& label) {
  const fs::path dpath = dataset_path.empty() ? cfg.paths.output / "dataset.jsonl" : fs::path(dataset_path);
  const auto dataset = load_dataset(dpath);
  auto pin = open_in(predictions_path);
  const auto predictions = read_predictions(pin);
  const auto scores = evaluate_predictions(dataset, predictions, vocabulary(cfg), cfg.weights);
  {
    auto out = open_out(cfg.paths.output / "scores.jsonl");
    for (const auto& s : scores) out << to_json(s).dump() << '\n';
  }
  const auto report = aggregate_report(scores);
  {
    auto out = open_out(cfg.paths.output / "report.json");
    out << to_json(report).dump(2) << '\n';
  }
  {
    auto out = open_out(cfg.paths.output / "table.csv");
    write_table(out, report, label);
  }
  write_table(std::cout, report, label);
  std::cout << "missing predictions " << report.missing_predictions << '\n';
  return kExitOk;
}

int cmd_report(const Config& cfg, const std::string& scores_path, const std::string& label,
               const std::string& delimiter) {
  if (delimiter.size() != 1) throw std::invalid_argument("--delimiter must be one character");
  const fs::path spath = scores_path.empty() ? cfg.paths.output / "scores.jsonl" : fs::path(scores_path);
  auto in = open_in(spath);
  const auto report = aggregate_report(read_scores(in));
  std::ostringstream table;
  write_table(table, report, label, delimiter[0]);
  std::cout << table.str();
  if (!cfg.paths.output.empty()) {
    auto out = open_out(cfg.paths.output / "table.csv");
    out << table.str();
  }
  return kExitOk;
}

int cmd_synth(const Config& cfg, const std::vector<std::string>& scripts, int random_count) {
  const auto vocab = vocabulary(cfg);
  std::vector<SceneScript> all;
  for (const auto& p : scripts) all.push_back(load_script(p));
  for (int i = 0; i < random_count; ++i) {
    all.push_back(random_script(derive_seed(cfg.generation.master_seed, "synth|" + std::to_string(i)), vocab));
  }
  auto out = open_out(cfg.paths.output / "annotations.jsonl");
  std::size_t n = 0;
  for (const auto& s : all) {
    const auto scene = render_scene(s, vocab);
    emit_annotations(out, scene.tuples);
    n += scene.tuples.size();
  }
  std::cout << "scripts " << all.size() << "\ntuples " << n << '\n';
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Spatiotemporal QA toolchain over instrument annotations"};
  app.require_subcommand(1);

  Common common;
  std::string input, store, dataset, predictions, split, scores, label = "Model", delimiter = ",";
  std::vector<std::string> test_videos, scripts;
  int random_count = 0;

  auto* ingest = app.add_subcommand("ingest", "densify and clip-segment annotations");
  add_common(ingest, common);
  ingest->add_option("--in", input, "annotation JSONL (overrides paths.annotations)");

  auto* generate = app.add_subcommand("generate", "generate the QA dataset from a clip store");
  add_common(generate, common);
  generate->add_option("--store", store, "clip store (default <out>/clips.jsonl)");

  auto* exemplars = app.add_subcommand("exemplars", "map each test sample to one ICL exemplar");
  add_common(exemplars, common);
  exemplars->add_option("--dataset", dataset, "dataset JSONL (default <out>/dataset.jsonl)");
  exemplars->add_option("--test-video", test_videos, "test split video id (repeatable)");
  exemplars->add_option("--split", split, "JSON file {\"test\": [video ids]}");

  auto* evaluate = app.add_subcommand("evaluate", "score model outputs against the dataset");
  add_common(evaluate, common);
  evaluate->add_option("--dataset", dataset, "dataset JSONL (default <out>/dataset.jsonl)");
  evaluate->add_option("--predictions", predictions, "JSONL {sample_id, output}")->required();
  evaluate->add_option("--label", label, "row label of the results table");

  auto* report = app.add_subcommand("report", "results table from a score file");
  add_common(report, common);
  report->add_option("--scores", scores, "score JSONL (default <out>/scores.jsonl)");
  report->add_option("--label", label, "row label");
  report->add_option("--delimiter", delimiter, "column delimiter");

  auto* synth = app.add_subcommand("synth", "render scripted scenes as annotations");
  add_common(synth, common);
  synth->add_option("--script", scripts, "scene script JSON (repeatable)");
  synth->add_option("--random", random_count, "number of random scripts")->check(CLI::NonNegativeNumber);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }

  try {
    const Config cfg = resolve(common);
    if (*ingest) return cmd_ingest(cfg, input);
    if (*generate) return cmd_generate(cfg, store);
    if (*exemplars) return cmd_exemplars(cfg, dataset, test_videos, split);
    if (*evaluate) return cmd_evaluate(cfg, dataset, predictions, label);
    if (*report) return cmd_report(cfg, scores, label, delimiter);
    if (*synth) return cmd_synth(cfg, scripts, random_count);
  } catch (const std::exception& e) {
    log(LogLevel::error, e.what());
    return kExitData;
  }
  return kExitUsage;
}
