// Acceptance run: one PASS/FAIL line per criterion, non-zero exit on any
// failure.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <map>
#include <set>
#include <sstream>

#include "hand_fixture.hpp"
#include "stqa/format.hpp"
#include "stqa/pipeline.hpp"
#include "support.hpp"

using namespace stqa;
using namespace stqa::test;

namespace {

struct Check {
  std::vector<std::string> problems;
  void expect(bool ok, const std::string& what) {
    if (!ok && problems.size() < 10) problems.push_back(what);
  }
};

const Vocabulary& vocab() { return Vocabulary::builtin(); }
const TemplateRegistry& registry() { return TemplateRegistry::builtin(); }

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

// Shared corpus: every fixture script plus 60 random ones, rendered straight
// into clips.
struct Corpus {
  std::vector<ClipInput> clips;
  GenerationResult generated;
};

const Corpus& corpus() {
  static const Corpus c = [] {
    Corpus out;
    std::vector<SceneScript> scripts;
    for (const auto& n : fixture_script_names()) scripts.push_back(fixture_script(n));
    for (std::uint64_t seed = 1000; seed < 1060; ++seed) scripts.push_back(random_script(seed, vocab()));
    for (const auto& s : scripts) {
      auto r = render_scene(s);
      out.clips.push_back({r.clip, std::move(r.tuples)});
    }
    GenerationConfig cfg;
    cfg.master_seed = 2024;
    out.generated = generate_dataset(out.clips, registry(), vocab(), cfg);
    return out;
  }();
  return c;
}

void criterion_1(Check& c) {
  const auto t0 = std::chrono::steady_clock::now();
  c.expect(composite_st_error({0, 0}, {0, 0}) == 0.0, "zero case is not exactly 0");
  c.expect(std::abs(composite_st_error({0.3, 0.4}, {0, 0}) - 0.25) <= 1e-12, "(0.3,0.4)/(0,0) != 0.25");
  c.expect(std::abs(composite_st_error({0.6, 0.8}, {0.6, 0.8}) - 1.0) <= 1e-12, "(0.6,0.8)x2 != 1.0");
  c.expect(seconds_since(t0) < 1.0, "slower than 1 s");
}

void criterion_2(Check& c) {
  const auto t0 = std::chrono::steady_clock::now();
  const auto& data = corpus().generated.samples;
  c.expect(data.size() >= 5000, "only " + std::to_string(data.size()) + " samples");
  std::set<Subtask> seen;
  std::map<std::string, std::string> gold;
  for (const auto& s : data) {
    seen.insert(s.subtask);
    gold[s.sample_id] = s.answer;
  }
  c.expect(seen.size() == kAllSubtasks.size(), "not every subtask is present");
  const auto report = aggregate_report(evaluate_predictions(data, gold, vocab()));
  for (std::size_t i = 0; i < kTableColumns.size(); ++i) {
    c.expect(report.columns[i].count > 0 && fixed(report.columns[i].mean(), 2) == "100.00",
             std::string(kTableColumns[i]) + " = " + fixed(report.columns[i].mean(), 2));
  }
  c.expect(seconds_since(t0) < 60.0, "slower than 1 min");
}

void criterion_3(Check& c) {
  std::size_t scripts = 0;
  std::vector<SceneScript> all;
  for (const auto& n : fixture_script_names()) all.push_back(fixture_script(n));
  for (std::uint64_t seed = 3000; seed < 3020; ++seed) all.push_back(random_script(seed, vocab()));
  for (const auto& s : all) {
    const auto run = run_script(s);
    const auto report = oracle_check(run.truth, run.scene, run.samples);
    c.expect(report.ok(), s.video_id + ": " +
                              (report.discrepancies.empty() ? "" : report.discrepancies[0].field));
    ++scripts;
  }
  c.expect(scripts >= 20, "fewer than 20 scripts");

  // (0.1, 0.1) -> (0.7, 0.9) in 2 s: a 0.6-0.8-1.0 triangle at 0.5 u/s.
  const auto run = run_script(fixture_script("pythagoras"));
  const auto k = compute_kinematics(run.scene.tracks().at(0), {0.0, 2.0}, {});
  for (double v : {k.min_speed, k.max_speed, k.mean_speed}) {
    c.expect(std::abs(v - 0.5) <= 1e-9, "3-4-5 speed " + std::to_string(v));
  }
}

void criterion_4(Check& c) {
  const auto script = fixture_script("jump");
  const ExpectedTruth truth(script);
  const auto a = *truth.centroid(0, 14.0);
  const auto b = *truth.centroid(0, 15.0);
  const double jump = std::hypot(b.x - a.x, b.y - a.y);
  const auto run = run_script(script);
  c.expect(std::abs(jump - 1.27) < 0.005, "jump is " + std::to_string(jump));
  c.expect(jump > run.scene.max_step(), "jump does not exceed the step limit");
  std::size_t dirty = 0;
  std::size_t clean = 0;
  for (const auto& s : run.samples) {
    if (s.core_task != CoreTask::st_grounding && s.core_task != CoreTask::velocity) continue;
    for (const auto& w : s.provenance.query.windows) {
      if (w.t_start <= 14.0 && w.t_end >= 15.0) {
        ++dirty;
      } else {
        ++clean;
      }
    }
  }
  c.expect(dirty == 0, std::to_string(dirty) + " samples span the jump");
  c.expect(clean >= 1, "no samples over clean windows");
}

void criterion_5(Check& c) {
  std::vector<EventTuple> one{tuple(1.0, "grasper", box_around(0.5, 0.5))};
  c.expect(broadcast_sparse_labels(one, 30.0, 0.5).size() == 31, "single label does not cover 31 frames");
  std::vector<EventTuple> two{tuple(1.0, "grasper", box_around(0.5, 0.5), "grasp", "liver"),
                              tuple(2.0, "grasper", box_around(0.5, 0.5), "retract", "liver")};
  bool tie = false;
  for (const auto& t : broadcast_sparse_labels(two, 30.0, 0.5)) {
    if (std::abs(t.fn - 1.5) < 1e-9) tie = t.verb == "grasp";
  }
  c.expect(tie, "tie frame does not take the earlier label");
}

void criterion_6(Check& c) {
  c.expect(segment_clips("v", 65.0, 1.0).size() == 2, "65 s");
  const auto c55 = segment_clips("v", 55.0, 1.0);
  c.expect(c55.size() == 2 && c55[0].duration_s() == 30.0 && c55[1].duration_s() == 25.0, "55 s");
  c.expect(segment_clips("v", 15.0, 1.0).empty(), "15 s");
  for (double d = 0.0; d <= 300.0; d += 0.5) {
    for (const auto& clip : segment_clips("v", d, 1.0)) {
      c.expect(clip.duration_s() >= 20.0 && clip.duration_s() <= 30.0, "duration out of range");
    }
  }
}

std::string full_pipeline(int threads) {
  std::vector<EventTuple> tuples;
  for (std::uint64_t seed = 7000; seed < 7012; ++seed) {
    const auto r = render_scene(random_script(seed, vocab()));
    tuples.insert(tuples.end(), r.tuples.begin(), r.tuples.end());
  }
  std::stringstream annotations;
  emit_annotations(annotations, tuples);
  auto cfg = Config::from_json(nlohmann::json{{"seed", 31}, {"threads", threads}});
  const auto clips = ingest_stream(annotations, cfg, vocab());
  std::ostringstream out;
  write_store(out, clips);
  const auto gen = generate_dataset(clips, registry(), vocab(), cfg.generation);
  emit_dataset(out, gen.samples);
  std::map<std::string, std::string> preds;
  for (const auto& s : gen.samples) preds[s.sample_id] = s.answer;
  for (const auto& s : evaluate_predictions(gen.samples, preds, vocab(), cfg.weights)) {
    out << to_json(s).dump() << "\n";
  }
  return out.str();
}

void criterion_7(Check& c) {
  const auto a = full_pipeline(1);
  const auto b = full_pipeline(1);
  const auto p = full_pipeline(4);
  c.expect(!a.empty(), "empty pipeline output");
  c.expect(a == b, "same-seed runs differ");
  c.expect(a == p, "4-thread run differs from single-threaded run");
}

void criterion_8(Check& c) {
  const auto& cp = corpus();
  std::map<std::string, ClipScene> scenes;
  for (const auto& clip : cp.clips) scenes.emplace(clip.clip.clip_id, ClipScene(clip.clip, clip.tuples, {}));
  std::size_t mc = 0;
  // option count -> letter index -> hits
  std::map<std::size_t, std::vector<std::size_t>> letters;
  for (const auto& s : cp.generated.samples) {
    if (s.core_task != CoreTask::multichoice) continue;
    ++mc;
    const auto& scene = scenes.at(s.clip_id);
    const auto& q = s.provenance.query;
    const auto& g = std::get<ChoicePayload>(s.gold);
    const std::size_t idx = static_cast<std::size_t>(g.letter->at(0) - 'A');
    auto& hist = letters[s.options.size()];
    hist.resize(s.options.size());
    ++hist[idx];
    const double t = q.times_s.at(0);
    for (std::size_t i = 0; i < s.options.size(); ++i) {
      const auto& o = s.options[i];
      bool truth = false;
      if (s.subtask == Subtask::mc_existence) {
        truth = (o == "yes") == (scene.class_count(q.instruments.at(0), t) > 0);
      } else if (s.subtask == Subtask::mc_class) {
        truth = scene.class_count(o, t) > 0;
      } else {
        truth = std::stoi(o) == scene.class_count(q.instruments.at(0), t);
      }
      c.expect(truth == (i == idx), s.sample_id + " option " + o);
    }
  }
  c.expect(mc >= 2000, "only " + std::to_string(mc) + " multi-choice samples");
  for (const auto& [k, hist] : letters) {
    std::size_t n = 0;
    for (auto h : hist) n += h;
    for (std::size_t i = 0; i < k; ++i) {
      const double pct = 100.0 * static_cast<double>(hist[i]) / static_cast<double>(n);
      const double uniform = 100.0 / static_cast<double>(k);
      std::printf("  %zu options (%zu samples): %c %.2f%%\n", k, n, static_cast<char>('A' + i), pct);
      c.expect(std::abs(pct - uniform) <= 5.0,
               std::to_string(k) + "-option letter " + static_cast<char>('A' + i) + " at " + fixed(pct, 2) + "%");
    }
  }
}

void criterion_9(Check& c) {
  std::uint64_t seed = 0;
  for (const auto& s : corpus().generated.samples) {
    seed += 2;
    const auto text = filler_words(100, seed - 1) + " " + s.answer + " " + filler_words(100, seed);
    const auto p = parse_answer(s.subtask, text, vocab(), s.options);
    c.expect(p.status == ParseStatus::ok && p.value == s.gold, s.sample_id + " does not survive filler");
  }
  c.expect(canonicalize_entity("clipping", vocab()) == "clip", "clipping is not clip");
  c.expect(parse_bboxes("<1200, 0, 50, 50>").empty(), "out-of-range group accepted");
  const auto s = hand_sample("0000", Subtask::locate, "stg.locate.v1", LocatePayload{"grasper", Box1000{0, 0, 200, 200}});
  const auto parsed = parse_answer(s.subtask, "The grasper is at <0, 0, 1200, 200>.", vocab());
  c.expect(score_sample(s, parsed).primary_score == 0.0, "out-of-range box still scores");
}

void criterion_10(Check& c) {
  const Box1000 a{0, 0, 200, 200};
  const Box1000 b{100, 0, 300, 200};
  c.expect(iou(a, b) == iou(b, a), "iou not symmetric");
  c.expect(iou(a, a) == 1.0, "iou identity");
  c.expect(iou(a, Box1000{500, 500, 700, 700}) == 0.0, "iou disjoint");
  c.expect(std::abs(iou(a, b) - 1.0 / 3.0) < 1e-12, "iou 1/3");

  const auto f = hand_fixture();
  const auto scores = evaluate_predictions(f.dataset, f.predictions, vocab());
  for (const auto& s : scores) {
    c.expect(std::abs(s.primary_score - f.expected_scores.at(s.sample_id)) < 0.01, s.sample_id);
  }
  const auto report = aggregate_report(scores);
  for (std::size_t i = 0; i < kTableColumns.size(); ++i) {
    const auto it = f.expected_columns.find(kTableColumns[i]);
    if (it == f.expected_columns.end()) {
      c.expect(report.columns[i].count == 0, std::string(kTableColumns[i]) + " should be empty");
    } else {
      c.expect(std::abs(report.columns[i].mean() - it->second) < 0.01, kTableColumns[i]);
    }
  }
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<void(Check&)>>> criteria = {
      {"composite spatio-temporal error", criterion_1},
      {"gold self-consistency", criterion_2},
      {"oracle equivalence", criterion_3},
      {"continuity filtering", criterion_4},
      {"broadcasting arithmetic", criterion_5},
      {"clip segmentation", criterion_6},
      {"determinism", criterion_7},
      {"distractor soundness", criterion_8},
      {"parser robustness", criterion_9},
      {"metric properties", criterion_10},
  };
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    Check c;
    const auto t0 = std::chrono::steady_clock::now();
    try {
      criteria[i].second(c);
    } catch (const std::exception& e) {
      c.problems.push_back(std::string("exception: ") + e.what());
    }
    const bool ok = c.problems.empty();
    failed += !ok;
    std::printf("%s %2zu %s (%.2f s)\n", ok ? "PASS" : "FAIL", i + 1, criteria[i].first.c_str(),
                seconds_since(t0));
    for (const auto& p : c.problems) std::printf("     %s\n", p.c_str());
  }
  return failed == 0 ? 0 : 1;
}
