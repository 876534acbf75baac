#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>

#include "stqa/format.hpp"
#include "stqa/qagen.hpp"
#include "support.hpp"

using namespace stqa;
using namespace stqa::test;

namespace {

const Vocabulary& vocab() { return Vocabulary::builtin(); }
const TemplateRegistry& registry() { return TemplateRegistry::builtin(); }

struct Instrument {
  std::string name;
  std::vector<MotionSegment> motion;
  std::vector<InteractionSegment> interactions = {};
};

SceneScript script_of(std::vector<Instrument> instruments, const std::string& video = "t") {
  SceneScript s;
  s.video_id = video;
  for (auto& i : instruments) s.instruments.push_back({i.name, i.motion, i.interactions});
  return s;
}

MotionSegment still(Point p, double t0 = 0, double t1 = 29) { return {t0, t1, p, p, 0.1, 0.1}; }

ClipScene scene_of(const SceneScript& s, const GenerationConfig& cfg = {}) {
  const auto r = render_scene(s);
  return ClipScene(r.clip, r.tuples, cfg.scene);
}

std::vector<ClipInput> random_clips(int n, std::uint64_t base = 100) {
  std::vector<ClipInput> clips;
  for (int i = 0; i < n; ++i) {
    const auto r = render_scene(random_script(base + static_cast<std::uint64_t>(i), vocab()));
    clips.push_back({r.clip, r.tuples});
  }
  return clips;
}

std::string emitted(const std::vector<QASample>& samples) {
  std::ostringstream os;
  emit_dataset(os, samples);
  return os.str();
}

const QueryInfo* find_window(const std::vector<QueryInfo>& qs, double a, double b) {
  for (const auto& q : qs) {
    if (!q.windows.empty() && q.windows[0].t_start == a && q.windows[0].t_end == b) return &q;
  }
  return nullptr;
}

}  // namespace

TEST_CASE("generation is deterministic and independent of thread count") {
  const auto clips = random_clips(12);
  GenerationConfig cfg;
  cfg.master_seed = 77;
  const auto a = generate_dataset(clips, registry(), vocab(), cfg);
  const auto b = generate_dataset(clips, registry(), vocab(), cfg);
  cfg.threads = 4;
  const auto c = generate_dataset(clips, registry(), vocab(), cfg);
  CHECK(emitted(a.samples) == emitted(b.samples));
  CHECK(emitted(a.samples) == emitted(c.samples));
  cfg.master_seed = 78;
  const auto d = generate_dataset(clips, registry(), vocab(), cfg);
  CHECK(emitted(a.samples) != emitted(d.samples));
  CHECK(std::is_sorted(a.samples.begin(), a.samples.end(),
                       [](const QASample& x, const QASample& y) { return x.sample_id < y.sample_id; }));
}

TEST_CASE("duplicate clip ids are rejected") {
  auto clips = random_clips(1);
  clips.push_back(clips[0]);
  CHECK_THROWS_AS(generate_dataset(clips, registry(), vocab(), {}), std::invalid_argument);
}

TEST_CASE("clip without instruments: only absence questions, shortfalls recorded") {
  ClipInput empty{{"empty_c000", "empty", 0.0, 30.0, 1.0}, {}};
  const auto r = generate_dataset(std::span(&empty, 1), registry(), vocab(), {});
  REQUIRE_FALSE(r.samples.empty());
  for (const auto& s : r.samples) {
    const auto& g = std::get<ChoicePayload>(s.gold);
    if (s.subtask == Subtask::mc_existence) {
      CHECK(g.option == "no");
    } else {
      CHECK(s.subtask == Subtask::mc_counting);
      CHECK(g.option == "0");
    }
  }
  const bool grounding_short = std::any_of(r.shortfalls.begin(), r.shortfalls.end(), [](const Shortfall& s) {
    return s.subtask == Subtask::locate && s.produced == 0 && s.requested == 20;
  });
  CHECK(grounding_short);
}

TEST_CASE("scripted multi-instrument clip covers every subtask") {
  // The busy fixture has >= 2 instruments, moving tracks and consecutive
  // interaction blocks, so every requirement of every template is met.
  const auto run = run_script(fixture_script("busy"));
  std::set<Subtask> seen;
  for (const auto& s : run.samples) seen.insert(s.subtask);
  for (auto st : kAllSubtasks) {
    CAPTURE(to_string(st));
    CHECK(seen.count(st) == 1);
  }
}

TEST_CASE("quotas are respected") {
  GenerationConfig cfg;
  cfg.default_quota = 3;
  cfg.quotas[Subtask::locate] = 0;
  const auto run = run_script(fixture_script("busy"), cfg);
  std::map<Subtask, int> n;
  for (const auto& s : run.samples) ++n[s.subtask];
  CHECK(n.count(Subtask::locate) == 0);
  for (const auto& [st, k] : n) CHECK(k <= 3);
}

TEST_CASE("invariant: gold rendering closure and multi-choice soundness") {
  const auto clips = random_clips(20, 300);
  const auto r = generate_dataset(clips, registry(), vocab(), {});
  REQUIRE(r.samples.size() > 1000);
  for (const auto& s : r.samples) {
    CAPTURE(s.sample_id);
    const auto& tmpl = registry().at(s.provenance.template_id);
    CHECK(render_answer(tmpl, s.gold) == s.answer);
    CHECK(missing_fields(s.subtask, s.gold).empty());
    if (s.core_task == CoreTask::multichoice) {
      const std::set<std::string> distinct(s.options.begin(), s.options.end());
      CHECK(distinct.size() == s.options.size());
      const auto& g = std::get<ChoicePayload>(s.gold);
      const auto idx = static_cast<std::size_t>(g.letter->at(0) - 'A');
      REQUIRE(idx < s.options.size());
      CHECK(s.options[idx] == g.option);
      CHECK(s.question.find(render_options(s.options)) != std::string::npos);
    } else {
      CHECK(s.options.empty());
    }
  }
}

TEST_CASE("invariant: no emitted sample queries a discontinuous window") {
  std::vector<SceneScript> scripts{fixture_script("jump"), fixture_script("absence")};
  for (std::uint64_t seed = 500; seed < 520; ++seed) scripts.push_back(random_script(seed, vocab()));
  for (const auto& script : scripts) {
    const auto run = run_script(script);
    for (const auto& s : run.samples) {
      const auto& q = s.provenance.query;
      for (std::size_t i = 0; i < q.windows.size() && i < q.track_ids.size(); ++i) {
        const auto& tr = run.scene.track(q.track_ids[i]);
        CHECK(check_temporal_continuity(tr, q.windows[i]));
        CHECK(check_spatial_continuity(tr, q.windows[i], run.scene.max_step()));
      }
    }
  }
}

TEST_CASE("mc_class: one correct option plus three absent classes") {
  // Frame with {grasper, hook}; the vocabulary leaves exactly
  // {scissors, clipper, irrigator} absent.
  Vocabulary small = Vocabulary::from_json(
      {{"instruments", {"grasper", "hook", "scissors", "clipper", "irrigator"}},
       {"verbs", {"grasp"}},
       {"targets", {"liver"}}});
  const auto scene = scene_of(script_of({{"grasper", {still({0.2, 0.2})}}, {"hook", {still({0.7, 0.7})}}}));
  const auto queries = enumerate_queries(scene, Subtask::mc_class, {}, small, 1);
  REQUIRE_FALSE(queries.empty());
  for (const auto& q : queries) {
    Rng rng(derive_seed(5, q.key));
    const auto s = instantiate(scene, Subtask::mc_class, q, registry(), small, {}, rng);
    REQUIRE(s.has_value());
    std::set<std::string> opts(s->options.begin(), s->options.end());
    const auto& g = std::get<ChoicePayload>(s->gold);
    CHECK((g.option == "grasper" || g.option == "hook"));
    opts.erase(*g.option);
    CHECK(opts == std::set<std::string>{"scissors", "clipper", "irrigator"});
  }
}

TEST_CASE("mc_counting: true count 0 gives options {0,1,2}; existence of absent is no") {
  const auto scene = scene_of(script_of({{"grasper", {still({0.5, 0.5})}}}));
  const auto counting = enumerate_queries(scene, Subtask::mc_counting, {}, vocab(), 1);
  const auto existence = enumerate_queries(scene, Subtask::mc_existence, {}, vocab(), 1);
  int zero = 0, absent = 0;
  for (const auto& q : counting) {
    Rng rng(derive_seed(9, q.key));
    const auto s = instantiate(scene, Subtask::mc_counting, q, registry(), vocab(), {}, rng);
    REQUIRE(s.has_value());
    const int truth = scene.class_count(q.instruments[0], q.times_s[0]);
    int correct = 0;
    for (const auto& o : s->options) {
      CHECK(std::stoi(o) >= 0);
      correct += std::stoi(o) == truth;
    }
    CHECK(correct == 1);
    if (truth == 0) {
      ++zero;
      CHECK(std::set<std::string>(s->options.begin(), s->options.end()) ==
            std::set<std::string>{"0", "1", "2"});
      CHECK(std::get<ChoicePayload>(s->gold).option == "0");
    }
  }
  for (const auto& q : existence) {
    if (q.instruments[0] == "grasper") continue;
    Rng rng(derive_seed(9, q.key));
    const auto s = instantiate(scene, Subtask::mc_existence, q, registry(), vocab(), {}, rng);
    CHECK(std::get<ChoicePayload>(s->gold).option == "no");
    CHECK(s->options.size() == 2);
    ++absent;
  }
  CHECK(zero > 0);
  CHECK(absent > 0);
}

TEST_CASE("grounding examples") {
  SUBCASE("single static grasper: window [0.00 - 1.00] style with identical boxes") {
    const auto run = run_script(fixture_script("static_grasper"));
    bool found = false;
    for (const auto& s : run.samples) {
      if (s.subtask != Subtask::temporal_window) continue;
      const auto& e = std::get<TemporalWindowPayload>(s.gold).entries.at(0);
      CHECK(e.start == 0.0);
      // The last sampled frame is t = 29 s of a 30 s clip.
      CHECK(e.end == round_timestamp(29.0 / 30.0));
      CHECK(e.start_box == e.end_box);
      found = true;
    }
    CHECK(found);
  }
  SUBCASE("query point at the grasper centroid: the grasper is closest") {
    const auto scene = scene_of(script_of({{"grasper", {still({0.3, 0.3})}}, {"hook", {still({0.7, 0.6})}}}));
    QueryInfo q;
    q.times_s = {5.0};
    q.query_box = quantize_bbox(box_around(0.3, 0.3, 0.04, 0.04));
    q.track_ids = {0, 1};
    const auto g = compute_gold(scene, Subtask::closest_instrument, q, {});
    CHECK(std::get<EntityPayload>(g).instrument == "grasper");
    const auto tmpl = registry().for_subtask(Subtask::closest_instrument)[0];
    CHECK(render_answer(*tmpl, g) == "The grasper is closest.");
  }
  SUBCASE("centroid (0.1, 0.9) is in the left bottom segment") {
    CHECK(horizontal_third(0.1) == "left");
    CHECK(vertical_third(0.9) == "bottom");
    const auto scene = scene_of(script_of({{"grasper", {still({0.1, 0.9})}}}));
    const auto qs = enumerate_queries(scene, Subtask::frame_segment, {}, vocab(), 1);
    REQUIRE_FALSE(qs.empty());
    const auto g = std::get<SegmentPayload>(compute_gold(scene, Subtask::frame_segment, qs[0], {}));
    CHECK(g.horizontal == "left");
    CHECK(g.vertical == "bottom");
  }
  SUBCASE("closest guard skips near ties") {
    // Two instruments symmetric about every jittered query point on x = 0.5
    // would be ambiguous; the guard keeps only well separated cases.
    const auto scene = scene_of(script_of({{"grasper", {still({0.3, 0.5})}}, {"hook", {still({0.7, 0.5})}}}));
    GenerationConfig cfg;
    for (const auto& q : enumerate_queries(scene, Subtask::closest_instrument, cfg, vocab(), 3)) {
      const Point c = to_unit(*q.query_box).centroid();
      const double d1 = std::hypot(c.x - 0.3, c.y - 0.5);
      const double d2 = std::hypot(c.x - 0.7, c.y - 0.5);
      CHECK(std::abs(d1 - d2) >= cfg.closest_gap);
    }
  }
}

TEST_CASE("interaction examples") {
  const auto scene = scene_of(script_of(
      {{"hook",
        {still({0.5, 0.5})},
        {{0, 10, "dissect", "gallbladder"}, {11, 29, "retract", "gallbladder"}}},
       {"clipper", {still({0.2, 0.8})}, {{0, 29, "clip", "cystic_duct"}}}}));
  const auto seq = enumerate_queries(scene, Subtask::sequential_actions, {}, vocab(), 1);
  REQUIRE(seq.size() == 1);
  const auto next = std::get<InteractionPayload>(compute_gold(scene, Subtask::sequential_actions, seq[0], {}));
  CHECK(next.instrument == "hook");
  CHECK(next.verb == "retract");
  CHECK(next.target == "gallbladder");

  bool clipper_target = false;
  for (const auto& q : enumerate_queries(scene, Subtask::target_interaction, {}, vocab(), 1)) {
    const auto g = std::get<InteractionPayload>(compute_gold(scene, Subtask::target_interaction, q, {}));
    if (g.instrument == "clipper") {
      CHECK(g.target == "cystic_duct");
      clipper_target = true;
    }
    // The window never straddles the hook's block change.
    if (g.instrument == "hook") CHECK((q.windows[0].t_end <= 10.0 || q.windows[0].t_start >= 11.0));
  }
  CHECK(clipper_target);

  QueryInfo q;
  q.times_s = {4.0};
  q.query_box = quantize_bbox(box_around(0.5, 0.5));
  q.track_ids = {scene.tracks()[0].instrument == "hook" ? 0 : 1};
  CHECK(std::get<EntityPayload>(compute_gold(scene, Subtask::instrument_id, q, {})).instrument == "hook");
}

TEST_CASE("relation examples") {
  SUBCASE("A at (0.7, 0.7), B at (0.3, 0.3): right and below") {
    const auto scene = scene_of(script_of({{"grasper", {still({0.7, 0.7})}}, {"hook", {still({0.3, 0.3})}}}));
    bool found = false;
    for (const auto& q : enumerate_queries(scene, Subtask::relative_position, {}, vocab(), 1)) {
      if (q.instruments[0] != "grasper") continue;
      const auto g = compute_gold(scene, Subtask::relative_position, q, {});
      const auto& p = std::get<RelativePositionPayload>(g);
      CHECK(p.horizontal == "right");
      CHECK(p.vertical == "below");
      const auto* tmpl = registry().for_subtask(Subtask::relative_position)[0];
      CHECK(render_answer(*tmpl, g) == "The grasper is located to the right and below the hook.");
      found = true;
    }
    CHECK(found);
  }
  SUBCASE("distance 0.5 then 0.2: closer") {
    const auto scene = scene_of(script_of(
        {{"grasper", {{0, 10, {0.2, 0.5}, {0.5, 0.5}, 0.1, 0.1}, still({0.5, 0.5}, 10, 29)}},
         {"hook", {still({0.7, 0.5})}}}));
    const auto qs = enumerate_queries(scene, Subtask::relative_change, {}, vocab(), 1);
    const auto* q = find_window(qs, 0, 10);
    REQUIRE(q != nullptr);
    CHECK(std::get<RelativeChangePayload>(compute_gold(scene, Subtask::relative_change, *q, {})).change ==
          "closer");
  }
  SUBCASE("both in one (retract, gallbladder) block: same") {
    const auto scene = scene_of(script_of(
        {{"grasper", {still({0.2, 0.2})}, {{0, 29, "retract", "gallbladder"}}},
         {"hook", {still({0.8, 0.8})}, {{0, 29, "retract", "gallbladder"}}}}));
    const auto qs = enumerate_queries(scene, Subtask::interaction_comparison, {}, vocab(), 1);
    REQUIRE_FALSE(qs.empty());
    for (const auto& q : qs) {
      const auto g = std::get<InteractionComparisonPayload>(
          compute_gold(scene, Subtask::interaction_comparison, q, {}));
      CHECK(g.verdict == "same");
      CHECK(g.verb1 == "retract");
      CHECK(g.target2 == "gallbladder");
    }
  }
  SUBCASE("axis guard") {
    const auto scene = scene_of(script_of({{"grasper", {still({0.5, 0.3})}}, {"hook", {still({0.51, 0.7})}}}));
    CHECK(enumerate_queries(scene, Subtask::relative_position, {}, vocab(), 1).empty());
  }
}

TEST_CASE("velocity examples") {
  SUBCASE("stationary") {
    const auto run = run_script(fixture_script("static_grasper"));
    bool found = false;
    for (const auto& s : run.samples) {
      if (s.subtask != Subtask::velocity) continue;
      const auto& v = std::get<VelocityPayload>(s.gold);
      CHECK(v.min_speed == 0.0);
      CHECK(v.max_speed == 0.0);
      CHECK(v.mean_speed == 0.0);
      CHECK(v.descriptor == "stationary");
      CHECK(s.answer.find("0.000") != std::string::npos);
      found = true;
    }
    CHECK(found);
  }
  SUBCASE("two-phase motion 0.1 then 0.3 u/s") {
    const auto scene = scene_of(fixture_script("two_phase"));
    // Window [4, 6]: steps 4->5 at 0.1 u/s, 5->6 at 0.3 u/s.
    QueryInfo q;
    q.windows = {{4.0, 6.0}};
    q.track_ids = {0};
    q.instruments = {"irrigator"};
    const auto v = std::get<VelocityPayload>(compute_gold(scene, Subtask::velocity, q, {}));
    CHECK(v.min_speed == 0.1);
    CHECK(v.max_speed == 0.3);
    CHECK(v.mean_speed == 0.2);
    CHECK(v.descriptor == "moving actively");
  }
  SUBCASE("windows shorter than three samples are not posed") {
    GenerationConfig cfg;
    cfg.window_lengths_s = {1.0};
    const auto scene = scene_of(fixture_script("diagonal"), cfg);
    CHECK(enumerate_queries(scene, Subtask::velocity, cfg, vocab(), 1).empty());
  }
}

TEST_CASE("chain-of-thought examples") {
  const auto run = run_script(fixture_script("hook_static_dissect"));
  bool found = false;
  for (const auto& s : run.samples) {
    if (s.subtask != Subtask::cot || s.provenance.query.instruments[0] != "hook") continue;
    const auto& c = std::get<CotPayload>(s.gold);
    CHECK(c.horizontal == "center");
    CHECK(c.vertical == "middle");
    CHECK(c.descriptor == "stationary");
    CHECK(c.verb == "dissect");
    CHECK(c.target == "gallbladder");
    CHECK(c.conclusion_instrument == "hook");
    const auto p1 = s.answer.find("localization");
    const auto p2 = s.answer.find("kinematics");
    const auto p3 = s.answer.find("interaction");
    CHECK(p1 < p2);
    CHECK(p2 < p3);
    found = true;
  }
  CHECK(found);

  // Idle instrument: no CoT sample at all.
  const auto idle = run_script(script_of({{"grasper", {still({0.4, 0.4})}}}));
  for (const auto& s : idle.samples) CHECK(s.subtask != Subtask::cot);
}

TEST_CASE("ICL exemplar retrieval") {
  const auto clips = random_clips(6, 900);
  const auto data = generate_dataset(clips, registry(), vocab(), {}).samples;
  std::vector<QASample> pool(data.begin() + 1, data.end());
  const auto& test = data.front();
  const auto a = retrieve_icl_exemplar(test, pool, 4);
  const auto b = retrieve_icl_exemplar(test, pool, 4);
  REQUIRE(a.sample != nullptr);
  CHECK(a.sample->sample_id == b.sample->sample_id);
  CHECK(a.level == ExemplarLevel::subtask);
  CHECK(a.sample->subtask == test.subtask);
  CHECK(a.sample->provenance.source_video_id != test.provenance.source_video_id);

  // Only same-video samples share the subtask: fall back to the core task.
  std::vector<QASample> same_video;
  for (const auto& s : pool) {
    const bool same_sub = s.subtask == test.subtask;
    const bool same_vid = s.provenance.source_video_id == test.provenance.source_video_id;
    if ((same_sub && same_vid) || (!same_sub && s.core_task == test.core_task && !same_vid)) {
      same_video.push_back(s);
    }
  }
  const auto fb = retrieve_icl_exemplar(test, same_video, 4);
  CHECK(fb.level == ExemplarLevel::core_task);
  CHECK(fb.sample->core_task == test.core_task);
  CHECK(fb.sample->provenance.source_video_id != test.provenance.source_video_id);

  std::vector<QASample> none;
  for (const auto& s : pool) {
    if (s.core_task != test.core_task) none.push_back(s);
  }
  CHECK_THROWS_AS(retrieve_icl_exemplar(test, none, 4), std::invalid_argument);
}

TEST_CASE("dataset emission and loading") {
  std::ostringstream empty;
  emit_dataset(empty, {});
  CHECK(empty.str().empty());

  const auto samples = run_script(fixture_script("busy")).samples;
  const auto text = emitted(samples);
  CHECK(text == emitted(samples));
  CHECK(static_cast<std::size_t>(std::count(text.begin(), text.end(), '\n')) == samples.size());
  std::istringstream in(text);
  const auto back = load_dataset(in);
  REQUIRE(back.size() == samples.size());
  auto sorted = samples;
  std::sort(sorted.begin(), sorted.end(),
            [](const QASample& a, const QASample& b) { return a.sample_id < b.sample_id; });
  CHECK(back == sorted);
}
