#include <doctest.h>

#include <cmath>
#include <fstream>
#include <map>

#include "stqa/config.hpp"
#include "stqa/format.hpp"
#include "stqa/geometry.hpp"
#include "stqa/payload.hpp"
#include "stqa/rng.hpp"
#include "stqa/templates.hpp"
#include "stqa/vocabulary.hpp"
#include "support.hpp"

using namespace stqa;
using namespace stqa::test;

TEST_CASE("splitmix64 and stable_hash match an independent implementation") {
  // Values from a separate Python implementation of FNV-1a + splitmix64.
  CHECK(splitmix64(0) == 0xe220a8397b1dcdafULL);
  CHECK(stable_hash("clip_0001", 42) == 0x999a7b1333f18f4dULL);
  CHECK(stable_hash("", 0) == 0x5b21f68ffa77f14cULL);
  CHECK(derive_seed(42, "clip_0001") == stable_hash("clip_0001", 42));
  CHECK(derive_seed(1, "a") != derive_seed(2, "a"));
}

TEST_CASE("Rng engine is the standard mt19937_64") {
  // The standard fixes the 10000th output of a default-seeded engine.
  Rng rng(5489u);
  std::uint64_t v = 0;
  for (int i = 0; i < 10000; ++i) v = rng.next();
  CHECK(v == 9981545732273789042ULL);
}

TEST_CASE("Rng::index is roughly uniform and in range") {
  Rng rng(1);
  std::array<int, 7> counts{};
  for (int i = 0; i < 70000; ++i) ++counts[rng.index(7)];
  for (int c : counts) CHECK(std::abs(c - 10000) < 500);
  CHECK_THROWS(rng.index(0));
  for (int i = 0; i < 1000; ++i) {
    const double u = rng.uniform();
    CHECK(u >= 0.0);
    CHECK(u < 1.0);
  }
}

TEST_CASE("shuffle is a permutation") {
  Rng rng(2);
  std::vector<int> v{1, 2, 3, 4, 5, 6};
  rng.shuffle(std::span(v));
  std::vector<int> sorted = v;
  std::sort(sorted.begin(), sorted.end());
  CHECK(sorted == std::vector<int>{1, 2, 3, 4, 5, 6});
}

TEST_CASE("rounding and fixed rendering") {
  CHECK(round_to(0.125, 2) == 0.13);
  CHECK(round_to(-0.001, 2) == 0.0);
  CHECK_FALSE(std::signbit(round_to(-0.001, 2)));
  CHECK(fixed(0.28, 2) == "0.28");
  CHECK(fixed(0.5, 3) == "0.500");
  CHECK(fixed(1.0, 2) == "1.00");
  CHECK(round_timestamp(0.2849) == 0.28);
  CHECK(round_speed(0.12345) == 0.123);
}

TEST_CASE("geometry") {
  CHECK(BBox{0.1, 0.2, 0.3, 0.4}.valid());
  CHECK_FALSE(BBox{0.3, 0.2, 0.1, 0.4}.valid());
  CHECK_FALSE(BBox{0.1, 0.2, 0.3, 1.01}.valid());
  CHECK_FALSE(bbox_violation({0.3, 0.2, 0.1, 0.4}).empty());
  CHECK(BBox{0.1, 0.2, 0.3, 0.4}.centroid().x == doctest::Approx(0.2));
  CHECK(render_box({1, 2, 300, 400}) == "1, 2, 300, 400");
  CHECK(to_unit({100, 200, 300, 400}).x2 == doctest::Approx(0.3));
  CHECK(Box1000{0, 0, 1000, 1000}.valid());
  CHECK_FALSE(Box1000{0, 0, 1001, 10}.valid());
  CHECK_FALSE(Box1000{5, 0, 5, 10}.valid());
  CHECK(distance({0, 0}, {0.3, 0.4}) == doctest::Approx(0.5));
}

TEST_CASE("property: quantize_bbox keeps ordering and range") {
  Rng rng(4);
  for (int i = 0; i < 5000; ++i) {
    const double x1 = rng.uniform(0.0, 1.0);
    const double y1 = rng.uniform(0.0, 1.0);
    const double x2 = std::min(1.0, x1 + rng.uniform(1e-7, 0.002));
    const double y2 = std::min(1.0, y1 + rng.uniform(1e-7, 0.002));
    if (!(x1 < x2 && y1 < y2)) continue;
    const auto q = quantize_bbox({x1, y1, x2, y2});
    CHECK(q.valid());
  }
}

TEST_CASE("vocabulary: canonical labels, synonyms and clipping -> clip") {
  const auto& v = Vocabulary::builtin();
  CHECK(v.contains("grasper", EntityKind::instrument));
  CHECK(canonicalize_entity("clipping", v) == "clip");
  CHECK(canonicalize_entity("Grasper", v) == "grasper");
  CHECK_FALSE(canonicalize_entity("laser sword", v).has_value());
  CHECK(v.lookup("Cystic Duct", EntityKind::target) == "cystic_duct");
  CHECK_FALSE(v.lookup("cystic duct", EntityKind::verb).has_value());
  // Longest match: "clip applier" is the instrument, not the verb "clip".
  const auto m = v.find_entities("the clip applier closes");
  REQUIRE(m.size() == 1);
  CHECK(m[0].label == "clipper");
  CHECK(m[0].kind == EntityKind::instrument);
}

TEST_CASE("property: canonicalization is idempotent") {
  const auto& v = Vocabulary::builtin();
  for (const auto& [surface, canonical] : v.synonyms()) {
    const auto once = canonicalize_entity(surface, v);
    REQUIRE(once.has_value());
    CHECK(*once == canonical);
    CHECK(canonicalize_entity(*once, v) == once);
  }
  for (auto kind : {EntityKind::instrument, EntityKind::verb, EntityKind::target}) {
    for (const auto& label : v.labels(kind)) CHECK(canonicalize_entity(label, v) == label);
  }
}

TEST_CASE("vocabulary file validation") {
  using nlohmann::json;
  CHECK_THROWS_AS(Vocabulary::from_json(json{{"instruments", {"Grasper"}},
                                             {"verbs", json::array()},
                                             {"targets", json::array()}}),
                  std::invalid_argument);
  CHECK_THROWS_AS(Vocabulary::from_json(json{{"instruments", {"hook"}},
                                             {"verbs", {"hook"}},
                                             {"targets", json::array()}}),
                  std::invalid_argument);
  CHECK_THROWS_AS(Vocabulary::from_json(json{{"instruments", {"hook"}},
                                             {"verbs", json::array()},
                                             {"targets", json::array()},
                                             {"synonyms", {{"l-hook", "spoon"}}}}),
                  std::invalid_argument);
  const auto loaded = Vocabulary::load(data_dir() / "vocabulary.json");
  CHECK(loaded.to_json() == Vocabulary::builtin().to_json());
  CHECK(loaded.synonyms_reconstructed());
}

TEST_CASE("template patterns") {
  CHECK(placeholders("The {name} at {t}.") == std::set<std::string>{"name", "t"});
  CHECK(render_pattern("{{x}} {a}", {{"a", "1"}}) == "{x} 1");
  CHECK_THROWS_AS(render_pattern("{a} {b}", {{"a", "1"}}), std::invalid_argument);
  CHECK_THROWS_AS(placeholders("{open"), std::invalid_argument);
}

TEST_CASE("template registry: shipped file equals builtin and covers every subtask") {
  const auto reg = TemplateRegistry::load(data_dir() / "templates.json");
  CHECK(reg.to_json() == TemplateRegistry::builtin().to_json());
  for (auto st : kAllSubtasks) {
    CAPTURE(to_string(st));
    CHECK_FALSE(reg.for_subtask(st).empty());
  }
  CHECK(reg.at("mc.counting.v1").reconstructed);
  CHECK(reg.at("cot.chain.v1").reconstructed);
}

TEST_CASE("template registry rejects schema mismatches and duplicates") {
  auto doc = TemplateRegistry::builtin().to_json();
  auto bad = doc;
  for (auto& t : bad["templates"]) {
    if (t["template_id"] == "stg.locate.v1") t["answer"] = "The {name} is at <{box}> by {colour}.";
  }
  CHECK_THROWS_AS(TemplateRegistry::from_json(bad), std::invalid_argument);
  auto missing = doc;
  for (auto& t : missing["templates"]) {
    if (t["template_id"] == "stg.locate.v1") t["answer"] = "The {name} is somewhere.";
  }
  CHECK_THROWS_AS(TemplateRegistry::from_json(missing), std::invalid_argument);
  auto dup = doc;
  dup["templates"].push_back(dup["templates"][0]);
  CHECK_THROWS_AS(TemplateRegistry::from_json(dup), std::invalid_argument);
  // Hot swap: an extra valid template with a new id is accepted.
  auto extra = doc;
  auto t = extra["templates"][1];
  t["template_id"] = "stg.locate.v2";
  t["answer"] = "Box of the {name}: <{box}>.";
  extra["templates"].push_back(t);
  CHECK(TemplateRegistry::from_json(extra).for_subtask(Subtask::locate).size() == 2);
}

TEST_CASE("payload JSON round trip") {
  const std::vector<std::pair<Subtask, Payload>> cases = {
      {Subtask::temporal_window,
       TemporalWindowPayload{{{"grasper", 0.0, 1.0, Box1000{1, 2, 3, 4}, Box1000{5, 6, 7, 8}}}}},
      {Subtask::velocity, VelocityPayload{"hook", 0.1, 0.3, 0.2, "moving actively"}},
      {Subtask::mc_class, ChoicePayload{"B", "hook"}},
      {Subtask::interaction_comparison,
       InteractionComparisonPayload{"a", "b", "same", "grasp", "liver", "grasp", "liver"}},
  };
  for (const auto& [st, p] : cases) CHECK(payload_from_json(st, payload_to_json(p)) == p);
  CHECK(missing_fields(Subtask::locate, LocatePayload{"hook", std::nullopt}) ==
        std::vector<std::string>{"box"});
}

TEST_CASE("config defaults, overrides and validation") {
  using nlohmann::json;
  const auto d = Config::from_json(json::object());
  CHECK(d.fps == 1.0);
  CHECK(d.broadcast_half_window_s == 0.5);
  CHECK(d.clip_min_s == 20.0);
  CHECK(d.clip_max_s == 30.0);
  CHECK(d.generation.scene.max_step == doctest::Approx(0.3 * std::sqrt(2.0)));
  CHECK(d.generation.thresholds.slow == 0.02);
  CHECK(d.generation.thresholds.active == 0.10);
  CHECK(d.weights.cot_conclusion == 0.7);

  const auto c = Config::from_json(json{{"seed", 99},
                                        {"quotas", {{"locate", 3}}},
                                        {"weights", {{"velocity_numeric", 0.6}}},
                                        {"paths", {{"annotations", "a.jsonl"}}}},
                                   "/base");
  CHECK(c.generation.master_seed == 99);
  CHECK(c.generation.quota_for(Subtask::locate) == 3);
  CHECK(c.generation.quota_for(Subtask::velocity) == 20);
  CHECK(c.weights.velocity_numeric == 0.6);
  CHECK(c.paths.annotations == std::filesystem::path("/base/a.jsonl"));
  CHECK(Config::from_json(c.to_json()).to_json() == c.to_json());

  CHECK_THROWS_AS(Config::from_json(json{{"fps", 0}}), std::invalid_argument);
  CHECK_THROWS_AS(Config::from_json(json{{"clip_min_s", 40}}), std::invalid_argument);
  CHECK_THROWS_AS(Config::from_json(json{{"max_rejected_rate", 1.5}}), std::invalid_argument);
  CHECK_THROWS_AS(Config::from_json(json{{"colour", "red"}}), std::invalid_argument);
  CHECK_THROWS_AS(Config::from_json(json{{"quotas", {{"bogus", 1}}}}), std::invalid_argument);
  CHECK_THROWS_AS(Config::from_json(json{{"motion_thresholds", {{"slow", 0.5}}}}),
                  std::invalid_argument);
  CHECK_THROWS_AS(Config::from_json(json{{"seed", -1}}), std::invalid_argument);
}
