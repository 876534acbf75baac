#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "stqa/event_model.hpp"
#include "stqa/rng.hpp"
#include "stqa/qagen.hpp"
#include "stqa/synth.hpp"

namespace stqa::test {

inline std::filesystem::path data_dir() { return STQA_DATA_DIR; }

inline BBox box_around(double cx, double cy, double w = 0.1, double h = 0.1) {
  return {cx - w / 2, cy - h / 2, cx + w / 2, cy + h / 2};
}

inline EventTuple tuple(double fn, const std::string& instrument, const BBox& bbox,
                        std::optional<std::string> verb = std::nullopt,
                        std::optional<std::string> target = std::nullopt,
                        const std::string& video = "v") {
  EventTuple t;
  t.video_id = video;
  t.fn = fn;
  t.instrument = instrument;
  t.bbox = bbox;
  t.verb = std::move(verb);
  t.target = std::move(target);
  t.source_frame_index = static_cast<std::int64_t>(fn);
  return t;
}

inline SceneScript fixture_script(const std::string& name) {
  return load_script(data_dir() / "scripts" / (name + ".json"));
}

inline std::vector<std::string> fixture_script_names() {
  return {"static_grasper", "pythagoras", "diagonal",  "two_phase",           "crossing",
          "jump",           "two_graspers", "absence", "hook_static_dissect", "busy"};
}

// Neutral prose: no vocabulary labels, relation or motion terms, option
// letters or numbers.
inline std::string filler_words(std::size_t n, std::uint64_t seed) {
  static const std::vector<std::string> words = {
      "the",      "model",      "reviewed", "this",    "surgical", "scene",   "carefully",
      "and",      "noted",      "several",  "details", "about",    "lighting", "image",
      "quality",  "appears",    "clear",    "overall", "while",    "some",    "regions",
      "remain",   "blurred",    "by",       "smoke",   "camera",   "focus",   "is",
      "steady",   "throughout", "so",       "observations", "seem", "reliable", "operator",
      "workflow", "looks",      "routine",  "with",    "little",   "obvious", "complication",
      "visible",  "tissue",     "color",    "looks",   "healthy",  "field",   "of",
      "view",     "stays",      "framed",   "during",  "review",   "procedure", "seems",
      "typical",  "for",        "such",     "cases"};
  Rng rng(seed);
  std::string out;
  for (std::size_t i = 0; i < n; ++i) {
    if (i > 0) out += (i % 12 == 0) ? ". " : " ";
    out += words[rng.index(words.size())];
  }
  return out + ".";
}

// Everything needed to push one script through the pipeline.
struct ScriptRun {
  ExpectedTruth truth;
  ClipScene scene;
  std::vector<QASample> samples;
};

inline ScriptRun run_script(const SceneScript& script, const GenerationConfig& cfg = {}) {
  const auto rendered = render_scene(script);
  ClipScene scene(rendered.clip, rendered.tuples, cfg.scene);
  auto samples = generate_clip(scene, TemplateRegistry::builtin(), Vocabulary::builtin(), cfg);
  return {ExpectedTruth(script), std::move(scene), std::move(samples)};
}

}  // namespace stqa::test
