#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "stqa/event_model.hpp"
#include "stqa/qagen.hpp"
#include "stqa/rng.hpp"
#include "stqa/tracks.hpp"

namespace stqa {

// Linear motion of the box centre from `from` (at t0) to `to` (at t1).
struct MotionSegment {
  double t0 = 0.0;
  double t1 = 0.0;
  Point from;
  Point to;
  double width = 0.1;
  double height = 0.1;
};

struct InteractionSegment {
  double t0 = 0.0;
  double t1 = 0.0;
  std::string verb;
  std::string target;
};

// One scripted instrument instance. Intervals are closed; where two
// segments share an endpoint the later one applies.
struct ScriptedInstrument {
  std::string instrument;
  std::vector<MotionSegment> motion;
  std::vector<InteractionSegment> interactions;
};

struct SceneScript {
  std::string name;
  std::string video_id = "synth";
  double duration_s = 30.0;
  double fps = 1.0;
  std::vector<ScriptedInstrument> instruments;
};

SceneScript script_from_json(const nlohmann::json& doc);
nlohmann::json to_json(const SceneScript& script);
SceneScript load_script(const std::filesystem::path& path);

// Empty when valid, otherwise one message per violation.
std::vector<std::string> validate_script(const SceneScript& script, const Vocabulary& vocab);

// Analytic evaluation of a script: positions, visibility and interactions
// come straight from the motion law, never from rendered tuples.
class ExpectedTruth {
 public:
  explicit ExpectedTruth(SceneScript script);

  const SceneScript& script() const { return script_; }
  ClipManifest clip() const;
  std::size_t frame_count() const;
  double frame_time(std::size_t k) const;

  std::optional<Point> centroid(std::size_t instance, double t) const;
  std::optional<BBox> bbox(std::size_t instance, double t) const;
  bool visible(std::size_t instance, double t) const;
  // (verb, target) at t; nullopt when idle or not visible.
  std::optional<std::pair<std::string, std::string>> interaction(std::size_t instance,
                                                                 double t) const;

  std::vector<std::size_t> visible_instances(double t) const;
  int count(const std::string& instrument, double t) const;
  // The single visible instance of a class at t, if exactly one.
  std::optional<std::size_t> unique_instance(const std::string& instrument, double t) const;

  // First and last frame time of the contiguous visible run through t.
  std::pair<double, double> visible_run(std::size_t instance, double t) const;

  // Per frame pair speeds over the frames of [t_start, t_end].
  KinematicSummary kinematics(std::size_t instance, const QueryWindow& window,
                              const MotionThresholds& thresholds = {}) const;

  // Frame pairs of one instance whose centroid step exceeds max_step.
  std::vector<std::pair<double, double>> jumps(std::size_t instance, double max_step) const;

 private:
  const MotionSegment* segment_at(std::size_t instance, double t) const;

  SceneScript script_;
};

struct RenderedScene {
  ClipManifest clip;
  std::vector<EventTuple> tuples;
};

// Samples the script at its fps. Throws std::invalid_argument listing the
// validation errors of an invalid script.
RenderedScene render_scene(const SceneScript& script,
                           const Vocabulary& vocab = Vocabulary::builtin());

struct Discrepancy {
  std::string where;  // sample id or track id
  std::string field;
  std::string expected;
  std::string actual;
};

struct OracleReport {
  std::vector<Discrepancy> discrepancies;
  // Discontinuities present in the script; samples must avoid them.
  std::vector<std::string> filtered;
  std::size_t samples_checked = 0;
  std::size_t tracks_checked = 0;

  bool ok() const { return discrepancies.empty(); }
};

// Gold answer of a generated sample recomputed from the script alone.
// Multi-choice samples return nullopt (they are checked option by option).
std::optional<Payload> analytic_gold(const ExpectedTruth& truth, const QASample& sample,
                                     const GenerationConfig& config = {});

// Compares tracks, semantic blocks, kinematics and every sample gold
// against the script.
OracleReport oracle_check(const ExpectedTruth& truth, const ClipScene& scene,
                          std::span<const QASample> samples,
                          const GenerationConfig& config = {});

// Times in [max(start), min(end)] where the two instances are equally far
// from `point`, solved per pair of overlapping motion segments.
std::vector<double> crossover_times(const ExpectedTruth& truth, std::size_t a, std::size_t b,
                                    Point point);

struct RandomScriptOptions {
  double duration_s = 30.0;
  double fps = 1.0;
  int min_instruments = 1;
  int max_instruments = 3;
  double max_speed = 0.2;          // u/s, keeps steps inside the association gate
  double duplicate_class_prob = 0.1;
  double absence_prob = 0.3;       // an instance leaves and returns
};

SceneScript random_script(std::uint64_t seed, const Vocabulary& vocab,
                          const RandomScriptOptions& options = {});

}  // namespace stqa
