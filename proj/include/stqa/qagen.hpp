#pragma once

#include <cstdint>
#include <filesystem>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "stqa/payload.hpp"
#include "stqa/rng.hpp"
#include "stqa/scene.hpp"
#include "stqa/templates.hpp"
#include "stqa/vocabulary.hpp"

namespace stqa {

// What a sample asks about, in clip seconds. Enough to recompute the gold
// answer independently (the synthetic oracle does exactly that).
struct QueryInfo {
  std::string key;  // stable candidate identifier within the clip
  std::vector<double> times_s;
  std::vector<QueryWindow> windows;
  std::vector<std::string> instruments;
  std::vector<int> track_ids;
  std::optional<Box1000> query_box;
  std::optional<std::string> direction;

  bool operator==(const QueryInfo&) const = default;
};

struct Provenance {
  std::string template_id;
  std::uint64_t seed = 0;
  std::string source_video_id;
  bool reconstructed = false;
  QueryInfo query;

  bool operator==(const Provenance&) const = default;
};

struct QASample {
  std::string sample_id;
  std::string clip_id;
  CoreTask core_task = CoreTask::st_grounding;
  Subtask subtask = Subtask::locate;
  std::string question;
  std::string answer;
  std::vector<std::string> options;  // multi-choice only, in letter order
  Payload gold;
  Provenance provenance;

  bool operator==(const QASample&) const = default;
};

nlohmann::json to_json(const QASample& sample);
QASample sample_from_json(const nlohmann::json& doc);

struct GenerationConfig {
  std::uint64_t master_seed = 0;
  int default_quota = 20;                 // per subtask and clip
  std::map<Subtask, int> quotas;          // overrides
  std::vector<double> window_lengths_s = {3.0, 6.0, 10.0};
  SceneOptions scene;
  MotionThresholds thresholds;
  double closest_gap = 0.05;              // nearest vs second-nearest centroid
  double axis_gap = 0.02;                 // relative_position per-axis gap
  double change_band = 0.02;              // relative_change dead band
  double instrument_id_iou = 0.5;         // max IoU with another class's box
  double sequential_max_gap_s = 1.0;
  double query_jitter = 0.1;              // closest_instrument query offset
  double query_box_half = 0.02;
  int min_kinematic_samples = 3;
  unsigned threads = 1;

  int quota_for(Subtask subtask) const;
};

struct ClipInput {
  ClipManifest clip;
  std::vector<EventTuple> tuples;
};

struct Shortfall {
  std::string clip_id;
  Subtask subtask = Subtask::locate;
  int requested = 0;
  int produced = 0;
  std::size_t candidates = 0;
};

struct GenerationResult {
  std::vector<QASample> samples;  // sorted by sample_id
  std::vector<Shortfall> shortfalls;
};

std::uint64_t clip_seed(std::uint64_t master_seed, std::string_view clip_id);

// Every query for `subtask` on the clip that passes the continuity filter
// and the ambiguity guards, in a stable order.
std::vector<QueryInfo> enumerate_queries(const ClipScene& scene, Subtask subtask,
                                         const GenerationConfig& config, const Vocabulary& vocab,
                                         std::uint64_t seed);

// Gold payload of a non multi-choice query, computed from the scene.
Payload compute_gold(const ClipScene& scene, Subtask subtask, const QueryInfo& query,
                     const GenerationConfig& config);

// Renders one sample. Multi-choice option order and the template choice come
// from `rng`. Returns nullopt when the query cannot be posed (for instance
// too few distractors).
std::optional<QASample> instantiate(const ClipScene& scene, Subtask subtask,
                                    const QueryInfo& query, const TemplateRegistry& registry,
                                    const Vocabulary& vocab, const GenerationConfig& config,
                                    Rng& rng);

// All samples of one clip; shortfalls are appended when a quota is not met.
std::vector<QASample> generate_clip(const ClipScene& scene, const TemplateRegistry& registry,
                                    const Vocabulary& vocab, const GenerationConfig& config,
                                    std::vector<Shortfall>* shortfalls = nullptr);

GenerationResult generate_dataset(std::span<const ClipInput> clips,
                                  const TemplateRegistry& registry, const Vocabulary& vocab,
                                  const GenerationConfig& config);

// Helpers shared with the synthetic oracle.
std::string horizontal_third(double x);
std::string vertical_third(double y);
// True if x is within 1e-9 of a thirds boundary.
bool near_third_boundary(double x);
// True if rounding `value` to `decimals` would be decided by ulp noise.
bool near_rounding_edge(double value, int decimals);
std::string render_options(const std::vector<std::string>& options);

enum class ExemplarLevel { subtask, core_task, core_task_same_video };
const char* to_string(ExemplarLevel level);

struct Exemplar {
  const QASample* sample = nullptr;
  ExemplarLevel level = ExemplarLevel::subtask;
};

// Seeded pick among pool samples with the same subtask from another video;
// falls back to the same core task from another video, then the same core
// task from any video. Throws std::invalid_argument if nothing matches.
Exemplar retrieve_icl_exemplar(const QASample& test, std::span<const QASample> pool,
                               std::uint64_t seed);

// One JSON object per line, sorted by sample_id.
void emit_dataset(std::ostream& out, std::vector<QASample> samples);
void emit_dataset(const std::filesystem::path& path, std::vector<QASample> samples);
std::vector<QASample> load_dataset(std::istream& in);
std::vector<QASample> load_dataset(const std::filesystem::path& path);

}  // namespace stqa
