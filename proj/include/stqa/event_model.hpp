#pragma once

#include <cstddef>
#include <cstdint>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "stqa/geometry.hpp"
#include "stqa/vocabulary.hpp"

namespace stqa {

// One frame-level annotation: where an instrument is at time `fn` and what
// it is doing to which target. verb/target are both set or both empty.
struct EventTuple {
  std::string video_id;
  double fn = 0.0;  // seconds
  std::string instrument;
  BBox bbox;
  std::optional<std::string> verb;
  std::optional<std::string> target;
  std::int64_t source_frame_index = 0;

  bool has_interaction() const { return verb.has_value(); }
  bool operator==(const EventTuple&) const = default;
};

// Ordering used everywhere tuples are sorted: (fn, instrument, bbox).
bool tuple_less(const EventTuple& a, const EventTuple& b);

struct ClipManifest {
  std::string clip_id;
  std::string source_video_id;
  double start_s = 0.0;
  double end_s = 0.0;
  double fps = 1.0;

  double duration_s() const { return end_s - start_s; }
  double frame_period_s() const { return 1.0 / fps; }
  bool operator==(const ClipManifest&) const = default;
};

nlohmann::json to_json(const ClipManifest& clip);
ClipManifest clip_from_json(const nlohmann::json& doc);

struct RecordError {
  std::size_t line = 0;  // 1-based
  std::string reason;
};

struct IngestResult {
  std::map<std::string, std::vector<EventTuple>> videos;
  std::vector<RecordError> errors;
  std::size_t records = 0;  // non-blank lines seen

  std::size_t accepted() const { return records - errors.size(); }
};

// Parses line-delimited records {video_id, fn, instrument, bbox, verb, target
// [, frame]} and canonicalizes every label through `vocab`. Bad records are
// reported with their line number and skipped; the rest are returned per
// video, sorted by tuple_less.
IngestResult ingest_annotations(std::istream& in, const Vocabulary& vocab);

// Parses one record; throws std::invalid_argument with the rejection reason.
EventTuple parse_annotation(const nlohmann::json& record, const Vocabulary& vocab,
                            std::int64_t default_frame_index);

nlohmann::json to_json(const EventTuple& tuple);
void emit_annotations(std::ostream& out, std::span<const EventTuple> tuples);

// Densifies a sparse annotation stream: each frame time k / target_fps takes a
// copy of the nearest annotated frame within the half window (earlier frame
// on ties). The window never exceeds half the smallest gap between annotated
// frames, so the nearest-frame assignment is unique and input that is
// already at target_fps maps to itself.
std::vector<EventTuple> broadcast_sparse_labels(std::span<const EventTuple> tuples,
                                                double target_fps, double half_window_s = 0.5);

// Consecutive clips of max_len_s from t = 0; the remainder is kept only if it
// is at least min_len_s long.
std::vector<ClipManifest> segment_clips(std::string_view video_id, double video_duration_s,
                                        double fps, double max_len_s = 30.0,
                                        double min_len_s = 20.0);

// (t - start) / duration. Throws std::out_of_range outside the clip.
double normalize_time(double t, const ClipManifest& clip);

// Inverse of normalize_time, clamped to the clip.
double denormalize_time(double fraction, const ClipManifest& clip);

// Tuples with clip.start_s <= fn < clip.end_s, in input order.
std::vector<EventTuple> tuples_in_clip(std::span<const EventTuple> tuples,
                                       const ClipManifest& clip);

inline constexpr double kTimeEpsilon = 1e-6;

}  // namespace stqa
