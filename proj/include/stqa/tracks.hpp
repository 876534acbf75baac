#pragma once

#include <cstddef>
#include <numbers>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "stqa/event_model.hpp"
#include "stqa/geometry.hpp"

namespace stqa {

// Default spatial-continuity threshold: 0.3 of the frame diagonal.
inline constexpr double kDefaultMaxStep = 0.3 * std::numbers::sqrt2;
// Association gate for build_tracks, in unit distance.
inline constexpr double kDefaultGate = 0.3;

struct TrackSample {
  double t = 0.0;
  BBox bbox;
  Point centroid;
  std::optional<std::string> verb;
  std::optional<std::string> target;
};

struct InstrumentTrack {
  int track_id = 0;
  std::string instrument;
  std::vector<TrackSample> samples;  // strictly increasing t, no gaps
  double sampling_period_s = 1.0;
  // The track started/ended because a same-class detection fell outside the
  // association gate, not because the instrument appeared/disappeared.
  bool opened_by_gate_miss = false;
  bool closed_by_gate_miss = false;

  double start_t() const { return samples.front().t; }
  double end_t() const { return samples.back().t; }
  bool covers(double t) const;
  const TrackSample* sample_at(double t) const;
};

struct QueryWindow {
  double t_start = 0.0;
  double t_end = 0.0;

  bool contains(double t) const;
  bool operator==(const QueryWindow&) const = default;
};

struct SemanticBlock {
  std::string instrument;
  std::optional<std::string> verb;
  std::optional<std::string> target;
  QueryWindow window;  // first and last sample time of the run
  std::size_t sample_count = 0;

  bool is_null() const { return !verb.has_value(); }
};

enum class MotionDescriptor { stationary, moving_slowly, moving_actively };

const char* to_string(MotionDescriptor d);
std::optional<MotionDescriptor> motion_descriptor_from_string(std::string_view s);

struct MotionThresholds {
  double slow = 0.02;    // below: stationary
  double active = 0.10;  // at or above: moving actively
};

struct KinematicSummary {
  double min_speed = 0.0;
  double max_speed = 0.0;
  double mean_speed = 0.0;
  MotionDescriptor descriptor = MotionDescriptor::stationary;
};

// Frame-by-frame greedy nearest-centroid association per instrument class.
// A track closes as soon as its class has no match at the next expected
// frame; unmatched detections open new tracks.
std::vector<InstrumentTrack> build_tracks(std::span<const EventTuple> tuples,
                                          const ClipManifest& clip, double gate = kDefaultGate);

// Every expected sample time in the window (t_start, t_start + period, ...)
// has a sample within kTimeEpsilon.
bool check_temporal_continuity(const InstrumentTrack& track, const QueryWindow& window);

// Every consecutive centroid displacement is <= max_step (inclusive).
bool check_spatial_continuity(const InstrumentTrack& track, double max_step = kDefaultMaxStep);
bool check_spatial_continuity(const InstrumentTrack& track, const QueryWindow& window,
                              double max_step = kDefaultMaxStep);

// Samples of `track` inside `window`.
InstrumentTrack slice(const InstrumentTrack& track, const QueryWindow& window);

MotionDescriptor classify_motion(double mean_speed, const MotionThresholds& thresholds = {});

// Speeds between consecutive samples in the window. Throws
// std::invalid_argument("window too short") with fewer than two samples.
KinematicSummary compute_kinematics(const InstrumentTrack& track, const QueryWindow& window,
                                    const MotionThresholds& thresholds = {});

// Maximal runs of identical (verb, target) for one instrument; a gap larger
// than the sampling period also ends a run.
std::vector<SemanticBlock> group_semantic_blocks(std::span<const EventTuple> tuples,
                                                 double sampling_period_s);

std::vector<EventTuple> track_tuples(const InstrumentTrack& track, std::string_view video_id = {});

enum class Direction { left, right, top, bottom };

const char* to_string(Direction d);
std::optional<Direction> direction_from_string(std::string_view s);

// Sample whose centroid is most extreme along `direction`; earliest on ties.
// Throws std::invalid_argument on an empty window.
TrackSample trajectory_extreme(const InstrumentTrack& track, const QueryWindow& window,
                               Direction direction);

struct TemporalSpan {
  TrackSample start;
  TrackSample end;
};

// First and last sample, optionally restricted to a window.
TemporalSpan temporal_window(const InstrumentTrack& track,
                             const std::optional<QueryWindow>& window = std::nullopt);

}  // namespace stqa
