#include "stqa/tracks.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <stdexcept>
#include <tuple>

namespace stqa {

bool InstrumentTrack::covers(double t) const {
  return !samples.empty() && t >= start_t() - kTimeEpsilon && t <= end_t() + kTimeEpsilon;
}

const TrackSample* InstrumentTrack::sample_at(double t) const {
  auto it = std::lower_bound(samples.begin(), samples.end(), t - kTimeEpsilon,
                             [](const TrackSample& s, double v) { return s.t < v; });
  if (it == samples.end() || std::abs(it->t - t) > kTimeEpsilon) return nullptr;
  return &*it;
}

bool QueryWindow::contains(double t) const {
  return t >= t_start - kTimeEpsilon && t <= t_end + kTimeEpsilon;
}

const char* to_string(MotionDescriptor d) {
  switch (d) {
    case MotionDescriptor::stationary: return "stationary";
    case MotionDescriptor::moving_slowly: return "moving slowly";
    case MotionDescriptor::moving_actively: return "moving actively";
  }
  return "?";
}

std::optional<MotionDescriptor> motion_descriptor_from_string(std::string_view s) {
  if (s == "stationary") return MotionDescriptor::stationary;
  if (s == "moving slowly") return MotionDescriptor::moving_slowly;
  if (s == "moving actively") return MotionDescriptor::moving_actively;
  return std::nullopt;
}

const char* to_string(Direction d) {
  switch (d) {
    case Direction::left: return "left";
    case Direction::right: return "right";
    case Direction::top: return "top";
    case Direction::bottom: return "bottom";
  }
  return "?";
}

std::optional<Direction> direction_from_string(std::string_view s) {
  if (s == "left") return Direction::left;
  if (s == "right") return Direction::right;
  if (s == "top") return Direction::top;
  if (s == "bottom") return Direction::bottom;
  return std::nullopt;
}

namespace {

TrackSample make_sample(const EventTuple& tuple) {
  return {tuple.fn, tuple.bbox, tuple.bbox.centroid(), tuple.verb, tuple.target};
}

}  // namespace

std::vector<InstrumentTrack> build_tracks(std::span<const EventTuple> tuples,
                                          const ClipManifest& clip, double gate) {
  const double period = clip.frame_period_s();
  std::vector<InstrumentTrack> tracks;
  std::vector<std::size_t> open;  // indices into `tracks`

  for (std::size_t i = 0; i < tuples.size();) {
    std::size_t j = i;
    while (j < tuples.size() && std::abs(tuples[j].fn - tuples[i].fn) <= kTimeEpsilon) ++j;
    const double t = tuples[i].fn;

    // Tracks whose next expected frame is this one stay eligible; any other
    // open track has missed a frame and is closed.
    std::vector<std::size_t> eligible;
    for (std::size_t idx : open) {
      if (std::abs(tracks[idx].end_t() + period - t) <= kTimeEpsilon) eligible.push_back(idx);
    }

    struct Pair {
      double dist;
      int track_id;
      std::size_t track_idx;
      std::size_t det;
    };
    std::vector<Pair> pairs;
    for (std::size_t idx : eligible) {
      const auto& tr = tracks[idx];
      for (std::size_t d = i; d < j; ++d) {
        if (tuples[d].instrument != tr.instrument) continue;
        const double dist = distance(tr.samples.back().centroid, tuples[d].bbox.centroid());
        if (dist <= gate) pairs.push_back({dist, tr.track_id, idx, d});
      }
    }
    std::sort(pairs.begin(), pairs.end(), [](const Pair& a, const Pair& b) {
      return std::tie(a.dist, a.track_id, a.det) < std::tie(b.dist, b.track_id, b.det);
    });

    std::vector<bool> det_used(j - i, false);
    std::map<std::size_t, bool> track_used;
    for (const auto& p : pairs) {
      if (det_used[p.det - i] || track_used[p.track_idx]) continue;
      det_used[p.det - i] = true;
      track_used[p.track_idx] = true;
      tracks[p.track_idx].samples.push_back(make_sample(tuples[p.det]));
    }

    std::map<std::string, bool> class_has_unmatched_track;
    std::vector<std::size_t> still_open;
    for (std::size_t idx : eligible) {
      if (track_used[idx]) {
        still_open.push_back(idx);
      } else {
        class_has_unmatched_track[tracks[idx].instrument] = true;
      }
    }
    std::map<std::string, bool> class_has_unmatched_det;
    for (std::size_t d = i; d < j; ++d) {
      if (!det_used[d - i]) class_has_unmatched_det[tuples[d].instrument] = true;
    }
    for (std::size_t idx : eligible) {
      if (!track_used[idx] && class_has_unmatched_det[tracks[idx].instrument]) {
        tracks[idx].closed_by_gate_miss = true;
      }
    }
    for (std::size_t d = i; d < j; ++d) {
      if (det_used[d - i]) continue;
      InstrumentTrack tr;
      tr.track_id = static_cast<int>(tracks.size());
      tr.instrument = tuples[d].instrument;
      tr.sampling_period_s = period;
      tr.opened_by_gate_miss = class_has_unmatched_track[tr.instrument];
      tr.samples.push_back(make_sample(tuples[d]));
      still_open.push_back(tracks.size());
      tracks.push_back(std::move(tr));
    }
    open = std::move(still_open);
    i = j;
  }
  return tracks;
}

bool check_temporal_continuity(const InstrumentTrack& track, const QueryWindow& window) {
  if (track.samples.empty() || window.t_end < window.t_start) return false;
  const double period = track.sampling_period_s;
  const auto steps =
      static_cast<long long>(std::floor((window.t_end - window.t_start) / period + 1e-6));
  for (long long k = 0; k <= steps; ++k) {
    if (track.sample_at(window.t_start + static_cast<double>(k) * period) == nullptr) {
      return false;
    }
  }
  return true;
}

namespace {

constexpr double kStepSlack = 1e-12;

}  // namespace

bool check_spatial_continuity(const InstrumentTrack& track, double max_step) {
  for (std::size_t i = 1; i < track.samples.size(); ++i) {
    if (distance(track.samples[i - 1].centroid, track.samples[i].centroid) >
        max_step + kStepSlack) {
      return false;
    }
  }
  return true;
}

bool check_spatial_continuity(const InstrumentTrack& track, const QueryWindow& window,
                              double max_step) {
  return check_spatial_continuity(slice(track, window), max_step);
}

InstrumentTrack slice(const InstrumentTrack& track, const QueryWindow& window) {
  InstrumentTrack out = track;
  out.samples.clear();
  for (const auto& s : track.samples) {
    if (window.contains(s.t)) out.samples.push_back(s);
  }
  return out;
}

MotionDescriptor classify_motion(double mean_speed, const MotionThresholds& thresholds) {
  if (mean_speed < thresholds.slow) return MotionDescriptor::stationary;
  if (mean_speed < thresholds.active) return MotionDescriptor::moving_slowly;
  return MotionDescriptor::moving_actively;
}

KinematicSummary compute_kinematics(const InstrumentTrack& track, const QueryWindow& window,
                                    const MotionThresholds& thresholds) {
  const auto part = slice(track, window);
  if (part.samples.size() < 2) throw std::invalid_argument("window too short");
  KinematicSummary out;
  out.min_speed = std::numeric_limits<double>::infinity();
  out.max_speed = 0.0;
  double sum = 0.0;
  for (std::size_t i = 1; i < part.samples.size(); ++i) {
    const auto& a = part.samples[i - 1];
    const auto& b = part.samples[i];
    const double speed = distance(a.centroid, b.centroid) / (b.t - a.t);
    out.min_speed = std::min(out.min_speed, speed);
    out.max_speed = std::max(out.max_speed, speed);
    sum += speed;
  }
  out.mean_speed = sum / static_cast<double>(part.samples.size() - 1);
  // Keep min <= mean <= max under summation rounding.
  out.mean_speed = std::clamp(out.mean_speed, out.min_speed, out.max_speed);
  out.descriptor = classify_motion(out.mean_speed, thresholds);
  return out;
}

std::vector<SemanticBlock> group_semantic_blocks(std::span<const EventTuple> tuples,
                                                 double sampling_period_s) {
  std::vector<SemanticBlock> blocks;
  for (const auto& tuple : tuples) {
    const bool extend = !blocks.empty() && blocks.back().verb == tuple.verb &&
                        blocks.back().target == tuple.target &&
                        tuple.fn - blocks.back().window.t_end <= sampling_period_s + kTimeEpsilon;
    if (extend) {
      blocks.back().window.t_end = tuple.fn;
      ++blocks.back().sample_count;
    } else {
      blocks.push_back({tuple.instrument, tuple.verb, tuple.target, {tuple.fn, tuple.fn}, 1});
    }
  }
  return blocks;
}

std::vector<EventTuple> track_tuples(const InstrumentTrack& track, std::string_view video_id) {
  std::vector<EventTuple> out;
  out.reserve(track.samples.size());
  for (const auto& s : track.samples) {
    EventTuple t;
    t.video_id = std::string(video_id);
    t.fn = s.t;
    t.instrument = track.instrument;
    t.bbox = s.bbox;
    t.verb = s.verb;
    t.target = s.target;
    out.push_back(std::move(t));
  }
  return out;
}

TrackSample trajectory_extreme(const InstrumentTrack& track, const QueryWindow& window,
                               Direction direction) {
  const TrackSample* best = nullptr;
  auto key = [direction](const TrackSample& s) {
    switch (direction) {
      case Direction::left: return s.centroid.x;
      case Direction::right: return -s.centroid.x;
      case Direction::top: return s.centroid.y;
      case Direction::bottom: return -s.centroid.y;
    }
    return 0.0;
  };
  for (const auto& s : track.samples) {
    if (!window.contains(s.t)) continue;
    if (best == nullptr || key(s) < key(*best)) best = &s;
  }
  if (best == nullptr) throw std::invalid_argument("empty window");
  return *best;
}

TemporalSpan temporal_window(const InstrumentTrack& track,
                             const std::optional<QueryWindow>& window) {
  const auto part = window ? slice(track, *window) : track;
  if (part.samples.empty()) throw std::invalid_argument("empty track");
  return {part.samples.front(), part.samples.back()};
}

}  // namespace stqa
