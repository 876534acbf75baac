#pragma once

#include <cstddef>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "stqa/event_model.hpp"
#include "stqa/tracks.hpp"

namespace stqa {

struct SceneOptions {
  double max_step = kDefaultMaxStep;
  double gate = kDefaultGate;
};

// Everything the generators need to know about one clip: its tracks, their
// semantic blocks, and a per-frame index of the raw tuples.
class ClipScene {
 public:
  ClipScene(ClipManifest clip, std::vector<EventTuple> tuples, const SceneOptions& options = {});

  const ClipManifest& clip() const { return clip_; }
  const std::vector<EventTuple>& tuples() const { return tuples_; }
  const std::vector<InstrumentTrack>& tracks() const { return tracks_; }
  const InstrumentTrack& track(int track_id) const { return tracks_.at(track_id); }
  // Semantic blocks of one track, in time order.
  const std::vector<SemanticBlock>& blocks(int track_id) const { return blocks_.at(track_id); }

  std::size_t frame_count() const { return frame_count_; }
  double frame_time(std::size_t k) const;
  // Nearest frame index to time t, clamped to the clip.
  std::size_t frame_index(double t) const;

  // Frames whose rendered 2-decimal timestamp maps back to themselves, so a
  // question quoting that timestamp names exactly one frame.
  const std::vector<double>& query_times() const { return query_times_; }
  bool is_query_time(double t) const;

  // Windows between query times: for each start, the query time nearest to
  // start + L for every L in lengths_s.
  std::vector<QueryWindow> query_windows(const std::vector<double>& lengths_s) const;

  // Tuples annotated at frame time t.
  std::vector<const EventTuple*> tuples_at(double t) const;
  std::vector<const InstrumentTrack*> tracks_at(double t) const;
  int class_count(std::string_view instrument, double t) const;
  // Sorted, unique instrument classes at t.
  std::vector<std::string> classes_at(double t) const;
  // At most one instance of the class at every frame of the window.
  bool class_unique(std::string_view instrument, const QueryWindow& window) const;

  // Continuity filter for a longitudinal query on `window`: temporal and
  // spatial continuity, and the window touches no track boundary that was
  // produced by an association gate miss.
  bool window_clean(const InstrumentTrack& track, const QueryWindow& window) const;
  // Point queries are checked over [t - p, t + p] clipped to the clip and
  // the track span (p = frame period).
  bool point_clean(const InstrumentTrack& track, double t) const;

  double normalized(double t) const;         // exact
  double rounded_normalized(double t) const;  // as rendered
  std::string render_time(double t) const;

  double max_step() const { return options_.max_step; }

 private:
  ClipManifest clip_;
  std::vector<EventTuple> tuples_;
  SceneOptions options_;
  std::vector<InstrumentTrack> tracks_;
  std::vector<std::vector<SemanticBlock>> blocks_;
  std::size_t frame_count_ = 0;
  std::map<std::size_t, std::vector<std::size_t>> by_frame_;
  std::vector<double> query_times_;
};

}  // namespace stqa
