#include "stqa/scene.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "stqa/format.hpp"

namespace stqa {

ClipScene::ClipScene(ClipManifest clip, std::vector<EventTuple> tuples,
                     const SceneOptions& options)
    : clip_(std::move(clip)), tuples_(std::move(tuples)), options_(options) {
  std::sort(tuples_.begin(), tuples_.end(), tuple_less);
  const double frames = clip_.duration_s() * clip_.fps;
  frame_count_ = static_cast<std::size_t>(std::max(0.0, std::ceil(frames - 1e-6)));

  for (std::size_t i = 0; i < tuples_.size(); ++i) {
    by_frame_[frame_index(tuples_[i].fn)].push_back(i);
  }

  tracks_ = build_tracks(tuples_, clip_, options_.gate);
  blocks_.reserve(tracks_.size());
  for (const auto& tr : tracks_) {
    const auto tt = track_tuples(tr, clip_.source_video_id);
    blocks_.push_back(group_semantic_blocks(tt, tr.sampling_period_s));
  }

  for (std::size_t k = 0; k < frame_count_; ++k) {
    const double t = frame_time(k);
    if (frame_index(denormalize_time(rounded_normalized(t), clip_)) == k) {
      query_times_.push_back(t);
    }
  }
}

double ClipScene::frame_time(std::size_t k) const {
  return clip_.start_s + static_cast<double>(k) * clip_.frame_period_s();
}

std::size_t ClipScene::frame_index(double t) const {
  if (frame_count_ == 0) return 0;
  const double k = std::round((t - clip_.start_s) * clip_.fps);
  if (k <= 0.0) return 0;
  return std::min(static_cast<std::size_t>(k), frame_count_ - 1);
}

bool ClipScene::is_query_time(double t) const {
  return std::any_of(query_times_.begin(), query_times_.end(),
                     [t](double q) { return std::abs(q - t) <= kTimeEpsilon; });
}

std::vector<QueryWindow> ClipScene::query_windows(const std::vector<double>& lengths_s) const {
  std::vector<QueryWindow> out;
  std::set<std::pair<std::size_t, std::size_t>> seen;
  for (std::size_t i = 0; i < query_times_.size(); ++i) {
    for (double len : lengths_s) {
      const double want = query_times_[i] + len;
      auto it = std::min_element(query_times_.begin(), query_times_.end(),
                                 [want](double a, double b) {
                                   return std::abs(a - want) < std::abs(b - want);
                                 });
      const auto j = static_cast<std::size_t>(it - query_times_.begin());
      if (j <= i || std::abs(*it - want) > len / 2.0) continue;
      if (seen.emplace(i, j).second) out.push_back({query_times_[i], query_times_[j]});
    }
  }
  return out;
}

std::vector<const EventTuple*> ClipScene::tuples_at(double t) const {
  std::vector<const EventTuple*> out;
  const auto it = by_frame_.find(frame_index(t));
  if (it == by_frame_.end()) return out;
  for (std::size_t i : it->second) {
    if (std::abs(tuples_[i].fn - t) <= kTimeEpsilon) out.push_back(&tuples_[i]);
  }
  return out;
}

std::vector<const InstrumentTrack*> ClipScene::tracks_at(double t) const {
  std::vector<const InstrumentTrack*> out;
  for (const auto& tr : tracks_) {
    if (tr.sample_at(t) != nullptr) out.push_back(&tr);
  }
  return out;
}

int ClipScene::class_count(std::string_view instrument, double t) const {
  int n = 0;
  for (const auto* tuple : tuples_at(t)) {
    if (tuple->instrument == instrument) ++n;
  }
  return n;
}

std::vector<std::string> ClipScene::classes_at(double t) const {
  std::set<std::string> names;
  for (const auto* tuple : tuples_at(t)) names.insert(tuple->instrument);
  return {names.begin(), names.end()};
}

bool ClipScene::class_unique(std::string_view instrument, const QueryWindow& window) const {
  const std::size_t first = frame_index(window.t_start);
  const std::size_t last = frame_index(window.t_end);
  for (std::size_t k = first; k <= last && k < frame_count_; ++k) {
    if (class_count(instrument, frame_time(k)) > 1) return false;
  }
  return true;
}

bool ClipScene::window_clean(const InstrumentTrack& track, const QueryWindow& window) const {
  if (!check_temporal_continuity(track, window)) return false;
  if (!check_spatial_continuity(track, window, options_.max_step)) return false;
  if (track.opened_by_gate_miss && window.contains(track.start_t())) return false;
  if (track.closed_by_gate_miss && window.contains(track.end_t())) return false;
  return true;
}

bool ClipScene::point_clean(const InstrumentTrack& track, double t) const {
  if (track.sample_at(t) == nullptr) return false;
  const double p = clip_.frame_period_s();
  const double last_frame = frame_time(frame_count_ == 0 ? 0 : frame_count_ - 1);
  QueryWindow w{std::max({t - p, clip_.start_s, track.start_t()}),
                std::min({t + p, last_frame, track.end_t()})};
  return window_clean(track, w);
}

double ClipScene::normalized(double t) const { return normalize_time(t, clip_); }

double ClipScene::rounded_normalized(double t) const { return round_timestamp(normalized(t)); }

std::string ClipScene::render_time(double t) const {
  return fixed(rounded_normalized(t), kTimestampDecimals);
}

}  // namespace stqa
