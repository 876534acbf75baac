#include "stqa/qagen.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <exception>
#include <fstream>
#include <set>
#include <stdexcept>
#include <thread>

#include "stqa/format.hpp"

namespace stqa {

namespace {

constexpr double kEdge = 1e-9;

std::string frame_key(const ClipScene& scene, double t) {
  char buf[24];
  std::snprintf(buf, sizeof(buf), "f%05zu", scene.frame_index(t));
  return buf;
}

std::string window_key(const ClipScene& scene, const QueryWindow& w) {
  return frame_key(scene, w.t_start) + "-" + frame_key(scene, w.t_end);
}

std::string track_key(const InstrumentTrack& tr) { return "k" + std::to_string(tr.track_id); }

const SemanticBlock* block_covering(const ClipScene& scene, const InstrumentTrack& tr,
                                    const QueryWindow& w) {
  for (const auto& b : scene.blocks(tr.track_id)) {
    if (b.is_null()) continue;
    if (b.window.t_start <= w.t_start + kTimeEpsilon && w.t_end <= b.window.t_end + kTimeEpsilon) {
      return &b;
    }
  }
  return nullptr;
}

std::size_t samples_in(const InstrumentTrack& tr, const QueryWindow& w) {
  return static_cast<std::size_t>(std::count_if(tr.samples.begin(), tr.samples.end(),
                                                [&](const TrackSample& s) { return w.contains(s.t); }));
}

const TrackSample& sample_of(const InstrumentTrack& tr, double t) {
  const auto* s = tr.sample_at(t);
  if (s == nullptr) throw std::logic_error("query time not covered by track");
  return *s;
}

double axis_key(const Point& c, Direction d) {
  switch (d) {
    case Direction::left: return c.x;
    case Direction::right: return -c.x;
    case Direction::top: return c.y;
    case Direction::bottom: return -c.y;
  }
  return 0.0;
}

// The extreme is strictly better than every other in-window sample.
bool unique_extreme(const InstrumentTrack& tr, const QueryWindow& w, Direction d) {
  double best = std::numeric_limits<double>::infinity();
  double second = std::numeric_limits<double>::infinity();
  for (const auto& s : tr.samples) {
    if (!w.contains(s.t)) continue;
    const double k = axis_key(s.centroid, d);
    if (k < best) {
      second = best;
      best = k;
    } else if (k < second) {
      second = k;
    }
  }
  return std::isfinite(best) && second - best > kEdge;
}

bool near(double value, double edge) { return std::abs(value - edge) <= kEdge; }

bool kinematics_ok(const KinematicSummary& k, const MotionThresholds& th) {
  if (near_rounding_edge(k.min_speed, kSpeedDecimals) ||
      near_rounding_edge(k.max_speed, kSpeedDecimals) ||
      near_rounding_edge(k.mean_speed, kSpeedDecimals)) {
    return false;
  }
  return !near(k.mean_speed, th.slow) && !near(k.mean_speed, th.active);
}

std::string relation_change(double d1, double d2, double band) {
  const double diff = d2 - d1;
  if (diff < -band) return "closer";
  if (diff > band) return "further";
  return "unchanged";
}

Point box_center(const Box1000& box) { return to_unit(box).centroid(); }

double iou_unit(const BBox& a, const BBox& b) {
  const double ix = std::max(0.0, std::min(a.x2, b.x2) - std::max(a.x1, b.x1));
  const double iy = std::max(0.0, std::min(a.y2, b.y2) - std::max(a.y1, b.y1));
  const double inter = ix * iy;
  const double uni = a.area() + b.area() - inter;
  return uni > 0.0 ? inter / uni : 0.0;
}

// Visible tracks at t when every class is unique and every track passes the
// point filter; empty otherwise.
std::vector<const InstrumentTrack*> clean_unique_visible(const ClipScene& scene, double t) {
  auto vis = scene.tracks_at(t);
  std::set<std::string> names;
  for (const auto* tr : vis) {
    if (!names.insert(tr->instrument).second || scene.class_count(tr->instrument, t) != 1 ||
        !scene.point_clean(*tr, t)) {
      return {};
    }
  }
  std::sort(vis.begin(), vis.end(), [](const InstrumentTrack* a, const InstrumentTrack* b) {
    return a->instrument < b->instrument;
  });
  return vis;
}

QueryInfo point_query(const ClipScene& scene, const char* tag, double t,
                      const std::vector<const InstrumentTrack*>& tracks) {
  QueryInfo q;
  q.key = std::string(tag) + "|" + frame_key(scene, t);
  q.times_s = {t};
  for (const auto* tr : tracks) {
    q.key += "|" + track_key(*tr);
    q.instruments.push_back(tr->instrument);
    q.track_ids.push_back(tr->track_id);
  }
  return q;
}

QueryInfo window_query(const ClipScene& scene, const char* tag, const QueryWindow& w,
                       const std::vector<const InstrumentTrack*>& tracks) {
  QueryInfo q;
  q.key = std::string(tag) + "|" + window_key(scene, w);
  q.windows = {w};
  for (const auto* tr : tracks) {
    q.key += "|" + track_key(*tr);
    q.instruments.push_back(tr->instrument);
    q.track_ids.push_back(tr->track_id);
  }
  return q;
}

// Query box for closest_instrument: a jittered point near `anchor`,
// rendered as a small box. Returns nullopt when the answer would be
// ambiguous.
std::optional<Box1000> closest_query_box(const std::vector<const InstrumentTrack*>& vis,
                                         const TrackSample& anchor, double t,
                                         const GenerationConfig& cfg, Rng& rng) {
  const double h = cfg.query_box_half;
  const double px = std::clamp(anchor.centroid.x + rng.uniform(-cfg.query_jitter, cfg.query_jitter),
                               h, 1.0 - h);
  const double py = std::clamp(anchor.centroid.y + rng.uniform(-cfg.query_jitter, cfg.query_jitter),
                               h, 1.0 - h);
  const Box1000 qbox = quantize_bbox(BBox{px - h, py - h, px + h, py + h});
  const Point qc = box_center(qbox);
  std::vector<double> d;
  for (const auto* tr : vis) d.push_back(distance(qc, sample_of(*tr, t).centroid));
  std::sort(d.begin(), d.end());
  if (d.size() < 2 || d[1] - d[0] < cfg.closest_gap || near(d[1] - d[0], cfg.closest_gap)) {
    return std::nullopt;
  }
  return qbox;
}

}  // namespace

std::string horizontal_third(double x) {
  if (x < 1.0 / 3.0) return "left";
  if (x < 2.0 / 3.0) return "center";
  return "right";
}

std::string vertical_third(double y) {
  if (y < 1.0 / 3.0) return "top";
  if (y < 2.0 / 3.0) return "middle";
  return "bottom";
}

bool near_third_boundary(double x) { return near(x, 1.0 / 3.0) || near(x, 2.0 / 3.0); }

bool near_rounding_edge(double value, int decimals) {
  const double scaled = value * std::pow(10.0, decimals);
  const double frac = scaled - std::floor(scaled);
  return std::abs(frac - 0.5) < 1e-6;
}

std::string render_options(const std::vector<std::string>& options) {
  std::string out;
  for (std::size_t i = 0; i < options.size(); ++i) {
    if (i > 0) out += ' ';
    out += '(';
    out += static_cast<char>('A' + i);
    out += ") ";
    out += options[i];
  }
  return out;
}

int GenerationConfig::quota_for(Subtask subtask) const {
  const auto it = quotas.find(subtask);
  return it == quotas.end() ? default_quota : it->second;
}

std::uint64_t clip_seed(std::uint64_t master_seed, std::string_view clip_id) {
  return derive_seed(master_seed, clip_id);
}

std::vector<QueryInfo> enumerate_queries(const ClipScene& scene, Subtask subtask,
                                         const GenerationConfig& cfg, const Vocabulary& vocab,
                                         std::uint64_t seed) {
  std::vector<QueryInfo> out;
  const auto& times = scene.query_times();
  const auto windows = [&] { return scene.query_windows(cfg.window_lengths_s); };

  // Tracks usable for a single-instrument longitudinal query on w.
  const auto window_tracks = [&](const QueryWindow& w, std::size_t min_samples) {
    std::vector<const InstrumentTrack*> out_tracks;
    for (const auto& tr : scene.tracks()) {
      if (samples_in(tr, w) < min_samples) continue;
      if (!scene.window_clean(tr, w) || !scene.class_unique(tr.instrument, w)) continue;
      out_tracks.push_back(&tr);
    }
    return out_tracks;
  };

  switch (subtask) {
    case Subtask::temporal_window: {
      for (double t : times) {
        auto vis = scene.tracks_at(t);
        if (vis.empty()) continue;
        std::set<std::string> names;
        bool ok = true;
        for (const auto* tr : vis) {
          ok = ok && names.insert(tr->instrument).second &&
               scene.window_clean(*tr, {tr->start_t(), tr->end_t()});
        }
        if (!ok) continue;
        std::sort(vis.begin(), vis.end(), [](const auto* a, const auto* b) {
          return a->instrument < b->instrument;
        });
        out.push_back(point_query(scene, "tw", t, vis));
      }
      break;
    }
    case Subtask::locate:
    case Subtask::frame_segment:
    case Subtask::instrument_id: {
      for (double t : times) {
        const auto tuples = scene.tuples_at(t);
        for (const auto* tr : scene.tracks_at(t)) {
          if (!scene.point_clean(*tr, t)) continue;
          const auto& s = sample_of(*tr, t);
          if (subtask == Subtask::instrument_id) {
            const bool confusable = std::any_of(tuples.begin(), tuples.end(), [&](const auto* o) {
              return o->instrument != tr->instrument &&
                     iou_unit(o->bbox, s.bbox) >= cfg.instrument_id_iou;
            });
            if (confusable) continue;
          } else {
            if (scene.class_count(tr->instrument, t) != 1) continue;
            if (subtask == Subtask::frame_segment &&
                (near_third_boundary(s.centroid.x) || near_third_boundary(s.centroid.y))) {
              continue;
            }
          }
          const char* tag = subtask == Subtask::locate          ? "lo"
                            : subtask == Subtask::frame_segment ? "fs"
                                                                : "id";
          QueryInfo q = point_query(scene, tag, t, {tr});
          if (subtask == Subtask::instrument_id) q.query_box = quantize_bbox(s.bbox);
          out.push_back(std::move(q));
        }
      }
      break;
    }
    case Subtask::closest_instrument: {
      for (double t : times) {
        const auto vis = clean_unique_visible(scene, t);
        if (vis.size() < 2) continue;
        for (const auto* anchor : vis) {
          QueryInfo q = point_query(scene, "ci", t, vis);
          q.key += "|a" + std::to_string(anchor->track_id);
          Rng rng(derive_seed(seed, q.key));
          const auto qbox = closest_query_box(vis, sample_of(*anchor, t), t, cfg, rng);
          if (!qbox) continue;
          q.query_box = *qbox;
          out.push_back(std::move(q));
        }
      }
      break;
    }
    case Subtask::trajectory_extreme: {
      for (const auto& w : windows()) {
        for (const auto* tr : window_tracks(w, 2)) {
          for (auto d : {Direction::left, Direction::right, Direction::top, Direction::bottom}) {
            if (!unique_extreme(*tr, w, d)) continue;
            QueryInfo q = window_query(scene, "te", w, {tr});
            q.direction = to_string(d);
            q.key += std::string("|") + to_string(d);
            out.push_back(std::move(q));
          }
        }
      }
      break;
    }
    case Subtask::sequential_actions: {
      for (const auto& tr : scene.tracks()) {
        std::vector<const SemanticBlock*> live;
        for (const auto& b : scene.blocks(tr.track_id)) {
          if (!b.is_null()) live.push_back(&b);
        }
        for (std::size_t i = 0; i + 1 < live.size(); ++i) {
          const auto& b1 = *live[i];
          const auto& b2 = *live[i + 1];
          if (b2.window.t_start - b1.window.t_end > cfg.sequential_max_gap_s + kTimeEpsilon) continue;
          if (b1.verb == b2.verb && b1.target == b2.target) continue;
          if (!scene.is_query_time(b1.window.t_end)) continue;
          const QueryWindow span{b1.window.t_start, b2.window.t_start};
          if (!scene.window_clean(tr, span) || !scene.class_unique(tr.instrument, span)) continue;
          QueryInfo q;
          q.key = "sa|" + track_key(tr) + "|" + frame_key(scene, b1.window.t_end);
          q.times_s = {b1.window.t_end, b2.window.t_start};
          q.windows = {b1.window, b2.window};
          q.instruments = {tr.instrument};
          q.track_ids = {tr.track_id};
          out.push_back(std::move(q));
        }
      }
      break;
    }
    case Subtask::action_status:
    case Subtask::target_interaction: {
      const char* tag = subtask == Subtask::action_status ? "as" : "ti";
      for (const auto& w : windows()) {
        for (const auto* tr : window_tracks(w, 2)) {
          if (block_covering(scene, *tr, w) == nullptr) continue;
          out.push_back(window_query(scene, tag, w, {tr}));
        }
      }
      break;
    }
    case Subtask::relative_position: {
      for (double t : times) {
        const auto vis = scene.tracks_at(t);
        for (const auto* a : vis) {
          for (const auto* b : vis) {
            if (a == b || a->instrument == b->instrument) continue;
            if (scene.class_count(a->instrument, t) != 1 ||
                scene.class_count(b->instrument, t) != 1) {
              continue;
            }
            if (!scene.point_clean(*a, t) || !scene.point_clean(*b, t)) continue;
            const auto ca = sample_of(*a, t).centroid;
            const auto cb = sample_of(*b, t).centroid;
            if (std::abs(ca.x - cb.x) < cfg.axis_gap || std::abs(ca.y - cb.y) < cfg.axis_gap) {
              continue;
            }
            out.push_back(point_query(scene, "rp", t, {a, b}));
          }
        }
      }
      break;
    }
    case Subtask::relative_change:
    case Subtask::interaction_comparison: {
      const bool change = subtask == Subtask::relative_change;
      for (const auto& w : windows()) {
        const auto usable = window_tracks(w, 2);
        for (const auto* a : usable) {
          for (const auto* b : usable) {
            if (!(a->instrument < b->instrument)) continue;
            if (change) {
              const double d1 = distance(sample_of(*a, w.t_start).centroid,
                                         sample_of(*b, w.t_start).centroid);
              const double d2 =
                  distance(sample_of(*a, w.t_end).centroid, sample_of(*b, w.t_end).centroid);
              if (near(std::abs(d2 - d1), cfg.change_band)) continue;
            } else if (block_covering(scene, *a, w) == nullptr ||
                       block_covering(scene, *b, w) == nullptr) {
              continue;
            }
            out.push_back(window_query(scene, change ? "rc" : "ic", w, {a, b}));
          }
        }
      }
      break;
    }
    case Subtask::velocity:
    case Subtask::cot: {
      const auto min_samples = static_cast<std::size_t>(std::max(2, cfg.min_kinematic_samples));
      for (const auto& w : windows()) {
        for (const auto* tr : window_tracks(w, min_samples)) {
          const auto kin = compute_kinematics(*tr, w, cfg.thresholds);
          if (!kinematics_ok(kin, cfg.thresholds)) continue;
          if (subtask == Subtask::cot) {
            if (block_covering(scene, *tr, w) == nullptr) continue;
            const auto c = sample_of(*tr, w.t_start).centroid;
            if (near_third_boundary(c.x) || near_third_boundary(c.y)) continue;
          }
          out.push_back(window_query(scene, subtask == Subtask::cot ? "ct" : "ve", w, {tr}));
        }
      }
      break;
    }
    case Subtask::mc_existence:
    case Subtask::mc_counting: {
      const char* tag = subtask == Subtask::mc_existence ? "me" : "mn";
      for (double t : times) {
        for (const auto& name : vocab.instruments()) {
          QueryInfo q;
          q.key = std::string(tag) + "|" + frame_key(scene, t) + "|" + name;
          q.times_s = {t};
          q.instruments = {name};
          out.push_back(std::move(q));
        }
      }
      break;
    }
    case Subtask::mc_class: {
      for (double t : times) {
        const auto present = scene.classes_at(t);
        std::size_t absent = 0;
        for (const auto& name : vocab.instruments()) {
          if (!std::binary_search(present.begin(), present.end(), name)) ++absent;
        }
        if (absent < 3) continue;
        for (const auto& name : present) {
          QueryInfo q;
          q.key = "mc|" + frame_key(scene, t) + "|" + name;
          q.times_s = {t};
          q.instruments = {name};
          out.push_back(std::move(q));
        }
      }
      break;
    }
  }
  return out;
}

Payload compute_gold(const ClipScene& scene, Subtask subtask, const QueryInfo& q,
                     const GenerationConfig& cfg) {
  const auto track = [&](std::size_t i) -> const InstrumentTrack& {
    return scene.track(q.track_ids.at(i));
  };
  const auto time = [&](double t) { return scene.rounded_normalized(t); };

  switch (subtask) {
    case Subtask::temporal_window: {
      TemporalWindowPayload p;
      for (std::size_t i = 0; i < q.track_ids.size(); ++i) {
        const auto& tr = track(i);
        const auto span = temporal_window(tr);
        p.entries.push_back({tr.instrument, time(span.start.t), time(span.end.t),
                             quantize_bbox(span.start.bbox), quantize_bbox(span.end.bbox)});
      }
      return p;
    }
    case Subtask::locate: {
      const auto& tr = track(0);
      return LocatePayload{tr.instrument, quantize_bbox(sample_of(tr, q.times_s.at(0)).bbox)};
    }
    case Subtask::closest_instrument: {
      const Point qc = box_center(q.query_box.value());
      const InstrumentTrack* best = nullptr;
      double best_d = 0.0;
      for (std::size_t i = 0; i < q.track_ids.size(); ++i) {
        const double d = distance(qc, sample_of(track(i), q.times_s.at(0)).centroid);
        if (best == nullptr || d < best_d) {
          best = &track(i);
          best_d = d;
        }
      }
      if (best == nullptr) throw std::invalid_argument("closest_instrument query without candidate tracks");
      return EntityPayload{best->instrument};
    }
    case Subtask::instrument_id: return EntityPayload{track(0).instrument};
    case Subtask::frame_segment: {
      const auto c = sample_of(track(0), q.times_s.at(0)).centroid;
      return SegmentPayload{track(0).instrument, horizontal_third(c.x), vertical_third(c.y)};
    }
    case Subtask::trajectory_extreme: {
      const auto d = direction_from_string(q.direction.value()).value();
      const auto s = trajectory_extreme(track(0), q.windows.at(0), d);
      return ExtremePayload{track(0).instrument, to_string(d), time(s.t), quantize_bbox(s.bbox)};
    }
    case Subtask::sequential_actions: {
      const auto& s = sample_of(track(0), q.times_s.at(1));
      return InteractionPayload{track(0).instrument, s.verb, s.target};
    }
    case Subtask::action_status:
    case Subtask::target_interaction: {
      const auto* b = block_covering(scene, track(0), q.windows.at(0));
      if (b == nullptr) throw std::logic_error("no interaction block for query");
      InteractionPayload p{track(0).instrument, std::nullopt, std::nullopt};
      if (subtask == Subtask::action_status) {
        p.verb = b->verb;
      } else {
        p.target = b->target;
      }
      return p;
    }
    case Subtask::relative_position: {
      const auto ca = sample_of(track(0), q.times_s.at(0)).centroid;
      const auto cb = sample_of(track(1), q.times_s.at(0)).centroid;
      return RelativePositionPayload{track(0).instrument, track(1).instrument,
                                     ca.x > cb.x ? "right" : "left",
                                     ca.y > cb.y ? "below" : "above"};
    }
    case Subtask::relative_change: {
      const auto& w = q.windows.at(0);
      const double d1 =
          distance(sample_of(track(0), w.t_start).centroid, sample_of(track(1), w.t_start).centroid);
      const double d2 =
          distance(sample_of(track(0), w.t_end).centroid, sample_of(track(1), w.t_end).centroid);
      return RelativeChangePayload{track(0).instrument, track(1).instrument,
                                   relation_change(d1, d2, cfg.change_band)};
    }
    case Subtask::interaction_comparison: {
      const auto* b1 = block_covering(scene, track(0), q.windows.at(0));
      const auto* b2 = block_covering(scene, track(1), q.windows.at(0));
      if (b1 == nullptr || b2 == nullptr) throw std::logic_error("no interaction block for query");
      const bool same = b1->verb == b2->verb && b1->target == b2->target;
      return InteractionComparisonPayload{track(0).instrument, track(1).instrument,
                                          same ? "same" : "different", b1->verb, b1->target,
                                          b2->verb, b2->target};
    }
    case Subtask::velocity: {
      const auto k = compute_kinematics(track(0), q.windows.at(0), cfg.thresholds);
      return VelocityPayload{track(0).instrument, round_speed(k.min_speed),
                             round_speed(k.max_speed), round_speed(k.mean_speed),
                             to_string(k.descriptor)};
    }
    case Subtask::cot: {
      const auto& tr = track(0);
      const auto& w = q.windows.at(0);
      const auto& s = sample_of(tr, w.t_start);
      const auto k = compute_kinematics(tr, w, cfg.thresholds);
      const auto* b = block_covering(scene, tr, w);
      if (b == nullptr) throw std::logic_error("no interaction block for query");
      CotPayload p;
      p.instrument = tr.instrument;
      p.horizontal = horizontal_third(s.centroid.x);
      p.vertical = vertical_third(s.centroid.y);
      p.box = quantize_bbox(s.bbox);
      p.descriptor = to_string(k.descriptor);
      p.mean_speed = round_speed(k.mean_speed);
      p.verb = b->verb;
      p.target = b->target;
      p.conclusion_instrument = tr.instrument;
      p.conclusion_verb = b->verb;
      p.conclusion_target = b->target;
      return p;
    }
    case Subtask::mc_existence:
    case Subtask::mc_class:
    case Subtask::mc_counting: break;
  }
  throw std::invalid_argument(std::string("compute_gold: no scene gold for ") + to_string(subtask));
}

namespace {

// Options in letter order plus the index of the correct one.
struct Choices {
  std::vector<std::string> options;
  std::size_t correct = 0;
};

std::optional<Choices> make_choices(const ClipScene& scene, Subtask subtask, const QueryInfo& q,
                                    const Vocabulary& vocab, Rng& rng) {
  const double t = q.times_s.at(0);
  const std::string& name = q.instruments.at(0);
  std::string right;
  std::vector<std::string> distractors;
  if (subtask == Subtask::mc_existence) {
    const bool present = scene.class_count(name, t) > 0;
    right = present ? "yes" : "no";
    distractors = {present ? "no" : "yes"};
  } else if (subtask == Subtask::mc_class) {
    const auto present = scene.classes_at(t);
    if (!std::binary_search(present.begin(), present.end(), name)) return std::nullopt;
    right = name;
    std::vector<std::string> pool;
    for (const auto& c : vocab.instruments()) {
      if (!std::binary_search(present.begin(), present.end(), c)) pool.push_back(c);
    }
    std::sort(pool.begin(), pool.end());
    if (pool.size() < 3) return std::nullopt;
    rng.shuffle(std::span(pool));
    distractors.assign(pool.begin(), pool.begin() + 3);
  } else {
    const int count = scene.class_count(name, t);
    right = std::to_string(count);
    std::vector<std::string> pool;
    for (int off : {-2, -1, 1, 2}) {
      if (count + off >= 0) pool.push_back(std::to_string(count + off));
    }
    if (pool.size() < 2) return std::nullopt;
    rng.shuffle(std::span(pool));
    distractors.assign(pool.begin(), pool.begin() + std::min<std::size_t>(3, pool.size()));
  }
  Choices c;
  c.options = distractors;
  c.options.push_back(right);
  rng.shuffle(std::span(c.options));
  c.correct = static_cast<std::size_t>(
      std::find(c.options.begin(), c.options.end(), right) - c.options.begin());
  return c;
}

bool is_choice(Subtask s) {
  return s == Subtask::mc_existence || s == Subtask::mc_class || s == Subtask::mc_counting;
}

}  // namespace

std::optional<QASample> instantiate(const ClipScene& scene, Subtask subtask, const QueryInfo& q,
                                    const TemplateRegistry& registry, const Vocabulary& vocab,
                                    const GenerationConfig& cfg, Rng& rng) {
  const auto candidates = registry.for_subtask(subtask);
  if (candidates.empty()) return std::nullopt;
  const TaskTemplate& tmpl = *candidates[rng.index(candidates.size())];

  QASample sample;
  sample.clip_id = scene.clip().clip_id;
  sample.core_task = core_task_of(subtask);
  sample.subtask = subtask;

  FieldMap qf;
  if (!q.times_s.empty()) qf["t"] = scene.render_time(q.times_s.front());
  if (!q.windows.empty()) {
    qf["t1"] = scene.render_time(q.windows.front().t_start);
    qf["t2"] = scene.render_time(q.windows.front().t_end);
  }
  if (!q.instruments.empty()) qf["name"] = q.instruments.front();
  if (q.instruments.size() >= 2) {
    qf["name1"] = q.instruments[0];
    qf["name2"] = q.instruments[1];
  }
  if (q.direction) qf["direction"] = *q.direction;
  if (q.query_box) qf["query_box"] = render_box(*q.query_box);

  if (is_choice(subtask)) {
    auto choices = make_choices(scene, subtask, q, vocab, rng);
    if (!choices) return std::nullopt;
    sample.options = std::move(choices->options);
    qf["options"] = render_options(sample.options);
    sample.gold = ChoicePayload{std::string(1, static_cast<char>('A' + choices->correct)),
                                sample.options[choices->correct]};
  } else {
    sample.gold = compute_gold(scene, subtask, q, cfg);
  }

  switch (subtask) {
    case Subtask::temporal_window:
      break;
    case Subtask::closest_instrument:
      qf.erase("name");
      break;
    case Subtask::instrument_id:
      qf["box"] = render_box(q.query_box.value());
      qf.erase("name");
      break;
    case Subtask::sequential_actions: {
      const auto& s = sample_of(scene.track(q.track_ids.at(0)), q.times_s.at(0));
      qf["current_verb"] = s.verb.value();
      qf["current_target"] = s.target.value();
      break;
    }
    default:
      break;
  }

  sample.question = render_question(tmpl, qf);
  sample.answer = render_answer(tmpl, sample.gold);
  sample.provenance.template_id = tmpl.template_id;
  sample.provenance.source_video_id = scene.clip().source_video_id;
  sample.provenance.reconstructed = tmpl.reconstructed;
  sample.provenance.query = q;
  return sample;
}

std::vector<QASample> generate_clip(const ClipScene& scene, const TemplateRegistry& registry,
                                    const Vocabulary& vocab, const GenerationConfig& cfg,
                                    std::vector<Shortfall>* shortfalls) {
  std::vector<QASample> out;
  const auto seed = clip_seed(cfg.master_seed, scene.clip().clip_id);
  for (auto st : kAllSubtasks) {
    const int quota = cfg.quota_for(st);
    if (quota <= 0) continue;
    auto queries = enumerate_queries(scene, st, cfg, vocab, seed);
    Rng select(derive_seed(seed, std::string("select|") + to_string(st)));
    select.shuffle(std::span(queries));
    int produced = 0;
    for (const auto& q : queries) {
      if (produced >= quota) break;
      const auto sample_seed = derive_seed(seed, std::string(to_string(st)) + "|" + q.key);
      Rng rng(sample_seed);
      auto sample = instantiate(scene, st, q, registry, vocab, cfg, rng);
      if (!sample) continue;
      char idx[16];
      std::snprintf(idx, sizeof(idx), "%04d", produced);
      sample->sample_id = scene.clip().clip_id + "/" + to_string(st) + "/" + idx;
      sample->provenance.seed = sample_seed;
      out.push_back(std::move(*sample));
      ++produced;
    }
    if (produced < quota && shortfalls != nullptr) {
      shortfalls->push_back({scene.clip().clip_id, st, quota, produced, queries.size()});
    }
  }
  return out;
}

GenerationResult generate_dataset(std::span<const ClipInput> clips,
                                  const TemplateRegistry& registry, const Vocabulary& vocab,
                                  const GenerationConfig& cfg) {
  {
    std::set<std::string> ids;
    for (const auto& c : clips) {
      if (!ids.insert(c.clip.clip_id).second) {
        throw std::invalid_argument("duplicate clip id " + c.clip.clip_id);
      }
    }
  }
  std::vector<std::vector<QASample>> per_clip(clips.size());
  std::vector<std::vector<Shortfall>> per_clip_short(clips.size());
  std::vector<std::exception_ptr> errors(clips.size());
  std::atomic<std::size_t> next{0};

  const auto worker = [&] {
    for (std::size_t i = next++; i < clips.size(); i = next++) {
      try {
        const ClipScene scene(clips[i].clip, clips[i].tuples, cfg.scene);
        per_clip[i] = generate_clip(scene, registry, vocab, cfg, &per_clip_short[i]);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  const unsigned n_threads =
      std::max(1u, std::min<unsigned>(cfg.threads, static_cast<unsigned>(clips.size())));
  if (n_threads == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (unsigned i = 0; i < n_threads; ++i) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }

  GenerationResult result;
  for (std::size_t i = 0; i < clips.size(); ++i) {
    for (auto& s : per_clip[i]) result.samples.push_back(std::move(s));
    for (auto& s : per_clip_short[i]) result.shortfalls.push_back(std::move(s));
  }
  std::sort(result.samples.begin(), result.samples.end(),
            [](const QASample& a, const QASample& b) { return a.sample_id < b.sample_id; });
  return result;
}

const char* to_string(ExemplarLevel level) {
  switch (level) {
    case ExemplarLevel::subtask: return "subtask";
    case ExemplarLevel::core_task: return "core_task";
    case ExemplarLevel::core_task_same_video: return "core_task_same_video";
  }
  return "?";
}

Exemplar retrieve_icl_exemplar(const QASample& test, std::span<const QASample> pool,
                               std::uint64_t seed) {
  const auto pick = [&](auto&& pred) -> const QASample* {
    std::vector<const QASample*> matches;
    for (const auto& s : pool) {
      if (s.sample_id != test.sample_id && pred(s)) matches.push_back(&s);
    }
    if (matches.empty()) return nullptr;
    std::sort(matches.begin(), matches.end(),
              [](const QASample* a, const QASample* b) { return a->sample_id < b->sample_id; });
    Rng rng(derive_seed(seed, test.sample_id));
    return matches[rng.index(matches.size())];
  };
  const auto& video = test.provenance.source_video_id;
  if (const auto* s = pick([&](const QASample& c) {
        return c.subtask == test.subtask && c.provenance.source_video_id != video;
      })) {
    return {s, ExemplarLevel::subtask};
  }
  if (const auto* s = pick([&](const QASample& c) {
        return c.core_task == test.core_task && c.provenance.source_video_id != video;
      })) {
    return {s, ExemplarLevel::core_task};
  }
  if (const auto* s = pick([&](const QASample& c) { return c.core_task == test.core_task; })) {
    return {s, ExemplarLevel::core_task_same_video};
  }
  throw std::invalid_argument("no exemplar with core task " + std::string(to_string(test.core_task)) +
                              " for " + test.sample_id);
}

namespace {

nlohmann::json query_to_json(const QueryInfo& q) {
  nlohmann::json windows = nlohmann::json::array();
  for (const auto& w : q.windows) windows.push_back({w.t_start, w.t_end});
  nlohmann::json j = {{"key", q.key},
                      {"times_s", q.times_s},
                      {"windows", windows},
                      {"instruments", q.instruments},
                      {"track_ids", q.track_ids}};
  if (q.query_box) j["query_box"] = q.query_box->as_array();
  if (q.direction) j["direction"] = *q.direction;
  return j;
}

QueryInfo query_from_json(const nlohmann::json& j) {
  QueryInfo q;
  q.key = j.value("key", std::string());
  q.times_s = j.value("times_s", std::vector<double>{});
  for (const auto& w : j.value("windows", nlohmann::json::array())) {
    q.windows.push_back({w.at(0).get<double>(), w.at(1).get<double>()});
  }
  q.instruments = j.value("instruments", std::vector<std::string>{});
  q.track_ids = j.value("track_ids", std::vector<int>{});
  if (j.contains("query_box")) {
    const auto a = j["query_box"].get<std::array<int, 4>>();
    q.query_box = Box1000{a[0], a[1], a[2], a[3]};
  }
  if (j.contains("direction")) q.direction = j["direction"].get<std::string>();
  return q;
}

}  // namespace

nlohmann::json to_json(const QASample& s) {
  nlohmann::json j = {{"sample_id", s.sample_id},
                      {"clip_id", s.clip_id},
                      {"core_task", to_string(s.core_task)},
                      {"subtask", to_string(s.subtask)},
                      {"question", s.question},
                      {"answer", s.answer},
                      {"gold", payload_to_json(s.gold)}};
  if (!s.options.empty()) j["options"] = s.options;
  j["provenance"] = {{"template_id", s.provenance.template_id},
                     {"seed", s.provenance.seed},
                     {"source_video_id", s.provenance.source_video_id},
                     {"reconstructed", s.provenance.reconstructed},
                     {"query", query_to_json(s.provenance.query)}};
  return j;
}

QASample sample_from_json(const nlohmann::json& j) {
  QASample s;
  s.sample_id = j.at("sample_id").get<std::string>();
  s.clip_id = j.at("clip_id").get<std::string>();
  const auto sub = subtask_from_string(j.at("subtask").get<std::string>());
  if (!sub) throw std::invalid_argument(s.sample_id + ": unknown subtask");
  s.subtask = *sub;
  s.core_task = core_task_of(*sub);
  if (j.contains("core_task") && j["core_task"].get<std::string>() != to_string(s.core_task)) {
    throw std::invalid_argument(s.sample_id + ": core_task does not match subtask");
  }
  s.question = j.at("question").get<std::string>();
  s.answer = j.at("answer").get<std::string>();
  s.options = j.value("options", std::vector<std::string>{});
  s.gold = payload_from_json(*sub, j.at("gold"));
  if (j.contains("provenance")) {
    const auto& p = j["provenance"];
    s.provenance.template_id = p.value("template_id", std::string());
    s.provenance.seed = p.value("seed", std::uint64_t{0});
    s.provenance.source_video_id = p.value("source_video_id", std::string());
    s.provenance.reconstructed = p.value("reconstructed", false);
    if (p.contains("query")) s.provenance.query = query_from_json(p["query"]);
  }
  return s;
}

void emit_dataset(std::ostream& out, std::vector<QASample> samples) {
  std::sort(samples.begin(), samples.end(),
            [](const QASample& a, const QASample& b) { return a.sample_id < b.sample_id; });
  for (const auto& s : samples) out << to_json(s).dump() << '\n';
}

void emit_dataset(const std::filesystem::path& path, std::vector<QASample> samples) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  emit_dataset(out, std::move(samples));
  if (!out) throw std::runtime_error("write failed for " + path.string());
}

std::vector<QASample> load_dataset(std::istream& in) {
  std::vector<QASample> out;
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    ++n;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      out.push_back(sample_from_json(nlohmann::json::parse(line)));
    } catch (const std::exception& e) {
      throw std::invalid_argument("dataset line " + std::to_string(n) + ": " + e.what());
    }
  }
  return out;
}

std::vector<QASample> load_dataset(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open dataset " + path.string());
  return load_dataset(in);
}

}  // namespace stqa
