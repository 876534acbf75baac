#include "stqa/event_model.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <stdexcept>
#include <string>

namespace stqa {

bool tuple_less(const EventTuple& a, const EventTuple& b) {
  if (a.fn != b.fn) return a.fn < b.fn;
  if (a.instrument != b.instrument) return a.instrument < b.instrument;
  if (a.bbox.x1 != b.bbox.x1) return a.bbox.x1 < b.bbox.x1;
  if (a.bbox.y1 != b.bbox.y1) return a.bbox.y1 < b.bbox.y1;
  if (a.bbox.x2 != b.bbox.x2) return a.bbox.x2 < b.bbox.x2;
  return a.bbox.y2 < b.bbox.y2;
}

nlohmann::json to_json(const ClipManifest& clip) {
  return {{"clip_id", clip.clip_id},
          {"source_video_id", clip.source_video_id},
          {"start_s", clip.start_s},
          {"end_s", clip.end_s},
          {"fps", clip.fps},
          {"duration_s", clip.duration_s()}};
}

ClipManifest clip_from_json(const nlohmann::json& doc) {
  ClipManifest clip;
  clip.clip_id = doc.at("clip_id").get<std::string>();
  clip.source_video_id = doc.at("source_video_id").get<std::string>();
  clip.start_s = doc.at("start_s").get<double>();
  clip.end_s = doc.at("end_s").get<double>();
  clip.fps = doc.at("fps").get<double>();
  if (!(clip.start_s < clip.end_s) || !(clip.fps > 0.0)) {
    throw std::invalid_argument("invalid clip manifest " + clip.clip_id);
  }
  return clip;
}

namespace {

std::optional<std::string> optional_label(const nlohmann::json& record, const char* key) {
  if (!record.contains(key) || record.at(key).is_null()) return std::nullopt;
  if (!record.at(key).is_string()) {
    throw std::invalid_argument(std::string("field '") + key + "' is not a string or null");
  }
  return record.at(key).get<std::string>();
}

std::string canonical_or_throw(const Vocabulary& vocab, const std::string& surface,
                               EntityKind kind) {
  auto label = vocab.lookup(surface, kind);
  if (!label) {
    throw std::invalid_argument(std::string("unknown ") + to_string(kind) + " label '" +
                                surface + "'");
  }
  return *label;
}

}  // namespace

EventTuple parse_annotation(const nlohmann::json& record, const Vocabulary& vocab,
                            std::int64_t default_frame_index) {
  if (!record.is_object()) throw std::invalid_argument("record is not an object");
  EventTuple tuple;
  if (record.contains("video_id")) {
    if (!record.at("video_id").is_string()) {
      throw std::invalid_argument("field 'video_id' is not a string");
    }
    tuple.video_id = record.at("video_id").get<std::string>();
  } else {
    tuple.video_id = "video";
  }
  if (!record.contains("fn") || !record.at("fn").is_number()) {
    throw std::invalid_argument("missing or non-numeric field 'fn'");
  }
  tuple.fn = record.at("fn").get<double>();
  if (!std::isfinite(tuple.fn) || tuple.fn < 0.0) {
    throw std::invalid_argument("fn must be a non-negative number");
  }
  if (!record.contains("instrument") || !record.at("instrument").is_string()) {
    throw std::invalid_argument("missing or non-string field 'instrument'");
  }
  tuple.instrument = canonical_or_throw(vocab, record.at("instrument").get<std::string>(),
                                        EntityKind::instrument);

  if (!record.contains("bbox") || !record.at("bbox").is_array() ||
      record.at("bbox").size() != 4) {
    throw std::invalid_argument("bbox must be an array of 4 numbers");
  }
  const auto& b = record.at("bbox");
  for (const auto& v : b) {
    if (!v.is_number()) throw std::invalid_argument("bbox must be an array of 4 numbers");
  }
  tuple.bbox = {b[0].get<double>(), b[1].get<double>(), b[2].get<double>(), b[3].get<double>()};
  if (auto violation = bbox_violation(tuple.bbox); !violation.empty()) {
    throw std::invalid_argument("bbox rejected: " + violation);
  }

  auto verb = optional_label(record, "verb");
  auto target = optional_label(record, "target");
  if (verb.has_value() != target.has_value()) {
    throw std::invalid_argument("verb and target must both be null or both be set");
  }
  if (verb) {
    tuple.verb = canonical_or_throw(vocab, *verb, EntityKind::verb);
    tuple.target = canonical_or_throw(vocab, *target, EntityKind::target);
  }

  if (record.contains("frame")) {
    if (!record.at("frame").is_number_integer()) {
      throw std::invalid_argument("field 'frame' is not an integer");
    }
    tuple.source_frame_index = record.at("frame").get<std::int64_t>();
  } else {
    tuple.source_frame_index = default_frame_index;
  }
  return tuple;
}

IngestResult ingest_annotations(std::istream& in, const Vocabulary& vocab) {
  IngestResult result;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    ++result.records;
    try {
      auto record = nlohmann::json::parse(line);
      auto tuple = parse_annotation(record, vocab, static_cast<std::int64_t>(line_no - 1));
      result.videos[tuple.video_id].push_back(std::move(tuple));
    } catch (const nlohmann::json::exception& e) {
      result.errors.push_back({line_no, std::string("malformed record: ") + e.what()});
    } catch (const std::invalid_argument& e) {
      result.errors.push_back({line_no, e.what()});
    }
  }
  for (auto& [_, tuples] : result.videos) {
    std::stable_sort(tuples.begin(), tuples.end(), tuple_less);
  }
  return result;
}

nlohmann::json to_json(const EventTuple& tuple) {
  nlohmann::json doc = {
      {"video_id", tuple.video_id},
      {"fn", tuple.fn},
      {"instrument", tuple.instrument},
      {"bbox", {tuple.bbox.x1, tuple.bbox.y1, tuple.bbox.x2, tuple.bbox.y2}},
      {"verb", nullptr},
      {"target", nullptr},
      {"frame", tuple.source_frame_index}};
  if (tuple.verb) doc["verb"] = *tuple.verb;
  if (tuple.target) doc["target"] = *tuple.target;
  return doc;
}

void emit_annotations(std::ostream& out, std::span<const EventTuple> tuples) {
  for (const auto& t : tuples) out << to_json(t).dump() << '\n';
}

std::vector<EventTuple> broadcast_sparse_labels(std::span<const EventTuple> tuples,
                                                double target_fps, double half_window_s) {
  if (!(target_fps > 0.0)) throw std::invalid_argument("target_fps must be positive");
  std::vector<EventTuple> out;
  if (tuples.empty()) return out;

  // Annotated frames: distinct fn values and the tuples at each.
  std::vector<double> frame_times;
  std::vector<std::pair<std::size_t, std::size_t>> frame_ranges;
  for (std::size_t i = 0; i < tuples.size();) {
    std::size_t j = i;
    while (j < tuples.size() && tuples[j].fn == tuples[i].fn) ++j;
    if (!frame_times.empty() && tuples[i].fn < frame_times.back()) {
      throw std::invalid_argument("broadcast_sparse_labels: tuples not sorted by fn");
    }
    frame_times.push_back(tuples[i].fn);
    frame_ranges.emplace_back(i, j);
    i = j;
  }

  double window = half_window_s;
  for (std::size_t i = 1; i < frame_times.size(); ++i) {
    window = std::min(window, (frame_times[i] - frame_times[i - 1]) / 2.0);
  }
  constexpr double kSlack = 1e-9;

  const auto k_first = static_cast<long long>(
      std::max(0.0, std::ceil((frame_times.front() - window) * target_fps - kSlack)));
  const auto k_last =
      static_cast<long long>(std::floor((frame_times.back() + window) * target_fps + kSlack));

  std::size_t cursor = 0;  // first annotated frame with time >= t - window
  for (long long k = k_first; k <= k_last; ++k) {
    const double t = static_cast<double>(k) / target_fps;
    while (cursor < frame_times.size() && frame_times[cursor] < t - window - kSlack) ++cursor;
    // Candidates are frame_times[cursor] and frame_times[cursor + 1]; the
    // earlier one wins ties.
    std::optional<std::size_t> best;
    double best_dist = 0.0;
    for (std::size_t c = cursor; c < frame_times.size() && c < cursor + 2; ++c) {
      const double d = std::abs(frame_times[c] - t);
      if (d > window + kSlack) continue;
      if (!best || d < best_dist) {
        best = c;
        best_dist = d;
      }
    }
    if (!best) continue;
    const auto [from, to] = frame_ranges[*best];
    for (std::size_t i = from; i < to; ++i) {
      EventTuple copy = tuples[i];
      copy.fn = t;
      out.push_back(std::move(copy));
    }
  }
  std::stable_sort(out.begin(), out.end(), tuple_less);
  return out;
}

std::vector<ClipManifest> segment_clips(std::string_view video_id, double video_duration_s,
                                        double fps, double max_len_s, double min_len_s) {
  if (video_duration_s < 0.0) throw std::invalid_argument("negative video duration");
  if (!(max_len_s > 0.0) || min_len_s > max_len_s) {
    throw std::invalid_argument("invalid clip length bounds");
  }
  constexpr double kSlack = 1e-9;
  std::vector<ClipManifest> clips;
  auto add = [&](double start, double end) {
    char id[32];
    std::snprintf(id, sizeof(id), "_c%03zu", clips.size());
    clips.push_back({std::string(video_id) + id, std::string(video_id), start, end, fps});
  };
  double start = 0.0;
  std::size_t n = 0;
  while (start + max_len_s <= video_duration_s + kSlack) {
    add(start, start + max_len_s);
    ++n;
    start = static_cast<double>(n) * max_len_s;
  }
  if (video_duration_s - start >= min_len_s - kSlack && video_duration_s - start > kSlack) {
    add(start, video_duration_s);
  }
  return clips;
}

double normalize_time(double t, const ClipManifest& clip) {
  if (t < clip.start_s - 1e-9 || t > clip.end_s + 1e-9) {
    throw std::out_of_range("time " + std::to_string(t) + " outside clip " + clip.clip_id);
  }
  const double r = (t - clip.start_s) / clip.duration_s();
  return std::clamp(r, 0.0, 1.0);
}

double denormalize_time(double fraction, const ClipManifest& clip) {
  return clip.start_s + std::clamp(fraction, 0.0, 1.0) * clip.duration_s();
}

std::vector<EventTuple> tuples_in_clip(std::span<const EventTuple> tuples,
                                       const ClipManifest& clip) {
  std::vector<EventTuple> out;
  for (const auto& t : tuples) {
    if (t.fn >= clip.start_s - 1e-9 && t.fn < clip.end_s - 1e-9) out.push_back(t);
  }
  return out;
}

}  // namespace stqa
