#include "stqa/pipeline.hpp"

#include <algorithm>
#include <stdexcept>
#include <string>

namespace stqa {

std::vector<ClipInput> ingest_stream(std::istream& in, const Config& config,
                                     const Vocabulary& vocab, IngestSummary* summary) {
  const IngestResult raw = ingest_annotations(in, vocab);
  IngestSummary s;
  s.records = raw.records;
  s.rejected = raw.errors.size();
  s.errors = raw.errors;
  s.videos = raw.videos.size();

  std::vector<ClipInput> out;
  for (const auto& [video, tuples] : raw.videos) {
    const auto dense =
        broadcast_sparse_labels(tuples, config.fps, config.broadcast_half_window_s);
    if (dense.empty()) continue;
    const double duration = dense.back().fn + 1.0 / config.fps;
    for (auto& clip :
         segment_clips(video, duration, config.fps, config.clip_max_s, config.clip_min_s)) {
      ClipInput ci{clip, tuples_in_clip(dense, clip)};
      s.tuples += ci.tuples.size();
      out.push_back(std::move(ci));
    }
  }
  s.clips = out.size();
  if (summary != nullptr) *summary = std::move(s);
  return out;
}

void write_store(std::ostream& out, std::span<const ClipInput> clips) {
  for (const auto& c : clips) {
    nlohmann::json tuples = nlohmann::json::array();
    for (const auto& t : c.tuples) tuples.push_back(to_json(t));
    out << nlohmann::json{{"clip", to_json(c.clip)}, {"tuples", tuples}}.dump() << '\n';
  }
}

std::vector<ClipInput> read_store(std::istream& in, const Vocabulary& vocab) {
  std::vector<ClipInput> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      const auto doc = nlohmann::json::parse(line);
      ClipInput ci;
      ci.clip = clip_from_json(doc.at("clip"));
      for (const auto& t : doc.at("tuples")) {
        ci.tuples.push_back(parse_annotation(t, vocab, 0));
      }
      out.push_back(std::move(ci));
    } catch (const std::exception& e) {
      throw std::invalid_argument("clip store line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  return out;
}

std::vector<ExemplarRecord> map_exemplars(std::span<const QASample> dataset,
                                          const std::set<std::string>& test_videos,
                                          std::uint64_t seed) {
  std::vector<QASample> pool;
  std::vector<const QASample*> tests;
  for (const auto& s : dataset) {
    if (test_videos.count(s.provenance.source_video_id)) {
      tests.push_back(&s);
    } else {
      pool.push_back(s);
    }
  }
  if (pool.empty()) throw std::invalid_argument("empty train pool");
  std::sort(tests.begin(), tests.end(),
            [](const QASample* a, const QASample* b) { return a->sample_id < b->sample_id; });
  std::vector<ExemplarRecord> out;
  out.reserve(tests.size());
  for (const auto* t : tests) {
    const auto ex = retrieve_icl_exemplar(*t, pool, seed);
    out.push_back({t->sample_id, ex.sample->sample_id, ex.level});
  }
  return out;
}

nlohmann::json to_json(const ExemplarRecord& r) {
  return {{"test_id", r.test_id}, {"exemplar_id", r.exemplar_id}, {"level", to_string(r.level)}};
}

std::map<std::string, std::string> read_predictions(std::istream& in) {
  std::map<std::string, std::string> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const std::string where = "predictions line " + std::to_string(lineno);
    nlohmann::json doc;
    try {
      doc = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw std::invalid_argument(where + ": " + e.what());
    }
    if (!doc.is_object() || !doc.contains("sample_id") || !doc["sample_id"].is_string() ||
        !doc.contains("output") || !doc["output"].is_string()) {
      throw std::invalid_argument(where + ": expected {\"sample_id\": string, \"output\": string}");
    }
    const auto id = doc["sample_id"].get<std::string>();
    if (!out.emplace(id, doc["output"].get<std::string>()).second) {
      throw std::invalid_argument(where + ": duplicate prediction id " + id);
    }
  }
  return out;
}

std::vector<SampleScore> evaluate_predictions(std::span<const QASample> dataset,
                                              const std::map<std::string, std::string>& predictions,
                                              const Vocabulary& vocab,
                                              const MetricWeights& weights) {
  std::vector<const QASample*> order;
  order.reserve(dataset.size());
  std::set<std::string> ids;
  for (const auto& s : dataset) {
    if (!ids.insert(s.sample_id).second) {
      throw std::invalid_argument("duplicate dataset sample id " + s.sample_id);
    }
    order.push_back(&s);
  }
  for (const auto& [id, _] : predictions) {
    if (!ids.count(id)) throw std::invalid_argument("prediction for unknown sample id " + id);
  }
  std::sort(order.begin(), order.end(),
            [](const QASample* a, const QASample* b) { return a->sample_id < b->sample_id; });
  std::vector<SampleScore> out;
  out.reserve(order.size());
  for (const auto* s : order) {
    const auto it = predictions.find(s->sample_id);
    if (it == predictions.end()) {
      out.push_back(score_missing(*s));
      continue;
    }
    const auto parsed = parse_answer(s->subtask, it->second, vocab, s->options);
    out.push_back(score_sample(*s, parsed, weights));
  }
  return out;
}

std::vector<SampleScore> read_scores(std::istream& in) {
  std::vector<SampleScore> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      out.push_back(score_from_json(nlohmann::json::parse(line)));
    } catch (const std::exception& e) {
      throw std::invalid_argument("scores line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  return out;
}

}  // namespace stqa
