#pragma once

#include <cstdint>
#include <filesystem>
#include <istream>
#include <map>
#include <ostream>
#include <set>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "stqa/config.hpp"
#include "stqa/event_model.hpp"
#include "stqa/metrics.hpp"
#include "stqa/qagen.hpp"

// Steps behind the command-line subcommands, kept in the library so they can
// be driven from tests without spawning processes.
namespace stqa {

struct IngestSummary {
  std::size_t records = 0;
  std::size_t rejected = 0;
  std::size_t videos = 0;
  std::size_t clips = 0;
  std::size_t tuples = 0;  // densified tuples kept inside clips
  std::vector<RecordError> errors;

  double rejected_rate() const {
    return records == 0 ? 0.0 : static_cast<double>(rejected) / static_cast<double>(records);
  }
};

// Parses, densifies and clip-segments an annotation stream. A video runs from
// 0 to one frame period past its last densified frame.
std::vector<ClipInput> ingest_stream(std::istream& in, const Config& config,
                                     const Vocabulary& vocab, IngestSummary* summary = nullptr);

// Clip store: one line per clip, {"clip": manifest, "tuples": [...]}.
void write_store(std::ostream& out, std::span<const ClipInput> clips);
std::vector<ClipInput> read_store(std::istream& in, const Vocabulary& vocab);

struct ExemplarRecord {
  std::string test_id;
  std::string exemplar_id;
  ExemplarLevel level = ExemplarLevel::subtask;
};

// Samples whose source video is in `test_videos` get one exemplar from the
// remaining samples. Throws std::invalid_argument on an empty train pool.
std::vector<ExemplarRecord> map_exemplars(std::span<const QASample> dataset,
                                          const std::set<std::string>& test_videos,
                                          std::uint64_t seed);
nlohmann::json to_json(const ExemplarRecord& record);

// sample_id -> model output. Throws std::invalid_argument on malformed lines
// and duplicate ids.
std::map<std::string, std::string> read_predictions(std::istream& in);

// Scores every dataset sample in sample_id order. Prediction ids that are not
// in the dataset are a contract violation (std::invalid_argument).
std::vector<SampleScore> evaluate_predictions(std::span<const QASample> dataset,
                                              const std::map<std::string, std::string>& predictions,
                                              const Vocabulary& vocab,
                                              const MetricWeights& weights = {});

std::vector<SampleScore> read_scores(std::istream& in);

}  // namespace stqa
