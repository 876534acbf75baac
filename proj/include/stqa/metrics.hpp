#pragma once

#include <array>
#include <map>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "stqa/answer_parser.hpp"
#include "stqa/geometry.hpp"
#include "stqa/payload.hpp"

namespace stqa {

struct QASample;

// Scoring weights; the defaults are the documented toolchain choices.
struct MetricWeights {
  double velocity_numeric = 0.5;   // rest goes to the descriptor
  double comparison_verdict = 0.5; // rest goes to the entity pairs
  double cot_conclusion = 0.7;     // rest goes to stage evidence
  double speed_floor = 0.001;      // relErr denominator floor, u/s
};

struct EndpointError {
  double dt = 0.0;  // normalized temporal error
  double ds = 0.0;  // normalized spatial error
};

double iou(const BBox& a, const BBox& b);
double iou(const Box1000& a, const Box1000& b);

// Centre distance divided by the unit-square diagonal.
double spatial_error(const BBox& pred, const BBox& gold);
double spatial_error(const Box1000& pred, const Box1000& gold);

double temporal_error(double pred, double gold);

// (1/2) * sum over both endpoints of sqrt(dt^2 + ds^2).
double composite_st_error(const EndpointError& e1, const EndpointError& e2);

using ScoreDetail = std::map<std::string, double>;

// Each returns a primary score in [0,100]; `gold` and `parsed` must hold the
// payload alternative of `subtask`. Components that were not parsed score 0.
double score_grounding(Subtask subtask, const Payload& gold, const Payload& parsed,
                       ScoreDetail* detail = nullptr);
double score_interaction(Subtask subtask, const Payload& gold, const Payload& parsed,
                         ScoreDetail* detail = nullptr);
double score_relation(Subtask subtask, const Payload& gold, const Payload& parsed,
                      const MetricWeights& weights = {}, ScoreDetail* detail = nullptr);
double score_velocity(const VelocityPayload& gold, const VelocityPayload& parsed,
                      const MetricWeights& weights = {}, ScoreDetail* detail = nullptr);
double score_multichoice(const ChoicePayload& gold, const ChoicePayload& parsed);
double score_cot(const CotPayload& gold, const CotPayload& parsed,
                 const MetricWeights& weights = {}, ScoreDetail* detail = nullptr);

struct SampleScore {
  std::string sample_id;
  CoreTask core_task = CoreTask::st_grounding;
  Subtask subtask = Subtask::locate;
  double primary_score = 0.0;
  ScoreDetail detail;
  ParseStatus parse_status = ParseStatus::failed;
  bool missing_prediction = false;
};

nlohmann::json to_json(const SampleScore& score);
SampleScore score_from_json(const nlohmann::json& doc);

SampleScore score_sample(const QASample& sample, const ParsedAnswer& parsed,
                         const MetricWeights& weights = {});
// A sample without any prediction: scored 0 and flagged.
SampleScore score_missing(const QASample& sample);

struct MeanCell {
  double sum = 0.0;
  std::size_t count = 0;
  double mean() const { return count == 0 ? 0.0 : sum / static_cast<double>(count); }
};

// Column order of the results table.
inline constexpr std::array<const char*, 8> kTableColumns = {
    "ST Grounding", "Ref.Int. Captioning", "Velocity Est.", "ST Rel. Comp.",
    "MC Counting",  "MC Existence",        "MC Class",      "CoT"};

struct TaskReport {
  std::map<Subtask, MeanCell> subtasks;
  std::map<CoreTask, MeanCell> core_tasks;
  std::array<MeanCell, kTableColumns.size()> columns{};
  std::size_t samples = 0;
  std::size_t missing_predictions = 0;
  std::map<ParseStatus, std::size_t> parse_status;

  bool empty() const { return samples == 0; }
};

// Micro-averages, accumulated in sample_id order.
TaskReport aggregate_report(std::span<const SampleScore> scores);

nlohmann::json to_json(const TaskReport& report);

// Header plus one row labelled `label`; empty columns print "-".
void write_table(std::ostream& out, const TaskReport& report, const std::string& label,
                 char delimiter = ',');

}  // namespace stqa
