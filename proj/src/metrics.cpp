#include "stqa/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

#include "stqa/format.hpp"
#include "stqa/qagen.hpp"

namespace stqa {

namespace {

template <typename T>
double match(const std::optional<T>& gold, const std::optional<T>& parsed) {
  return gold && parsed && *gold == *parsed ? 1.0 : 0.0;
}

double clamp_score(double fraction) { return 100.0 * std::clamp(fraction, 0.0, 1.0); }

void note(ScoreDetail* detail, const char* key, double value) {
  if (detail != nullptr) (*detail)[key] = value;
}

// Endpoint error with unparsed components at their maximum.
EndpointError endpoint(const std::optional<double>& t_pred, const std::optional<double>& t_gold,
                       const std::optional<Box1000>& b_pred, const std::optional<Box1000>& b_gold) {
  EndpointError e{1.0, 1.0};
  if (t_pred && t_gold) e.dt = std::min(1.0, temporal_error(*t_pred, *t_gold));
  if (b_pred && b_gold) e.ds = std::min(1.0, spatial_error(*b_pred, *b_gold));
  return e;
}

double rel_score(const std::optional<double>& pred, const std::optional<double>& gold,
                 double floor) {
  if (!pred || !gold) return 0.0;
  const double rel = std::abs(*pred - *gold) / std::max(*gold, floor);
  return std::max(0.0, 1.0 - rel);
}

std::size_t column_of_core(CoreTask core) {
  switch (core) {
    case CoreTask::st_grounding: return 0;
    case CoreTask::ref_interaction: return 1;
    case CoreTask::velocity: return 2;
    case CoreTask::st_relation: return 3;
    case CoreTask::cot: return 7;
    case CoreTask::multichoice: break;
  }
  return kTableColumns.size();
}

std::size_t column_of(Subtask subtask) {
  switch (subtask) {
    case Subtask::mc_counting: return 4;
    case Subtask::mc_existence: return 5;
    case Subtask::mc_class: return 6;
    default: return column_of_core(core_task_of(subtask));
  }
}

}  // namespace

double iou(const BBox& a, const BBox& b) {
  const double ix = std::max(0.0, std::min(a.x2, b.x2) - std::max(a.x1, b.x1));
  const double iy = std::max(0.0, std::min(a.y2, b.y2) - std::max(a.y1, b.y1));
  const double inter = ix * iy;
  const double uni = a.area() + b.area() - inter;
  return uni > 0.0 ? inter / uni : 0.0;
}

double iou(const Box1000& a, const Box1000& b) {
  // Integer areas keep the identical-box case exactly 1.
  const long ix = std::max(0, std::min(a.x2, b.x2) - std::max(a.x1, b.x1));
  const long iy = std::max(0, std::min(a.y2, b.y2) - std::max(a.y1, b.y1));
  const long inter = ix * iy;
  const long area_a = static_cast<long>(a.x2 - a.x1) * (a.y2 - a.y1);
  const long area_b = static_cast<long>(b.x2 - b.x1) * (b.y2 - b.y1);
  const long uni = area_a + area_b - inter;
  return uni > 0 ? static_cast<double>(inter) / static_cast<double>(uni) : 0.0;
}

double spatial_error(const BBox& pred, const BBox& gold) {
  return distance(pred.centroid(), gold.centroid()) / std::numbers::sqrt2;
}

double spatial_error(const Box1000& pred, const Box1000& gold) {
  return spatial_error(to_unit(pred), to_unit(gold));
}

double temporal_error(double pred, double gold) { return std::abs(pred - gold); }

double composite_st_error(const EndpointError& e1, const EndpointError& e2) {
  return 0.5 * (std::hypot(e1.dt, e1.ds) + std::hypot(e2.dt, e2.ds));
}

double score_grounding(Subtask subtask, const Payload& gold_v, const Payload& parsed_v,
                       ScoreDetail* detail) {
  switch (subtask) {
    case Subtask::temporal_window: {
      const auto& gold = std::get<TemporalWindowPayload>(gold_v);
      const auto& parsed = std::get<TemporalWindowPayload>(parsed_v);
      std::size_t extra = 0;
      for (const auto& p : parsed.entries) {
        const bool known = std::any_of(gold.entries.begin(), gold.entries.end(),
                                       [&](const auto& g) { return g.instrument == p.instrument; });
        if (!known) ++extra;
      }
      double sum = 0.0;
      double e_sum = 0.0;
      for (const auto& g : gold.entries) {
        const auto it = std::find_if(parsed.entries.begin(), parsed.entries.end(),
                                     [&](const auto& p) { return p.instrument == g.instrument; });
        double e = 1.0;
        if (it != parsed.entries.end()) {
          e = composite_st_error(endpoint(it->start, g.start, it->start_box, g.start_box),
                                 endpoint(it->end, g.end, it->end_box, g.end_box));
        }
        e_sum += e;
        sum += std::max(0.0, 1.0 - e);
      }
      const std::size_t denom = gold.entries.size() + extra;
      if (!gold.entries.empty()) note(detail, "mean_e_st", e_sum / gold.entries.size());
      note(detail, "unmatched_predictions", static_cast<double>(extra));
      return denom == 0 ? 0.0 : clamp_score(sum / static_cast<double>(denom));
    }
    case Subtask::locate: {
      const auto& gold = std::get<LocatePayload>(gold_v);
      const auto& parsed = std::get<LocatePayload>(parsed_v);
      const double v = gold.box && parsed.box ? iou(*parsed.box, *gold.box) : 0.0;
      note(detail, "iou", v);
      return clamp_score(v);
    }
    case Subtask::closest_instrument: {
      const double v = match(std::get<EntityPayload>(gold_v).instrument,
                             std::get<EntityPayload>(parsed_v).instrument);
      note(detail, "instrument", v);
      return clamp_score(v);
    }
    case Subtask::frame_segment: {
      const auto& gold = std::get<SegmentPayload>(gold_v);
      const auto& parsed = std::get<SegmentPayload>(parsed_v);
      const double h = match(gold.horizontal, parsed.horizontal);
      const double v = match(gold.vertical, parsed.vertical);
      note(detail, "horizontal", h);
      note(detail, "vertical", v);
      return clamp_score(h * v);
    }
    case Subtask::trajectory_extreme: {
      const auto& gold = std::get<ExtremePayload>(gold_v);
      const auto& parsed = std::get<ExtremePayload>(parsed_v);
      const auto e = endpoint(parsed.t, gold.t, parsed.box, gold.box);
      const double err = std::hypot(e.dt, e.ds);
      note(detail, "error", err);
      return clamp_score(1.0 - err);
    }
    default: break;
  }
  throw std::invalid_argument(std::string("score_grounding: not a grounding subtask: ") +
                              to_string(subtask));
}

double score_interaction(Subtask subtask, const Payload& gold_v, const Payload& parsed_v,
                         ScoreDetail* detail) {
  if (subtask == Subtask::instrument_id) {
    const double v = match(std::get<EntityPayload>(gold_v).instrument,
                           std::get<EntityPayload>(parsed_v).instrument);
    note(detail, "instrument", v);
    return clamp_score(v);
  }
  const auto& gold = std::get<InteractionPayload>(gold_v);
  const auto& parsed = std::get<InteractionPayload>(parsed_v);
  double sum = 0.0;
  int n = 0;
  if (subtask != Subtask::target_interaction) {
    const double v = match(gold.verb, parsed.verb);
    note(detail, "verb", v);
    sum += v;
    ++n;
  }
  if (subtask != Subtask::action_status) {
    const double v = match(gold.target, parsed.target);
    note(detail, "target", v);
    sum += v;
    ++n;
  }
  return clamp_score(sum / n);
}

double score_relation(Subtask subtask, const Payload& gold_v, const Payload& parsed_v,
                      const MetricWeights& w, ScoreDetail* detail) {
  switch (subtask) {
    case Subtask::relative_position: {
      const auto& gold = std::get<RelativePositionPayload>(gold_v);
      const auto& parsed = std::get<RelativePositionPayload>(parsed_v);
      const double h = match(gold.horizontal, parsed.horizontal);
      const double v = match(gold.vertical, parsed.vertical);
      note(detail, "horizontal", h);
      note(detail, "vertical", v);
      return clamp_score((h + v) / 2.0);
    }
    case Subtask::relative_change: {
      const double v = match(std::get<RelativeChangePayload>(gold_v).change,
                             std::get<RelativeChangePayload>(parsed_v).change);
      note(detail, "change", v);
      return clamp_score(v);
    }
    case Subtask::interaction_comparison: {
      const auto& gold = std::get<InteractionComparisonPayload>(gold_v);
      const auto& parsed = std::get<InteractionComparisonPayload>(parsed_v);
      const double verdict = match(gold.verdict, parsed.verdict);
      const double pair1 = match(gold.verb1, parsed.verb1) * match(gold.target1, parsed.target1);
      const double pair2 = match(gold.verb2, parsed.verb2) * match(gold.target2, parsed.target2);
      note(detail, "verdict", verdict);
      note(detail, "pair1", pair1);
      note(detail, "pair2", pair2);
      return clamp_score(w.comparison_verdict * verdict +
                         (1.0 - w.comparison_verdict) * (pair1 + pair2) / 2.0);
    }
    default: break;
  }
  throw std::invalid_argument(std::string("score_relation: not a relation subtask: ") +
                              to_string(subtask));
}

double score_velocity(const VelocityPayload& gold, const VelocityPayload& parsed,
                      const MetricWeights& w, ScoreDetail* detail) {
  const double mn = rel_score(parsed.min_speed, gold.min_speed, w.speed_floor);
  const double mx = rel_score(parsed.max_speed, gold.max_speed, w.speed_floor);
  const double me = rel_score(parsed.mean_speed, gold.mean_speed, w.speed_floor);
  const double numeric = (mn + mx + me) / 3.0;
  const double categorical = match(gold.descriptor, parsed.descriptor);
  note(detail, "numeric", numeric);
  note(detail, "descriptor", categorical);
  return clamp_score(w.velocity_numeric * numeric + (1.0 - w.velocity_numeric) * categorical);
}

double score_multichoice(const ChoicePayload& gold, const ChoicePayload& parsed) {
  return clamp_score(match(gold.letter, parsed.letter));
}

double score_cot(const CotPayload& gold, const CotPayload& parsed, const MetricWeights& w,
                 ScoreDetail* detail) {
  const double conclusion = (match(gold.conclusion_instrument, parsed.conclusion_instrument) +
                             match(gold.conclusion_verb, parsed.conclusion_verb) +
                             match(gold.conclusion_target, parsed.conclusion_target)) /
                            3.0;
  const double loc = match(gold.horizontal, parsed.horizontal) * match(gold.vertical, parsed.vertical);
  const double kin = match(gold.descriptor, parsed.descriptor);
  const double act = match(gold.verb, parsed.verb) * match(gold.target, parsed.target);
  const double stages = (loc + kin + act) / 3.0;
  note(detail, "conclusion", conclusion);
  note(detail, "stages", stages);
  return clamp_score(w.cot_conclusion * conclusion + (1.0 - w.cot_conclusion) * stages);
}

SampleScore score_sample(const QASample& sample, const ParsedAnswer& parsed,
                         const MetricWeights& w) {
  SampleScore s;
  s.sample_id = sample.sample_id;
  s.core_task = sample.core_task;
  s.subtask = sample.subtask;
  s.parse_status = parsed.status;
  if (parsed.status == ParseStatus::failed) {
    s.primary_score = 0.0;
    return s;
  }
  const auto& g = sample.gold;
  const auto& p = parsed.value;
  ScoreDetail* d = &s.detail;
  switch (sample.core_task) {
    case CoreTask::st_grounding: s.primary_score = score_grounding(sample.subtask, g, p, d); break;
    case CoreTask::ref_interaction:
      s.primary_score = score_interaction(sample.subtask, g, p, d);
      break;
    case CoreTask::st_relation: s.primary_score = score_relation(sample.subtask, g, p, w, d); break;
    case CoreTask::velocity:
      s.primary_score =
          score_velocity(std::get<VelocityPayload>(g), std::get<VelocityPayload>(p), w, d);
      break;
    case CoreTask::multichoice:
      s.primary_score = score_multichoice(std::get<ChoicePayload>(g), std::get<ChoicePayload>(p));
      break;
    case CoreTask::cot:
      s.primary_score = score_cot(std::get<CotPayload>(g), std::get<CotPayload>(p), w, d);
      break;
  }
  return s;
}

SampleScore score_missing(const QASample& sample) {
  SampleScore s;
  s.sample_id = sample.sample_id;
  s.core_task = sample.core_task;
  s.subtask = sample.subtask;
  s.missing_prediction = true;
  return s;
}

nlohmann::json to_json(const SampleScore& s) {
  nlohmann::json detail = nlohmann::json::object();
  for (const auto& [k, v] : s.detail) detail[k] = v;
  return {{"sample_id", s.sample_id},
          {"core_task", to_string(s.core_task)},
          {"subtask", to_string(s.subtask)},
          {"primary_score", s.primary_score},
          {"parse_status", to_string(s.parse_status)},
          {"missing_prediction", s.missing_prediction},
          {"detail", detail}};
}

SampleScore score_from_json(const nlohmann::json& j) {
  SampleScore s;
  s.sample_id = j.at("sample_id").get<std::string>();
  const auto sub = subtask_from_string(j.at("subtask").get<std::string>());
  if (!sub) throw std::invalid_argument(s.sample_id + ": unknown subtask");
  s.subtask = *sub;
  s.core_task = core_task_of(*sub);
  s.primary_score = j.at("primary_score").get<double>();
  if (!(s.primary_score >= 0.0 && s.primary_score <= 100.0)) {
    throw std::invalid_argument(s.sample_id + ": primary_score outside [0,100]");
  }
  const auto status = j.value("parse_status", std::string("failed"));
  s.parse_status = status == "ok"        ? ParseStatus::ok
                   : status == "partial" ? ParseStatus::partial
                                         : ParseStatus::failed;
  s.missing_prediction = j.value("missing_prediction", false);
  if (j.contains("detail")) {
    for (const auto& [k, v] : j["detail"].items()) s.detail[k] = v.get<double>();
  }
  return s;
}

TaskReport aggregate_report(std::span<const SampleScore> scores) {
  std::vector<const SampleScore*> order;
  order.reserve(scores.size());
  for (const auto& s : scores) order.push_back(&s);
  std::sort(order.begin(), order.end(), [](const SampleScore* a, const SampleScore* b) {
    return a->sample_id < b->sample_id;
  });
  TaskReport r;
  for (const auto* s : order) {
    auto add = [&](MeanCell& c) {
      c.sum += s->primary_score;
      ++c.count;
    };
    add(r.subtasks[s->subtask]);
    add(r.core_tasks[s->core_task]);
    if (const auto col = column_of(s->subtask); col < r.columns.size()) add(r.columns[col]);
    ++r.samples;
    if (s->missing_prediction) ++r.missing_predictions;
    ++r.parse_status[s->parse_status];
  }
  return r;
}

nlohmann::json to_json(const TaskReport& r) {
  nlohmann::json subtasks = nlohmann::json::array();
  for (auto st : kAllSubtasks) {
    const auto it = r.subtasks.find(st);
    if (it == r.subtasks.end()) continue;
    subtasks.push_back({{"subtask", to_string(st)},
                        {"core_task", to_string(core_task_of(st))},
                        {"count", it->second.count},
                        {"mean", round_to(it->second.mean(), 2)}});
  }
  nlohmann::json cores = nlohmann::json::array();
  for (auto ct : kAllCoreTasks) {
    const auto it = r.core_tasks.find(ct);
    if (it == r.core_tasks.end()) continue;
    cores.push_back({{"core_task", to_string(ct)},
                     {"count", it->second.count},
                     {"micro_average", round_to(it->second.mean(), 2)}});
  }
  nlohmann::json table = nlohmann::json::array();
  for (std::size_t i = 0; i < kTableColumns.size(); ++i) {
    nlohmann::json cell = {{"column", kTableColumns[i]}, {"count", r.columns[i].count}};
    cell["value"] = r.columns[i].count == 0 ? nlohmann::json(nullptr)
                                            : nlohmann::json(round_to(r.columns[i].mean(), 2));
    table.push_back(cell);
  }
  nlohmann::json status = nlohmann::json::object();
  for (auto st : {ParseStatus::ok, ParseStatus::partial, ParseStatus::failed}) {
    const auto it = r.parse_status.find(st);
    status[to_string(st)] = it == r.parse_status.end() ? 0 : it->second;
  }
  return {{"samples", r.samples},
          {"missing_predictions", r.missing_predictions},
          {"parse_status", status},
          {"subtasks", subtasks},
          {"core_tasks", cores},
          {"table", table},
          {"score_definitions", "toolchain-defined primary score mappings, see README"}};
}

void write_table(std::ostream& out, const TaskReport& r, const std::string& label,
                 char delimiter) {
  out << "Model";
  for (const char* c : kTableColumns) out << delimiter << c;
  out << '\n' << label;
  for (const auto& cell : r.columns) {
    out << delimiter << (cell.count == 0 ? std::string("-") : fixed(round_to(cell.mean(), 2), 2));
  }
  out << '\n';
}

}  // namespace stqa
