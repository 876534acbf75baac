#include "stqa/payload.hpp"

#include <stdexcept>

namespace stqa {

namespace {

struct SubtaskInfo {
  Subtask subtask;
  const char* name;
  CoreTask core;
};

constexpr SubtaskInfo kSubtaskInfo[] = {
    {Subtask::temporal_window, "temporal_window", CoreTask::st_grounding},
    {Subtask::locate, "locate", CoreTask::st_grounding},
    {Subtask::closest_instrument, "closest_instrument", CoreTask::st_grounding},
    {Subtask::frame_segment, "frame_segment", CoreTask::st_grounding},
    {Subtask::trajectory_extreme, "trajectory_extreme", CoreTask::st_grounding},
    {Subtask::sequential_actions, "sequential_actions", CoreTask::ref_interaction},
    {Subtask::action_status, "action_status", CoreTask::ref_interaction},
    {Subtask::target_interaction, "target_interaction", CoreTask::ref_interaction},
    {Subtask::instrument_id, "instrument_id", CoreTask::ref_interaction},
    {Subtask::relative_position, "relative_position", CoreTask::st_relation},
    {Subtask::relative_change, "relative_change", CoreTask::st_relation},
    {Subtask::interaction_comparison, "interaction_comparison", CoreTask::st_relation},
    {Subtask::velocity, "velocity", CoreTask::velocity},
    {Subtask::mc_existence, "mc_existence", CoreTask::multichoice},
    {Subtask::mc_class, "mc_class", CoreTask::multichoice},
    {Subtask::mc_counting, "mc_counting", CoreTask::multichoice},
    {Subtask::cot, "cot", CoreTask::cot},
};

const SubtaskInfo& info(Subtask subtask) {
  for (const auto& i : kSubtaskInfo) {
    if (i.subtask == subtask) return i;
  }
  throw std::logic_error("unknown subtask");
}

}  // namespace

const char* to_string(CoreTask task) {
  switch (task) {
    case CoreTask::st_grounding: return "st_grounding";
    case CoreTask::ref_interaction: return "ref_interaction";
    case CoreTask::st_relation: return "st_relation";
    case CoreTask::velocity: return "velocity";
    case CoreTask::multichoice: return "multichoice";
    case CoreTask::cot: return "cot";
  }
  return "?";
}

const char* to_string(Subtask subtask) { return info(subtask).name; }

std::optional<CoreTask> core_task_from_string(std::string_view s) {
  for (auto task : kAllCoreTasks) {
    if (s == to_string(task)) return task;
  }
  return std::nullopt;
}

std::optional<Subtask> subtask_from_string(std::string_view s) {
  for (const auto& i : kSubtaskInfo) {
    if (s == i.name) return i.subtask;
  }
  return std::nullopt;
}

CoreTask core_task_of(Subtask subtask) { return info(subtask).core; }

Payload empty_payload(Subtask subtask) {
  switch (subtask) {
    case Subtask::temporal_window: return TemporalWindowPayload{};
    case Subtask::locate: return LocatePayload{};
    case Subtask::closest_instrument:
    case Subtask::instrument_id: return EntityPayload{};
    case Subtask::frame_segment: return SegmentPayload{};
    case Subtask::trajectory_extreme: return ExtremePayload{};
    case Subtask::sequential_actions:
    case Subtask::action_status:
    case Subtask::target_interaction: return InteractionPayload{};
    case Subtask::relative_position: return RelativePositionPayload{};
    case Subtask::relative_change: return RelativeChangePayload{};
    case Subtask::interaction_comparison: return InteractionComparisonPayload{};
    case Subtask::velocity: return VelocityPayload{};
    case Subtask::mc_existence:
    case Subtask::mc_class:
    case Subtask::mc_counting: return ChoicePayload{};
    case Subtask::cot: return CotPayload{};
  }
  throw std::logic_error("unknown subtask");
}

std::vector<std::string> required_fields(Subtask subtask) {
  switch (subtask) {
    case Subtask::temporal_window: return {"entries"};
    case Subtask::locate: return {"box"};
    case Subtask::closest_instrument:
    case Subtask::instrument_id: return {"instrument"};
    case Subtask::frame_segment: return {"horizontal", "vertical"};
    case Subtask::trajectory_extreme: return {"t", "box"};
    case Subtask::sequential_actions: return {"verb", "target"};
    case Subtask::action_status: return {"verb"};
    case Subtask::target_interaction: return {"target"};
    case Subtask::relative_position: return {"horizontal", "vertical"};
    case Subtask::relative_change: return {"change"};
    case Subtask::interaction_comparison:
      return {"verdict", "verb1", "target1", "verb2", "target2"};
    case Subtask::velocity: return {"min_speed", "max_speed", "mean_speed", "descriptor"};
    case Subtask::mc_existence:
    case Subtask::mc_class:
    case Subtask::mc_counting: return {"letter"};
    case Subtask::cot:
      return {"horizontal", "vertical", "descriptor", "verb", "target",
              "conclusion_instrument", "conclusion_verb", "conclusion_target"};
  }
  return {};
}

namespace {

template <typename T>
void need(std::vector<std::string>& missing, const std::optional<T>& field, const char* name) {
  if (!field) missing.emplace_back(name);
}

}  // namespace

std::vector<std::string> missing_fields(Subtask subtask, const Payload& payload) {
  std::vector<std::string> missing;
  std::visit(
      [&](const auto& p) {
        using T = std::decay_t<decltype(p)>;
        if constexpr (std::is_same_v<T, TemporalWindowPayload>) {
          if (p.entries.empty()) missing.emplace_back("entries");
          for (std::size_t i = 0; i < p.entries.size(); ++i) {
            if (!p.entries[i].complete()) {
              missing.push_back("entries[" + std::to_string(i) + "]");
            }
          }
        } else if constexpr (std::is_same_v<T, LocatePayload>) {
          need(missing, p.box, "box");
        } else if constexpr (std::is_same_v<T, EntityPayload>) {
          need(missing, p.instrument, "instrument");
        } else if constexpr (std::is_same_v<T, SegmentPayload>) {
          need(missing, p.horizontal, "horizontal");
          need(missing, p.vertical, "vertical");
        } else if constexpr (std::is_same_v<T, ExtremePayload>) {
          need(missing, p.t, "t");
          need(missing, p.box, "box");
        } else if constexpr (std::is_same_v<T, InteractionPayload>) {
          if (subtask != Subtask::target_interaction) need(missing, p.verb, "verb");
          if (subtask != Subtask::action_status) need(missing, p.target, "target");
        } else if constexpr (std::is_same_v<T, RelativePositionPayload>) {
          need(missing, p.horizontal, "horizontal");
          need(missing, p.vertical, "vertical");
        } else if constexpr (std::is_same_v<T, RelativeChangePayload>) {
          need(missing, p.change, "change");
        } else if constexpr (std::is_same_v<T, InteractionComparisonPayload>) {
          need(missing, p.verdict, "verdict");
          need(missing, p.verb1, "verb1");
          need(missing, p.target1, "target1");
          need(missing, p.verb2, "verb2");
          need(missing, p.target2, "target2");
        } else if constexpr (std::is_same_v<T, VelocityPayload>) {
          need(missing, p.min_speed, "min_speed");
          need(missing, p.max_speed, "max_speed");
          need(missing, p.mean_speed, "mean_speed");
          need(missing, p.descriptor, "descriptor");
        } else if constexpr (std::is_same_v<T, ChoicePayload>) {
          need(missing, p.letter, "letter");
        } else if constexpr (std::is_same_v<T, CotPayload>) {
          need(missing, p.horizontal, "horizontal");
          need(missing, p.vertical, "vertical");
          need(missing, p.descriptor, "descriptor");
          need(missing, p.verb, "verb");
          need(missing, p.target, "target");
          need(missing, p.conclusion_instrument, "conclusion_instrument");
          need(missing, p.conclusion_verb, "conclusion_verb");
          need(missing, p.conclusion_target, "conclusion_target");
        }
      },
      payload);
  return missing;
}

// ---------------------------------------------------------------------------
// JSON

namespace {

using nlohmann::json;

void put(json& doc, const char* key, const std::optional<std::string>& v) {
  if (v) doc[key] = *v;
}
void put(json& doc, const char* key, const std::optional<double>& v) {
  if (v) doc[key] = *v;
}
void put(json& doc, const char* key, const std::optional<Box1000>& v) {
  if (v) doc[key] = v->as_array();
}

void get(const json& doc, const char* key, std::optional<std::string>& v) {
  if (doc.contains(key) && !doc.at(key).is_null()) v = doc.at(key).get<std::string>();
}
void get(const json& doc, const char* key, std::optional<double>& v) {
  if (doc.contains(key) && !doc.at(key).is_null()) v = doc.at(key).get<double>();
}
void get(const json& doc, const char* key, std::optional<Box1000>& v) {
  if (!doc.contains(key) || doc.at(key).is_null()) return;
  const auto& a = doc.at(key);
  if (!a.is_array() || a.size() != 4) throw std::invalid_argument(std::string("bad box ") + key);
  v = Box1000{a[0].get<int>(), a[1].get<int>(), a[2].get<int>(), a[3].get<int>()};
}

json stage(const char* name) { return json{{"stage", name}}; }

}  // namespace

nlohmann::json payload_to_json(const Payload& payload) {
  return std::visit(
      [](const auto& p) -> json {
        using T = std::decay_t<decltype(p)>;
        json doc = json::object();
        if constexpr (std::is_same_v<T, TemporalWindowPayload>) {
          json entries = json::array();
          for (const auto& e : p.entries) {
            json item = json::object();
            put(item, "instrument", e.instrument);
            put(item, "start", e.start);
            put(item, "end", e.end);
            put(item, "start_box", e.start_box);
            put(item, "end_box", e.end_box);
            entries.push_back(std::move(item));
          }
          doc["entries"] = std::move(entries);
        } else if constexpr (std::is_same_v<T, LocatePayload>) {
          put(doc, "instrument", p.instrument);
          put(doc, "box", p.box);
        } else if constexpr (std::is_same_v<T, EntityPayload>) {
          put(doc, "instrument", p.instrument);
        } else if constexpr (std::is_same_v<T, SegmentPayload>) {
          put(doc, "instrument", p.instrument);
          put(doc, "horizontal", p.horizontal);
          put(doc, "vertical", p.vertical);
        } else if constexpr (std::is_same_v<T, ExtremePayload>) {
          put(doc, "instrument", p.instrument);
          put(doc, "direction", p.direction);
          put(doc, "t", p.t);
          put(doc, "box", p.box);
        } else if constexpr (std::is_same_v<T, InteractionPayload>) {
          put(doc, "instrument", p.instrument);
          put(doc, "verb", p.verb);
          put(doc, "target", p.target);
        } else if constexpr (std::is_same_v<T, RelativePositionPayload>) {
          put(doc, "instrument1", p.instrument1);
          put(doc, "instrument2", p.instrument2);
          put(doc, "horizontal", p.horizontal);
          put(doc, "vertical", p.vertical);
        } else if constexpr (std::is_same_v<T, RelativeChangePayload>) {
          put(doc, "instrument1", p.instrument1);
          put(doc, "instrument2", p.instrument2);
          put(doc, "change", p.change);
        } else if constexpr (std::is_same_v<T, InteractionComparisonPayload>) {
          put(doc, "instrument1", p.instrument1);
          put(doc, "instrument2", p.instrument2);
          put(doc, "verdict", p.verdict);
          put(doc, "verb1", p.verb1);
          put(doc, "target1", p.target1);
          put(doc, "verb2", p.verb2);
          put(doc, "target2", p.target2);
        } else if constexpr (std::is_same_v<T, VelocityPayload>) {
          put(doc, "instrument", p.instrument);
          put(doc, "min_speed", p.min_speed);
          put(doc, "max_speed", p.max_speed);
          put(doc, "mean_speed", p.mean_speed);
          put(doc, "descriptor", p.descriptor);
        } else if constexpr (std::is_same_v<T, ChoicePayload>) {
          put(doc, "letter", p.letter);
          put(doc, "option", p.option);
        } else if constexpr (std::is_same_v<T, CotPayload>) {
          put(doc, "instrument", p.instrument);
          json loc = stage("localization");
          put(loc, "horizontal", p.horizontal);
          put(loc, "vertical", p.vertical);
          put(loc, "box", p.box);
          json kin = stage("kinematics");
          put(kin, "descriptor", p.descriptor);
          put(kin, "mean_speed", p.mean_speed);
          json inter = stage("interaction");
          put(inter, "verb", p.verb);
          put(inter, "target", p.target);
          doc["stages"] = json::array({loc, kin, inter});
          json conclusion = json::object();
          put(conclusion, "instrument", p.conclusion_instrument);
          put(conclusion, "verb", p.conclusion_verb);
          put(conclusion, "target", p.conclusion_target);
          doc["conclusion"] = std::move(conclusion);
        }
        return doc;
      },
      payload);
}

Payload payload_from_json(Subtask subtask, const nlohmann::json& doc) {
  Payload payload = empty_payload(subtask);
  std::visit(
      [&](auto& p) {
        using T = std::decay_t<decltype(p)>;
        if constexpr (std::is_same_v<T, TemporalWindowPayload>) {
          for (const auto& item : doc.at("entries")) {
            WindowEntry e;
            get(item, "instrument", e.instrument);
            get(item, "start", e.start);
            get(item, "end", e.end);
            get(item, "start_box", e.start_box);
            get(item, "end_box", e.end_box);
            p.entries.push_back(std::move(e));
          }
        } else if constexpr (std::is_same_v<T, LocatePayload>) {
          get(doc, "instrument", p.instrument);
          get(doc, "box", p.box);
        } else if constexpr (std::is_same_v<T, EntityPayload>) {
          get(doc, "instrument", p.instrument);
        } else if constexpr (std::is_same_v<T, SegmentPayload>) {
          get(doc, "instrument", p.instrument);
          get(doc, "horizontal", p.horizontal);
          get(doc, "vertical", p.vertical);
        } else if constexpr (std::is_same_v<T, ExtremePayload>) {
          get(doc, "instrument", p.instrument);
          get(doc, "direction", p.direction);
          get(doc, "t", p.t);
          get(doc, "box", p.box);
        } else if constexpr (std::is_same_v<T, InteractionPayload>) {
          get(doc, "instrument", p.instrument);
          get(doc, "verb", p.verb);
          get(doc, "target", p.target);
        } else if constexpr (std::is_same_v<T, RelativePositionPayload>) {
          get(doc, "instrument1", p.instrument1);
          get(doc, "instrument2", p.instrument2);
          get(doc, "horizontal", p.horizontal);
          get(doc, "vertical", p.vertical);
        } else if constexpr (std::is_same_v<T, RelativeChangePayload>) {
          get(doc, "instrument1", p.instrument1);
          get(doc, "instrument2", p.instrument2);
          get(doc, "change", p.change);
        } else if constexpr (std::is_same_v<T, InteractionComparisonPayload>) {
          get(doc, "instrument1", p.instrument1);
          get(doc, "instrument2", p.instrument2);
          get(doc, "verdict", p.verdict);
          get(doc, "verb1", p.verb1);
          get(doc, "target1", p.target1);
          get(doc, "verb2", p.verb2);
          get(doc, "target2", p.target2);
        } else if constexpr (std::is_same_v<T, VelocityPayload>) {
          get(doc, "instrument", p.instrument);
          get(doc, "min_speed", p.min_speed);
          get(doc, "max_speed", p.max_speed);
          get(doc, "mean_speed", p.mean_speed);
          get(doc, "descriptor", p.descriptor);
        } else if constexpr (std::is_same_v<T, ChoicePayload>) {
          get(doc, "letter", p.letter);
          get(doc, "option", p.option);
        } else if constexpr (std::is_same_v<T, CotPayload>) {
          get(doc, "instrument", p.instrument);
          for (const auto& st : doc.at("stages")) {
            const auto name = st.at("stage").get<std::string>();
            if (name == "localization") {
              get(st, "horizontal", p.horizontal);
              get(st, "vertical", p.vertical);
              get(st, "box", p.box);
            } else if (name == "kinematics") {
              get(st, "descriptor", p.descriptor);
              get(st, "mean_speed", p.mean_speed);
            } else if (name == "interaction") {
              get(st, "verb", p.verb);
              get(st, "target", p.target);
            }
          }
          const auto& c = doc.at("conclusion");
          get(c, "instrument", p.conclusion_instrument);
          get(c, "verb", p.conclusion_verb);
          get(c, "target", p.conclusion_target);
        }
      },
      payload);
  return payload;
}

}  // namespace stqa
