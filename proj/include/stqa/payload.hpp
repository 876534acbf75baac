#pragma once

#include <array>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include <json.hpp>

#include "stqa/geometry.hpp"

namespace stqa {

enum class CoreTask { st_grounding, ref_interaction, st_relation, velocity, multichoice, cot };

enum class Subtask {
  temporal_window,
  locate,
  closest_instrument,
  frame_segment,
  trajectory_extreme,
  sequential_actions,
  action_status,
  target_interaction,
  instrument_id,
  relative_position,
  relative_change,
  interaction_comparison,
  velocity,
  mc_existence,
  mc_class,
  mc_counting,
  cot,
};

inline constexpr std::array<Subtask, 17> kAllSubtasks = {
    Subtask::temporal_window,    Subtask::locate,
    Subtask::closest_instrument, Subtask::frame_segment,
    Subtask::trajectory_extreme, Subtask::sequential_actions,
    Subtask::action_status,      Subtask::target_interaction,
    Subtask::instrument_id,      Subtask::relative_position,
    Subtask::relative_change,    Subtask::interaction_comparison,
    Subtask::velocity,           Subtask::mc_existence,
    Subtask::mc_class,           Subtask::mc_counting,
    Subtask::cot,
};

inline constexpr std::array<CoreTask, 6> kAllCoreTasks = {
    CoreTask::st_grounding, CoreTask::ref_interaction, CoreTask::st_relation,
    CoreTask::velocity,     CoreTask::multichoice,     CoreTask::cot,
};

const char* to_string(CoreTask task);
const char* to_string(Subtask subtask);
std::optional<CoreTask> core_task_from_string(std::string_view s);
std::optional<Subtask> subtask_from_string(std::string_view s);
CoreTask core_task_of(Subtask subtask);

// Gold payloads and parsed predictions share these structs. Every field is
// optional so that a partial parse is representable; a gold payload always
// fills the fields its subtask renders. Timestamps are normalized to [0,1]
// and rounded to 2 decimals, speeds to 3 decimals, boxes are [0,1000].

struct WindowEntry {
  std::optional<std::string> instrument;
  std::optional<double> start;
  std::optional<double> end;
  std::optional<Box1000> start_box;
  std::optional<Box1000> end_box;

  bool complete() const { return instrument && start && end && start_box && end_box; }
  bool operator==(const WindowEntry&) const = default;
};

struct TemporalWindowPayload {
  std::vector<WindowEntry> entries;
  bool operator==(const TemporalWindowPayload&) const = default;
};

struct LocatePayload {
  std::optional<std::string> instrument;
  std::optional<Box1000> box;
  bool operator==(const LocatePayload&) const = default;
};

// closest_instrument and instrument_id.
struct EntityPayload {
  std::optional<std::string> instrument;
  bool operator==(const EntityPayload&) const = default;
};

struct SegmentPayload {
  std::optional<std::string> instrument;
  std::optional<std::string> horizontal;  // left | center | right
  std::optional<std::string> vertical;    // top | middle | bottom
  bool operator==(const SegmentPayload&) const = default;
};

struct ExtremePayload {
  std::optional<std::string> instrument;
  std::optional<std::string> direction;
  std::optional<double> t;
  std::optional<Box1000> box;
  bool operator==(const ExtremePayload&) const = default;
};

// sequential_actions (next verb + target), action_status (verb) and
// target_interaction (target).
struct InteractionPayload {
  std::optional<std::string> instrument;
  std::optional<std::string> verb;
  std::optional<std::string> target;
  bool operator==(const InteractionPayload&) const = default;
};

struct RelativePositionPayload {
  std::optional<std::string> instrument1;
  std::optional<std::string> instrument2;
  std::optional<std::string> horizontal;  // left | right
  std::optional<std::string> vertical;    // above | below
  bool operator==(const RelativePositionPayload&) const = default;
};

struct RelativeChangePayload {
  std::optional<std::string> instrument1;
  std::optional<std::string> instrument2;
  std::optional<std::string> change;  // closer | further | unchanged
  bool operator==(const RelativeChangePayload&) const = default;
};

struct InteractionComparisonPayload {
  std::optional<std::string> instrument1;
  std::optional<std::string> instrument2;
  std::optional<std::string> verdict;  // same | different
  std::optional<std::string> verb1;
  std::optional<std::string> target1;
  std::optional<std::string> verb2;
  std::optional<std::string> target2;
  bool operator==(const InteractionComparisonPayload&) const = default;
};

struct VelocityPayload {
  std::optional<std::string> instrument;
  std::optional<double> min_speed;
  std::optional<double> max_speed;
  std::optional<double> mean_speed;
  std::optional<std::string> descriptor;
  bool operator==(const VelocityPayload&) const = default;
};

struct ChoicePayload {
  std::optional<std::string> letter;  // "A".."D"
  std::optional<std::string> option;
  bool operator==(const ChoicePayload&) const = default;
};

// Ordered chain: localization, kinematics, interaction, then a conclusion.
struct CotPayload {
  std::optional<std::string> instrument;
  std::optional<std::string> horizontal;
  std::optional<std::string> vertical;
  std::optional<Box1000> box;
  std::optional<std::string> descriptor;
  std::optional<double> mean_speed;
  std::optional<std::string> verb;
  std::optional<std::string> target;
  std::optional<std::string> conclusion_instrument;
  std::optional<std::string> conclusion_verb;
  std::optional<std::string> conclusion_target;
  bool operator==(const CotPayload&) const = default;
};

using Payload =
    std::variant<TemporalWindowPayload, LocatePayload, EntityPayload, SegmentPayload,
                 ExtremePayload, InteractionPayload, RelativePositionPayload,
                 RelativeChangePayload, InteractionComparisonPayload, VelocityPayload,
                 ChoicePayload, CotPayload>;

// Default-constructed payload of the right alternative for `subtask`.
Payload empty_payload(Subtask subtask);

// Names of the fields that scoring requires for `subtask`.
std::vector<std::string> required_fields(Subtask subtask);

// Required fields that are missing from `payload`.
std::vector<std::string> missing_fields(Subtask subtask, const Payload& payload);

nlohmann::json payload_to_json(const Payload& payload);
Payload payload_from_json(Subtask subtask, const nlohmann::json& doc);

}  // namespace stqa
