#pragma once

#include <filesystem>
#include <map>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "stqa/payload.hpp"

namespace stqa {

using FieldMap = std::map<std::string, std::string>;

struct TemplateRequirements {
  bool needs_bbox = false;
  bool needs_interactions = false;
  int min_instruments = 0;
};

// A question/answer pattern pair. Placeholders are written {name}; "{{" and
// "}}" produce literal braces. Answers with one entry per instrument
// (temporal_window) put the repeated part in answer_item and reference the
// joined list as {items}.
struct TaskTemplate {
  std::string template_id;
  CoreTask core_task = CoreTask::st_grounding;
  Subtask subtask = Subtask::locate;
  std::string gold_schema;
  std::string question;
  std::string answer;
  std::string answer_item;
  std::string item_separator = "; ";
  TemplateRequirements requirements;
  bool reconstructed = false;
};

// Placeholder sets a template must use for a given gold schema.
struct GoldSchema {
  std::string id;
  Subtask subtask = Subtask::locate;
  std::set<std::string> question_fields;
  std::set<std::string> answer_fields;
  std::set<std::string> item_fields;  // non-empty only for list answers
};

// One schema per subtask, id equal to the subtask name.
const GoldSchema& gold_schema(Subtask subtask);
const GoldSchema* find_gold_schema(std::string_view id);

// Placeholder names used by `pattern`. Throws std::invalid_argument on an
// unbalanced or empty placeholder.
std::set<std::string> placeholders(std::string_view pattern);

// Substitutes every placeholder. Throws std::invalid_argument naming the
// first placeholder missing from `fields`.
std::string render_pattern(std::string_view pattern, const FieldMap& fields);

// Answer-side placeholder values of a gold payload, already formatted
// (timestamps 2 decimals, speeds 3, boxes "x1, y1, x2, y2").
struct AnswerFields {
  FieldMap fields;
  std::vector<FieldMap> items;
};
AnswerFields answer_fields(const Payload& payload);

std::string render_question(const TaskTemplate& tmpl, const FieldMap& fields);
std::string render_answer(const TaskTemplate& tmpl, const Payload& gold);

class TemplateRegistry {
 public:
  // Validates every template; throws std::invalid_argument with the
  // offending template id.
  static TemplateRegistry from_json(const nlohmann::json& doc);
  static TemplateRegistry load(const std::filesystem::path& path);
  static const TemplateRegistry& builtin();

  nlohmann::json to_json() const;

  const std::vector<TaskTemplate>& templates() const { return templates_; }
  const TaskTemplate* find(std::string_view template_id) const;
  const TaskTemplate& at(std::string_view template_id) const;
  // Templates for `subtask` in registry order.
  std::vector<const TaskTemplate*> for_subtask(Subtask subtask) const;

 private:
  std::vector<TaskTemplate> templates_;
};

// Throws std::invalid_argument if the template does not fit its schema.
void validate_template(const TaskTemplate& tmpl);

}  // namespace stqa
