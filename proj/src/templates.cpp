#include "stqa/templates.hpp"

#include <fstream>
#include <stdexcept>
#include <type_traits>

#include "stqa/format.hpp"

namespace stqa {

namespace builtin {
extern const std::string_view kTemplatesJson;
}  // namespace builtin

namespace {

using Set = std::set<std::string>;

std::vector<GoldSchema> make_schemas() {
  std::vector<GoldSchema> s;
  auto add = [&](Subtask st, Set q, Set a, Set items = {}) {
    s.push_back({to_string(st), st, std::move(q), std::move(a), std::move(items)});
  };
  add(Subtask::temporal_window, {"t"}, {"items"}, {"name", "start", "end", "start_box", "end_box"});
  add(Subtask::locate, {"name", "t"}, {"name", "box"});
  add(Subtask::closest_instrument, {"query_box", "t"}, {"name"});
  add(Subtask::frame_segment, {"name", "t"}, {"name", "horizontal", "vertical"});
  add(Subtask::trajectory_extreme, {"name", "direction", "t1", "t2"},
      {"name", "direction", "t", "box"});
  add(Subtask::sequential_actions, {"name", "current_verb", "current_target", "t"},
      {"name", "verb", "target"});
  add(Subtask::action_status, {"name", "t1", "t2"}, {"name", "verb"});
  add(Subtask::target_interaction, {"name", "t1", "t2"}, {"name", "target"});
  add(Subtask::instrument_id, {"box", "t"}, {"name"});
  add(Subtask::relative_position, {"name1", "name2", "t"},
      {"name1", "name2", "horizontal", "vertical"});
  add(Subtask::relative_change, {"name1", "name2", "t1", "t2"}, {"name1", "name2", "change"});
  add(Subtask::interaction_comparison, {"name1", "name2", "t1", "t2"},
      {"verdict", "name1", "name2", "verb1", "target1", "verb2", "target2"});
  add(Subtask::velocity, {"name", "t1", "t2"}, {"name", "min", "max", "mean", "descriptor"});
  add(Subtask::mc_existence, {"name", "t", "options"}, {"letter", "option"});
  add(Subtask::mc_class, {"t", "options"}, {"letter", "option"});
  add(Subtask::mc_counting, {"name", "t", "options"}, {"letter", "option"});
  add(Subtask::cot, {"name", "t1", "t2"},
      {"name", "horizontal", "vertical", "box", "descriptor", "mean", "verb", "target",
       "conclusion_name", "conclusion_verb", "conclusion_target"});
  return s;
}

const std::vector<GoldSchema>& schemas() {
  static const std::vector<GoldSchema> all = make_schemas();
  return all;
}

// Calls visit(kind, text) for literal runs (kind 0) and placeholders (kind 1).
template <typename Visit>
void scan_pattern(std::string_view pattern, Visit&& visit) {
  std::string literal;
  std::size_t i = 0;
  while (i < pattern.size()) {
    const char c = pattern[i];
    if (c == '{' && i + 1 < pattern.size() && pattern[i + 1] == '{') {
      literal += '{';
      i += 2;
    } else if (c == '}' && i + 1 < pattern.size() && pattern[i + 1] == '}') {
      literal += '}';
      i += 2;
    } else if (c == '{') {
      const auto close = pattern.find('}', i);
      if (close == std::string_view::npos) {
        throw std::invalid_argument("unterminated placeholder in pattern");
      }
      const auto name = pattern.substr(i + 1, close - i - 1);
      if (name.empty() || name.find('{') != std::string_view::npos) {
        throw std::invalid_argument("malformed placeholder in pattern");
      }
      if (!literal.empty()) {
        visit(0, std::string_view(literal));
        literal.clear();
      }
      visit(1, name);
      i = close + 1;
    } else if (c == '}') {
      throw std::invalid_argument("stray '}' in pattern");
    } else {
      literal += c;
      ++i;
    }
  }
  if (!literal.empty()) visit(0, std::string_view(literal));
}

void put(FieldMap& m, const char* key, const std::optional<std::string>& v) {
  if (v) m[key] = *v;
}
void put_time(FieldMap& m, const char* key, const std::optional<double>& v) {
  if (v) m[key] = fixed(*v, kTimestampDecimals);
}
void put_speed(FieldMap& m, const char* key, const std::optional<double>& v) {
  if (v) m[key] = fixed(*v, kSpeedDecimals);
}
void put_box(FieldMap& m, const char* key, const std::optional<Box1000>& v) {
  if (v) m[key] = render_box(*v);
}

std::string check_set(const Set& actual, const Set& expected, const char* what) {
  if (actual == expected) return {};
  std::string msg = std::string(what) + " placeholders do not match schema:";
  for (const auto& a : actual) {
    if (!expected.count(a)) msg += " unexpected {" + a + "}";
  }
  for (const auto& e : expected) {
    if (!actual.count(e)) msg += " missing {" + e + "}";
  }
  return msg;
}

TaskTemplate template_from_json(const nlohmann::json& j) {
  TaskTemplate t;
  t.template_id = j.at("template_id").get<std::string>();
  const auto core = core_task_from_string(j.at("core_task").get<std::string>());
  const auto sub = subtask_from_string(j.at("subtask").get<std::string>());
  if (!core) throw std::invalid_argument(t.template_id + ": unknown core_task");
  if (!sub) throw std::invalid_argument(t.template_id + ": unknown subtask");
  t.core_task = *core;
  t.subtask = *sub;
  t.gold_schema = j.value("gold_schema", std::string(to_string(*sub)));
  t.question = j.at("question").get<std::string>();
  t.answer = j.at("answer").get<std::string>();
  t.answer_item = j.value("answer_item", std::string());
  t.item_separator = j.value("item_separator", std::string("; "));
  t.reconstructed = j.value("reconstructed", false);
  if (j.contains("requirements")) {
    const auto& r = j["requirements"];
    t.requirements.needs_bbox = r.value("needs_bbox", false);
    t.requirements.needs_interactions = r.value("needs_interactions", false);
    t.requirements.min_instruments = r.value("min_instruments", 0);
  }
  return t;
}

}  // namespace

const GoldSchema& gold_schema(Subtask subtask) {
  for (const auto& s : schemas()) {
    if (s.subtask == subtask) return s;
  }
  throw std::logic_error("no schema for subtask");
}

const GoldSchema* find_gold_schema(std::string_view id) {
  for (const auto& s : schemas()) {
    if (s.id == id) return &s;
  }
  return nullptr;
}

std::set<std::string> placeholders(std::string_view pattern) {
  std::set<std::string> names;
  scan_pattern(pattern, [&](int kind, std::string_view text) {
    if (kind == 1) names.emplace(text);
  });
  return names;
}

std::string render_pattern(std::string_view pattern, const FieldMap& fields) {
  std::string out;
  out.reserve(pattern.size() + 64);
  scan_pattern(pattern, [&](int kind, std::string_view text) {
    if (kind == 0) {
      out += text;
      return;
    }
    const auto it = fields.find(std::string(text));
    if (it == fields.end()) {
      throw std::invalid_argument("no value for placeholder {" + std::string(text) + "}");
    }
    out += it->second;
  });
  return out;
}

AnswerFields answer_fields(const Payload& payload) {
  AnswerFields out;
  FieldMap& m = out.fields;
  std::visit(
      [&](const auto& p) {
        using T = std::decay_t<decltype(p)>;
        if constexpr (std::is_same_v<T, TemporalWindowPayload>) {
          for (const auto& e : p.entries) {
            FieldMap item;
            put(item, "name", e.instrument);
            put_time(item, "start", e.start);
            put_time(item, "end", e.end);
            put_box(item, "start_box", e.start_box);
            put_box(item, "end_box", e.end_box);
            out.items.push_back(std::move(item));
          }
        } else if constexpr (std::is_same_v<T, LocatePayload>) {
          put(m, "name", p.instrument);
          put_box(m, "box", p.box);
        } else if constexpr (std::is_same_v<T, EntityPayload>) {
          put(m, "name", p.instrument);
        } else if constexpr (std::is_same_v<T, SegmentPayload>) {
          put(m, "name", p.instrument);
          put(m, "horizontal", p.horizontal);
          put(m, "vertical", p.vertical);
        } else if constexpr (std::is_same_v<T, ExtremePayload>) {
          put(m, "name", p.instrument);
          put(m, "direction", p.direction);
          put_time(m, "t", p.t);
          put_box(m, "box", p.box);
        } else if constexpr (std::is_same_v<T, InteractionPayload>) {
          put(m, "name", p.instrument);
          put(m, "verb", p.verb);
          put(m, "target", p.target);
        } else if constexpr (std::is_same_v<T, RelativePositionPayload>) {
          put(m, "name1", p.instrument1);
          put(m, "name2", p.instrument2);
          put(m, "horizontal", p.horizontal);
          put(m, "vertical", p.vertical);
        } else if constexpr (std::is_same_v<T, RelativeChangePayload>) {
          put(m, "name1", p.instrument1);
          put(m, "name2", p.instrument2);
          put(m, "change", p.change);
        } else if constexpr (std::is_same_v<T, InteractionComparisonPayload>) {
          put(m, "name1", p.instrument1);
          put(m, "name2", p.instrument2);
          put(m, "verdict", p.verdict);
          put(m, "verb1", p.verb1);
          put(m, "target1", p.target1);
          put(m, "verb2", p.verb2);
          put(m, "target2", p.target2);
        } else if constexpr (std::is_same_v<T, VelocityPayload>) {
          put(m, "name", p.instrument);
          put_speed(m, "min", p.min_speed);
          put_speed(m, "max", p.max_speed);
          put_speed(m, "mean", p.mean_speed);
          put(m, "descriptor", p.descriptor);
        } else if constexpr (std::is_same_v<T, ChoicePayload>) {
          put(m, "letter", p.letter);
          put(m, "option", p.option);
        } else if constexpr (std::is_same_v<T, CotPayload>) {
          put(m, "name", p.instrument);
          put(m, "horizontal", p.horizontal);
          put(m, "vertical", p.vertical);
          put_box(m, "box", p.box);
          put(m, "descriptor", p.descriptor);
          put_speed(m, "mean", p.mean_speed);
          put(m, "verb", p.verb);
          put(m, "target", p.target);
          put(m, "conclusion_name", p.conclusion_instrument);
          put(m, "conclusion_verb", p.conclusion_verb);
          put(m, "conclusion_target", p.conclusion_target);
        }
      },
      payload);
  return out;
}

std::string render_question(const TaskTemplate& tmpl, const FieldMap& fields) {
  return render_pattern(tmpl.question, fields);
}

std::string render_answer(const TaskTemplate& tmpl, const Payload& gold) {
  AnswerFields f = answer_fields(gold);
  if (!tmpl.answer_item.empty()) {
    std::string joined;
    for (std::size_t i = 0; i < f.items.size(); ++i) {
      if (i > 0) joined += tmpl.item_separator;
      joined += render_pattern(tmpl.answer_item, f.items[i]);
    }
    f.fields["items"] = joined;
  }
  return render_pattern(tmpl.answer, f.fields);
}

void validate_template(const TaskTemplate& tmpl) {
  const auto fail = [&](const std::string& why) {
    throw std::invalid_argument("template " + tmpl.template_id + ": " + why);
  };
  if (tmpl.template_id.empty()) throw std::invalid_argument("template with empty template_id");
  if (core_task_of(tmpl.subtask) != tmpl.core_task) {
    fail(std::string("subtask ") + to_string(tmpl.subtask) + " does not belong to core task " +
         to_string(tmpl.core_task));
  }
  const GoldSchema* schema = find_gold_schema(tmpl.gold_schema);
  if (!schema) fail("unknown gold schema '" + tmpl.gold_schema + "'");
  if (schema->subtask != tmpl.subtask) fail("gold schema is for another subtask");
  try {
    if (auto msg = check_set(placeholders(tmpl.question), schema->question_fields, "question");
        !msg.empty()) {
      fail(msg);
    }
    if (auto msg = check_set(placeholders(tmpl.answer), schema->answer_fields, "answer");
        !msg.empty()) {
      fail(msg);
    }
    if (!schema->item_fields.empty() || !tmpl.answer_item.empty()) {
      if (auto msg = check_set(placeholders(tmpl.answer_item), schema->item_fields, "answer_item");
          !msg.empty()) {
        fail(msg);
      }
    }
  } catch (const std::invalid_argument& e) {
    const std::string what = e.what();
    if (what.rfind("template ", 0) == 0) throw;
    fail(what);
  }
}

TemplateRegistry TemplateRegistry::from_json(const nlohmann::json& doc) {
  TemplateRegistry reg;
  const auto& list = doc.is_array() ? doc : doc.at("templates");
  for (const auto& j : list) {
    TaskTemplate t = template_from_json(j);
    validate_template(t);
    if (reg.find(t.template_id)) {
      throw std::invalid_argument("duplicate template id " + t.template_id);
    }
    reg.templates_.push_back(std::move(t));
  }
  for (auto st : kAllSubtasks) {
    if (reg.for_subtask(st).empty()) {
      throw std::invalid_argument(std::string("no template for subtask ") + to_string(st));
    }
  }
  return reg;
}

TemplateRegistry TemplateRegistry::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open template registry " + path.string());
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw std::invalid_argument(path.string() + ": " + e.what());
  }
  return from_json(doc);
}

const TemplateRegistry& TemplateRegistry::builtin() {
  static const TemplateRegistry reg = from_json(nlohmann::json::parse(builtin::kTemplatesJson));
  return reg;
}

nlohmann::json TemplateRegistry::to_json() const {
  nlohmann::json list = nlohmann::json::array();
  for (const auto& t : templates_) {
    nlohmann::json j = {{"template_id", t.template_id},
                        {"core_task", to_string(t.core_task)},
                        {"subtask", to_string(t.subtask)},
                        {"gold_schema", t.gold_schema},
                        {"question", t.question},
                        {"answer", t.answer}};
    if (!t.answer_item.empty()) {
      j["answer_item"] = t.answer_item;
      j["item_separator"] = t.item_separator;
    }
    if (t.reconstructed) j["reconstructed"] = true;
    j["requirements"] = {{"needs_bbox", t.requirements.needs_bbox},
                         {"needs_interactions", t.requirements.needs_interactions},
                         {"min_instruments", t.requirements.min_instruments}};
    list.push_back(std::move(j));
  }
  return {{"templates", list}};
}

const TaskTemplate* TemplateRegistry::find(std::string_view template_id) const {
  for (const auto& t : templates_) {
    if (t.template_id == template_id) return &t;
  }
  return nullptr;
}

const TaskTemplate& TemplateRegistry::at(std::string_view template_id) const {
  if (const auto* t = find(template_id)) return *t;
  throw std::out_of_range("unknown template id " + std::string(template_id));
}

std::vector<const TaskTemplate*> TemplateRegistry::for_subtask(Subtask subtask) const {
  std::vector<const TaskTemplate*> out;
  for (const auto& t : templates_) {
    if (t.subtask == subtask) out.push_back(&t);
  }
  return out;
}

}  // namespace stqa
