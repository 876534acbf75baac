#include "stqa/answer_parser.hpp"

#include <algorithm>
#include <cctype>
#include <cstdlib>
#include <type_traits>

namespace stqa {

namespace {

bool is_digit(char c) { return std::isdigit(static_cast<unsigned char>(c)) != 0; }
bool is_alnum(char c) { return std::isalnum(static_cast<unsigned char>(c)) != 0; }
bool is_space(char c) { return std::isspace(static_cast<unsigned char>(c)) != 0; }

enum Category { kHorizontal = 0, kVertical = 1, kChange = 2 };

TermMatcher make_relation_matcher() {
  TermMatcher m;
  for (const char* s : {"left"}) m.add(s, "left", kHorizontal);
  for (const char* s : {"right"}) m.add(s, "right", kHorizontal);
  for (const char* s : {"above", "over", "on top of"}) m.add(s, "above", kVertical);
  for (const char* s : {"below", "under", "beneath", "underneath"}) m.add(s, "below", kVertical);
  for (const char* s : {"closer", "nearer", "approaching", "approach", "approaches", "converging"}) {
    m.add(s, "closer", kChange);
  }
  for (const char* s : {"further", "farther", "away", "apart", "diverging"}) {
    m.add(s, "further", kChange);
  }
  for (const char* s : {"unchanged", "constant", "stable", "no change", "no significant change"}) {
    m.add(s, "unchanged", kChange);
  }
  return m;
}

TermMatcher make_segment_matcher() {
  TermMatcher m;
  m.add("left", "left", kHorizontal);
  for (const char* s : {"center", "centre", "central"}) m.add(s, "center", kHorizontal);
  m.add("right", "right", kHorizontal);
  for (const char* s : {"top", "upper"}) m.add(s, "top", kVertical);
  m.add("middle", "middle", kVertical);
  for (const char* s : {"bottom", "lower"}) m.add(s, "bottom", kVertical);
  return m;
}

TermMatcher make_direction_matcher() {
  TermMatcher m;
  for (const char* s : {"left", "leftmost"}) m.add(s, "left");
  for (const char* s : {"right", "rightmost"}) m.add(s, "right");
  for (const char* s : {"top", "topmost", "uppermost", "highest"}) m.add(s, "top");
  for (const char* s : {"bottom", "bottommost", "lowest"}) m.add(s, "bottom");
  return m;
}

TermMatcher make_descriptor_matcher() {
  TermMatcher m;
  for (const char* s : {"stationary", "static", "motionless", "not moving"}) {
    m.add(s, "stationary");
  }
  for (const char* s : {"moving slowly", "slowly moving", "slowly", "slow"}) {
    m.add(s, "moving slowly");
  }
  for (const char* s : {"moving actively", "actively moving", "actively", "active", "fast",
                        "rapidly", "quickly"}) {
    m.add(s, "moving actively");
  }
  return m;
}

TermMatcher make_verdict_matcher() {
  TermMatcher m;
  for (const char* s : {"same", "identical"}) m.add(s, "same");
  for (const char* s : {"different", "differ", "differs", "distinct"}) m.add(s, "different");
  return m;
}

enum SpeedKey { kMin = 0, kMax = 1, kMean = 2 };

TermMatcher make_speed_matcher() {
  TermMatcher m;
  for (const char* s : {"min", "minimum", "lowest"}) m.add(s, "min", kMin);
  for (const char* s : {"max", "maximum", "highest", "peak"}) m.add(s, "max", kMax);
  for (const char* s : {"mean", "average", "avg"}) m.add(s, "mean", kMean);
  return m;
}

const TermMatcher& relation_matcher() {
  static const TermMatcher m = make_relation_matcher();
  return m;
}
const TermMatcher& segment_matcher() {
  static const TermMatcher m = make_segment_matcher();
  return m;
}
const TermMatcher& direction_matcher() {
  static const TermMatcher m = make_direction_matcher();
  return m;
}
const TermMatcher& descriptor_matcher() {
  static const TermMatcher m = make_descriptor_matcher();
  return m;
}
const TermMatcher& verdict_matcher() {
  static const TermMatcher m = make_verdict_matcher();
  return m;
}
const TermMatcher& speed_matcher() {
  static const TermMatcher m = make_speed_matcher();
  return m;
}

std::optional<std::string> first_term(const TermMatcher& m, std::string_view text) {
  const auto found = m.find_all(text);
  if (found.empty()) return std::nullopt;
  return found.front().canonical;
}

// Parses an optionally signed integer at text[i]; advances i.
std::optional<long> read_int(std::string_view text, std::size_t& i) {
  std::size_t j = i;
  bool neg = false;
  if (j < text.size() && (text[j] == '-' || text[j] == '+')) {
    neg = text[j] == '-';
    ++j;
  }
  const std::size_t digits = j;
  while (j < text.size() && is_digit(text[j])) ++j;
  if (j == digits || j - digits > 9) return std::nullopt;
  // An integer followed by a decimal point is not an integer coordinate.
  if (j < text.size() && text[j] == '.' && j + 1 < text.size() && is_digit(text[j + 1])) {
    return std::nullopt;
  }
  long v = std::strtol(std::string(text.substr(digits, j - digits)).c_str(), nullptr, 10);
  i = j;
  return neg ? -v : v;
}

void skip_spaces(std::string_view text, std::size_t& i) {
  while (i < text.size() && is_space(text[i])) ++i;
}

std::optional<std::string> first_entity(const std::vector<EntityMatch>& ents, EntityKind kind) {
  for (const auto& e : ents) {
    if (e.kind == kind) return e.label;
  }
  return std::nullopt;
}

std::vector<EntityMatch> of_kind(const std::vector<EntityMatch>& ents, EntityKind kind) {
  std::vector<EntityMatch> out;
  for (const auto& e : ents) {
    if (e.kind == kind) out.push_back(e);
  }
  return out;
}

// First mention, and the first later mention with a different label.
std::pair<const EntityMatch*, const EntityMatch*> two_instruments(
    const std::vector<EntityMatch>& inst) {
  if (inst.empty()) return {nullptr, nullptr};
  for (std::size_t i = 1; i < inst.size(); ++i) {
    if (inst[i].label != inst[0].label) return {&inst[0], &inst[i]};
  }
  return {&inst[0], nullptr};
}

std::optional<double> first_mean_speed(std::string_view text) { return parse_speeds(text).mean; }

ParseStatus status_of(Subtask subtask, const Payload& value, std::vector<std::string>& missing) {
  missing = missing_fields(subtask, value);
  if (missing.empty()) return ParseStatus::ok;
  if (subtask == Subtask::temporal_window) {
    const auto& p = std::get<TemporalWindowPayload>(value);
    return p.entries.empty() ? ParseStatus::failed : ParseStatus::partial;
  }
  return missing.size() >= required_fields(subtask).size() ? ParseStatus::failed
                                                            : ParseStatus::partial;
}

}  // namespace

const char* to_string(ParseStatus status) {
  switch (status) {
    case ParseStatus::ok: return "ok";
    case ParseStatus::partial: return "partial";
    case ParseStatus::failed: return "failed";
  }
  return "?";
}

std::vector<NumberLiteral> scan_numbers(std::string_view text) {
  std::vector<NumberLiteral> out;
  std::size_t i = 0;
  while (i < text.size()) {
    if (!is_digit(text[i]) || (i > 0 && (is_alnum(text[i - 1]) || text[i - 1] == '.' ||
                                         text[i - 1] == '_'))) {
      ++i;
      continue;
    }
    std::size_t j = i;
    while (j < text.size() && is_digit(text[j])) ++j;
    int decimals = 0;
    if (j + 1 < text.size() && text[j] == '.' && is_digit(text[j + 1])) {
      std::size_t k = j + 1;
      while (k < text.size() && is_digit(text[k])) ++k;
      decimals = static_cast<int>(k - j - 1);
      j = k;
    }
    if (j < text.size() && (std::isalpha(static_cast<unsigned char>(text[j])) || text[j] == '_')) {
      // Part of a word such as "3d" or "2nd".
      while (j < text.size() && (is_alnum(text[j]) || text[j] == '_')) ++j;
      i = j;
      continue;
    }
    std::size_t begin = i;
    bool negative = false;
    if (i > 0 && text[i - 1] == '-') {
      const bool sign_context =
          i == 1 || is_space(text[i - 2]) || std::string_view("([<:,=").find(text[i - 2]) !=
                                                 std::string_view::npos;
      if (sign_context) {
        negative = true;
        begin = i - 1;
      }
    }
    double v = std::strtod(std::string(text.substr(i, j - i)).c_str(), nullptr);
    out.push_back({negative ? -v : v, decimals, begin, j});
    i = j;
  }
  return out;
}

std::optional<char> parse_mc_choice(std::string_view text) {
  // Whole response is a single letter, possibly punctuated.
  {
    std::string core;
    for (char c : text) {
      if (is_alnum(c)) core.push_back(c);
      else if (!is_space(c) && std::string_view("().:[]").find(c) == std::string_view::npos) {
        core = "##";
        break;
      }
    }
    if (core.size() == 1) {
      const char u = static_cast<char>(std::toupper(static_cast<unsigned char>(core[0])));
      if (u >= 'A' && u <= 'D') return u;
    }
  }
  for (std::size_t i = 0; i < text.size(); ++i) {
    const char c = text[i];
    const char u = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
    if (u < 'A' || u > 'D') continue;
    if (i > 0 && (is_alnum(text[i - 1]) || text[i - 1] == '_' || text[i - 1] == '\'')) continue;
    if (i + 1 < text.size() && (is_alnum(text[i + 1]) || text[i + 1] == '_' ||
                                text[i + 1] == '\'')) {
      continue;
    }
    const char prev = i > 0 ? text[i - 1] : ' ';
    const char next = i + 1 < text.size() ? text[i + 1] : ' ';
    const bool upper = c == u;
    if ((prev == '(' && next == ')') || (prev == '[' && next == ']')) return u;
    if (!upper) continue;
    if (next == ')' || next == ':') return u;
    if (u != 'A') return u;
    // "A" followed by a lowercase word is the article.
    std::size_t j = i + 1;
    while (j < text.size() && text[j] == ' ') ++j;
    if (j > i + 1 && j < text.size() && std::islower(static_cast<unsigned char>(text[j]))) continue;
    return u;
  }
  return std::nullopt;
}

std::vector<Box1000> parse_bboxes(std::string_view text) {
  std::vector<Box1000> out;
  for (std::size_t i = 0; i < text.size(); ++i) {
    const char open = text[i];
    if (open != '<' && open != '[') continue;
    const char close = open == '<' ? '>' : ']';
    std::size_t j = i + 1;
    long v[4];
    bool ok = true;
    for (int k = 0; k < 4 && ok; ++k) {
      skip_spaces(text, j);
      const auto n = read_int(text, j);
      if (!n) {
        ok = false;
        break;
      }
      v[k] = *n;
      skip_spaces(text, j);
      if (k < 3) {
        if (j < text.size() && text[j] == ',') {
          ++j;
        } else {
          ok = false;
        }
      }
    }
    if (!ok || j >= text.size() || text[j] != close) continue;
    const bool in_range = std::all_of(std::begin(v), std::end(v),
                                      [](long x) { return x >= 0 && x <= 1000; });
    if (in_range && v[0] < v[2] && v[1] < v[3]) {
      out.push_back({static_cast<int>(v[0]), static_cast<int>(v[1]), static_cast<int>(v[2]),
                     static_cast<int>(v[3])});
    }
    i = j;
  }
  return out;
}

namespace {

bool timestamp_literal(const NumberLiteral& n) {
  return n.decimals >= 1 && n.decimals <= 4 && n.value >= 0.0 && n.value <= 1.0;
}

}  // namespace

std::vector<double> parse_timestamps(std::string_view text) {
  std::vector<double> out;
  for (const auto& n : scan_numbers(text)) {
    if (timestamp_literal(n)) out.push_back(n.value);
  }
  return out;
}

std::vector<std::pair<double, double>> parse_time_ranges(std::string_view text) {
  std::vector<std::pair<double, double>> out;
  const auto nums = scan_numbers(text);
  for (std::size_t i = 0; i + 1 < nums.size(); ++i) {
    if (!timestamp_literal(nums[i]) || !timestamp_literal(nums[i + 1])) continue;
    std::string_view gap = text.substr(nums[i].end, nums[i + 1].begin - nums[i].end);
    while (!gap.empty() && is_space(gap.front())) gap.remove_prefix(1);
    while (!gap.empty() && is_space(gap.back())) gap.remove_suffix(1);
    if (gap == "-" || gap == "\xE2\x80\x93" || gap == "to" || gap == "and") {
      out.emplace_back(nums[i].value, nums[i + 1].value);
      ++i;
    }
  }
  return out;
}

SpeedValues parse_speeds(std::string_view text) {
  const auto keys = speed_matcher().find_all(text);
  const auto nums = scan_numbers(text);
  std::optional<double> bound[3];
  bool seen[3] = {false, false, false};
  std::vector<bool> used(nums.size(), false);

  // First occurrence of each keyword only.
  std::vector<std::size_t> firsts;
  for (std::size_t k = 0; k < keys.size(); ++k) {
    if (!seen[keys[k].category]) {
      seen[keys[k].category] = true;
      firsts.push_back(k);
    }
  }
  std::vector<bool> resolved(keys.size(), false);
  for (std::size_t k : firsts) {
    const std::size_t limit = k + 1 < keys.size() ? keys[k + 1].begin : text.size();
    for (std::size_t n = 0; n < nums.size(); ++n) {
      if (nums[n].begin >= keys[k].end && nums[n].begin < limit) {
        used[n] = true;
        resolved[k] = true;
        if (nums[n].value >= 0.0) bound[keys[k].category] = nums[n].value;
        break;
      }
    }
  }
  for (std::size_t k : firsts) {
    if (resolved[k]) continue;
    for (std::size_t n = nums.size(); n-- > 0;) {
      if (nums[n].end <= keys[k].begin && !used[n]) {
        used[n] = true;
        if (nums[n].value >= 0.0) bound[keys[k].category] = nums[n].value;
        break;
      }
    }
  }
  return {bound[kMin], bound[kMax], bound[kMean]};
}

RelationTerms parse_relation_terms(std::string_view text) {
  RelationTerms out;
  for (const auto& m : relation_matcher().find_all(text)) {
    if (m.category == kHorizontal && !out.horizontal) out.horizontal = m.canonical;
    if (m.category == kVertical && !out.vertical) out.vertical = m.canonical;
    if (m.category == kChange && !out.change) out.change = m.canonical;
  }
  return out;
}

std::pair<std::optional<std::string>, std::optional<std::string>> parse_segment_terms(
    std::string_view text) {
  std::optional<std::string> h;
  std::optional<std::string> v;
  for (const auto& m : segment_matcher().find_all(text)) {
    if (m.category == kHorizontal && !h) h = m.canonical;
    if (m.category == kVertical && !v) v = m.canonical;
  }
  return {h, v};
}

std::optional<std::string> parse_direction(std::string_view text) {
  return first_term(direction_matcher(), text);
}

std::optional<std::string> parse_descriptor(std::string_view text) {
  return first_term(descriptor_matcher(), text);
}

std::optional<std::string> parse_verdict(std::string_view text) {
  return first_term(verdict_matcher(), text);
}

std::pair<std::string_view, std::string_view> split_conclusion(std::string_view text) {
  for (const auto& tok : tokenize(text)) {
    if (tok.text == "conclusion" || tok.text == "conclusions" || tok.text == "conclude" ||
        tok.text == "concluding") {
      return {text.substr(0, tok.begin), text.substr(tok.begin)};
    }
  }
  return {text, std::string_view()};
}

ParsedAnswer parse_answer(Subtask subtask, std::string_view text, const Vocabulary& vocab,
                          const std::vector<std::string>& options) {
  ParsedAnswer out;
  out.raw_text = std::string(text);
  out.value = empty_payload(subtask);
  const auto ents = vocab.find_entities(text);
  const auto inst = of_kind(ents, EntityKind::instrument);

  std::visit(
      [&](auto& p) {
        using T = std::decay_t<decltype(p)>;
        if constexpr (std::is_same_v<T, TemporalWindowPayload>) {
          for (std::size_t i = 0; i < inst.size(); ++i) {
            const std::size_t end = i + 1 < inst.size() ? inst[i + 1].begin : text.size();
            const auto seg = text.substr(inst[i].end, end - inst[i].end);
            const auto ranges = parse_time_ranges(seg);
            const auto times = parse_timestamps(seg);
            const auto boxes = parse_bboxes(seg);
            if (times.empty() && boxes.empty()) continue;
            const bool dup = std::any_of(p.entries.begin(), p.entries.end(), [&](const auto& e) {
              return e.instrument == inst[i].label;
            });
            if (dup) continue;
            WindowEntry e;
            e.instrument = inst[i].label;
            if (!ranges.empty()) {
              e.start = ranges[0].first;
              e.end = ranges[0].second;
            } else if (!times.empty()) {
              e.start = times[0];
              if (times.size() >= 2) e.end = times[1];
            }
            if (!boxes.empty()) e.start_box = boxes[0];
            if (boxes.size() >= 2) e.end_box = boxes[1];
            p.entries.push_back(std::move(e));
          }
        } else if constexpr (std::is_same_v<T, LocatePayload>) {
          p.instrument = first_entity(ents, EntityKind::instrument);
          const auto boxes = parse_bboxes(text);
          if (!boxes.empty()) p.box = boxes.front();
        } else if constexpr (std::is_same_v<T, EntityPayload>) {
          p.instrument = first_entity(ents, EntityKind::instrument);
        } else if constexpr (std::is_same_v<T, SegmentPayload>) {
          p.instrument = first_entity(ents, EntityKind::instrument);
          std::tie(p.horizontal, p.vertical) = parse_segment_terms(text);
        } else if constexpr (std::is_same_v<T, ExtremePayload>) {
          p.instrument = first_entity(ents, EntityKind::instrument);
          p.direction = parse_direction(text);
          const auto times = parse_timestamps(text);
          if (!times.empty()) p.t = times.front();
          const auto boxes = parse_bboxes(text);
          if (!boxes.empty()) p.box = boxes.front();
        } else if constexpr (std::is_same_v<T, InteractionPayload>) {
          p.instrument = first_entity(ents, EntityKind::instrument);
          if (subtask != Subtask::target_interaction) p.verb = first_entity(ents, EntityKind::verb);
          if (subtask != Subtask::action_status) p.target = first_entity(ents, EntityKind::target);
        } else if constexpr (std::is_same_v<T, RelativePositionPayload>) {
          const auto [a, b] = two_instruments(inst);
          if (a) p.instrument1 = a->label;
          if (b) p.instrument2 = b->label;
          const auto terms = parse_relation_terms(text);
          p.horizontal = terms.horizontal;
          p.vertical = terms.vertical;
        } else if constexpr (std::is_same_v<T, RelativeChangePayload>) {
          const auto [a, b] = two_instruments(inst);
          if (a) p.instrument1 = a->label;
          if (b) p.instrument2 = b->label;
          p.change = parse_relation_terms(text).change;
        } else if constexpr (std::is_same_v<T, InteractionComparisonPayload>) {
          const auto [a, b] = two_instruments(inst);
          if (a) p.instrument1 = a->label;
          if (b) p.instrument2 = b->label;
          p.verdict = parse_verdict(text);
          if (a && b) {
            const auto first = vocab.find_entities(text.substr(a->end, b->begin - a->end));
            const auto second = vocab.find_entities(text.substr(b->end));
            p.verb1 = first_entity(first, EntityKind::verb);
            p.target1 = first_entity(first, EntityKind::target);
            p.verb2 = first_entity(second, EntityKind::verb);
            p.target2 = first_entity(second, EntityKind::target);
          } else {
            const auto verbs = of_kind(ents, EntityKind::verb);
            const auto targets = of_kind(ents, EntityKind::target);
            if (!verbs.empty()) p.verb1 = verbs[0].label;
            if (verbs.size() >= 2) p.verb2 = verbs[1].label;
            if (!targets.empty()) p.target1 = targets[0].label;
            if (targets.size() >= 2) p.target2 = targets[1].label;
          }
        } else if constexpr (std::is_same_v<T, VelocityPayload>) {
          p.instrument = first_entity(ents, EntityKind::instrument);
          const auto speeds = parse_speeds(text);
          p.min_speed = speeds.min;
          p.max_speed = speeds.max;
          p.mean_speed = speeds.mean;
          p.descriptor = parse_descriptor(text);
        } else if constexpr (std::is_same_v<T, ChoicePayload>) {
          if (const auto letter = parse_mc_choice(text)) {
            p.letter = std::string(1, *letter);
            const auto idx = static_cast<std::size_t>(*letter - 'A');
            if (idx < options.size()) p.option = options[idx];
          }
        } else if constexpr (std::is_same_v<T, CotPayload>) {
          const auto [reasoning, conclusion] = split_conclusion(text);
          const auto r = vocab.find_entities(reasoning);
          p.instrument = first_entity(r, EntityKind::instrument);
          std::tie(p.horizontal, p.vertical) = parse_segment_terms(reasoning);
          const auto boxes = parse_bboxes(reasoning);
          if (!boxes.empty()) p.box = boxes.front();
          p.descriptor = parse_descriptor(reasoning);
          p.mean_speed = first_mean_speed(reasoning);
          p.verb = first_entity(r, EntityKind::verb);
          p.target = first_entity(r, EntityKind::target);
          if (!conclusion.empty()) {
            const auto c = vocab.find_entities(conclusion);
            p.conclusion_instrument = first_entity(c, EntityKind::instrument);
            p.conclusion_verb = first_entity(c, EntityKind::verb);
            p.conclusion_target = first_entity(c, EntityKind::target);
          }
        }
      },
      out.value);

  std::vector<std::string> missing;
  out.status = status_of(subtask, out.value, missing);
  if (out.status != ParseStatus::ok) {
    out.failure = ParseFailure{missing, out.status == ParseStatus::failed
                                            ? "no required field found"
                                            : "some required fields missing"};
  }
  return out;
}

}  // namespace stqa
