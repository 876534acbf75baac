#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "stqa/geometry.hpp"
#include "stqa/payload.hpp"
#include "stqa/vocabulary.hpp"

namespace stqa {

enum class ParseStatus { ok, partial, failed };

const char* to_string(ParseStatus status);

struct ParseFailure {
  std::vector<std::string> missing;
  std::string reason;
};

struct ParsedAnswer {
  Payload value;
  ParseStatus status = ParseStatus::failed;
  std::string raw_text;
  std::optional<ParseFailure> failure;  // set unless status is ok
};

// A numeric literal in free text with its byte range.
struct NumberLiteral {
  double value = 0.0;
  int decimals = 0;  // digits after the point; 0 for integers
  std::size_t begin = 0;
  std::size_t end = 0;
};

std::vector<NumberLiteral> scan_numbers(std::string_view text);

// First standalone option letter A-D. Parenthesized letters match in any
// case; bare lowercase letters only when they are the whole response; a bare
// "A" followed by a lowercase word is read as the article.
std::optional<char> parse_mc_choice(std::string_view text);

// <x1, y1, x2, y2> and [x1, y1, x2, y2] integer groups in order of
// appearance. Groups outside [0,1000] or with x1 >= x2 / y1 >= y2 are dropped.
std::vector<Box1000> parse_bboxes(std::string_view text);

// Decimal literals with 1-4 decimals inside [0,1], in order of appearance.
std::vector<double> parse_timestamps(std::string_view text);
// "a - b" ranges (also "a to b") of valid timestamps.
std::vector<std::pair<double, double>> parse_time_ranges(std::string_view text);

struct SpeedValues {
  std::optional<double> min;
  std::optional<double> max;
  std::optional<double> mean;
};

// Each of min/max/mean (and minimum/maximum/average) binds to the first
// literal after it and before the next keyword, or else to the nearest
// literal before it. Negative values are dropped.
SpeedValues parse_speeds(std::string_view text);

struct RelationTerms {
  std::optional<std::string> horizontal;  // left | right
  std::optional<std::string> vertical;    // above | below
  std::optional<std::string> change;      // closer | further | unchanged
};

RelationTerms parse_relation_terms(std::string_view text);

// First horizontal (left/center/right) and vertical (top/middle/bottom)
// frame-third terms.
std::pair<std::optional<std::string>, std::optional<std::string>> parse_segment_terms(
    std::string_view text);

std::optional<std::string> parse_direction(std::string_view text);
std::optional<std::string> parse_descriptor(std::string_view text);
std::optional<std::string> parse_verdict(std::string_view text);

// Full structured parse for one subtask. `options` (multi-choice only) fills
// in the option text for the chosen letter.
ParsedAnswer parse_answer(Subtask subtask, std::string_view text, const Vocabulary& vocab,
                          const std::vector<std::string>& options = {});

// Text before the first "conclusion" marker, and the rest.
std::pair<std::string_view, std::string_view> split_conclusion(std::string_view text);

}  // namespace stqa
