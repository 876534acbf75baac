#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include <json.hpp>

namespace stqa {

// A lowercase alphanumeric word with its byte range in the source text.
struct Token {
  std::string text;
  std::size_t begin = 0;
  std::size_t end = 0;
};

// Splits on every non-alphanumeric byte and case-folds ASCII, so that
// "Cystic_Duct", "cystic-duct" and "cystic  duct" tokenize identically.
std::vector<Token> tokenize(std::string_view text);

// Canonical key of a phrase: its tokens joined by single spaces.
std::string normalize_phrase(std::string_view text);

// Leftmost-longest phrase matcher over token sequences. Each surface phrase
// maps to exactly one canonical term and an integer category.
class TermMatcher {
 public:
  struct Match {
    std::string canonical;
    int category = 0;
    std::size_t first_token = 0;  // inclusive
    std::size_t last_token = 0;   // exclusive
    std::size_t begin = 0;        // byte offsets in the scanned text
    std::size_t end = 0;
  };

  // Throws std::invalid_argument if `surface` is empty or already bound to a
  // different canonical term.
  void add(std::string_view surface, std::string_view canonical, int category = 0);

  // Non-overlapping matches in order of appearance.
  std::vector<Match> find_all(const std::vector<Token>& tokens) const;
  std::vector<Match> find_all(std::string_view text) const { return find_all(tokenize(text)); }

  // Exact lookup of a whole phrase.
  const Match* lookup(std::string_view phrase) const;

  std::size_t size() const { return entries_.size(); }
  std::vector<std::string> surfaces() const;

 private:
  std::unordered_map<std::string, Match> entries_;
  std::size_t max_tokens_ = 0;
};

enum class EntityKind { instrument = 0, verb = 1, target = 2 };

const char* to_string(EntityKind kind);

struct EntityMatch {
  std::string label;
  EntityKind kind = EntityKind::instrument;
  std::size_t begin = 0;
  std::size_t end = 0;
};

// Canonical instrument/verb/target labels plus a synonym table. Canonical
// labels are lowercase, unique across all three lists and map to themselves.
class Vocabulary {
 public:
  Vocabulary() = default;

  static Vocabulary from_json(const nlohmann::json& doc);
  static Vocabulary load(const std::filesystem::path& path);
  // The vocabulary shipped in data/vocabulary.json.
  static const Vocabulary& builtin();

  nlohmann::json to_json() const;

  const std::vector<std::string>& instruments() const { return instruments_; }
  const std::vector<std::string>& verbs() const { return verbs_; }
  const std::vector<std::string>& targets() const { return targets_; }
  const std::vector<std::string>& labels(EntityKind kind) const;
  const std::map<std::string, std::string>& synonyms() const { return synonyms_; }
  // Set when the synonym table is curated rather than taken from a source.
  bool synonyms_reconstructed() const { return synonyms_reconstructed_; }

  bool contains(std::string_view label, EntityKind kind) const;

  // Whole-phrase lookup (case and separator insensitive) restricted to one
  // kind. Used for strict ingestion.
  std::optional<std::string> lookup(std::string_view surface, EntityKind kind) const;

  // Longest entity phrase inside `span`, leftmost on ties.
  std::optional<EntityMatch> canonicalize(std::string_view span) const;

  // All entity mentions in reading order; overlapping phrases resolve to the
  // longest one, so "clip applier" never yields the verb "clip".
  std::vector<EntityMatch> find_entities(std::string_view text) const;
  std::vector<EntityMatch> find_entities(std::string_view text, EntityKind kind) const;

  const TermMatcher& matcher() const { return matcher_; }

 private:
  void index();

  std::vector<std::string> instruments_;
  std::vector<std::string> verbs_;
  std::vector<std::string> targets_;
  std::map<std::string, std::string> synonyms_;
  bool synonyms_reconstructed_ = false;
  TermMatcher matcher_;
};

// Free-function form of Vocabulary::canonicalize returning only the label.
std::optional<std::string> canonicalize_entity(std::string_view span, const Vocabulary& vocab);

}  // namespace stqa
