#include "stqa/vocabulary.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <set>
#include <stdexcept>

namespace stqa {

namespace builtin {
extern const std::string_view kVocabularyJson;
}  // namespace builtin

std::vector<Token> tokenize(std::string_view text) {
  std::vector<Token> tokens;
  std::size_t i = 0;
  while (i < text.size()) {
    const auto c = static_cast<unsigned char>(text[i]);
    if (!std::isalnum(c)) {
      ++i;
      continue;
    }
    Token tok;
    tok.begin = i;
    while (i < text.size() && std::isalnum(static_cast<unsigned char>(text[i]))) {
      tok.text.push_back(
          static_cast<char>(std::tolower(static_cast<unsigned char>(text[i]))));
      ++i;
    }
    tok.end = i;
    tokens.push_back(std::move(tok));
  }
  return tokens;
}

std::string normalize_phrase(std::string_view text) {
  std::string out;
  for (const auto& tok : tokenize(text)) {
    if (!out.empty()) out.push_back(' ');
    out += tok.text;
  }
  return out;
}

void TermMatcher::add(std::string_view surface, std::string_view canonical, int category) {
  const std::string key = normalize_phrase(surface);
  if (key.empty()) {
    throw std::invalid_argument("empty term surface '" + std::string(surface) + "'");
  }
  auto [it, inserted] = entries_.try_emplace(key);
  if (!inserted) {
    if (it->second.canonical != canonical || it->second.category != category) {
      throw std::invalid_argument("term '" + key + "' maps to both '" + it->second.canonical +
                                  "' and '" + std::string(canonical) + "'");
    }
    return;
  }
  it->second.canonical = std::string(canonical);
  it->second.category = category;
  const auto n = static_cast<std::size_t>(std::count(key.begin(), key.end(), ' ')) + 1;
  max_tokens_ = std::max(max_tokens_, n);
}

std::vector<TermMatcher::Match> TermMatcher::find_all(const std::vector<Token>& tokens) const {
  std::vector<Match> out;
  std::size_t i = 0;
  while (i < tokens.size()) {
    const std::size_t longest = std::min(max_tokens_, tokens.size() - i);
    bool matched = false;
    for (std::size_t len = longest; len >= 1; --len) {
      std::string key = tokens[i].text;
      for (std::size_t k = 1; k < len; ++k) {
        key.push_back(' ');
        key += tokens[i + k].text;
      }
      auto it = entries_.find(key);
      if (it == entries_.end()) continue;
      Match m = it->second;
      m.first_token = i;
      m.last_token = i + len;
      m.begin = tokens[i].begin;
      m.end = tokens[i + len - 1].end;
      out.push_back(std::move(m));
      i += len;
      matched = true;
      break;
    }
    if (!matched) ++i;
  }
  return out;
}

const TermMatcher::Match* TermMatcher::lookup(std::string_view phrase) const {
  auto it = entries_.find(normalize_phrase(phrase));
  return it == entries_.end() ? nullptr : &it->second;
}

std::vector<std::string> TermMatcher::surfaces() const {
  std::vector<std::string> out;
  out.reserve(entries_.size());
  for (const auto& [key, _] : entries_) out.push_back(key);
  std::sort(out.begin(), out.end());
  return out;
}

const char* to_string(EntityKind kind) {
  switch (kind) {
    case EntityKind::instrument: return "instrument";
    case EntityKind::verb: return "verb";
    case EntityKind::target: return "target";
  }
  return "?";
}

namespace {

std::vector<std::string> read_labels(const nlohmann::json& doc, const char* key) {
  std::vector<std::string> labels;
  if (!doc.contains(key)) return labels;
  for (const auto& item : doc.at(key)) {
    auto label = item.get<std::string>();
    if (label.empty()) throw std::invalid_argument(std::string("empty label in ") + key);
    for (char c : label) {
      if (std::isupper(static_cast<unsigned char>(c))) {
        throw std::invalid_argument("canonical label '" + label + "' is not lowercase");
      }
    }
    labels.push_back(std::move(label));
  }
  return labels;
}

}  // namespace

Vocabulary Vocabulary::from_json(const nlohmann::json& doc) {
  Vocabulary vocab;
  vocab.instruments_ = read_labels(doc, "instruments");
  vocab.verbs_ = read_labels(doc, "verbs");
  vocab.targets_ = read_labels(doc, "targets");
  if (doc.contains("synonyms")) {
    for (const auto& [surface, canonical] : doc.at("synonyms").items()) {
      vocab.synonyms_[surface] = canonical.get<std::string>();
    }
  }
  vocab.synonyms_reconstructed_ = doc.value("synonyms_reconstructed", false);
  vocab.index();
  return vocab;
}

Vocabulary Vocabulary::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open vocabulary file " + path.string());
  return from_json(nlohmann::json::parse(in));
}

const Vocabulary& Vocabulary::builtin() {
  static const Vocabulary vocab = from_json(nlohmann::json::parse(builtin::kVocabularyJson));
  return vocab;
}

nlohmann::json Vocabulary::to_json() const {
  nlohmann::json synonyms = nlohmann::json::object();
  for (const auto& [surface, canonical] : synonyms_) synonyms[surface] = canonical;
  return {{"instruments", instruments_},
          {"verbs", verbs_},
          {"targets", targets_},
          {"synonyms", synonyms},
          {"synonyms_reconstructed", synonyms_reconstructed_}};
}

void Vocabulary::index() {
  std::set<std::string> seen;
  auto add_labels = [&](const std::vector<std::string>& labels, EntityKind kind) {
    for (const auto& label : labels) {
      if (!seen.insert(label).second) {
        throw std::invalid_argument("duplicate canonical label '" + label + "'");
      }
      matcher_.add(label, label, static_cast<int>(kind));
    }
  };
  add_labels(instruments_, EntityKind::instrument);
  add_labels(verbs_, EntityKind::verb);
  add_labels(targets_, EntityKind::target);
  for (const auto& [surface, canonical] : synonyms_) {
    if (!seen.contains(canonical)) {
      throw std::invalid_argument("synonym '" + surface + "' maps to unknown label '" +
                                  canonical + "'");
    }
    const auto* existing = matcher_.lookup(canonical);
    matcher_.add(surface, canonical, existing->category);
  }
}

const std::vector<std::string>& Vocabulary::labels(EntityKind kind) const {
  switch (kind) {
    case EntityKind::instrument: return instruments_;
    case EntityKind::verb: return verbs_;
    case EntityKind::target: return targets_;
  }
  return instruments_;
}

bool Vocabulary::contains(std::string_view label, EntityKind kind) const {
  const auto& list = labels(kind);
  return std::find(list.begin(), list.end(), label) != list.end();
}

std::optional<std::string> Vocabulary::lookup(std::string_view surface, EntityKind kind) const {
  const auto* match = matcher_.lookup(surface);
  if (match == nullptr || match->category != static_cast<int>(kind)) return std::nullopt;
  return match->canonical;
}

std::optional<EntityMatch> Vocabulary::canonicalize(std::string_view span) const {
  const auto matches = matcher_.find_all(span);
  const TermMatcher::Match* best = nullptr;
  for (const auto& m : matches) {
    if (best == nullptr ||
        m.last_token - m.first_token > best->last_token - best->first_token) {
      best = &m;
    }
  }
  if (best == nullptr) return std::nullopt;
  return EntityMatch{best->canonical, static_cast<EntityKind>(best->category), best->begin,
                     best->end};
}

std::vector<EntityMatch> Vocabulary::find_entities(std::string_view text) const {
  std::vector<EntityMatch> out;
  for (const auto& m : matcher_.find_all(text)) {
    out.push_back({m.canonical, static_cast<EntityKind>(m.category), m.begin, m.end});
  }
  return out;
}

std::vector<EntityMatch> Vocabulary::find_entities(std::string_view text, EntityKind kind) const {
  auto all = find_entities(text);
  std::erase_if(all, [kind](const EntityMatch& m) { return m.kind != kind; });
  return all;
}

std::optional<std::string> canonicalize_entity(std::string_view span, const Vocabulary& vocab) {
  auto match = vocab.canonicalize(span);
  if (!match) return std::nullopt;
  return match->label;
}

}  // namespace stqa
