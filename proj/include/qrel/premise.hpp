#pragma once

// First- and second-order premise extraction and falsification against
// image annotations.

#include <algorithm>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "qrel/corpus.hpp"
#include "qrel/error.hpp"
#include "qrel/textfeat.hpp"

namespace qrel {

struct Premise {
  PremiseOrder order = PremiseOrder::first;
  std::string object;
  std::optional<std::string> attribute;

  // "dog" or "small dog"
  std::string text() const { return attribute ? *attribute + " " + object : object; }

  bool operator==(const Premise&) const = default;
};

inline Premise first_order(std::string object) { return {PremiseOrder::first, std::move(object), std::nullopt}; }

inline Premise second_order(std::string attribute, std::string object) {
  return {PremiseOrder::second, std::move(object), std::move(attribute)};
}

class ObjectVocabulary {
 public:
  ObjectVocabulary() = default;
  ObjectVocabulary(std::initializer_list<std::string> lemmas) {
    for (const auto& l : lemmas) add(l);
  }

  void add(const std::string& lemma) {
    auto words = tokenize(lemma);
    if (words.empty()) return;
    std::string joined;
    for (const auto& w : words) joined += (joined.empty() ? "" : " ") + w;
    lemmas_.insert(joined);
    max_words_ = std::max(max_words_, words.size());
  }

  void add_plural(const std::string& plural, const std::string& singular) {
    plural_map_[to_lower(plural)] = to_lower(singular);
  }

  bool contains(const std::string& lemma) const { return lemmas_.contains(lemma); }
  const std::set<std::string>& lemmas() const { return lemmas_; }
  const std::map<std::string, std::string>& plural_map() const { return plural_map_; }
  std::size_t max_words() const { return max_words_; }

  // Surface forms a token may stand for: itself, its plural override, and
  // the "es"/"s"-stripped forms.
  std::vector<std::string> forms(const std::string& token) const {
    std::vector<std::string> out{token};
    if (auto it = plural_map_.find(token); it != plural_map_.end()) out.push_back(it->second);
    if (token.size() > 3 && token.ends_with("es")) out.push_back(token.substr(0, token.size() - 2));
    if (token.size() > 2 && token.ends_with("s")) out.push_back(token.substr(0, token.size() - 1));
    return out;
  }

 private:
  std::set<std::string> lemmas_;
  std::map<std::string, std::string> plural_map_;
  std::size_t max_words_ = 0;
};

// One lemma per line; an optional tab-separated second column lists an
// irregular plural form ("person<TAB>people").
inline ObjectVocabulary load_vocabulary(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::io, "cannot open vocabulary " + path);
  ObjectVocabulary v;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    auto tab = line.find('\t');
    const auto lemma = to_lower(line.substr(0, tab));
    v.add(lemma);
    if (tab != std::string::npos) v.add_plural(line.substr(tab + 1), lemma);
  }
  return v;
}

class AntonymLexicon {
 public:
  void add(const std::string& a, const std::string& b) {
    const auto la = to_lower(a), lb = to_lower(b);
    map_[la].insert(lb);
    map_[lb].insert(la);
  }

  const std::set<std::string>& antonyms(const std::string& attr) const {
    static const std::set<std::string> empty;
    auto it = map_.find(attr);
    return it == map_.end() ? empty : it->second;
  }

  bool are_antonyms(const std::string& a, const std::string& b) const { return antonyms(a).contains(b); }

  const std::map<std::string, std::set<std::string>>& entries() const { return map_; }

 private:
  std::map<std::string, std::set<std::string>> map_;
};

// attr<TAB>antonym per line, symmetrized on load.
inline AntonymLexicon load_antonyms(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::io, "cannot open antonym lexicon " + path);
  AntonymLexicon lex;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    auto tab = line.find('\t');
    if (tab == std::string::npos) fail(ErrorCode::parse, path + ":" + std::to_string(line_no) + ": expected attr<TAB>antonym");
    lex.add(line.substr(0, tab), line.substr(tab + 1));
  }
  return lex;
}

struct ObjectMatch {
  std::string lemma;
  std::size_t begin = 0;  // first token index
  std::size_t end = 0;    // one past the last token
};

// Greedy left-to-right, longest lemma first; tokens are consumed once.
inline std::vector<ObjectMatch> match_objects(std::span<const std::string> tokens, const ObjectVocabulary& vocab) {
  std::vector<std::vector<std::string>> forms;
  forms.reserve(tokens.size());
  for (const auto& t : tokens) forms.push_back(vocab.forms(to_lower(t)));

  std::vector<ObjectMatch> out;
  std::size_t i = 0;
  while (i < tokens.size()) {
    bool matched = false;
    const std::size_t longest = std::min(vocab.max_words(), tokens.size() - i);
    for (std::size_t len = longest; len >= 1 && !matched; --len) {
      // Inner words must match verbatim; only the head (last) word is
      // normalized for number.
      std::string prefix;
      for (std::size_t w = 0; w + 1 < len; ++w) prefix += to_lower(tokens[i + w]) + " ";
      for (const auto& head : forms[i + len - 1]) {
        const std::string candidate = prefix + head;
        if (vocab.contains(candidate)) {
          out.push_back({candidate, i, i + len});
          i += len;
          matched = true;
          break;
        }
      }
    }
    if (!matched) ++i;
  }
  return out;
}

inline std::vector<Premise> extract_first_order(const QuestionRecord& q, const ObjectVocabulary& vocab) {
  std::vector<Premise> out;
  std::set<std::string> seen;
  for (auto& m : match_objects(q.tokens, vocab)) {
    if (seen.insert(m.lemma).second) out.push_back(first_order(std::move(m.lemma)));
  }
  return out;
}

inline bool is_adjective_tag(const std::string& tag) { return tag.starts_with("JJ") || tag == "ADJ"; }

inline std::vector<Premise> extract_second_order(const QuestionRecord& q, const ObjectVocabulary& vocab) {
  if (!q.pos_tags) fail(ErrorCode::invalid_argument, "extract_second_order: question " + q.qid + " has no POS tags");
  const auto& tags = *q.pos_tags;
  std::vector<Premise> out;
  std::set<std::pair<std::string, std::string>> seen;
  for (auto& m : match_objects(q.tokens, vocab)) {
    if (m.begin == 0 || !is_adjective_tag(tags[m.begin - 1])) continue;
    auto attr = to_lower(q.tokens[m.begin - 1]);
    if (seen.emplace(attr, m.lemma).second) out.push_back(second_order(std::move(attr), std::move(m.lemma)));
  }
  return out;
}

inline std::vector<Premise> falsified_first_order(std::span<const Premise> premises, const ImageAnnotation& ann) {
  std::vector<Premise> out;
  for (const auto& p : premises) {
    if (p.order != PremiseOrder::first) fail(ErrorCode::invalid_argument, "falsified_first_order: premise '" + p.text() + "' is not first-order");
    if (!ann.objects.contains(p.object)) out.push_back(p);
  }
  return out;
}

// The object must be present (first-order premise true) and carry an
// attribute that is an antonym of the question's attribute.
inline bool falsified_second_order(const Premise& p, const ImageAnnotation& ann, const AntonymLexicon& antonyms) {
  if (p.order != PremiseOrder::second || !p.attribute) {
    fail(ErrorCode::invalid_argument, "falsified_second_order: premise '" + p.text() + "' is not second-order");
  }
  if (!ann.objects.contains(p.object)) return false;
  auto it = ann.scene_graph.find(p.object);
  if (it == ann.scene_graph.end()) return false;
  const auto& ant = antonyms.antonyms(*p.attribute);
  return std::any_of(it->second.begin(), it->second.end(), [&](const std::string& a) { return ant.contains(a); });
}

}  // namespace qrel
