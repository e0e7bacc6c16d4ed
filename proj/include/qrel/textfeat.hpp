#pragma once

// Text features: fallback lexicon tagging, hashed POS n-grams and averaged
// word embeddings.

#include <algorithm>
#include <cctype>
#include <cstdint>
#include <fstream>
#include <map>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "qrel/error.hpp"

namespace qrel {

inline std::string to_lower(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return out;
}

// Splits on whitespace and strips trailing punctuation ("?", ".", ",").
inline std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> out;
  std::string cur;
  auto flush = [&] {
    if (!cur.empty()) out.push_back(to_lower(cur));
    cur.clear();
  };
  for (char c : text) {
    if (std::isspace(static_cast<unsigned char>(c)) || c == '?' || c == '.' || c == ',' || c == '!' || c == ';') {
      flush();
    } else {
      cur.push_back(c);
    }
  }
  flush();
  return out;
}

struct TagLexicon {
  std::unordered_map<std::string, std::string> tags;
  std::string default_tag = "NN";

  void add(std::string_view token, std::string tag) { tags[to_lower(token)] = std::move(tag); }
};

// token<TAB>tag per line.
inline TagLexicon load_lexicon(const std::string& path, std::string default_tag = "NN") {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::io, "cannot open lexicon " + path);
  if (default_tag.empty()) fail(ErrorCode::invalid_argument, "lexicon default tag must be non-empty");
  TagLexicon lex;
  lex.default_tag = std::move(default_tag);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    auto tab = line.find('\t');
    if (tab == std::string::npos || tab == 0 || tab + 1 == line.size()) {
      fail(ErrorCode::parse, path + ":" + std::to_string(line_no) + ": expected token<TAB>tag");
    }
    lex.add(line.substr(0, tab), line.substr(tab + 1));
  }
  return lex;
}

inline std::vector<std::string> lexicon_tag(std::span<const std::string> tokens, const TagLexicon& lexicon) {
  std::vector<std::string> out;
  out.reserve(tokens.size());
  for (const auto& t : tokens) {
    auto it = lexicon.tags.find(to_lower(t));
    out.push_back(it == lexicon.tags.end() ? lexicon.default_tag : it->second);
  }
  return out;
}

// FNV-1a, 64-bit.
inline constexpr std::uint64_t kFnvOffsetBasis = 14695981039346656037ULL;
inline constexpr std::uint64_t kFnvPrime = 1099511628211ULL;

// Continues a running hash; start from kFnvOffsetBasis.
constexpr std::uint64_t fnv1a64(std::string_view bytes, std::uint64_t h) {
  for (unsigned char c : bytes) {
    h ^= c;
    h *= kFnvPrime;
  }
  return h;
}

constexpr std::uint64_t fnv1a64(std::string_view bytes) { return fnv1a64(bytes, kFnvOffsetBasis); }

inline std::uint64_t hash_index(std::string_view feature_name, std::uint64_t dim) {
  if (dim == 0) fail(ErrorCode::invalid_argument, "hash dimension must be positive");
  return fnv1a64(feature_name) % dim;
}

inline constexpr std::uint32_t kDefaultHashDim = 1u << 18;

struct SparseFeatures {
  std::uint32_t dim = kDefaultHashDim;
  std::map<std::uint32_t, double> entries;

  void add(std::uint32_t index, double count) { entries[index] += count; }

  double mass() const {
    double m = 0.0;
    for (const auto& [i, c] : entries) m += c;
    return m;
  }
};

inline SparseFeatures pos_ngrams(std::span<const std::string> tags, int n_max, std::uint32_t dim = kDefaultHashDim) {
  if (tags.empty()) fail(ErrorCode::invalid_argument, "pos_ngrams: empty tag sequence");
  if (n_max < 1 || n_max > 3) fail(ErrorCode::invalid_argument, "pos_ngrams: n_max must be in 1..3");
  if (dim == 0) fail(ErrorCode::invalid_argument, "pos_ngrams: dim must be positive");
  SparseFeatures f;
  f.dim = dim;
  std::string name;
  for (int n = 1; n <= n_max; ++n) {
    if (static_cast<std::size_t>(n) > tags.size()) break;
    for (std::size_t start = 0; start + n <= tags.size(); ++start) {
      name.clear();
      for (int k = 0; k < n; ++k) {
        if (k) name.push_back('_');
        name += tags[start + k];
      }
      f.add(static_cast<std::uint32_t>(hash_index(name, dim)), 1.0);
    }
  }
  return f;
}

// ---------------------------------------------------------------------------
// Embeddings

inline constexpr std::size_t kDefaultEmbeddingDim = 300;

struct EmbeddingTable {
  std::size_t dim = kDefaultEmbeddingDim;
  std::unordered_map<std::string, std::vector<double>> vectors;

  const std::vector<double>* find(const std::string& token) const {
    auto it = vectors.find(token);
    return it == vectors.end() ? nullptr : &it->second;
  }

  std::size_t size() const { return vectors.size(); }
};

// One `token v1 ... v_dim` per line. Duplicate tokens: last occurrence wins.
inline EmbeddingTable load_embeddings(const std::string& path, std::size_t dim = kDefaultEmbeddingDim) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::io, "cannot open embeddings " + path);
  EmbeddingTable table;
  table.dim = dim;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::istringstream ss(line);
    std::string token;
    if (!(ss >> token)) continue;
    std::vector<double> v;
    v.reserve(dim);
    std::string field;
    while (ss >> field) {
      char* end = nullptr;
      const double x = std::strtod(field.c_str(), &end);
      if (end == field.c_str() || *end != '\0') {
        fail(ErrorCode::parse, path + ":" + std::to_string(line_no) + ": bad number '" + field + "'");
      }
      v.push_back(x);
    }
    if (v.size() != dim) {
      fail(ErrorCode::parse, path + ":" + std::to_string(line_no) + ": expected " + std::to_string(dim) +
                                 " values, got " + std::to_string(v.size()));
    }
    table.vectors[token] = std::move(v);
  }
  return table;
}

// Mean over in-vocabulary tokens; all-OOV gives the zero vector. Vectors are
// summed in token order so the result is bitwise independent of the input
// permutation.
inline std::vector<double> average_embedding(std::span<const std::string> tokens, const EmbeddingTable& table) {
  std::vector<std::pair<std::string_view, const std::vector<double>*>> hits;
  std::vector<std::string> lowered;
  lowered.reserve(tokens.size());
  for (const auto& t : tokens) lowered.push_back(to_lower(t));
  for (std::size_t k = 0; k < tokens.size(); ++k) {
    if (const auto* v = table.find(tokens[k])) {
      hits.emplace_back(tokens[k], v);
    } else if (const auto* w = table.find(lowered[k])) {
      hits.emplace_back(lowered[k], w);
    }
  }
  std::sort(hits.begin(), hits.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
  std::vector<double> sum(table.dim, 0.0);
  for (const auto& [tok, v] : hits) {
    for (std::size_t i = 0; i < table.dim; ++i) sum[i] += (*v)[i];
  }
  if (!hits.empty()) {
    for (auto& x : sum) x /= static_cast<double>(hits.size());
  }
  return sum;
}

}  // namespace qrel
