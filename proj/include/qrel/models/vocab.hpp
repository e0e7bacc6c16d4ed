#pragma once

#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "qrel/error.hpp"
#include "qrel/textfeat.hpp"

namespace qrel {

// Id 0 is reserved for unknown symbols.
class SymbolVocab {
 public:
  static constexpr const char* kUnk = "<unk>";

  SymbolVocab() : symbols_{kUnk} { index_.emplace(kUnk, 0); }

  explicit SymbolVocab(std::vector<std::string> symbols) : SymbolVocab() {
    for (auto& s : symbols) add(s);
  }

  int add(const std::string& s) {
    auto [it, inserted] = index_.emplace(s, static_cast<int>(symbols_.size()));
    if (inserted) symbols_.push_back(s);
    return it->second;
  }

  int id(const std::string& s) const {
    auto it = index_.find(s);
    return it == index_.end() ? 0 : it->second;
  }

  std::vector<int> encode(std::span<const std::string> seq) const {
    std::vector<int> out;
    out.reserve(seq.size());
    for (const auto& s : seq) out.push_back(id(s));
    return out;
  }

  std::size_t size() const { return symbols_.size(); }
  const std::vector<std::string>& symbols() const { return symbols_; }

  // Symbols after the reserved unknown entry.
  std::vector<std::string> known() const { return {symbols_.begin() + 1, symbols_.end()}; }

 private:
  std::vector<std::string> symbols_;
  std::unordered_map<std::string, int> index_;
};

inline std::vector<std::string> lowered(std::span<const std::string> tokens) {
  std::vector<std::string> out;
  out.reserve(tokens.size());
  for (const auto& t : tokens) out.push_back(to_lower(t));
  return out;
}

}  // namespace qrel
