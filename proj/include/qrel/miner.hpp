#pragma once

// Dataset construction: positives from every question-image pair, negative
// images mined among the most similar images by premise falsification, and
// the keyword-dissimilarity question miner.

#include <algorithm>
#include <functional>
#include <iomanip>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "qrel/corpus.hpp"
#include "qrel/error.hpp"
#include "qrel/numerics.hpp"
#include "qrel/premise.hpp"
#include "qrel/textfeat.hpp"

namespace qrel {

enum class MiningOrder { first, second, both };
enum class FalsificationMode { exactly_one, at_least_one };

inline MiningOrder mining_order_from_string(const std::string& s) {
  if (s == "first") return MiningOrder::first;
  if (s == "second") return MiningOrder::second;
  if (s == "both") return MiningOrder::both;
  fail(ErrorCode::invalid_argument, "unknown premise order '" + s + "' (expected first|second|both)");
}

inline const char* to_string(MiningOrder o) {
  switch (o) {
    case MiningOrder::first: return "first";
    case MiningOrder::second: return "second";
    case MiningOrder::both: return "both";
  }
  return "?";
}

inline FalsificationMode falsification_mode_from_string(const std::string& s) {
  if (s == "exactly-one") return FalsificationMode::exactly_one;
  if (s == "at-least-one") return FalsificationMode::at_least_one;
  fail(ErrorCode::invalid_argument, "unknown falsification mode '" + s + "' (expected exactly-one|at-least-one)");
}

inline const char* to_string(FalsificationMode m) {
  return m == FalsificationMode::exactly_one ? "exactly-one" : "at-least-one";
}

struct MinerConfig {
  std::size_t k_similar = 10;
  MiningOrder order = MiningOrder::both;
  FalsificationMode falsification_mode = FalsificationMode::at_least_one;
  std::uint64_t seed = 42;
  std::size_t max_negatives_per_question = 10;
  unsigned workers = 1;
  // Optional question-type filter; questions it rejects get no negatives.
  std::function<bool(const QuestionRecord&)> question_filter;

  bool uses_first() const { return order != MiningOrder::second; }
  bool uses_second() const { return order != MiningOrder::first; }
};

inline void validate(const MinerConfig& cfg) {
  if (cfg.k_similar < 1) fail(ErrorCode::invalid_argument, "k_similar must be >= 1");
  if (cfg.max_negatives_per_question > cfg.k_similar) {
    fail(ErrorCode::invalid_argument, "max_negatives_per_question must not exceed k_similar");
  }
}

struct QuestionPremises {
  std::vector<Premise> first;
  std::vector<Premise> second;
};

inline QuestionPremises question_premises(const QuestionRecord& q, const ObjectVocabulary& vocab) {
  QuestionPremises p;
  p.first = extract_first_order(q, vocab);
  if (q.pos_tags) p.second = extract_second_order(q, vocab);
  return p;
}

// One relevant pair per question. With a vocabulary, the pair records which
// premise orders its question carries.
inline std::vector<LabeledPair> emit_positives(std::span<const QuestionRecord> questions, const AnnotationMap& images,
                                               const ObjectVocabulary* vocab = nullptr) {
  std::vector<LabeledPair> out;
  std::vector<std::string> dangling;
  for (const auto& q : questions) {
    if (!q.iid || !images.contains(*q.iid)) {
      dangling.push_back(q.qid);
      continue;
    }
    LabeledPair p;
    p.qid = q.qid;
    p.iid = *q.iid;
    if (vocab) {
      const auto prem = question_premises(q, *vocab);
      p.has_first_order = !prem.first.empty();
      p.has_second_order = !prem.second.empty();
    }
    out.push_back(std::move(p));
  }
  if (!dangling.empty()) {
    std::string list;
    for (const auto& d : dangling) list += (list.empty() ? "" : ", ") + d;
    fail(ErrorCode::not_found, "questions reference missing images: " + list);
  }
  return out;
}

struct MiningContext {
  const SimilarityIndex& index;
  const AnnotationMap& annotations;
  const ObjectVocabulary& vocab;
  const AntonymLexicon& antonyms;
};

inline std::vector<LabeledPair> mine_negative_images(const QuestionRecord& q, const std::string& positive_iid,
                                                     const MiningContext& ctx, const MinerConfig& cfg) {
  if (!ctx.index.store().contains(positive_iid)) fail(ErrorCode::not_found, "positive image '" + positive_iid + "' not in feature store");
  if (!ctx.annotations.contains(positive_iid)) fail(ErrorCode::not_found, "positive image '" + positive_iid + "' has no annotation");
  if (cfg.max_negatives_per_question == 0) return {};
  if (cfg.question_filter && !cfg.question_filter(q)) return {};

  const auto prem = question_premises(q, ctx.vocab);
  const bool any = (cfg.uses_first() && !prem.first.empty()) || (cfg.uses_second() && !prem.second.empty());
  if (!any) return {};

  std::vector<LabeledPair> out;
  for (const auto& cand : ctx.index.top_k(positive_iid, cfg.k_similar)) {
    auto ann = ctx.annotations.find(cand.iid);
    if (ann == ctx.annotations.end()) continue;

    std::vector<Premise> false_first;
    if (cfg.uses_first()) false_first = falsified_first_order(prem.first, ann->second);
    std::vector<Premise> false_second;
    if (cfg.uses_second()) {
      for (const auto& p : prem.second) {
        if (falsified_second_order(p, ann->second, ctx.antonyms)) false_second.push_back(p);
      }
    }
    const std::size_t n_false = false_first.size() + false_second.size();
    const bool pass = cfg.falsification_mode == FalsificationMode::exactly_one ? n_false == 1 : n_false >= 1;
    if (!pass) continue;

    LabeledPair p;
    p.qid = q.qid;
    p.iid = cand.iid;
    p.label = Label::irrelevant;
    p.order = false_first.empty() ? PremiseOrder::second : PremiseOrder::first;
    for (const auto& f : false_first) p.falsified.push_back(f.text());
    for (const auto& f : false_second) p.falsified.push_back(f.text());
    p.has_first_order = !prem.first.empty();
    p.has_second_order = !prem.second.empty();
    out.push_back(std::move(p));
    if (out.size() >= cfg.max_negatives_per_question) break;
  }
  return out;
}

struct CorpusData {
  std::vector<QuestionRecord> questions;
  AnnotationMap annotations;
  FeatureStore features;
  ObjectVocabulary vocab;
  AntonymLexicon antonyms;
};

struct CorpusPaths {
  std::string questions;
  std::string annotations;
  std::string features;
  std::string vocab;
  std::string antonyms;
};

inline CorpusData load_corpus(const CorpusPaths& paths) {
  return CorpusData{read_questions(paths.questions), read_annotations(paths.annotations), open_feature_store(paths.features),
                    load_vocabulary(paths.vocab), load_antonyms(paths.antonyms)};
}

inline void sort_pairs(std::vector<LabeledPair>& pairs) {
  std::sort(pairs.begin(), pairs.end(), [](const LabeledPair& a, const LabeledPair& b) { return a.key() < b.key(); });
}

// Positives plus mined negatives, deduplicated on (qid, iid) and sorted by
// qid then iid. Independent of cfg.workers.
inline DatasetManifest build_dataset(const CorpusData& data, const MinerConfig& cfg) {
  validate(cfg);
  auto pairs = emit_positives(data.questions, data.annotations, &data.vocab);
  for (const auto& p : pairs) {
    if (!data.features.contains(p.iid)) fail(ErrorCode::not_found, "image '" + p.iid + "' (question " + p.qid + ") not in feature store");
  }

  const SimilarityIndex index(data.features);
  const MiningContext ctx{index, data.annotations, data.vocab, data.antonyms};
  const std::size_t n = data.questions.size();
  std::vector<std::vector<LabeledPair>> mined(n);
  auto work = [&](std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) {
      const auto& q = data.questions[i];
      mined[i] = mine_negative_images(q, *q.iid, ctx, cfg);
    }
  };
  const unsigned w = std::max(1u, std::min<unsigned>(cfg.workers, static_cast<unsigned>(std::max<std::size_t>(n, 1))));
  if (w == 1) {
    work(0, n);
  } else {
    std::vector<std::thread> threads;
    std::vector<std::exception_ptr> errors(w);
    const std::size_t chunk = (n + w - 1) / w;
    for (unsigned t = 0; t < w; ++t) {
      const std::size_t b = std::min(n, t * chunk), e = std::min(n, b + chunk);
      threads.emplace_back([&, t, b, e] {
        try {
          work(b, e);
        } catch (...) {
          errors[t] = std::current_exception();
        }
      });
    }
    for (auto& th : threads) th.join();
    for (auto& err : errors)
      if (err) std::rethrow_exception(err);
  }
  for (auto& m : mined) pairs.insert(pairs.end(), std::make_move_iterator(m.begin()), std::make_move_iterator(m.end()));

  sort_pairs(pairs);
  pairs.erase(std::unique(pairs.begin(), pairs.end(), [](const LabeledPair& a, const LabeledPair& b) { return a.key() == b.key(); }),
              pairs.end());
  return DatasetManifest::from_pairs(std::move(pairs));
}

// ---------------------------------------------------------------------------
// Question-dissimilarity mining

inline bool is_keyword_tag(const std::string& tag) {
  return tag.starts_with("NN") || tag.starts_with("VB") || tag.starts_with("JJ") || tag == "NOUN" || tag == "PROPN" ||
         tag == "VERB" || tag == "ADJ";
}

inline std::vector<std::string> keywords(const QuestionRecord& q) {
  if (!q.pos_tags) fail(ErrorCode::invalid_argument, "question " + q.qid + " has no POS tags");
  std::vector<std::string> out;
  for (std::size_t i = 0; i < q.tokens.size(); ++i) {
    if (is_keyword_tag((*q.pos_tags)[i])) out.push_back(to_lower(q.tokens[i]));
  }
  return out;
}

// Cosine of averaged keyword embeddings; 0 when either side has no
// in-vocabulary keyword.
inline double keyword_similarity(const DenseVector& a, const DenseVector& b) {
  const double na = norm(std::span<const double>(a)), nb = norm(std::span<const double>(b));
  if (na == 0.0 || nb == 0.0) return 0.0;
  return cosine(a, b);
}

struct ScoredQuestion {
  std::string qid;
  double similarity = 0.0;

  bool operator==(const ScoredQuestion&) const = default;
};

// The k pool questions least similar to the questions asked about `iid`
// (similarity = max over that image's questions), ascending, ties by qid.
// The image's own questions are never returned.
inline std::vector<ScoredQuestion> mine_dissimilar_questions(const std::string& iid, std::span<const QuestionRecord> pool,
                                                             const EmbeddingTable& embeddings, std::size_t k) {
  if (pool.empty()) fail(ErrorCode::invalid_argument, "mine_dissimilar_questions: empty pool");
  std::vector<DenseVector> own;
  std::vector<const QuestionRecord*> others;
  for (const auto& q : pool) {
    if (q.iid && *q.iid == iid) {
      own.push_back(average_embedding(keywords(q), embeddings));
    } else {
      others.push_back(&q);
    }
  }
  std::vector<ScoredQuestion> scored;
  scored.reserve(others.size());
  for (const auto* q : others) {
    const auto v = average_embedding(keywords(*q), embeddings);
    double best = own.empty() ? 0.0 : -1.0;
    for (const auto& o : own) best = std::max(best, keyword_similarity(v, o));
    scored.push_back({q->qid, best});
  }
  std::sort(scored.begin(), scored.end(), [](const ScoredQuestion& a, const ScoredQuestion& b) {
    if (a.similarity != b.similarity) return a.similarity < b.similarity;
    return a.qid < b.qid;
  });
  if (scored.size() > k) scored.resize(k);
  return scored;
}

// Plain-text table with Total / First order / Second order rows.
inline std::string format_stats_table(const DatasetStats& s) {
  std::ostringstream os;
  auto row = [&](const std::string& name, std::uint64_t t, std::uint64_t r, std::uint64_t nr) {
    os << std::left << std::setw(14) << name << std::right << std::setw(12) << t << std::setw(12) << r << std::setw(14) << nr << '\n';
  };
  os << std::left << std::setw(14) << "" << std::right << std::setw(12) << "Total" << std::setw(12) << "Relevant"
     << std::setw(14) << "Non-relevant" << '\n';
  row("Total", s.total, s.relevant, s.non_relevant);
  row("First order", s.first_order_total, s.first_order_relevant, s.first_order_non_relevant);
  row("Second order", s.second_order_total, s.second_order_relevant, s.second_order_non_relevant);
  os << "note: a relevant pair is counted in an order's row when its question has at least one premise of that order\n";
  return os.str();
}

}  // namespace qrel
