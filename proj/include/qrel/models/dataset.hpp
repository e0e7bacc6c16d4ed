#pragma once

// Adapters turning a manifest + corpus files into training examples. Image
// rows are read from the feature store per example, so only the current
// batch is resident.

#include <fstream>
#include <iomanip>
#include <sstream>
#include <string>
#include <unordered_map>
#include <vector>

#include "qrel/corpus.hpp"
#include "qrel/models/lr.hpp"
#include "qrel/models/poslstm.hpp"
#include "qrel/models/relnet.hpp"
#include "qrel/numerics.hpp"
#include "qrel/textfeat.hpp"

namespace qrel {

using QuestionIndex = std::unordered_map<std::string, QuestionRecord>;

inline QuestionIndex index_questions(std::vector<QuestionRecord> questions) {
  QuestionIndex idx;
  for (auto& q : questions) {
    auto qid = q.qid;
    idx.insert_or_assign(std::move(qid), std::move(q));
  }
  return idx;
}

inline const QuestionRecord& lookup_question(const QuestionIndex& idx, const std::string& qid) {
  auto it = idx.find(qid);
  if (it == idx.end()) fail(ErrorCode::not_found, "question '" + qid + "' not found");
  return it->second;
}

inline int label_of(const LabeledPair& p) { return p.label == Label::relevant ? 1 : 0; }

class RelNetSource {
 public:
  RelNetSource(const std::vector<LabeledPair>& pairs, const FeatureStore& store, const QuestionIndex& questions,
               const RelNetModel& model)
      : pairs_(&pairs), store_(&store), questions_(&questions), model_(&model) {}

  std::size_t size() const { return pairs_->size(); }

  RelevanceExample example(std::size_t i) const {
    const auto& p = (*pairs_)[i];
    const auto& q = lookup_question(*questions_, p.qid);
    return model_->encode(store_->row_as_double(p.iid), q.tokens, label_of(p));
  }

 private:
  const std::vector<LabeledPair>* pairs_;
  const FeatureStore* store_;
  const QuestionIndex* questions_;
  const RelNetModel* model_;
};

// [image block ; averaged question embedding]. The image block is the raw
// feature row, or its PCA projection when a model is given.
inline DenseVector fused_features(std::span<const float> image, const PCAModel* pca, std::span<const std::string> tokens,
                                  const EmbeddingTable& embeddings) {
  DenseVector x;
  if (pca) {
    x = pca_project(*pca, image);
  } else {
    x.assign(image.begin(), image.end());
  }
  const auto emb = average_embedding(lowered(tokens), embeddings);
  x.insert(x.end(), emb.begin(), emb.end());
  return x;
}

class FusedDenseSource {
 public:
  FusedDenseSource(const std::vector<LabeledPair>& pairs, const FeatureStore& store, const QuestionIndex& questions,
                   const EmbeddingTable& embeddings, const PCAModel* pca)
      : pairs_(&pairs), store_(&store), questions_(&questions), embeddings_(&embeddings), pca_(pca) {}

  std::size_t size() const { return pairs_->size(); }

  std::size_t feature_dim() const {
    return (pca_ ? pca_->output_dim() : store_->dim()) + embeddings_->dim;
  }

  DenseExample example(std::size_t i) const {
    const auto& p = (*pairs_)[i];
    const auto& q = lookup_question(*questions_, p.qid);
    return {fused_features(store_->row(p.iid), pca_, q.tokens, *embeddings_), label_of(p)};
  }

 private:
  const std::vector<LabeledPair>* pairs_;
  const FeatureStore* store_;
  const QuestionIndex* questions_;
  const EmbeddingTable* embeddings_;
  const PCAModel* pca_;
};

// Questions carrying a visual/non-visual label.
inline std::vector<QuestionRecord> visual_labeled(const std::vector<QuestionRecord>& questions) {
  std::vector<QuestionRecord> out;
  for (const auto& q : questions) {
    if (!q.visual) continue;
    if (!q.pos_tags) fail(ErrorCode::invalid_argument, "question " + q.qid + " has a visual label but no POS tags");
    out.push_back(q);
  }
  return out;
}

class PosSequenceSource {
 public:
  PosSequenceSource(const std::vector<QuestionRecord>& questions, const PosLstmModel& model)
      : questions_(&questions), model_(&model) {}

  std::size_t size() const { return questions_->size(); }

  SequenceExample example(std::size_t i) const {
    const auto& q = (*questions_)[i];
    return model_->encode(*q.pos_tags, *q.visual ? 1 : 0);
  }

 private:
  const std::vector<QuestionRecord>* questions_;
  const PosLstmModel* model_;
};

// ---------------------------------------------------------------------------
// Dense CSV export: label, then the PCA image block, then the averaged
// question embedding. One line per pair, no header.

inline std::size_t export_features(const std::vector<LabeledPair>& pairs, const FeatureStore& store, const QuestionIndex& questions,
                                   const EmbeddingTable& embeddings, const PCAModel& pca, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorCode::io, "cannot write " + path);
  out << std::setprecision(17);
  for (const auto& p : pairs) {
    const auto& q = lookup_question(questions, p.qid);
    if (!store.contains(p.iid)) fail(ErrorCode::not_found, "image '" + p.iid + "' not in feature store");
    const auto x = fused_features(store.row(p.iid), &pca, q.tokens, embeddings);
    out << label_of(p);
    for (double v : x) out << ',' << v;
    out << '\n';
  }
  if (!out) fail(ErrorCode::io, "write failed for " + path);
  return pairs.size();
}

struct CsvRow {
  int label = 0;
  std::vector<double> values;
};

inline std::vector<CsvRow> read_feature_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::io, "cannot open " + path);
  std::vector<CsvRow> rows;
  std::string line, cell;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::istringstream ss(line);
    CsvRow row;
    bool first = true;
    while (std::getline(ss, cell, ',')) {
      char* end = nullptr;
      const double v = std::strtod(cell.c_str(), &end);
      if (end == cell.c_str()) fail(ErrorCode::parse, path + ":" + std::to_string(line_no) + ": bad value '" + cell + "'");
      if (first) {
        row.label = static_cast<int>(v);
        first = false;
      } else {
        row.values.push_back(v);
      }
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

}  // namespace qrel
