#pragma once

// Visual / non-visual classifier: POS-tag embeddings -> LSTM -> sigmoid head
// on the final hidden state.

#include <span>
#include <string>
#include <vector>

#include "qrel/models/common.hpp"
#include "qrel/models/lstm.hpp"
#include "qrel/models/vocab.hpp"

namespace qrel {

struct SequenceExample {
  std::vector<int> ids;
  int label = 0;
};

struct PosLstmModel {
  SymbolVocab tags;
  std::size_t tag_dim = 32;
  std::size_t hidden_dim = 100;
  Param embed;  // |tags| x tag_dim; row 0 is the learned unknown-tag row
  LstmCell cell;
  Param head_w;  // 1 x hidden
  Param head_b;

  PosLstmModel() = default;
  PosLstmModel(SymbolVocab vocab, std::size_t d_tag, std::size_t d_h)
      : tags(std::move(vocab)),
        tag_dim(d_tag),
        hidden_dim(d_h),
        embed("poslstm.embed", tags.size(), d_tag),
        cell("poslstm.lstm", d_tag, d_h),
        head_w("poslstm.head.w", 1, d_h),
        head_b("poslstm.head.b", 1, 1, true) {}

  void init(Rng& rng) {
    init_glorot(embed, rng, embed.rows, tag_dim);
    cell.init(rng);
    init_glorot(head_w, rng, hidden_dim, 1);
  }

  std::vector<Param*> params() { return {&embed, &cell.w, &cell.u, &cell.b, &head_w, &head_b}; }

  SequenceExample encode(std::span<const std::string> pos_tags, int label = 0) const { return {tags.encode(pos_tags), label}; }
};

namespace detail {

inline LstmTrace poslstm_trace(const PosLstmModel& m, const std::vector<int>& ids) {
  if (ids.empty()) fail(ErrorCode::invalid_argument, "poslstm_forward: empty tag sequence");
  std::vector<std::vector<double>> inputs;
  inputs.reserve(ids.size());
  for (int id : ids) {
    if (id < 0 || static_cast<std::size_t>(id) >= m.embed.rows) fail(ErrorCode::dimension_mismatch, "tag id out of range");
    auto r = m.embed.row(static_cast<std::size_t>(id));
    inputs.emplace_back(r.begin(), r.end());
  }
  return lstm_forward(m.cell, inputs);
}

}  // namespace detail

inline double predict(const PosLstmModel& m, const SequenceExample& ex) {
  const auto trace = detail::poslstm_trace(m, ex.ids);
  double z = m.head_b.value[0];
  for (std::size_t k = 0; k < m.hidden_dim; ++k) z += m.head_w.value[k] * trace.back().h[k];
  return sigmoid(z);
}

inline double poslstm_forward(const PosLstmModel& m, std::span<const std::string> pos_tags) {
  return predict(m, m.encode(pos_tags));
}

inline double loss_and_grad(PosLstmModel& m, const SequenceExample& ex) {
  const auto trace = detail::poslstm_trace(m, ex.ids);
  const auto& h = trace.back().h;
  double z = m.head_b.value[0];
  for (std::size_t k = 0; k < m.hidden_dim; ++k) z += m.head_w.value[k] * h[k];
  const double p = sigmoid(z);
  const double dz = p - ex.label;
  m.head_b.grad[0] += dz;
  std::vector<std::vector<double>> dh(trace.size(), std::vector<double>(m.hidden_dim, 0.0));
  for (std::size_t k = 0; k < m.hidden_dim; ++k) {
    m.head_w.grad[k] += dz * h[k];
    dh.back()[k] = dz * m.head_w.value[k];
  }
  const auto dx = lstm_backward(m.cell, trace, dh);
  for (std::size_t t = 0; t < ex.ids.size(); ++t) {
    auto g = m.embed.grad_row(static_cast<std::size_t>(ex.ids[t]));
    for (std::size_t k = 0; k < m.tag_dim; ++k) g[k] += dx[t][k];
  }
  return bce(p, ex.label);
}

}  // namespace qrel
