#pragma once

// RelNet relevance classifiers: an image pathway and a question pathway
// fused by a final LSTM with a sigmoid head.
//
//   variant 1: PCA image vector concatenated with question-LSTM output at
//              every step
//   variant 2: as 1, with a trained linear image embedding instead of PCA
//   variant 3: image embedding at step 1 only, question-LSTM outputs from
//              step 2 onwards
//   variant 4: image embedding at step 1, raw token embeddings from step 2
//              onwards (no question LSTM)
//
// For variants 3 and 4 the step-1 image vector and the later step inputs can
// differ in width. StepOneMode::pad zero-pads the narrower one to the wider
// width; StepOneMode::project maps the image vector to the step width with
// an extra trained matrix.

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "qrel/models/common.hpp"
#include "qrel/models/lstm.hpp"
#include "qrel/models/vocab.hpp"
#include "qrel/numerics.hpp"
#include "qrel/textfeat.hpp"

namespace qrel {

enum class StepOneMode { pad, project };

inline StepOneMode step_one_mode_from_string(const std::string& s) {
  if (s == "pad") return StepOneMode::pad;
  if (s == "project") return StepOneMode::project;
  fail(ErrorCode::invalid_argument, "unknown step-one mode '" + s + "' (expected pad|project)");
}

inline const char* to_string(StepOneMode m) { return m == StepOneMode::pad ? "pad" : "project"; }

struct RelNetDims {
  std::size_t feature_dim = 4096;
  std::size_t embed_dim = 300;
  std::size_t hidden_dim = 256;
  std::size_t image_dim = 300;

  bool operator==(const RelNetDims&) const = default;
};

struct RelevanceExample {
  DenseVector image;
  std::vector<int> ids;
  int label = 0;
};

struct RelNetModel {
  int variant = 4;
  RelNetDims dims;
  StepOneMode step_one = StepOneMode::pad;
  SymbolVocab tokens;

  Param embed;           // |tokens| x embed_dim
  PCAModel pca;          // variant 1 only, frozen
  Param img_w;           // image_dim x feature_dim (variants 2-4)
  Param img_b;           // image_dim
  Param proj;            // stream_width x image_dim (project mode, variants 3-4)
  LstmCell question;     // variants 1-3
  LstmCell fusion;
  Param head_w;          // 1 x hidden_dim
  Param head_b;

  RelNetModel() = default;

  RelNetModel(int v, RelNetDims d, SymbolVocab vocab, StepOneMode mode = StepOneMode::pad,
              std::optional<PCAModel> pca_model = std::nullopt)
      : variant(v), dims(d), step_one(mode), tokens(std::move(vocab)) {
    if (variant < 1 || variant > 4) fail(ErrorCode::invalid_argument, "RelNet variant must be 1..4");
    if (variant == 1) {
      if (!pca_model) fail(ErrorCode::invalid_argument, "RelNet1 needs a fitted PCA model");
      pca = std::move(*pca_model);
      dims.feature_dim = pca.input_dim();
      dims.image_dim = pca.output_dim();
    } else {
      img_w = Param("relnet.img.W", dims.image_dim, dims.feature_dim);
      img_b = Param("relnet.img.b", dims.image_dim, 1, true);
    }
    embed = Param("relnet.embed", tokens.size(), dims.embed_dim);
    if (has_question_lstm()) question = LstmCell("relnet.qlstm", dims.embed_dim, dims.hidden_dim);
    if (uses_projection()) proj = Param("relnet.proj", stream_width(), dims.image_dim);
    fusion = LstmCell("relnet.flstm", fusion_width(), dims.hidden_dim);
    head_w = Param("relnet.head.w", 1, dims.hidden_dim);
    head_b = Param("relnet.head.b", 1, 1, true);
  }

  bool has_question_lstm() const { return variant <= 3; }
  bool concat_every_step() const { return variant <= 2; }
  bool uses_projection() const { return variant >= 3 && step_one == StepOneMode::project; }

  // Width of the per-step stream that follows the image in variants 3-4.
  std::size_t stream_width() const { return variant == 4 ? dims.embed_dim : dims.hidden_dim; }

  std::size_t fusion_width() const {
    if (concat_every_step()) return dims.hidden_dim + dims.image_dim;
    if (uses_projection()) return stream_width();
    return std::max(stream_width(), dims.image_dim);
  }

  void init(Rng& rng) {
    init_glorot(embed, rng, embed.rows, dims.embed_dim);
    if (variant != 1) init_glorot(img_w, rng, dims.feature_dim, dims.image_dim);
    if (uses_projection()) init_glorot(proj, rng, dims.image_dim, stream_width());
    if (has_question_lstm()) question.init(rng);
    fusion.init(rng);
    init_glorot(head_w, rng, dims.hidden_dim, 1);
  }

  // Copies pretrained vectors for every known token; returns how many rows
  // were filled.
  std::size_t load_embeddings(const EmbeddingTable& table) {
    if (table.dim != dims.embed_dim) {
      fail(ErrorCode::dimension_mismatch, "embedding table dim " + std::to_string(table.dim) + " != model embed dim " + std::to_string(dims.embed_dim));
    }
    std::size_t filled = 0;
    for (std::size_t id = 1; id < tokens.size(); ++id) {
      if (const auto* v = table.find(tokens.symbols()[id])) {
        std::copy(v->begin(), v->end(), embed.row(id).begin());
        ++filled;
      }
    }
    return filled;
  }

  std::vector<Param*> params() {
    std::vector<Param*> out{&embed};
    if (variant != 1) {
      out.push_back(&img_w);
      out.push_back(&img_b);
    }
    if (uses_projection()) out.push_back(&proj);
    if (has_question_lstm()) {
      for (auto* p : question.params()) out.push_back(p);
    }
    for (auto* p : fusion.params()) out.push_back(p);
    out.push_back(&head_w);
    out.push_back(&head_b);
    return out;
  }

  RelevanceExample encode(DenseVector image, std::span<const std::string> toks, int label = 0) const {
    return {std::move(image), tokens.encode(lowered(toks)), label};
  }
};

inline const char* relnet_kind(int variant) {
  static const char* names[] = {"relnet1", "relnet2", "relnet3", "relnet4"};
  if (variant < 1 || variant > 4) fail(ErrorCode::invalid_argument, "RelNet variant must be 1..4");
  return names[variant - 1];
}

namespace detail {

struct RelNetCache {
  DenseVector img;  // image_dim
  LstmTrace q_trace;
  LstmTrace f_trace;
  double logit = 0.0;
};

inline DenseVector relnet_image(const RelNetModel& m, const DenseVector& image) {
  if (image.size() != m.dims.feature_dim) {
    fail(ErrorCode::dimension_mismatch, "relnet: image vector has " + std::to_string(image.size()) + " entries, expected " +
                                            std::to_string(m.dims.feature_dim));
  }
  if (m.variant == 1) return pca_project(m.pca, image);
  DenseVector out(m.img_b.value);
  gemv_acc(m.img_w.value, m.dims.image_dim, m.dims.feature_dim, image, out);
  return out;
}

// Step-1 fusion input for variants 3-4.
inline std::vector<double> relnet_step_one(const RelNetModel& m, const DenseVector& img) {
  std::vector<double> x(m.fusion_width(), 0.0);
  if (m.uses_projection()) {
    gemv_acc(m.proj.value, m.stream_width(), m.dims.image_dim, img, x);
  } else {
    std::copy(img.begin(), img.end(), x.begin());
  }
  return x;
}

inline RelNetCache relnet_run(const RelNetModel& m, const RelevanceExample& ex) {
  if (ex.ids.empty()) fail(ErrorCode::invalid_argument, "relnet_forward: empty token sequence");
  RelNetCache cache;
  cache.img = relnet_image(m, ex.image);

  std::vector<std::vector<double>> emb;
  emb.reserve(ex.ids.size());
  for (int id : ex.ids) {
    if (id < 0 || static_cast<std::size_t>(id) >= m.embed.rows) fail(ErrorCode::dimension_mismatch, "token id out of range");
    auto r = m.embed.row(static_cast<std::size_t>(id));
    emb.emplace_back(r.begin(), r.end());
  }
  if (m.has_question_lstm()) cache.q_trace = lstm_forward(m.question, emb);

  const std::size_t width = m.fusion_width();
  std::vector<std::vector<double>> fin;
  if (m.concat_every_step()) {
    for (const auto& step : cache.q_trace) {
      std::vector<double> x(step.h);
      x.insert(x.end(), cache.img.begin(), cache.img.end());
      fin.push_back(std::move(x));
    }
  } else {
    fin.push_back(relnet_step_one(m, cache.img));
    auto push_padded = [&](const std::vector<double>& v) {
      std::vector<double> x(width, 0.0);
      std::copy(v.begin(), v.end(), x.begin());
      fin.push_back(std::move(x));
    };
    if (m.variant == 3) {
      for (const auto& step : cache.q_trace) push_padded(step.h);
    } else {
      for (const auto& e : emb) push_padded(e);
    }
  }
  cache.f_trace = lstm_forward(m.fusion, fin);
  const auto& h = cache.f_trace.back().h;
  cache.logit = m.head_b.value[0];
  for (std::size_t k = 0; k < m.dims.hidden_dim; ++k) cache.logit += m.head_w.value[k] * h[k];
  return cache;
}

}  // namespace detail

inline double predict(const RelNetModel& m, const RelevanceExample& ex) { return sigmoid(detail::relnet_run(m, ex).logit); }

inline double relnet_forward(const RelNetModel& m, const DenseVector& image, std::span<const std::string> toks) {
  return predict(m, m.encode(image, toks));
}

inline double loss_and_grad(RelNetModel& m, const RelevanceExample& ex) {
  const auto cache = detail::relnet_run(m, ex);
  const double p = sigmoid(cache.logit);
  const double dz = p - ex.label;
  const std::size_t H = m.dims.hidden_dim, T = ex.ids.size();

  m.head_b.grad[0] += dz;
  std::vector<std::vector<double>> dh_f(cache.f_trace.size(), std::vector<double>(H, 0.0));
  const auto& h_last = cache.f_trace.back().h;
  for (std::size_t k = 0; k < H; ++k) {
    m.head_w.grad[k] += dz * h_last[k];
    dh_f.back()[k] = dz * m.head_w.value[k];
  }
  const auto dx_f = lstm_backward(m.fusion, cache.f_trace, dh_f);

  DenseVector d_img(m.dims.image_dim, 0.0);
  std::vector<std::vector<double>> d_q(T, std::vector<double>(H, 0.0));  // grads on question-LSTM outputs
  std::vector<std::vector<double>> d_emb(T, std::vector<double>(m.dims.embed_dim, 0.0));

  if (m.concat_every_step()) {
    for (std::size_t t = 0; t < T; ++t) {
      for (std::size_t k = 0; k < H; ++k) d_q[t][k] = dx_f[t][k];
      for (std::size_t k = 0; k < m.dims.image_dim; ++k) d_img[k] += dx_f[t][H + k];
    }
  } else {
    const auto& d1 = dx_f[0];
    if (m.uses_projection()) {
      outer_acc(m.proj.grad, d1, cache.img);
      gemv_t_acc(m.proj.value, m.stream_width(), m.dims.image_dim, d1, d_img);
    } else {
      for (std::size_t k = 0; k < m.dims.image_dim; ++k) d_img[k] = d1[k];
    }
    for (std::size_t t = 0; t < T; ++t) {
      if (m.variant == 3) {
        for (std::size_t k = 0; k < H; ++k) d_q[t][k] = dx_f[t + 1][k];
      } else {
        for (std::size_t k = 0; k < m.dims.embed_dim; ++k) d_emb[t][k] = dx_f[t + 1][k];
      }
    }
  }

  if (m.has_question_lstm()) {
    const auto dx_q = lstm_backward(m.question, cache.q_trace, d_q);
    for (std::size_t t = 0; t < T; ++t)
      for (std::size_t k = 0; k < m.dims.embed_dim; ++k) d_emb[t][k] += dx_q[t][k];
  }
  for (std::size_t t = 0; t < T; ++t) {
    auto g = m.embed.grad_row(static_cast<std::size_t>(ex.ids[t]));
    for (std::size_t k = 0; k < m.dims.embed_dim; ++k) g[k] += d_emb[t][k];
  }
  if (m.variant != 1) {
    outer_acc(m.img_w.grad, d_img, ex.image);
    for (std::size_t k = 0; k < m.dims.image_dim; ++k) m.img_b.grad[k] += d_img[k];
  }
  return bce(p, ex.label);
}

}  // namespace qrel
