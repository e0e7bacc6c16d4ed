#pragma once

// Logistic regression over hashed sparse features or dense vectors, with a
// streaming SGD trainer whose memory is O(dim).

#include <cmath>
#include <optional>
#include <span>
#include <vector>

#include "qrel/models/common.hpp"
#include "qrel/numerics.hpp"
#include "qrel/textfeat.hpp"

namespace qrel {

struct LRModel {
  Param weights;  // 1 x dim
  Param bias;     // 1 x 1

  LRModel() : LRModel(0) {}
  explicit LRModel(std::size_t dim) : weights("lr.w", 1, dim), bias("lr.b", 1, 1, true) {}

  std::size_t dim() const { return weights.cols; }
  std::vector<Param*> params() { return {&weights, &bias}; }
};

namespace detail {

inline void check_index(const LRModel& m, std::size_t i) {
  if (i >= m.dim()) {
    fail(ErrorCode::dimension_mismatch, "feature index " + std::to_string(i) + " >= model dim " + std::to_string(m.dim()));
  }
}

template <typename Fn>
void for_each_feature(const SparseFeatures& x, Fn&& fn) {
  for (const auto& [i, c] : x.entries) fn(static_cast<std::size_t>(i), c);
}

template <typename Fn>
void for_each_feature(const DenseVector& x, Fn&& fn) {
  for (std::size_t i = 0; i < x.size(); ++i) fn(i, x[i]);
}

template <typename X>
double lr_margin(const LRModel& m, const X& x) {
  double z = m.bias.value[0];
  for_each_feature(x, [&](std::size_t i, double v) {
    check_index(m, i);
    z += m.weights.value[i] * v;
  });
  return z;
}

}  // namespace detail

inline double lr_predict(const LRModel& m, const SparseFeatures& x) { return sigmoid(detail::lr_margin(m, x)); }

inline double lr_predict(const LRModel& m, const DenseVector& x) {
  if (x.size() != m.dim()) fail(ErrorCode::dimension_mismatch, "lr_predict: expected " + std::to_string(m.dim()) + " features");
  return sigmoid(detail::lr_margin(m, x));
}

template <typename X>
struct LabeledExample {
  X x;
  int label = 0;
};

using SparseExample = LabeledExample<SparseFeatures>;
using DenseExample = LabeledExample<DenseVector>;

// BCE loss; gradients accumulate into the model's Param::grad.
template <typename X>
double loss_and_grad(LRModel& m, const LabeledExample<X>& ex) {
  const double p = lr_predict(m, ex.x);
  const double g = p - ex.label;
  detail::for_each_feature(ex.x, [&](std::size_t i, double v) { m.weights.grad[i] += g * v; });
  m.bias.grad[0] += g;
  return bce(p, ex.label);
}

template <typename X>
double predict(const LRModel& m, const LabeledExample<X>& ex) {
  return lr_predict(m, ex.x);
}

struct StreamingLRConfig {
  double learning_rate = 0.1;
  int epochs = 5;
  double l2 = 0.0;
};

// Stream: reset() rewinds, next() returns std::optional<LabeledExample<X>>.
// Per-example SGD on logistic loss + l2/2 |w|^2; decay is applied through a
// global scale so each step costs O(nnz).
template <typename Stream>
LRModel lr_train_streaming(Stream& stream, std::size_t dim, const StreamingLRConfig& cfg,
                           std::vector<double>* epoch_losses = nullptr) {
  if (cfg.learning_rate <= 0) fail(ErrorCode::invalid_argument, "learning_rate must be positive");
  if (cfg.l2 < 0) fail(ErrorCode::invalid_argument, "l2 must be non-negative");
  LRModel m(dim);
  auto& v = m.weights.value;
  double scale = 1.0;
  const double decay = 1.0 - cfg.learning_rate * cfg.l2;
  if (decay <= 0) fail(ErrorCode::invalid_argument, "learning_rate * l2 must be < 1");

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    stream.reset();
    double loss_sum = 0.0;
    std::size_t count = 0;
    while (auto ex = stream.next()) {
      check_label(ex->label);
      double z = m.bias.value[0];
      detail::for_each_feature(ex->x, [&](std::size_t i, double x) {
        detail::check_index(m, i);
        z += scale * v[i] * x;
      });
      const double p = sigmoid(z);
      loss_sum += bce(p, ex->label);
      ++count;
      const double g = p - ex->label;
      scale *= decay;
      if (scale < 1e-9) {
        for (auto& w : v) w *= scale;
        scale = 1.0;
      }
      detail::for_each_feature(ex->x, [&](std::size_t i, double x) { v[i] -= cfg.learning_rate * g * x / scale; });
      m.bias.value[0] -= cfg.learning_rate * g;
    }
    if (!std::isfinite(loss_sum)) fail(ErrorCode::numeric, "non-finite loss in epoch " + std::to_string(epoch));
    if (epoch_losses) epoch_losses->push_back(count ? loss_sum / static_cast<double>(count) : 0.0);
  }
  if (scale != 1.0) {
    for (auto& w : v) w *= scale;
  }
  return m;
}

// Replays an in-memory example vector as a stream.
template <typename X>
class VectorStream {
 public:
  explicit VectorStream(const std::vector<LabeledExample<X>>& data) : data_(&data) {}
  void reset() { pos_ = 0; }
  std::optional<LabeledExample<X>> next() {
    if (pos_ >= data_->size()) return std::nullopt;
    return (*data_)[pos_++];
  }

 private:
  const std::vector<LabeledExample<X>>* data_;
  std::size_t pos_ = 0;
};

}  // namespace qrel
