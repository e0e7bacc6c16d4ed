#pragma once

// Feed-forward network: ReLU hidden layers, single sigmoid output.

#include <vector>

#include "qrel/models/common.hpp"
#include "qrel/models/lr.hpp"

namespace qrel {

struct MLPModel {
  std::vector<std::size_t> layer_dims;  // [d_in, h1, ..., 1]
  std::vector<Param> weights;           // out x in
  std::vector<Param> biases;

  MLPModel() = default;
  explicit MLPModel(std::vector<std::size_t> dims) : layer_dims(std::move(dims)) {
    if (layer_dims.size() < 2 || layer_dims.back() != 1) {
      fail(ErrorCode::invalid_argument, "MLP layer dims must have >= 2 entries and end in 1");
    }
    for (std::size_t l = 0; l + 1 < layer_dims.size(); ++l) {
      if (layer_dims[l] == 0) fail(ErrorCode::invalid_argument, "MLP layer dims must be positive");
      weights.emplace_back("mlp.W" + std::to_string(l), layer_dims[l + 1], layer_dims[l]);
      biases.emplace_back("mlp.b" + std::to_string(l), layer_dims[l + 1], 1, true);
    }
  }

  void init(Rng& rng) {
    for (std::size_t l = 0; l < weights.size(); ++l) init_glorot(weights[l], rng, layer_dims[l], layer_dims[l + 1]);
  }

  std::size_t input_dim() const { return layer_dims.front(); }

  std::vector<Param*> params() {
    std::vector<Param*> out;
    for (std::size_t l = 0; l < weights.size(); ++l) {
      out.push_back(&weights[l]);
      out.push_back(&biases[l]);
    }
    return out;
  }
};

namespace detail {

// activations[0] = x; activations[l+1] = relu(W_l a_l + b_l), last is the
// pre-sigmoid logit.
inline std::vector<std::vector<double>> mlp_activations(const MLPModel& m, std::span<const double> x) {
  if (x.size() != m.input_dim()) {
    fail(ErrorCode::dimension_mismatch, "mlp_forward: expected " + std::to_string(m.input_dim()) + " inputs, got " + std::to_string(x.size()));
  }
  std::vector<std::vector<double>> acts;
  acts.emplace_back(x.begin(), x.end());
  for (std::size_t l = 0; l < m.weights.size(); ++l) {
    std::vector<double> z(m.biases[l].value);
    gemv_acc(m.weights[l].value, m.layer_dims[l + 1], m.layer_dims[l], acts.back(), z);
    if (l + 1 < m.weights.size()) {
      for (auto& v : z) v = std::max(0.0, v);
    }
    acts.push_back(std::move(z));
  }
  return acts;
}

}  // namespace detail

inline double mlp_forward(const MLPModel& m, std::span<const double> x) {
  return sigmoid(detail::mlp_activations(m, x).back()[0]);
}

inline double predict(const MLPModel& m, const DenseExample& ex) { return mlp_forward(m, ex.x); }

inline double loss_and_grad(MLPModel& m, const DenseExample& ex) {
  const auto acts = detail::mlp_activations(m, ex.x);
  const double p = sigmoid(acts.back()[0]);
  std::vector<double> delta{p - ex.label};
  for (std::size_t l = m.weights.size(); l-- > 0;) {
    outer_acc(m.weights[l].grad, delta, acts[l]);
    for (std::size_t k = 0; k < delta.size(); ++k) m.biases[l].grad[k] += delta[k];
    if (l == 0) break;
    std::vector<double> prev(m.layer_dims[l], 0.0);
    gemv_t_acc(m.weights[l].value, m.layer_dims[l + 1], m.layer_dims[l], delta, prev);
    for (std::size_t k = 0; k < prev.size(); ++k) {
      if (acts[l][k] <= 0.0) prev[k] = 0.0;
    }
    delta = std::move(prev);
  }
  return bce(p, ex.label);
}

}  // namespace qrel
