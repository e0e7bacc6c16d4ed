#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <string>
#include <vector>

#include "qrel/error.hpp"
#include "qrel/rng.hpp"

namespace qrel {

// A named parameter tensor with its gradient accumulator.
struct Param {
  std::string name;
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> value;
  std::vector<double> grad;
  bool trainable = true;
  // Weight decay applies to matrices, not to biases.
  bool decay = true;

  Param() = default;
  Param(std::string n, std::size_t r, std::size_t c, bool is_bias = false)
      : name(std::move(n)), rows(r), cols(c), value(r * c, 0.0), grad(r * c, 0.0), decay(!is_bias) {}

  std::size_t size() const { return value.size(); }
  double& at(std::size_t r, std::size_t c) { return value[r * cols + c]; }
  double at(std::size_t r, std::size_t c) const { return value[r * cols + c]; }
  std::span<double> row(std::size_t r) { return {value.data() + r * cols, cols}; }
  std::span<const double> row(std::size_t r) const { return {value.data() + r * cols, cols}; }
  std::span<double> grad_row(std::size_t r) { return {grad.data() + r * cols, cols}; }

  void zero_grad() { std::fill(grad.begin(), grad.end(), 0.0); }
};

// uniform(-s, s), s = sqrt(6 / (fan_in + fan_out))
inline void init_glorot(Param& p, Rng& rng, std::size_t fan_in, std::size_t fan_out) {
  const double s = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  for (auto& v : p.value) v = rng.uniform(-s, s);
}

inline double sigmoid(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

inline constexpr double kProbClamp = 1e-12;

// Binary cross-entropy on a clamped probability.
inline double bce(double p, int label) {
  const double q = std::clamp(p, kProbClamp, 1.0 - kProbClamp);
  return label == 1 ? -std::log(q) : -std::log(1.0 - q);
}

inline void check_label(int label) {
  if (label != 0 && label != 1) fail(ErrorCode::invalid_argument, "label must be 0 or 1, got " + std::to_string(label));
}

// y += A x, A is rows x cols row-major.
inline void gemv_acc(std::span<const double> a, std::size_t rows, std::size_t cols, std::span<const double> x, std::span<double> y) {
  for (std::size_t r = 0; r < rows; ++r) {
    const double* ar = a.data() + r * cols;
    double s = 0.0;
    for (std::size_t c = 0; c < cols; ++c) s += ar[c] * x[c];
    y[r] += s;
  }
}

// y += A^T x
inline void gemv_t_acc(std::span<const double> a, std::size_t rows, std::size_t cols, std::span<const double> x, std::span<double> y) {
  for (std::size_t r = 0; r < rows; ++r) {
    const double* ar = a.data() + r * cols;
    const double xr = x[r];
    if (xr == 0.0) continue;
    for (std::size_t c = 0; c < cols; ++c) y[c] += ar[c] * xr;
  }
}

// G += u v^T
inline void outer_acc(std::span<double> g, std::span<const double> u, std::span<const double> v) {
  const std::size_t cols = v.size();
  for (std::size_t r = 0; r < u.size(); ++r) {
    const double ur = u[r];
    if (ur == 0.0) continue;
    double* gr = g.data() + r * cols;
    for (std::size_t c = 0; c < cols; ++c) gr[c] += ur * v[c];
  }
}

}  // namespace qrel
