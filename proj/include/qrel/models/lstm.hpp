#pragma once

// Standard LSTM cell (gate order i, f, g, o) with backpropagation through
// time.

#include <span>
#include <vector>

#include "qrel/models/common.hpp"

namespace qrel {

struct LstmState {
  std::vector<double> h;
  std::vector<double> c;
};

struct LstmCell {
  std::size_t input_dim = 0;
  std::size_t hidden_dim = 0;
  Param w;  // 4h x d_x
  Param u;  // 4h x d_h
  Param b;  // 4h

  LstmCell() = default;
  LstmCell(std::string prefix, std::size_t d_x, std::size_t d_h)
      : input_dim(d_x),
        hidden_dim(d_h),
        w(prefix + ".W", 4 * d_h, d_x),
        u(prefix + ".U", 4 * d_h, d_h),
        b(prefix + ".b", 4 * d_h, 1, true) {}

  void init(Rng& rng) {
    init_glorot(w, rng, input_dim, hidden_dim);
    init_glorot(u, rng, hidden_dim, hidden_dim);
    std::fill(b.value.begin(), b.value.end(), 0.0);
  }

  std::vector<Param*> params() { return {&w, &u, &b}; }

  LstmState zero_state() const { return {std::vector<double>(hidden_dim, 0.0), std::vector<double>(hidden_dim, 0.0)}; }
};

// Everything one step needs for its backward pass.
struct LstmStepCache {
  std::vector<double> x, h_prev, c_prev;
  std::vector<double> i, f, g, o;
  std::vector<double> c, tanh_c, h;
};

inline LstmStepCache lstm_step_cached(const LstmCell& cell, std::span<const double> x, const LstmState& prev) {
  const std::size_t H = cell.hidden_dim;
  if (x.size() != cell.input_dim || prev.h.size() != H || prev.c.size() != H) {
    fail(ErrorCode::dimension_mismatch, "lstm_step: expected input " + std::to_string(cell.input_dim) + ", hidden " +
                                            std::to_string(H) + "; got input " + std::to_string(x.size()));
  }
  LstmStepCache s;
  s.x.assign(x.begin(), x.end());
  s.h_prev = prev.h;
  s.c_prev = prev.c;
  std::vector<double> z(cell.b.value);
  gemv_acc(cell.w.value, 4 * H, cell.input_dim, x, z);
  gemv_acc(cell.u.value, 4 * H, H, prev.h, z);
  s.i.resize(H);
  s.f.resize(H);
  s.g.resize(H);
  s.o.resize(H);
  s.c.resize(H);
  s.tanh_c.resize(H);
  s.h.resize(H);
  for (std::size_t k = 0; k < H; ++k) {
    s.i[k] = sigmoid(z[k]);
    s.f[k] = sigmoid(z[H + k]);
    s.g[k] = std::tanh(z[2 * H + k]);
    s.o[k] = sigmoid(z[3 * H + k]);
    s.c[k] = s.f[k] * prev.c[k] + s.i[k] * s.g[k];
    s.tanh_c[k] = std::tanh(s.c[k]);
    s.h[k] = s.o[k] * s.tanh_c[k];
  }
  return s;
}

inline LstmState lstm_step(const LstmCell& cell, std::span<const double> x, const LstmState& prev) {
  auto s = lstm_step_cached(cell, x, prev);
  return {std::move(s.h), std::move(s.c)};
}

using LstmTrace = std::vector<LstmStepCache>;

inline LstmTrace lstm_forward(const LstmCell& cell, const std::vector<std::vector<double>>& inputs) {
  LstmTrace trace;
  trace.reserve(inputs.size());
  LstmState state = cell.zero_state();
  for (const auto& x : inputs) {
    trace.push_back(lstm_step_cached(cell, x, state));
    state.h = trace.back().h;
    state.c = trace.back().c;
  }
  return trace;
}

// dh_out[t] is the external gradient on h_t. Accumulates parameter
// gradients into the cell and returns the gradient on every input x_t.
inline std::vector<std::vector<double>> lstm_backward(LstmCell& cell, const LstmTrace& trace,
                                                      const std::vector<std::vector<double>>& dh_out) {
  const std::size_t H = cell.hidden_dim, T = trace.size();
  std::vector<std::vector<double>> dx(T, std::vector<double>(cell.input_dim, 0.0));
  std::vector<double> dh_next(H, 0.0), dc_next(H, 0.0), dz(4 * H);
  for (std::size_t t = T; t-- > 0;) {
    const auto& s = trace[t];
    for (std::size_t k = 0; k < H; ++k) {
      const double dh = dh_out[t][k] + dh_next[k];
      const double d_o = dh * s.tanh_c[k];
      const double dc = dh * s.o[k] * (1.0 - s.tanh_c[k] * s.tanh_c[k]) + dc_next[k];
      const double di = dc * s.g[k];
      const double dg = dc * s.i[k];
      const double df = dc * s.c_prev[k];
      dc_next[k] = dc * s.f[k];
      dz[k] = di * s.i[k] * (1.0 - s.i[k]);
      dz[H + k] = df * s.f[k] * (1.0 - s.f[k]);
      dz[2 * H + k] = dg * (1.0 - s.g[k] * s.g[k]);
      dz[3 * H + k] = d_o * s.o[k] * (1.0 - s.o[k]);
    }
    outer_acc(cell.w.grad, dz, s.x);
    outer_acc(cell.u.grad, dz, s.h_prev);
    for (std::size_t k = 0; k < 4 * H; ++k) cell.b.grad[k] += dz[k];
    gemv_t_acc(cell.w.value, 4 * H, cell.input_dim, dz, dx[t]);
    std::fill(dh_next.begin(), dh_next.end(), 0.0);
    gemv_t_acc(cell.u.value, 4 * H, H, dz, dh_next);
  }
  return dx;
}

}  // namespace qrel
