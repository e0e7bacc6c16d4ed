#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <span>
#include <vector>

#include "qrel/models/common.hpp"
#include "qrel/rng.hpp"

namespace qrel {

template <typename Model, typename Example>
double mean_loss(const Model& m, std::span<const Example> batch) {
  double s = 0.0;
  for (const auto& ex : batch) s += bce(predict(m, ex), ex.label);
  return s / static_cast<double>(batch.size());
}

struct GradCheckResult {
  double max_rel_error = 0.0;
  std::string worst_param;
  std::size_t coords_checked = 0;
};

// Compares analytic gradients of the mean BCE over `batch` with central
// differences. Tensors larger than max_coords are checked on a seeded random
// subset of max_coords coordinates.
template <typename Model, typename Example>
GradCheckResult grad_check_detailed(Model& m, std::span<const Example> batch, double eps = 1e-5, std::size_t max_coords = 256,
                                    std::uint64_t seed = 7) {
  if (batch.empty()) fail(ErrorCode::invalid_argument, "grad_check: empty batch");
  auto params = m.params();
  for (auto* p : params) p->zero_grad();
  for (const auto& ex : batch) loss_and_grad(m, ex);
  const double inv = 1.0 / static_cast<double>(batch.size());

  Rng rng(seed);
  GradCheckResult res;
  for (auto* p : params) {
    if (!p->trainable) continue;
    std::vector<std::size_t> coords(p->size());
    std::iota(coords.begin(), coords.end(), std::size_t{0});
    if (coords.size() > max_coords) {
      rng.shuffle(std::span<std::size_t>(coords));
      coords.resize(max_coords);
    }
    for (std::size_t i : coords) {
      const double saved = p->value[i];
      p->value[i] = saved + eps;
      const double up = mean_loss<Model, Example>(m, batch);
      p->value[i] = saved - eps;
      const double down = mean_loss<Model, Example>(m, batch);
      p->value[i] = saved;
      const double numeric = (up - down) / (2.0 * eps);
      const double analytic = p->grad[i] * inv;
      const double err = std::abs(analytic - numeric) / std::max(std::abs(analytic) + std::abs(numeric), 1e-8);
      ++res.coords_checked;
      if (err > res.max_rel_error) {
        res.max_rel_error = err;
        res.worst_param = p->name + "[" + std::to_string(i) + "]";
      }
    }
  }
  for (auto* p : params) p->zero_grad();
  return res;
}

template <typename Model, typename Example>
double grad_check(Model& m, std::span<const Example> batch, double eps = 1e-5) {
  return grad_check_detailed(m, batch, eps).max_rel_error;
}

}  // namespace qrel
