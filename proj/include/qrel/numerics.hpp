#pragma once

// Dense vector math, PCA and exact cosine top-k search.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <limits>
#include <span>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "qrel/binary_io.hpp"
#include "qrel/corpus.hpp"
#include "qrel/error.hpp"
#include "qrel/rng.hpp"

namespace qrel {

using DenseVector = std::vector<double>;

// Row-major dense matrix.
struct Matrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> data;

  Matrix() = default;
  Matrix(std::size_t r, std::size_t c, double fill = 0.0) : rows(r), cols(c), data(r * c, fill) {}

  double& operator()(std::size_t r, std::size_t c) { return data[r * cols + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data[r * cols + c]; }

  std::span<double> row(std::size_t r) { return {data.data() + r * cols, cols}; }
  std::span<const double> row(std::size_t r) const { return {data.data() + r * cols, cols}; }

  static Matrix identity(std::size_t n) {
    Matrix m(n, n);
    for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
    return m;
  }

  bool operator==(const Matrix&) const = default;
};

template <typename T, typename U>
double dot(std::span<T> u, std::span<U> v) {
  if (u.size() != v.size()) fail(ErrorCode::dimension_mismatch, "dot: length mismatch");
  double s = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) s += static_cast<double>(u[i]) * static_cast<double>(v[i]);
  return s;
}

inline double dot(const DenseVector& u, const DenseVector& v) {
  return dot(std::span<const double>(u), std::span<const double>(v));
}

template <typename T>
double norm(std::span<T> u) {
  return std::sqrt(dot(u, u));
}

template <typename T, typename U>
double cosine(std::span<T> u, std::span<U> v) {
  if (u.size() != v.size()) fail(ErrorCode::dimension_mismatch, "cosine: length mismatch");
  const double nu = norm(u);
  const double nv = norm(v);
  if (nu == 0.0 || nv == 0.0) fail(ErrorCode::invalid_argument, "cosine: zero-norm input");
  return std::clamp(dot(u, v) / (nu * nv), -1.0, 1.0);
}

inline double cosine(const DenseVector& u, const DenseVector& v) {
  return cosine(std::span<const double>(u), std::span<const double>(v));
}

// y = A x
inline DenseVector matvec(const Matrix& a, std::span<const double> x) {
  if (x.size() != a.cols) fail(ErrorCode::dimension_mismatch, "matvec: expected length " + std::to_string(a.cols));
  DenseVector y(a.rows, 0.0);
  for (std::size_t r = 0; r < a.rows; ++r) {
    const double* ar = a.data.data() + r * a.cols;
    double s = 0.0;
    for (std::size_t c = 0; c < a.cols; ++c) s += ar[c] * x[c];
    y[r] = s;
  }
  return y;
}

// ---------------------------------------------------------------------------
// Symmetric eigendecomposition

struct SymmetricEigen {
  DenseVector values;  // descending
  Matrix vectors;      // row i is the eigenvector for values[i]
};

// Cyclic Jacobi rotations. Intended for matrices up to ~1k on a side.
inline SymmetricEigen jacobi_eigen(Matrix a, int max_sweeps = 100) {
  if (a.rows != a.cols) fail(ErrorCode::dimension_mismatch, "jacobi_eigen: matrix not square");
  const std::size_t n = a.rows;
  Matrix v = Matrix::identity(n);  // columns are eigenvectors

  double scale = 0.0;
  for (double x : a.data) scale = std::max(scale, std::abs(x));

  for (int sweep = 0; sweep < max_sweeps; ++sweep) {
    double off = 0.0;
    for (std::size_t p = 0; p < n; ++p)
      for (std::size_t q = p + 1; q < n; ++q) off += a(p, q) * a(p, q);
    if (off <= std::numeric_limits<double>::min() || std::sqrt(off) <= 1e-15 * scale * static_cast<double>(n)) break;

    for (std::size_t p = 0; p < n; ++p) {
      for (std::size_t q = p + 1; q < n; ++q) {
        const double apq = a(p, q);
        if (std::abs(apq) <= std::numeric_limits<double>::min()) continue;
        const double theta = (a(q, q) - a(p, p)) / (2.0 * apq);
        const double t = (theta >= 0 ? 1.0 : -1.0) / (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double s = t * c;
        for (std::size_t k = 0; k < n; ++k) {
          const double akp = a(k, p), akq = a(k, q);
          a(k, p) = c * akp - s * akq;
          a(k, q) = s * akp + c * akq;
        }
        for (std::size_t k = 0; k < n; ++k) {
          const double apk = a(p, k), aqk = a(q, k);
          a(p, k) = c * apk - s * aqk;
          a(q, k) = s * apk + c * aqk;
        }
        for (std::size_t k = 0; k < n; ++k) {
          const double vkp = v(k, p), vkq = v(k, q);
          v(k, p) = c * vkp - s * vkq;
          v(k, q) = s * vkp + c * vkq;
        }
      }
    }
  }

  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(), [&](std::size_t i, std::size_t j) { return a(i, i) > a(j, j); });

  SymmetricEigen out;
  out.values.resize(n);
  out.vectors = Matrix(n, n);
  for (std::size_t r = 0; r < n; ++r) {
    out.values[r] = a(order[r], order[r]);
    for (std::size_t k = 0; k < n; ++k) out.vectors(r, k) = v(k, order[r]);
  }
  return out;
}

// Modified Gram-Schmidt on the rows of m (in place). Rows that collapse are
// replaced by a fresh random direction.
inline void orthonormalize_rows(Matrix& m, Rng& rng) {
  for (std::size_t i = 0; i < m.rows; ++i) {
    for (int attempt = 0; attempt < 4; ++attempt) {
      auto ri = m.row(i);
      for (int pass = 0; pass < 2; ++pass) {
        for (std::size_t j = 0; j < i; ++j) {
          auto rj = m.row(j);
          const double p = dot(std::span<const double>(ri), std::span<const double>(rj));
          for (std::size_t k = 0; k < m.cols; ++k) ri[k] -= p * rj[k];
        }
      }
      const double nrm = norm(std::span<const double>(ri));
      if (nrm > 1e-12) {
        for (auto& x : ri) x /= nrm;
        break;
      }
      for (auto& x : ri) x = rng.normal();
    }
  }
}

// ---------------------------------------------------------------------------
// PCA

struct PCAModel {
  DenseVector mean;
  Matrix components;  // k x d, orthonormal rows
  DenseVector eigenvalues;

  std::size_t input_dim() const { return mean.size(); }
  std::size_t output_dim() const { return components.rows; }

  bool operator==(const PCAModel&) const = default;
};

struct PCAOptions {
  // Covariance is diagonalized directly up to this dimensionality; above it
  // an implicit subspace iteration is used.
  std::size_t jacobi_max_dim = 1024;
  double tolerance = 1e-10;
  int max_sweeps = 10000;
  std::uint64_t seed = 42;
};

namespace detail {

// Flip each row so that its largest-magnitude entry (first on ties) is
// non-negative.
inline void canonical_signs(Matrix& comps) {
  for (std::size_t r = 0; r < comps.rows; ++r) {
    auto row = comps.row(r);
    std::size_t best = 0;
    for (std::size_t c = 1; c < row.size(); ++c) {
      if (std::abs(row[c]) > std::abs(row[best])) best = c;
    }
    if (row[best] < 0) {
      for (auto& x : row) x = -x;
    }
  }
}

// Top-k eigenpairs of (X^T X)/(n-1) for centered X (n x d) without forming
// the d x d covariance.
inline SymmetricEigen subspace_iteration(const Matrix& centered, std::size_t k, const PCAOptions& opt) {
  const std::size_t n = centered.rows, d = centered.cols;
  const std::size_t block = std::min(d, k + 10);
  const double denom = static_cast<double>(n - 1);
  Rng rng(opt.seed);
  Matrix q(block, d);
  for (auto& x : q.data) x = rng.normal();
  orthonormalize_rows(q, rng);

  auto apply_cov = [&](const Matrix& in) {
    // out_r = X^T (X in_r) / (n-1)
    Matrix out(in.rows, d);
    std::vector<double> xv(n);
    for (std::size_t r = 0; r < in.rows; ++r) {
      auto ir = in.row(r);
      for (std::size_t i = 0; i < n; ++i) xv[i] = dot(centered.row(i), std::span<const double>(ir));
      auto orow = out.row(r);
      for (std::size_t i = 0; i < n; ++i) {
        const auto xi = centered.row(i);
        const double w = xv[i] / denom;
        for (std::size_t c = 0; c < d; ++c) orow[c] += w * xi[c];
      }
    }
    return out;
  };

  DenseVector prev(k, std::numeric_limits<double>::infinity());
  SymmetricEigen result;
  for (int sweep = 0; sweep < opt.max_sweeps; ++sweep) {
    Matrix z = apply_cov(q);
    // Rayleigh-Ritz on the current block.
    Matrix h(block, block);
    for (std::size_t i = 0; i < block; ++i)
      for (std::size_t j = 0; j < block; ++j) h(i, j) = dot(std::as_const(q).row(i), std::as_const(z).row(j));
    for (std::size_t i = 0; i < block; ++i)
      for (std::size_t j = i + 1; j < block; ++j) h(i, j) = h(j, i) = 0.5 * (h(i, j) + h(j, i));
    auto small = jacobi_eigen(h);
    Matrix rotated(block, d);
    for (std::size_t i = 0; i < block; ++i) {
      auto out = rotated.row(i);
      for (std::size_t j = 0; j < block; ++j) {
        const double w = small.vectors(i, j);
        const auto qj = q.row(j);
        for (std::size_t c = 0; c < d; ++c) out[c] += w * qj[c];
      }
    }
    bool converged = true;
    for (std::size_t i = 0; i < k; ++i) {
      const double cur = small.values[i];
      const double ref = std::max(std::abs(cur), std::numeric_limits<double>::min());
      if (!(std::abs(cur - prev[i]) <= opt.tolerance * ref)) converged = false;
      prev[i] = cur;
    }
    result.values = small.values;
    result.vectors = rotated;
    if (converged && sweep > 0) break;
    // Next block: orthonormalized C * (Ritz vectors).
    q = apply_cov(rotated);
    orthonormalize_rows(q, rng);
  }
  orthonormalize_rows(result.vectors, rng);
  return result;
}

}  // namespace detail

// samples: n x d. Zero-variance directions get an arbitrary orthonormal
// completion.
inline PCAModel fit_pca(const Matrix& samples, std::size_t k, const PCAOptions& opt = {}) {
  const std::size_t n = samples.rows, d = samples.cols;
  if (n < 2) fail(ErrorCode::invalid_argument, "fit_pca: need at least 2 samples");
  if (k == 0 || k > std::min(d, n)) {
    fail(ErrorCode::invalid_argument, "fit_pca: k=" + std::to_string(k) + " out of range 1.." + std::to_string(std::min(d, n)));
  }
  PCAModel model;
  model.mean.assign(d, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    const auto r = samples.row(i);
    for (std::size_t c = 0; c < d; ++c) model.mean[c] += r[c];
  }
  for (auto& m : model.mean) m /= static_cast<double>(n);

  Matrix centered(n, d);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t c = 0; c < d; ++c) centered(i, c) = samples(i, c) - model.mean[c];

  SymmetricEigen eig;
  if (d <= opt.jacobi_max_dim) {
    Matrix cov(d, d);
    for (std::size_t i = 0; i < n; ++i) {
      const auto r = centered.row(i);
      for (std::size_t a = 0; a < d; ++a) {
        const double ra = r[a];
        if (ra == 0.0) continue;
        for (std::size_t b = a; b < d; ++b) cov(a, b) += ra * r[b];
      }
    }
    for (std::size_t a = 0; a < d; ++a)
      for (std::size_t b = a; b < d; ++b) {
        cov(a, b) /= static_cast<double>(n - 1);
        cov(b, a) = cov(a, b);
      }
    eig = jacobi_eigen(std::move(cov));
  } else {
    eig = detail::subspace_iteration(centered, k, opt);
  }

  model.components = Matrix(k, d);
  model.eigenvalues.resize(k);
  for (std::size_t r = 0; r < k; ++r) {
    model.eigenvalues[r] = std::max(0.0, eig.values[r]);
    for (std::size_t c = 0; c < d; ++c) model.components(r, c) = eig.vectors(r, c);
  }
  detail::canonical_signs(model.components);
  return model;
}

template <typename T>
DenseVector pca_project(const PCAModel& model, std::span<const T> v) {
  if (v.size() != model.input_dim()) {
    fail(ErrorCode::dimension_mismatch, "pca_project: expected length " + std::to_string(model.input_dim()) + ", got " + std::to_string(v.size()));
  }
  DenseVector centered(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) centered[i] = static_cast<double>(v[i]) - model.mean[i];
  return matvec(model.components, centered);
}

inline DenseVector pca_project(const PCAModel& model, const DenseVector& v) {
  return pca_project(model, std::span<const double>(v));
}

inline DenseVector pca_project(const PCAModel& model, std::span<double> v) {
  return pca_project(model, std::span<const double>(v));
}

// mean + C^T y
inline DenseVector pca_reconstruct(const PCAModel& model, std::span<const double> y) {
  if (y.size() != model.output_dim()) fail(ErrorCode::dimension_mismatch, "pca_reconstruct: bad length");
  DenseVector x = model.mean;
  for (std::size_t r = 0; r < y.size(); ++r) {
    const auto comp = model.components.row(r);
    for (std::size_t c = 0; c < x.size(); ++c) x[c] += y[r] * comp[c];
  }
  return x;
}

// "QRPC", u32 version, u32 k, u32 d, then float64 rows: mean (d),
// k component rows (d each), eigenvalues (k).
inline void save_pca(const PCAModel& model, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorCode::io, "cannot write " + path);
  bin::put_magic(out, "QRPC");
  bin::put_u32(out, 1);
  bin::put_u32(out, static_cast<std::uint32_t>(model.output_dim()));
  bin::put_u32(out, static_cast<std::uint32_t>(model.input_dim()));
  for (double x : model.mean) bin::put_f64(out, x);
  for (double x : model.components.data) bin::put_f64(out, x);
  for (double x : model.eigenvalues) bin::put_f64(out, x);
  if (!out) fail(ErrorCode::io, "write failed for " + path);
}

inline PCAModel load_pca(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::io, "cannot open " + path);
  bin::Reader r(in, path);
  r.expect_magic("QRPC");
  if (r.u32() != 1) fail(ErrorCode::corrupt, path + ": unsupported PCA version");
  const std::size_t k = r.u32(), d = r.u32();
  PCAModel m;
  m.mean.resize(d);
  for (auto& x : m.mean) x = r.f64();
  m.components = Matrix(k, d);
  for (auto& x : m.components.data) x = r.f64();
  m.eigenvalues.resize(k);
  for (auto& x : m.eigenvalues) x = r.f64();
  return m;
}

// ---------------------------------------------------------------------------
// Exact top-k cosine search

struct Neighbor {
  std::string iid;
  double score = 0.0;

  bool operator==(const Neighbor&) const = default;
};

// Descending score, ascending iid on ties.
inline bool ranks_before(const Neighbor& a, const Neighbor& b) {
  if (a.score != b.score) return a.score > b.score;
  return a.iid < b.iid;
}

// Caches row norms of a feature store for repeated queries.
class SimilarityIndex {
 public:
  explicit SimilarityIndex(const FeatureStore& store) : store_(&store), norms_(store.size()) {
    for (std::size_t r = 0; r < store.size(); ++r) norms_[r] = norm(store.row(r));
  }

  const FeatureStore& store() const { return *store_; }

  // Rows with zero norm are never returned. workers <= 1 runs inline.
  std::vector<Neighbor> top_k(const std::string& query_iid, std::size_t k, unsigned workers = 1) const {
    if (k == 0) fail(ErrorCode::invalid_argument, "top_k_similar: k must be >= 1");
    const std::size_t q = store_->row_of(query_iid);
    const double nq = norms_[q];
    if (nq == 0.0) fail(ErrorCode::invalid_argument, "top_k_similar: query image '" + query_iid + "' has a zero feature vector");
    const auto qrow = store_->row(q);
    const std::size_t n = store_->size();

    auto scan = [&](std::size_t begin, std::size_t end) {
      std::vector<Neighbor> best;
      best.reserve(k + 1);
      auto worse = [](const Neighbor& a, const Neighbor& b) { return ranks_before(a, b); };
      for (std::size_t r = begin; r < end; ++r) {
        if (r == q || norms_[r] == 0.0) continue;
        Neighbor cand{store_->id(r), dot(qrow, store_->row(r)) / (nq * norms_[r])};
        if (best.size() < k) {
          best.push_back(std::move(cand));
          std::push_heap(best.begin(), best.end(), worse);
        } else if (ranks_before(cand, best.front())) {
          std::pop_heap(best.begin(), best.end(), worse);
          best.back() = std::move(cand);
          std::push_heap(best.begin(), best.end(), worse);
        }
      }
      return best;
    };

    std::vector<Neighbor> merged;
    const unsigned w = std::max(1u, std::min<unsigned>(workers, static_cast<unsigned>(std::max<std::size_t>(1, n / 256))));
    if (w <= 1) {
      merged = scan(0, n);
    } else {
      std::vector<std::vector<Neighbor>> parts(w);
      std::vector<std::thread> threads;
      const std::size_t chunk = (n + w - 1) / w;
      for (unsigned t = 0; t < w; ++t) {
        const std::size_t b = std::min(n, t * chunk), e = std::min(n, b + chunk);
        threads.emplace_back([&, t, b, e] { parts[t] = scan(b, e); });
      }
      for (auto& th : threads) th.join();
      for (auto& p : parts) merged.insert(merged.end(), std::make_move_iterator(p.begin()), std::make_move_iterator(p.end()));
    }
    std::sort(merged.begin(), merged.end(), ranks_before);
    if (merged.size() > k) merged.resize(k);
    return merged;
  }

 private:
  const FeatureStore* store_;
  std::vector<double> norms_;
};

inline std::vector<Neighbor> top_k_similar(const std::string& query_iid, const FeatureStore& store, std::size_t k,
                                           unsigned workers = 1) {
  return SimilarityIndex(store).top_k(query_iid, k, workers);
}

}  // namespace qrel
