#pragma once

// Mini-batch SGD over a seeded batch generator.

#include <condition_variable>
#include <deque>
#include <mutex>
#include <numeric>
#include <optional>
#include <thread>
#include <type_traits>
#include <vector>

#include "qrel/models/common.hpp"
#include "qrel/rng.hpp"

namespace qrel {

struct TrainConfig {
  double learning_rate = 0.05;
  int epochs = 20;
  std::size_t batch_size = 16;
  double l2 = 0.0;
  std::uint64_t seed = 42;
  double threshold = 0.5;
  double momentum = 0.0;
  // Build the next batch on a worker thread. Batch order is unchanged.
  bool prefetch = false;
};

inline void validate(const TrainConfig& cfg) {
  if (!(cfg.learning_rate > 0)) fail(ErrorCode::invalid_argument, "learning_rate must be > 0");
  if (cfg.batch_size < 1) fail(ErrorCode::invalid_argument, "batch_size must be >= 1");
  if (cfg.l2 < 0) fail(ErrorCode::invalid_argument, "l2 must be >= 0");
  if (cfg.epochs < 0) fail(ErrorCode::invalid_argument, "epochs must be >= 0");
  if (cfg.momentum < 0 || cfg.momentum >= 1) fail(ErrorCode::invalid_argument, "momentum must be in [0, 1)");
}

struct TrainResult {
  std::vector<double> epoch_loss;
};

// Source: size() and example(i). Only the current batch (plus one prefetched
// batch) is materialized.
template <typename Source>
class BatchGenerator {
 public:
  using Example = std::remove_cvref_t<decltype(std::declval<const Source&>().example(std::size_t{0}))>;

  BatchGenerator(const Source& source, std::size_t batch_size, std::uint64_t seed)
      : source_(&source), batch_size_(batch_size), rng_(seed), order_(source.size()) {
    std::iota(order_.begin(), order_.end(), std::size_t{0});
  }

  // Shuffles for a new epoch and returns the number of batches.
  std::size_t start_epoch() {
    rng_.shuffle(std::span<std::size_t>(order_));
    cursor_ = 0;
    return (order_.size() + batch_size_ - 1) / batch_size_;
  }

  std::optional<std::vector<Example>> next() {
    if (cursor_ >= order_.size()) return std::nullopt;
    const std::size_t end = std::min(order_.size(), cursor_ + batch_size_);
    std::vector<Example> batch;
    batch.reserve(end - cursor_);
    for (; cursor_ < end; ++cursor_) batch.push_back(source_->example(order_[cursor_]));
    return batch;
  }

 private:
  const Source* source_;
  std::size_t batch_size_;
  Rng rng_;
  std::vector<std::size_t> order_;
  std::size_t cursor_ = 0;
};

// Single-producer queue holding at most `capacity` items.
template <typename T>
class BoundedQueue {
 public:
  explicit BoundedQueue(std::size_t capacity) : capacity_(capacity) {}

  void push(T item) {
    std::unique_lock lock(mu_);
    not_full_.wait(lock, [&] { return items_.size() < capacity_; });
    items_.push_back(std::move(item));
    not_empty_.notify_one();
  }

  T pop() {
    std::unique_lock lock(mu_);
    not_empty_.wait(lock, [&] { return !items_.empty(); });
    T item = std::move(items_.front());
    items_.pop_front();
    not_full_.notify_one();
    return item;
  }

 private:
  std::size_t capacity_;
  std::mutex mu_;
  std::condition_variable not_full_, not_empty_;
  std::deque<T> items_;
};

template <typename Model, typename Source>
TrainResult train(Model& model, const Source& source, const TrainConfig& cfg) {
  validate(cfg);
  if (source.size() == 0) fail(ErrorCode::invalid_argument, "train: empty dataset");
  auto params = model.params();
  std::vector<std::vector<double>> velocity;
  if (cfg.momentum > 0) {
    for (auto* p : params) velocity.emplace_back(p->size(), 0.0);
  }

  BatchGenerator<Source> gen(source, cfg.batch_size, cfg.seed);
  using Batch = std::vector<typename BatchGenerator<Source>::Example>;
  TrainResult result;

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    const std::size_t n_batches = gen.start_epoch();
    BoundedQueue<Batch> queue(2);
    std::thread producer;
    if (cfg.prefetch) {
      producer = std::thread([&] {
        for (std::size_t b = 0; b < n_batches; ++b) queue.push(*gen.next());
      });
    }
    double loss_sum = 0.0;
    std::size_t seen = 0;
    for (std::size_t b = 0; b < n_batches; ++b) {
      Batch batch = cfg.prefetch ? queue.pop() : *gen.next();
      for (auto* p : params) p->zero_grad();
      for (const auto& ex : batch) {
        check_label(ex.label);
        loss_sum += loss_and_grad(model, ex);
      }
      seen += batch.size();
      const double inv = 1.0 / static_cast<double>(batch.size());
      for (std::size_t k = 0; k < params.size(); ++k) {
        auto* p = params[k];
        if (!p->trainable) continue;
        for (std::size_t i = 0; i < p->size(); ++i) {
          double g = p->grad[i] * inv;
          if (p->decay && cfg.l2 > 0) g += cfg.l2 * p->value[i];
          if (cfg.momentum > 0) {
            velocity[k][i] = cfg.momentum * velocity[k][i] + g;
            g = velocity[k][i];
          }
          p->value[i] -= cfg.learning_rate * g;
        }
      }
    }
    if (producer.joinable()) producer.join();
    const double mean = loss_sum / static_cast<double>(seen);
    if (!std::isfinite(mean)) fail(ErrorCode::numeric, "non-finite training loss in epoch " + std::to_string(epoch));
    result.epoch_loss.push_back(mean);
  }
  for (auto* p : params) p->zero_grad();
  return result;
}

// Scores every example of a source.
template <typename Model, typename Source>
std::vector<double> score_all(const Model& model, const Source& source) {
  std::vector<double> out;
  out.reserve(source.size());
  for (std::size_t i = 0; i < source.size(); ++i) out.push_back(predict(model, source.example(i)));
  return out;
}

template <typename Source>
std::vector<int> labels_of(const Source& source) {
  std::vector<int> out;
  out.reserve(source.size());
  for (std::size_t i = 0; i < source.size(); ++i) out.push_back(source.example(i).label);
  return out;
}

// In-memory source.
template <typename Example>
struct VectorSource {
  std::vector<Example> items;
  std::size_t size() const { return items.size(); }
  const Example& example(std::size_t i) const { return items[i]; }
};

}  // namespace qrel
