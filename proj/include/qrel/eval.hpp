#pragma once

#include <algorithm>
#include <cstdint>
#include <iomanip>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "qrel/error.hpp"

namespace qrel {

// Positive class = relevant (or visual, for the visualness task).
struct ConfusionMatrix {
  std::uint64_t tp = 0, fp = 0, tn = 0, fn = 0;

  std::uint64_t total() const { return tp + fp + tn + fn; }

  ConfusionMatrix& operator+=(const ConfusionMatrix& o) {
    tp += o.tp;
    fp += o.fp;
    tn += o.tn;
    fn += o.fn;
    return *this;
  }

  bool operator==(const ConfusionMatrix&) const = default;
};

// Ties at the threshold are predicted positive.
inline ConfusionMatrix confusion(std::span<const double> scores, std::span<const int> labels, double threshold = 0.5) {
  if (scores.size() != labels.size()) {
    fail(ErrorCode::dimension_mismatch, "confusion: " + std::to_string(scores.size()) + " scores vs " + std::to_string(labels.size()) + " labels");
  }
  ConfusionMatrix cm;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (labels[i] != 0 && labels[i] != 1) fail(ErrorCode::invalid_argument, "confusion: non-binary label");
    const bool pred = scores[i] >= threshold;
    if (labels[i] == 1) {
      pred ? ++cm.tp : ++cm.fn;
    } else {
      pred ? ++cm.fp : ++cm.tn;
    }
  }
  return cm;
}

// 0/0 ratios are absent rather than zero.
struct PerClassMetrics {
  std::optional<double> precision_pos, recall_pos, precision_neg, recall_neg, normalized_accuracy;
};

inline std::optional<double> ratio(std::uint64_t num, std::uint64_t den) {
  if (den == 0) return std::nullopt;
  return static_cast<double>(num) / static_cast<double>(den);
}

inline PerClassMetrics per_class_metrics(const ConfusionMatrix& cm) {
  PerClassMetrics m;
  m.precision_pos = ratio(cm.tp, cm.tp + cm.fp);
  m.recall_pos = ratio(cm.tp, cm.tp + cm.fn);
  m.precision_neg = ratio(cm.tn, cm.tn + cm.fn);
  m.recall_neg = ratio(cm.tn, cm.tn + cm.fp);
  if (m.recall_pos && m.recall_neg) m.normalized_accuracy = (*m.recall_pos + *m.recall_neg) / 2.0;
  return m;
}

inline double accuracy(const ConfusionMatrix& cm) {
  if (cm.total() == 0) fail(ErrorCode::invalid_argument, "accuracy: empty confusion matrix");
  return static_cast<double>(cm.tp + cm.tn) / static_cast<double>(cm.total());
}

inline nlohmann::json to_json(const ConfusionMatrix& cm) {
  return {{"tp", cm.tp}, {"fp", cm.fp}, {"tn", cm.tn}, {"fn", cm.fn}};
}

inline ConfusionMatrix confusion_from_json(const nlohmann::json& j) {
  return {j.at("tp").get<std::uint64_t>(), j.at("fp").get<std::uint64_t>(), j.at("tn").get<std::uint64_t>(),
          j.at("fn").get<std::uint64_t>()};
}

struct NamedResult {
  std::string model;
  std::string dataset;
  ConfusionMatrix cm;
};

inline std::string format_metric(const std::optional<double>& v) {
  if (!v) return "—";
  std::ostringstream os;
  os << std::fixed << std::setprecision(4) << *v;
  return os.str();
}

// Column-aligned table, rows sorted by model then dataset. Reports both plain
// and class-normalized accuracy.
inline std::string report(std::vector<NamedResult> results) {
  if (results.empty()) fail(ErrorCode::invalid_argument, "report: no results");
  std::stable_sort(results.begin(), results.end(), [](const NamedResult& a, const NamedResult& b) {
    return std::tie(a.model, a.dataset) < std::tie(b.model, b.dataset);
  });
  const std::vector<std::string> header{"model", "dataset", "n", "prec+", "rec+", "prec-", "rec-", "norm_acc", "accuracy"};
  std::vector<std::vector<std::string>> rows;
  for (const auto& r : results) {
    const auto m = per_class_metrics(r.cm);
    std::optional<double> acc;
    if (r.cm.total() > 0) acc = accuracy(r.cm);
    rows.push_back({r.model, r.dataset, std::to_string(r.cm.total()), format_metric(m.precision_pos), format_metric(m.recall_pos),
                    format_metric(m.precision_neg), format_metric(m.recall_neg), format_metric(m.normalized_accuracy),
                    format_metric(acc)});
  }
  // Display width; the em-dash is one column but three bytes.
  auto width = [](const std::string& s) {
    std::size_t w = 0;
    for (unsigned char c : s) w += (c & 0xC0) != 0x80;
    return w;
  };
  std::vector<std::size_t> widths(header.size());
  for (std::size_t c = 0; c < header.size(); ++c) {
    widths[c] = width(header[c]);
    for (const auto& row : rows) widths[c] = std::max(widths[c], width(row[c]));
  }
  std::ostringstream os;
  auto emit = [&](const std::vector<std::string>& row) {
    for (std::size_t c = 0; c < row.size(); ++c) {
      const std::string pad(widths[c] - width(row[c]), ' ');
      if (c < 2) {
        os << row[c] << pad;
      } else {
        os << pad << row[c];
      }
      os << (c + 1 < row.size() ? "  " : "\n");
    }
  };
  emit(header);
  for (const auto& row : rows) emit(row);
  return os.str();
}

inline nlohmann::json report_json(std::vector<NamedResult> results) {
  std::stable_sort(results.begin(), results.end(), [](const NamedResult& a, const NamedResult& b) {
    return std::tie(a.model, a.dataset) < std::tie(b.model, b.dataset);
  });
  auto opt = [](const std::optional<double>& v) { return v ? nlohmann::json(*v) : nlohmann::json(nullptr); };
  nlohmann::json out = nlohmann::json::array();
  for (const auto& r : results) {
    const auto m = per_class_metrics(r.cm);
    out.push_back({{"model", r.model},
                   {"dataset", r.dataset},
                   {"confusion", to_json(r.cm)},
                   {"precision_pos", opt(m.precision_pos)},
                   {"recall_pos", opt(m.recall_pos)},
                   {"precision_neg", opt(m.precision_neg)},
                   {"recall_neg", opt(m.recall_neg)},
                   {"normalized_accuracy", opt(m.normalized_accuracy)},
                   {"accuracy", r.cm.total() ? nlohmann::json(accuracy(r.cm)) : nlohmann::json(nullptr)}});
  }
  return out;
}

}  // namespace qrel
