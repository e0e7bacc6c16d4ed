#pragma once

// On-disk data: question streams, image annotations, dense feature
// stores and dataset manifests.

#include <cstdint>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <tuple>
#include <unordered_map>
#include <vector>

#include "json.hpp"
#include "qrel/binary_io.hpp"
#include "qrel/error.hpp"

namespace qrel {

using json = nlohmann::json;

struct QuestionRecord {
  std::string qid;
  std::string text;
  std::vector<std::string> tokens;
  std::optional<std::vector<std::string>> pos_tags;
  // Image the question was asked about, when the stream carries it.
  std::optional<std::string> iid;
  // Visual / non-visual label for the visualness task, when known.
  std::optional<bool> visual;

  bool operator==(const QuestionRecord&) const = default;
};

inline void validate(const QuestionRecord& q) {
  if (q.qid.empty()) fail(ErrorCode::invalid_argument, "question with empty qid");
  if (q.tokens.empty()) fail(ErrorCode::invalid_argument, "question " + q.qid + " has no tokens");
  if (q.pos_tags && q.pos_tags->size() != q.tokens.size()) {
    fail(ErrorCode::invalid_argument, "question " + q.qid + ": " + std::to_string(q.tokens.size()) +
                                          " tokens but " + std::to_string(q.pos_tags->size()) + " pos tags");
  }
}

inline json to_json(const QuestionRecord& q) {
  json j;
  j["qid"] = q.qid;
  j["text"] = q.text;
  j["tokens"] = q.tokens;
  if (q.pos_tags) j["pos_tags"] = *q.pos_tags;
  if (q.iid) j["iid"] = *q.iid;
  if (q.visual) j["visual"] = *q.visual;
  return j;
}

inline QuestionRecord question_from_json(const json& j) {
  QuestionRecord q;
  q.qid = j.at("qid").get<std::string>();
  q.text = j.value("text", std::string{});
  q.tokens = j.at("tokens").get<std::vector<std::string>>();
  if (j.contains("pos_tags") && !j["pos_tags"].is_null()) {
    q.pos_tags = j["pos_tags"].get<std::vector<std::string>>();
  }
  if (j.contains("iid") && !j["iid"].is_null()) q.iid = j["iid"].get<std::string>();
  if (j.contains("visual") && !j["visual"].is_null()) q.visual = j["visual"].get<bool>();
  validate(q);
  return q;
}

namespace detail {

inline std::ifstream open_text(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::io, "cannot open " + path);
  return in;
}

inline bool blank(const std::string& line) {
  return line.find_first_not_of(" \t\r\n") == std::string::npos;
}

// Parses one JSON Lines record, attaching file and line to any failure.
template <typename Fn>
auto parse_jsonl_line(const std::string& path, std::size_t line_no, const std::string& line, Fn&& convert) {
  try {
    return convert(json::parse(line));
  } catch (const json::exception& e) {
    fail(ErrorCode::parse, path + ":" + std::to_string(line_no) + ": " + e.what());
  } catch (const Error& e) {
    fail(ErrorCode::parse, path + ":" + std::to_string(line_no) + ": " + e.what());
  }
}

}  // namespace detail

// Reads questions.jsonl one record at a time; memory is bounded by the
// longest line.
class QuestionStream {
 public:
  explicit QuestionStream(std::string path) : path_(std::move(path)), in_(detail::open_text(path_)) {}

  std::optional<QuestionRecord> next() {
    while (std::getline(in_, line_)) {
      ++line_no_;
      if (detail::blank(line_)) continue;
      return detail::parse_jsonl_line(path_, line_no_, line_, question_from_json);
    }
    return std::nullopt;
  }

  std::size_t line_number() const { return line_no_; }

 private:
  std::string path_;
  std::ifstream in_;
  std::string line_;
  std::size_t line_no_ = 0;
};

inline std::vector<QuestionRecord> read_questions(const std::string& path) {
  QuestionStream stream(path);
  std::vector<QuestionRecord> out;
  while (auto q = stream.next()) out.push_back(std::move(*q));
  return out;
}

inline void write_questions(const std::string& path, std::span<const QuestionRecord> questions) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorCode::io, "cannot write " + path);
  for (const auto& q : questions) out << to_json(q).dump() << '\n';
}

struct ImageAnnotation {
  std::string iid;
  std::set<std::string> objects;
  std::map<std::string, std::set<std::string>> scene_graph;

  bool operator==(const ImageAnnotation&) const = default;
};

inline void validate(const ImageAnnotation& a) {
  if (a.iid.empty()) fail(ErrorCode::invalid_argument, "annotation with empty iid");
  for (const auto& [obj, attrs] : a.scene_graph) {
    if (!a.objects.contains(obj)) {
      fail(ErrorCode::invalid_argument, "annotation " + a.iid + ": scene graph object '" + obj + "' not in objects");
    }
  }
}

inline json to_json(const ImageAnnotation& a) {
  json j;
  j["iid"] = a.iid;
  j["objects"] = a.objects;
  j["scene_graph"] = json::object();
  for (const auto& [obj, attrs] : a.scene_graph) j["scene_graph"][obj] = attrs;
  return j;
}

inline ImageAnnotation annotation_from_json(const json& j) {
  ImageAnnotation a;
  a.iid = j.at("iid").get<std::string>();
  a.objects = j.at("objects").get<std::set<std::string>>();
  if (j.contains("scene_graph")) {
    for (const auto& [obj, attrs] : j["scene_graph"].items()) {
      a.scene_graph[obj] = attrs.get<std::set<std::string>>();
    }
  }
  validate(a);
  return a;
}

using AnnotationMap = std::map<std::string, ImageAnnotation>;

inline AnnotationMap read_annotations(const std::string& path) {
  auto in = detail::open_text(path);
  AnnotationMap out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (detail::blank(line)) continue;
    auto a = detail::parse_jsonl_line(path, line_no, line, annotation_from_json);
    auto iid = a.iid;
    if (!out.emplace(iid, std::move(a)).second) {
      fail(ErrorCode::duplicate, path + ":" + std::to_string(line_no) + ": duplicate iid " + iid);
    }
  }
  return out;
}

inline void write_annotations(const std::string& path, const AnnotationMap& annotations) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorCode::io, "cannot write " + path);
  for (const auto& [iid, a] : annotations) out << to_json(a).dump() << '\n';
}

// ---------------------------------------------------------------------------
// Feature store: "QRFS", u32 version, u32 count, u32 dim, count x (u16 len +
// UTF-8 iid), then count x dim float32 row-major. All integers little-endian.

inline constexpr std::uint32_t kFeatureStoreVersion = 1;

class FeatureStore {
 public:
  FeatureStore() = default;

  FeatureStore(std::uint32_t dim, std::vector<std::string> ids, std::vector<float> data)
      : dim_(dim), ids_(std::move(ids)), data_(std::move(data)) {
    if (data_.size() != ids_.size() * static_cast<std::size_t>(dim_)) {
      fail(ErrorCode::dimension_mismatch, "feature matrix size does not match count x dim");
    }
    build_index();
  }

  static FeatureStore open(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail(ErrorCode::io, "cannot open feature store " + path);
    bin::Reader r(in, path);
    r.expect_magic("QRFS");
    const auto version = r.u32();
    if (version != kFeatureStoreVersion) {
      fail(ErrorCode::corrupt, path + ": unsupported feature store version " + std::to_string(version));
    }
    FeatureStore fs;
    const auto count = r.u32();
    fs.dim_ = r.u32();
    fs.ids_.reserve(count);
    for (std::uint32_t i = 0; i < count; ++i) fs.ids_.push_back(r.str16());
    fs.data_.resize(static_cast<std::size_t>(count) * fs.dim_);
    for (auto& v : fs.data_) v = r.f32();
    fs.build_index();
    return fs;
  }

  void save(const std::string& path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) fail(ErrorCode::io, "cannot write feature store " + path);
    bin::put_magic(out, "QRFS");
    bin::put_u32(out, kFeatureStoreVersion);
    bin::put_u32(out, static_cast<std::uint32_t>(ids_.size()));
    bin::put_u32(out, dim_);
    for (const auto& id : ids_) bin::put_str16(out, id);
    for (float v : data_) bin::put_f32(out, v);
    if (!out) fail(ErrorCode::io, "write failed for " + path);
  }

  std::uint32_t dim() const { return dim_; }
  std::size_t size() const { return ids_.size(); }
  const std::vector<std::string>& ids() const { return ids_; }
  const std::string& id(std::size_t row) const { return ids_.at(row); }

  std::optional<std::size_t> find(const std::string& iid) const {
    auto it = index_.find(iid);
    if (it == index_.end()) return std::nullopt;
    return it->second;
  }

  bool contains(const std::string& iid) const { return index_.contains(iid); }

  std::size_t row_of(const std::string& iid) const {
    auto row = find(iid);
    if (!row) fail(ErrorCode::not_found, "image '" + iid + "' not in feature store");
    return *row;
  }

  std::span<const float> row(std::size_t r) const {
    return {data_.data() + r * dim_, dim_};
  }

  std::span<const float> row(const std::string& iid) const { return row(row_of(iid)); }

  std::vector<double> row_as_double(const std::string& iid) const {
    auto r = row(iid);
    return {r.begin(), r.end()};
  }

 private:
  void build_index() {
    index_.clear();
    index_.reserve(ids_.size());
    for (std::size_t i = 0; i < ids_.size(); ++i) {
      if (ids_[i].empty()) fail(ErrorCode::corrupt, "feature store contains an empty iid");
      if (!index_.emplace(ids_[i], i).second) {
        fail(ErrorCode::duplicate, "feature store contains duplicate iid '" + ids_[i] + "'");
      }
    }
  }

  std::uint32_t dim_ = 0;
  std::vector<std::string> ids_;
  std::vector<float> data_;
  std::unordered_map<std::string, std::size_t> index_;
};

inline FeatureStore open_feature_store(const std::string& path) { return FeatureStore::open(path); }

// ---------------------------------------------------------------------------
// Labeled pairs and manifests.

enum class Label { relevant, irrelevant };
enum class PremiseOrder { first, second, positive };

inline const char* to_string(Label l) { return l == Label::relevant ? "relevant" : "irrelevant"; }

inline const char* to_string(PremiseOrder o) {
  switch (o) {
    case PremiseOrder::first: return "first";
    case PremiseOrder::second: return "second";
    case PremiseOrder::positive: return "positive";
  }
  return "?";
}

inline Label label_from_string(const std::string& s) {
  if (s == "relevant") return Label::relevant;
  if (s == "irrelevant") return Label::irrelevant;
  fail(ErrorCode::parse, "unknown label '" + s + "'");
}

inline PremiseOrder order_from_string(const std::string& s) {
  if (s == "first") return PremiseOrder::first;
  if (s == "second") return PremiseOrder::second;
  if (s == "positive") return PremiseOrder::positive;
  fail(ErrorCode::parse, "unknown premise order '" + s + "'");
}

struct LabeledPair {
  std::string qid;
  std::string iid;
  Label label = Label::relevant;
  PremiseOrder order = PremiseOrder::positive;
  std::vector<std::string> falsified;
  // Which premise orders the question carries. Used to attribute positives
  // to the per-order rows of the statistics table.
  bool has_first_order = false;
  bool has_second_order = false;

  bool operator==(const LabeledPair&) const = default;

  auto key() const { return std::tie(qid, iid); }
};

inline void validate(const LabeledPair& p) {
  if (p.qid.empty() || p.iid.empty()) fail(ErrorCode::invalid_argument, "pair with empty qid or iid");
  if (p.label == Label::irrelevant) {
    if (p.falsified.empty()) fail(ErrorCode::invalid_argument, "irrelevant pair (" + p.qid + ", " + p.iid + ") without falsified premises");
    if (p.order == PremiseOrder::positive) fail(ErrorCode::invalid_argument, "irrelevant pair (" + p.qid + ", " + p.iid + ") with order 'positive'");
  } else {
    if (p.order != PremiseOrder::positive || !p.falsified.empty()) {
      fail(ErrorCode::invalid_argument, "relevant pair (" + p.qid + ", " + p.iid + ") must have order 'positive' and no falsified premises");
    }
  }
}

inline json to_json(const LabeledPair& p) {
  json j;
  j["qid"] = p.qid;
  j["iid"] = p.iid;
  j["label"] = to_string(p.label);
  j["order"] = to_string(p.order);
  j["falsified"] = p.falsified;
  j["has_first"] = p.has_first_order;
  j["has_second"] = p.has_second_order;
  return j;
}

inline LabeledPair pair_from_json(const json& j) {
  LabeledPair p;
  p.qid = j.at("qid").get<std::string>();
  p.iid = j.at("iid").get<std::string>();
  p.label = label_from_string(j.at("label").get<std::string>());
  p.order = order_from_string(j.at("order").get<std::string>());
  p.falsified = j.value("falsified", std::vector<std::string>{});
  p.has_first_order = j.value("has_first", false);
  p.has_second_order = j.value("has_second", false);
  validate(p);
  return p;
}

struct DatasetStats {
  std::uint64_t total = 0;
  std::uint64_t relevant = 0;
  std::uint64_t non_relevant = 0;
  std::uint64_t first_order_total = 0;
  std::uint64_t first_order_relevant = 0;
  std::uint64_t first_order_non_relevant = 0;
  std::uint64_t second_order_total = 0;
  std::uint64_t second_order_relevant = 0;
  std::uint64_t second_order_non_relevant = 0;

  bool operator==(const DatasetStats&) const = default;
};

// A positive pair counts toward an order's row iff its question carries at
// least one premise of that order; a negative counts toward its own order.
inline DatasetStats compute_stats(std::span<const LabeledPair> pairs) {
  DatasetStats s;
  for (const auto& p : pairs) {
    ++s.total;
    if (p.label == Label::relevant) {
      ++s.relevant;
      if (p.has_first_order) ++s.first_order_relevant;
      if (p.has_second_order) ++s.second_order_relevant;
    } else {
      ++s.non_relevant;
      if (p.order == PremiseOrder::first) ++s.first_order_non_relevant;
      if (p.order == PremiseOrder::second) ++s.second_order_non_relevant;
    }
  }
  s.first_order_total = s.first_order_relevant + s.first_order_non_relevant;
  s.second_order_total = s.second_order_relevant + s.second_order_non_relevant;
  return s;
}

inline json to_json(const DatasetStats& s) {
  return json{{"total", s.total},
              {"relevant", s.relevant},
              {"non_relevant", s.non_relevant},
              {"first_order_total", s.first_order_total},
              {"first_order_relevant", s.first_order_relevant},
              {"first_order_non_relevant", s.first_order_non_relevant},
              {"second_order_total", s.second_order_total},
              {"second_order_relevant", s.second_order_relevant},
              {"second_order_non_relevant", s.second_order_non_relevant}};
}

inline DatasetStats stats_from_json(const json& j) {
  DatasetStats s;
  s.total = j.at("total").get<std::uint64_t>();
  s.relevant = j.at("relevant").get<std::uint64_t>();
  s.non_relevant = j.at("non_relevant").get<std::uint64_t>();
  s.first_order_total = j.at("first_order_total").get<std::uint64_t>();
  s.first_order_relevant = j.at("first_order_relevant").get<std::uint64_t>();
  s.first_order_non_relevant = j.at("first_order_non_relevant").get<std::uint64_t>();
  s.second_order_total = j.at("second_order_total").get<std::uint64_t>();
  s.second_order_relevant = j.at("second_order_relevant").get<std::uint64_t>();
  s.second_order_non_relevant = j.at("second_order_non_relevant").get<std::uint64_t>();
  return s;
}

struct DatasetManifest {
  std::vector<LabeledPair> pairs;
  DatasetStats stats;

  bool operator==(const DatasetManifest&) const = default;

  static DatasetManifest from_pairs(std::vector<LabeledPair> pairs) {
    DatasetManifest m;
    m.pairs = std::move(pairs);
    m.stats = compute_stats(m.pairs);
    return m;
  }
};

inline void validate(const DatasetManifest& m) {
  std::set<std::pair<std::string, std::string>> seen;
  for (const auto& p : m.pairs) {
    validate(p);
    if (!seen.emplace(p.qid, p.iid).second) {
      fail(ErrorCode::duplicate, "duplicate pair (" + p.qid + ", " + p.iid + ")");
    }
  }
  if (compute_stats(m.pairs) != m.stats) fail(ErrorCode::corrupt, "manifest stats do not match its pairs");
}

inline void write_manifest(const DatasetManifest& m, const std::string& path) {
  validate(m);
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorCode::io, "cannot write " + path);
  out << json{{"stats", to_json(m.stats)}}.dump() << '\n';
  for (const auto& p : m.pairs) out << to_json(p).dump() << '\n';
  if (!out) fail(ErrorCode::io, "write failed for " + path);
}

inline DatasetManifest read_manifest(const std::string& path) {
  auto in = detail::open_text(path);
  DatasetManifest m;
  std::string line;
  std::size_t line_no = 0;
  bool have_header = false;
  while (std::getline(in, line)) {
    ++line_no;
    if (detail::blank(line)) continue;
    if (!have_header) {
      m.stats = detail::parse_jsonl_line(path, line_no, line, [](const json& j) { return stats_from_json(j.at("stats")); });
      have_header = true;
      continue;
    }
    m.pairs.push_back(detail::parse_jsonl_line(path, line_no, line, pair_from_json));
  }
  if (!have_header) fail(ErrorCode::corrupt, path + ": missing stats header");
  std::set<std::pair<std::string, std::string>> seen;
  for (const auto& p : m.pairs) {
    if (!seen.emplace(p.qid, p.iid).second) {
      fail(ErrorCode::corrupt, path + ": duplicate pair (" + p.qid + ", " + p.iid + ")");
    }
  }
  if (compute_stats(m.pairs) != m.stats) fail(ErrorCode::corrupt, path + ": stats header does not match pairs");
  return m;
}

}  // namespace qrel
