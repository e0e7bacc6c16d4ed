// qrel: command-line front end for the relevance pipeline.
//
// Every subcommand writes its artifacts under --output-dir together with a
// <command>.run.json manifest (options with defaults, seed, input and output
// digests). Exit codes: 0 ok, 2 config error, 3 data error, 4 numeric failure.

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <iostream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "qrel/qrel.hpp"

namespace fs = std::filesystem;
using json = nlohmann::json;
using namespace qrel;

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitData = 3;
constexpr int kExitNumeric = 4;

const std::vector<std::string> kModelKinds{"lr-visual", "lstm-visual", "lr-premise", "mlp", "relnet1", "relnet2", "relnet3", "relnet4"};

// JSON config: top-level keys set global options, nested objects hold a
// subcommand's options ({"build-dataset": {"k-similar": 3}}).
class JsonConfig : public CLI::Config {
 public:
  std::string to_config(const CLI::App*, bool, bool, std::string) const override { return "{}"; }

  std::vector<CLI::ConfigItem> from_config(std::istream& in) const override {
    json j;
    try {
      in >> j;
    } catch (const json::exception& e) {
      throw CLI::ConversionError(std::string("config file is not valid JSON: ") + e.what());
    }
    if (!j.is_object()) throw CLI::ConversionError("config file must hold a JSON object");
    std::vector<CLI::ConfigItem> items;
    collect(j, {}, items);
    return items;
  }

 private:
  static std::string scalar(const json& v) {
    if (v.is_string()) return v.get<std::string>();
    if (v.is_boolean()) return v.get<bool>() ? "true" : "false";
    return v.dump();
  }

  static void collect(const json& obj, const std::vector<std::string>& parents, std::vector<CLI::ConfigItem>& items) {
    for (const auto& [key, value] : obj.items()) {
      if (value.is_object()) {
        auto nested = parents;
        nested.push_back(key);
        collect(value, nested, items);
        continue;
      }
      CLI::ConfigItem item;
      item.parents = parents;
      item.name = key;
      if (value.is_array()) {
        for (const auto& e : value) item.inputs.push_back(scalar(e));
      } else {
        item.inputs.push_back(scalar(value));
      }
      items.push_back(std::move(item));
    }
  }
};

std::string hex64(std::uint64_t v) {
  std::ostringstream os;
  os << std::hex << std::setw(16) << std::setfill('0') << v;
  return os.str();
}

std::uint64_t file_digest(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::io, "cannot read " + path);
  std::uint64_t h = kFnvOffsetBasis;
  std::vector<char> buf(1 << 16);
  while (in) {
    in.read(buf.data(), static_cast<std::streamsize>(buf.size()));
    h = fnv1a64(std::string_view(buf.data(), static_cast<std::size_t>(in.gcount())), h);
  }
  return h;
}

// Options shared by every subcommand plus bookkeeping for the run manifest.
struct Common {
  std::string output_dir = "qrel-out";
  unsigned workers = std::max(1u, std::thread::hardware_concurrency());
  std::uint64_t seed = 42;
  std::vector<std::pair<std::string, std::string*>> inputs;
  std::vector<std::string> outputs;

  std::string out(const std::string& name) {
    fs::create_directories(output_dir);
    const auto path = (fs::path(output_dir) / name).string();
    outputs.push_back(path);
    return path;
  }
};

class Cli {
 public:
  Cli() : app_("Question relevance pipeline: dataset mining, feature extraction, training and evaluation.", "qrel") {
    app_.option_defaults()->always_capture_default();
    app_.require_subcommand(1);
    app_.config_formatter(std::make_shared<JsonConfig>());
    app_.set_config("--config", "", "JSON config file; command-line flags override it");
    app_.allow_config_extras(CLI::config_extras_mode::error);
    add_tag();
    add_featurize();
    add_pca();
    add_mine();
    add_build_dataset();
    add_train();
    add_evaluate();
    add_predict();
    add_export();
    add_stats();
  }

  int run(int argc, char** argv) {
    try {
      app_.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
      return app_.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
      return app_.exit(e);
    } catch (const CLI::ParseError& e) {
      app_.exit(e);
      return kExitConfig;
    }
    try {
      for (auto* sub : app_.get_subcommands()) {
        check_inputs();
        actions_.at(sub)();
        write_run_manifest(sub);
      }
      return 0;
    } catch (const Error& e) {
      std::cerr << "qrel: error: " << e.what() << '\n';
      switch (e.code()) {
        case ErrorCode::invalid_argument:
          return kExitConfig;
        case ErrorCode::numeric:
          return kExitNumeric;
        default:
          return kExitData;
      }
    } catch (const json::exception& e) {
      std::cerr << "qrel: error: malformed JSON: " << e.what() << '\n';
      return kExitData;
    } catch (const std::filesystem::filesystem_error& e) {
      std::cerr << "qrel: error: " << e.what() << '\n';
      return kExitData;
    }
  }

 private:
  CLI::App app_;
  Common c_;
  std::map<CLI::App*, std::function<void()>> actions_;

  // -------------------------------------------------------------------------
  // Option helpers

  CLI::App* command(const std::string& name, const std::string& desc, std::function<void()> action) {
    auto* sub = app_.add_subcommand(name, desc);
    sub->add_option("--output-dir", c_.output_dir, "Directory for artifacts")->envname("QREL_OUTPUT_DIR");
    sub->add_option("--workers", c_.workers, "Worker threads (results do not depend on it)")
        ->envname("QREL_WORKERS")
        ->check(CLI::PositiveNumber);
    sub->add_option("--seed", c_.seed, "Random seed");
    actions_[sub] = std::move(action);
    return sub;
  }

  CLI::Option* input(CLI::App* sub, const std::string& flag, std::string& var, const std::string& desc, bool required = true) {
    c_.inputs.emplace_back(flag, &var);
    auto* opt = sub->add_option(flag, var, desc);
    if (required) opt->required();
    return opt;
  }

  void check_inputs() {
    for (const auto& [flag, path] : c_.inputs) {
      if (!path->empty() && !fs::exists(*path)) fail(ErrorCode::io, "input file not found: " + *path + " (" + flag + ")");
    }
  }

  void write_run_manifest(CLI::App* sub) {
    json opts = json::object();
    for (const auto* opt : sub->get_options()) {
      if (opt->get_name() == "--help" || opt->get_single_name().empty()) continue;
      const auto& res = opt->results();
      std::string value;
      if (!res.empty()) {
        for (std::size_t i = 0; i < res.size(); ++i) value += (i ? "," : "") + res[i];
      } else {
        value = opt->get_default_str();
      }
      opts[opt->get_single_name()] = value;
    }
    json inputs = json::object();
    for (const auto& [flag, path] : c_.inputs) {
      if (!path->empty() && sub->get_option_no_throw(flag) != nullptr) {
        inputs[flag.substr(2)] = {{"path", *path}, {"fnv1a64", hex64(file_digest(*path))}};
      }
    }
    json outputs = json::object();
    for (const auto& path : c_.outputs) outputs[fs::path(path).filename().string()] = hex64(file_digest(path));
    json manifest{{"command", sub->get_name()}, {"options", opts}, {"seed", c_.seed}, {"inputs", inputs}, {"outputs", outputs}};
    fs::create_directories(c_.output_dir);
    std::ofstream out(fs::path(c_.output_dir) / (sub->get_name() + ".run.json"));
    out << manifest.dump(2) << '\n';
  }

  // -------------------------------------------------------------------------
  // Shared state for the data-handling subcommands

  struct Paths {
    std::string questions, annotations, features, vocab, antonyms, embeddings, lexicon, manifest, pca, model;
  } p_;

  std::size_t embed_dim_ = 300;
  std::size_t pca_k_ = 300;
  int n_max_ = 2;
  std::uint32_t hash_dim_ = kDefaultHashDim;

  void add_embeddings(CLI::App* sub, bool required) {
    input(sub, "--embeddings", p_.embeddings, "Word vectors: token followed by values per line", required);
    sub->add_option("--embed-dim", embed_dim_, "Word-vector dimension")->check(CLI::PositiveNumber);
  }

  void add_pca_source(CLI::App* sub) {
    input(sub, "--pca", p_.pca, "Fitted PCA file; when absent PCA is fitted on the feature store", false);
    sub->add_option("--pca-k", pca_k_, "Components when fitting PCA here")->check(CLI::PositiveNumber);
  }

  void add_hashing(CLI::App* sub) {
    sub->add_option("--n-max", n_max_, "Longest POS n-gram (1-3)")->check(CLI::Range(1, 3));
    sub->add_option("--hash-dim", hash_dim_, "Hashed feature dimension")->check(CLI::PositiveNumber);
  }

  EmbeddingTable embeddings() const { return load_embeddings(p_.embeddings, embed_dim_); }

  static PCAModel fit_store_pca(const FeatureStore& store, std::size_t k) {
    Matrix samples(store.size(), store.dim());
    for (std::size_t r = 0; r < store.size(); ++r) {
      auto row = store.row(r);
      std::copy(row.begin(), row.end(), samples.row(r).begin());
    }
    return fit_pca(samples, k);
  }

  PCAModel pca_for(const FeatureStore& store) const {
    if (!p_.pca.empty()) {
      auto pca = load_pca(p_.pca);
      if (pca.input_dim() != store.dim()) {
        fail(ErrorCode::dimension_mismatch, "PCA input dim " + std::to_string(pca.input_dim()) + " != feature dim " + std::to_string(store.dim()));
      }
      return pca;
    }
    return fit_store_pca(store, pca_k_);
  }

  std::vector<std::string> tags_for(const QuestionRecord& q, const TagLexicon* lex) const {
    if (q.pos_tags) return *q.pos_tags;
    if (lex) return lexicon_tag(q.tokens, *lex);
    fail(ErrorCode::parse, "question " + q.qid + " has no pos_tags; pass --lexicon to tag it");
  }

  std::optional<TagLexicon> lexicon() const {
    if (p_.lexicon.empty()) return std::nullopt;
    return load_lexicon(p_.lexicon);
  }

  // -------------------------------------------------------------------------
  // tag

  std::string default_tag_ = "NN";
  bool overwrite_tags_ = false;

  void add_tag() {
    auto* sub = command("tag", "Fill in POS tags from a token/tag lexicon", [this] { run_tag(); });
    input(sub, "--questions", p_.questions, "Questions (JSONL)");
    input(sub, "--lexicon", p_.lexicon, "Lexicon: token<TAB>tag per line");
    sub->add_option("--default-tag", default_tag_, "Tag for tokens missing from the lexicon");
    sub->add_flag("--overwrite", overwrite_tags_, "Replace tags that are already present");
  }

  void run_tag() {
    const auto lex = load_lexicon(p_.lexicon, default_tag_);
    QuestionStream in(p_.questions);
    std::ofstream out(c_.out("tagged.jsonl"));
    std::size_t n = 0;
    while (auto q = in.next()) {
      if (!q->pos_tags || overwrite_tags_) q->pos_tags = lexicon_tag(q->tokens, lex);
      out << to_json(*q).dump() << '\n';
      ++n;
    }
    std::cout << "tagged " << n << " questions\n";
  }

  // -------------------------------------------------------------------------
  // featurize

  void add_featurize() {
    auto* sub = command("featurize", "Hashed POS n-gram features per question", [this] { run_featurize(); });
    input(sub, "--questions", p_.questions, "Questions (JSONL)");
    input(sub, "--lexicon", p_.lexicon, "Lexicon for questions without tags", false);
    add_hashing(sub);
  }

  void run_featurize() {
    const auto lex = lexicon();
    QuestionStream in(p_.questions);
    std::ofstream out(c_.out("featurized.jsonl"));
    std::size_t n = 0;
    while (auto q = in.next()) {
      const auto f = pos_ngrams(tags_for(*q, lex ? &*lex : nullptr), n_max_, hash_dim_);
      json row{{"qid", q->qid}, {"dim", f.dim}};
      json entries = json::array();
      for (const auto& [i, v] : f.entries) entries.push_back({i, v});
      row["features"] = entries;
      if (q->visual) row["visual"] = *q->visual;
      out << row.dump() << '\n';
      ++n;
    }
    std::cout << "featurized " << n << " questions into " << hash_dim_ << " hashed dims\n";
  }

  // -------------------------------------------------------------------------
  // pca

  void add_pca() {
    auto* sub = command("pca", "Fit PCA on an image feature store", [this] { run_pca(); });
    input(sub, "--features", p_.features, "Image feature store (QRFS)");
    sub->add_option("--k", pca_k_, "Number of components")->check(CLI::PositiveNumber);
  }

  void run_pca() {
    const auto store = open_feature_store(p_.features);
    PCAOptions opt;
    opt.seed = c_.seed;
    Matrix samples(store.size(), store.dim());
    for (std::size_t r = 0; r < store.size(); ++r) {
      auto row = store.row(r);
      std::copy(row.begin(), row.end(), samples.row(r).begin());
    }
    const auto model = fit_pca(samples, pca_k_, opt);
    save_pca(model, c_.out("pca.bin"));
    double total = 0;
    for (double v : model.eigenvalues) total += v;
    std::cout << "fitted " << pca_k_ << " components on " << store.size() << " x " << store.dim() << "; leading eigenvalue "
              << model.eigenvalues.front() << ", retained variance " << total << '\n';
  }

  // -------------------------------------------------------------------------
  // mine (question dissimilarity)

  std::size_t mine_k_ = 10;
  std::vector<std::string> mine_iids_;

  void add_mine() {
    auto* sub = command("mine", "Least similar questions for each image (keyword embeddings)", [this] { run_mine(); });
    input(sub, "--questions", p_.questions, "Question pool with iid and pos_tags (JSONL)");
    add_embeddings(sub, true);
    sub->add_option("--k", mine_k_, "Questions to keep per image")->check(CLI::PositiveNumber);
    sub->add_option("--iid", mine_iids_, "Images to mine (default: every image in the pool)");
  }

  void run_mine() {
    const auto pool = read_questions(p_.questions);
    const auto table = embeddings();
    std::set<std::string> iids(mine_iids_.begin(), mine_iids_.end());
    if (iids.empty()) {
      for (const auto& q : pool)
        if (q.iid) iids.insert(*q.iid);
    }
    std::ofstream out(c_.out("dissimilar.jsonl"));
    for (const auto& iid : iids) {
      json row{{"iid", iid}};
      json qs = json::array();
      for (const auto& s : mine_dissimilar_questions(iid, pool, table, mine_k_)) qs.push_back({{"qid", s.qid}, {"similarity", s.similarity}});
      row["questions"] = qs;
      out << row.dump() << '\n';
    }
    std::cout << "mined dissimilar questions for " << iids.size() << " images\n";
  }

  // -------------------------------------------------------------------------
  // build-dataset

  MinerConfig miner_;
  std::string order_ = "both";
  std::string mode_ = "at-least-one";

  void add_build_dataset() {
    auto* sub = command("build-dataset", "Positives plus mined false-premise negatives, with stats", [this] { run_build(); });
    input(sub, "--questions", p_.questions, "Questions with iid (JSONL)");
    input(sub, "--annotations", p_.annotations, "Image annotations (JSONL)");
    input(sub, "--features", p_.features, "Image feature store (QRFS)");
    input(sub, "--vocab", p_.vocab, "Object vocabulary");
    input(sub, "--antonyms", p_.antonyms, "Antonym lexicon");
    sub->add_option("--k-similar", miner_.k_similar, "Candidate images per positive")->check(CLI::PositiveNumber);
    sub->add_option("--max-negatives", miner_.max_negatives_per_question, "Negatives kept per question");
    sub->add_option("--order", order_, "Premise orders to mine")->check(CLI::IsMember({"first", "second", "both"}));
    sub->add_option("--mode", mode_, "Falsification rule")->check(CLI::IsMember({"exactly-one", "at-least-one"}));
  }

  void run_build() {
    miner_.order = mining_order_from_string(order_);
    miner_.falsification_mode = falsification_mode_from_string(mode_);
    miner_.seed = c_.seed;
    miner_.workers = c_.workers;
    validate(miner_);
    const auto data = load_corpus({p_.questions, p_.annotations, p_.features, p_.vocab, p_.antonyms});
    const auto manifest = build_dataset(data, miner_);
    write_manifest(manifest, c_.out("manifest.jsonl"));
    const auto table = format_stats_table(manifest.stats);
    std::ofstream(c_.out("stats.txt")) << table;
    std::ofstream(c_.out("stats.json")) << to_json(manifest.stats).dump(2) << '\n';
    std::cout << table;
  }

  // -------------------------------------------------------------------------
  // train

  std::string model_kind_;
  TrainConfig train_;
  std::size_t hidden_ = 256;
  std::size_t image_dim_ = 300;
  std::size_t tag_dim_ = 32;
  std::size_t lstm_hidden_ = 100;
  std::vector<std::size_t> mlp_hidden_{5000, 500};
  std::string step_one_ = "pad";

  void add_train() {
    auto* sub = command("train", "Train a model", [this] { run_train(); });
    sub->add_option("model", model_kind_, "Model kind")->required()->check(CLI::IsMember(kModelKinds));
    input(sub, "--questions", p_.questions, "Questions (JSONL); visual labels for lr-visual/lstm-visual");
    input(sub, "--manifest", p_.manifest, "Dataset manifest (relevance models)", false);
    input(sub, "--features", p_.features, "Image feature store (relevance models)", false);
    input(sub, "--lexicon", p_.lexicon, "Lexicon for questions without tags", false);
    add_embeddings(sub, false);
    add_pca_source(sub);
    add_hashing(sub);
    sub->add_option("--epochs", train_.epochs, "Training epochs")->check(CLI::NonNegativeNumber);
    sub->add_option("--lr", train_.learning_rate, "Learning rate");
    sub->add_option("--batch", train_.batch_size, "Mini-batch size")->check(CLI::PositiveNumber);
    sub->add_option("--l2", train_.l2, "L2 penalty on weights");
    sub->add_option("--momentum", train_.momentum, "SGD momentum");
    sub->add_flag("--prefetch", train_.prefetch, "Assemble the next batch on a worker thread");
    sub->add_option("--hidden", hidden_, "RelNet LSTM hidden size")->check(CLI::PositiveNumber);
    sub->add_option("--image-dim", image_dim_, "RelNet image embedding size (relnet2-4)")->check(CLI::PositiveNumber);
    sub->add_option("--step-one", step_one_, "RelNet3/4 step-one width handling")->check(CLI::IsMember({"pad", "project"}));
    sub->add_option("--tag-dim", tag_dim_, "POS tag embedding size (lstm-visual)")->check(CLI::PositiveNumber);
    sub->add_option("--lstm-hidden", lstm_hidden_, "POS LSTM hidden size (lstm-visual)")->check(CLI::PositiveNumber);
    sub->add_option("--mlp-hidden", mlp_hidden_, "MLP hidden layer sizes")->delimiter(',');
  }

  void require(const std::string& path, const std::string& flag) const {
    if (path.empty()) fail(ErrorCode::invalid_argument, "train " + model_kind_ + " needs " + flag);
  }

  json train_header() const {
    return {{"kind", model_kind_}, {"seed", c_.seed}, {"n_max", n_max_}, {"hash_dim", hash_dim_}, {"embed_dim", embed_dim_}};
  }

  void write_train_log(const std::vector<double>& losses, double acc) {
    json log{{"model", model_kind_}, {"epoch_loss", losses}, {"train_accuracy", acc}};
    std::ofstream(c_.out("train-" + model_kind_ + ".json")) << log.dump(2) << '\n';
    if (!losses.empty()) std::cout << "loss " << losses.front() << " -> " << losses.back() << '\n';
    std::cout << "training accuracy " << std::fixed << std::setprecision(4) << acc << '\n';
  }

  void run_train() {
    validate(train_);
    if (model_kind_ == "lr-visual") return train_lr_visual();
    if (model_kind_ == "lstm-visual") return train_lstm_visual();
    if (model_kind_ == "lr-premise" || model_kind_ == "mlp") return train_fused();
    return train_relnet(model_kind_.back() - '0');
  }

  // Labeled questions, streamed from disk on every pass.
  class VisualStream {
   public:
    VisualStream(const Cli& cli, const std::string& path, const TagLexicon* lex) : cli_(&cli), path_(path), lex_(lex) {}
    void reset() { in_.emplace(path_); }
    std::optional<SparseExample> next() {
      while (auto q = in_->next()) {
        if (!q->visual) continue;
        return SparseExample{pos_ngrams(cli_->tags_for(*q, lex_), cli_->n_max_, cli_->hash_dim_), *q->visual ? 1 : 0};
      }
      return std::nullopt;
    }

   private:
    const Cli* cli_;
    std::string path_;
    const TagLexicon* lex_;
    std::optional<QuestionStream> in_;
  };

  void train_lr_visual() {
    const auto lex = lexicon();
    VisualStream stream(*this, p_.questions, lex ? &*lex : nullptr);
    std::vector<double> losses;
    auto m = lr_train_streaming(stream, hash_dim_, {train_.learning_rate, train_.epochs, train_.l2}, &losses);
    save_model(c_.out("lr-visual.bin"), m, train_header());
    ConfusionMatrix cm;
    stream.reset();
    while (auto ex = stream.next()) {
      const auto cm1 = confusion(std::vector<double>{lr_predict(m, ex->x)}, std::vector<int>{ex->label}, train_.threshold);
      cm.tp += cm1.tp, cm.fp += cm1.fp, cm.tn += cm1.tn, cm.fn += cm1.fn;
    }
    write_train_log(losses, cm.total() ? accuracy(cm) : 0.0);
  }

  std::vector<QuestionRecord> visual_questions(const TagLexicon* lex) const {
    std::vector<QuestionRecord> qs;
    for (auto& q : read_questions(p_.questions)) {
      if (!q.visual) continue;
      q.pos_tags = tags_for(q, lex);
      qs.push_back(std::move(q));
    }
    if (qs.empty()) fail(ErrorCode::invalid_argument, p_.questions + " holds no questions with a visual label");
    return qs;
  }

  void train_lstm_visual() {
    const auto lex = lexicon();
    const auto qs = visual_questions(lex ? &*lex : nullptr);
    std::set<std::string> tag_set;
    for (const auto& q : qs) tag_set.insert(q.pos_tags->begin(), q.pos_tags->end());
    PosLstmModel m(SymbolVocab(std::vector<std::string>(tag_set.begin(), tag_set.end())), tag_dim_, lstm_hidden_);
    Rng rng(c_.seed);
    m.init(rng);
    PosSequenceSource src(qs, m);
    train_.seed = c_.seed;
    const auto res = train(m, src, train_);
    save_model(c_.out("lstm-visual.bin"), m, train_header());
    write_train_log(res.epoch_loss, accuracy(confusion(score_all(m, src), labels_of(src), train_.threshold)));
  }

  struct RelevanceData {
    DatasetManifest manifest;
    FeatureStore store;
    QuestionIndex questions;
  };

  RelevanceData relevance_data() const {
    require(p_.manifest, "--manifest");
    require(p_.features, "--features");
    return {read_manifest(p_.manifest), open_feature_store(p_.features), index_questions(read_questions(p_.questions))};
  }

  // Replays a dense source as a stream for the streaming trainer.
  template <typename Source>
  class SourceStream {
   public:
    explicit SourceStream(const Source& s) : src_(&s) {}
    void reset() { pos_ = 0; }
    std::optional<DenseExample> next() {
      if (pos_ >= src_->size()) return std::nullopt;
      return src_->example(pos_++);
    }

   private:
    const Source* src_;
    std::size_t pos_ = 0;
  };

  void train_fused() {
    require(p_.embeddings, "--embeddings");
    const auto data = relevance_data();
    const auto table = embeddings();
    const auto pca = pca_for(data.store);
    FusedDenseSource src(data.manifest.pairs, data.store, data.questions, table, &pca);
    train_.seed = c_.seed;
    if (model_kind_ == "lr-premise") {
      SourceStream stream(src);
      std::vector<double> losses;
      auto m = lr_train_streaming(stream, src.feature_dim(), {train_.learning_rate, train_.epochs, train_.l2}, &losses);
      save_model(c_.out("lr-premise.bin"), m, train_header(), &pca);
      std::vector<double> scores;
      for (std::size_t i = 0; i < src.size(); ++i) scores.push_back(lr_predict(m, src.example(i).x));
      write_train_log(losses, accuracy(confusion(scores, labels_of(src), train_.threshold)));
      return;
    }
    std::vector<std::size_t> dims{src.feature_dim()};
    dims.insert(dims.end(), mlp_hidden_.begin(), mlp_hidden_.end());
    dims.push_back(1);
    MLPModel m(dims);
    Rng rng(c_.seed);
    m.init(rng);
    const auto res = train(m, src, train_);
    save_model(c_.out("mlp.bin"), m, train_header(), &pca);
    write_train_log(res.epoch_loss, accuracy(confusion(score_all(m, src), labels_of(src), train_.threshold)));
  }

  void train_relnet(int variant) {
    const auto data = relevance_data();
    std::set<std::string> tokens;
    for (const auto& pair : data.manifest.pairs) {
      const auto& q = lookup_question(data.questions, pair.qid);
      for (const auto& t : lowered(q.tokens)) tokens.insert(t);
    }
    std::optional<PCAModel> pca;
    if (variant == 1) pca = pca_for(data.store);
    RelNetDims dims{data.store.dim(), embed_dim_, hidden_, image_dim_};
    RelNetModel m(variant, dims, SymbolVocab(std::vector<std::string>(tokens.begin(), tokens.end())),
                  step_one_mode_from_string(step_one_), pca);
    Rng rng(c_.seed);
    m.init(rng);
    if (!p_.embeddings.empty()) {
      const auto filled = m.load_embeddings(embeddings());
      std::cout << "initialized " << filled << " of " << tokens.size() << " token embeddings from " << p_.embeddings << '\n';
    }
    RelNetSource src(data.manifest.pairs, data.store, data.questions, m);
    train_.seed = c_.seed;
    const auto res = train(m, src, train_);
    save_model(c_.out(model_kind_ + ".bin"), m, train_header());
    write_train_log(res.epoch_loss, accuracy(confusion(score_all(m, src), labels_of(src), train_.threshold)));
  }

  // -------------------------------------------------------------------------
  // evaluate / predict

  std::vector<std::string> model_paths_;
  std::string dataset_name_;
  double threshold_ = 0.5;

  void add_evaluate() {
    auto* sub = command("evaluate", "Score models on a dataset and write a metrics report", [this] { run_evaluate(); });
    sub->add_option("--model", model_paths_, "Model file(s) from train")->required();
    input(sub, "--questions", p_.questions, "Questions (JSONL)");
    input(sub, "--manifest", p_.manifest, "Dataset manifest (relevance models)", false);
    input(sub, "--features", p_.features, "Image feature store (relevance models)", false);
    input(sub, "--lexicon", p_.lexicon, "Lexicon for questions without tags", false);
    add_embeddings(sub, false);
    sub->add_option("--dataset-name", dataset_name_, "Dataset label in the report (default: manifest or questions file stem)");
    sub->add_option("--threshold", threshold_, "Decision threshold")->check(CLI::Range(0.0, 1.0));
  }

  struct LoadedModel {
    std::string kind;
    json header;
    AnyModel model;
    std::optional<PCAModel> pca;
  };

  static LoadedModel load(const std::string& path) {
    const auto mf = read_model_file(path);
    LoadedModel lm{mf.header.value("kind", mf.header.at("model").get<std::string>()), mf.header, load_model(mf), stored_pca(mf)};
    return lm;
  }

  static bool is_visual(const std::string& kind) { return kind == "lr-visual" || kind == "lstm-visual"; }

  // Scores and labels of one model over the evaluation data.
  std::pair<std::vector<double>, std::vector<int>> score(const LoadedModel& lm, const TagLexicon* lex) const {
    std::vector<double> scores;
    std::vector<int> labels;
    if (is_visual(lm.kind)) {
      for (const auto& q : visual_questions(lex)) {
        if (lm.kind == "lr-visual") {
          const auto& m = std::get<LRModel>(lm.model);
          scores.push_back(lr_predict(m, pos_ngrams(*q.pos_tags, lm.header.at("n_max").get<int>(), static_cast<std::uint32_t>(m.dim()))));
        } else {
          scores.push_back(poslstm_forward(std::get<PosLstmModel>(lm.model), *q.pos_tags));
        }
        labels.push_back(*q.visual ? 1 : 0);
      }
      return {scores, labels};
    }
    const auto data = relevance_data();
    for (const auto& pair : data.manifest.pairs) labels.push_back(label_of(pair));
    if (auto* rel = std::get_if<RelNetModel>(&lm.model)) {
      RelNetSource src(data.manifest.pairs, data.store, data.questions, *rel);
      return {score_all(*rel, src), labels};
    }
    require(p_.embeddings, "--embeddings");
    if (!lm.pca) fail(ErrorCode::corrupt, lm.kind + " model file lacks its PCA block");
    const auto table = load_embeddings(p_.embeddings, lm.header.at("embed_dim").get<std::size_t>());
    FusedDenseSource src(data.manifest.pairs, data.store, data.questions, table, &*lm.pca);
    for (std::size_t i = 0; i < src.size(); ++i) {
      const auto x = src.example(i).x;
      if (auto* lr = std::get_if<LRModel>(&lm.model)) {
        scores.push_back(lr_predict(*lr, x));
      } else {
        scores.push_back(mlp_forward(std::get<MLPModel>(lm.model), x));
      }
    }
    return {scores, labels};
  }

  void run_evaluate() {
    const auto lex = lexicon();
    std::string name = dataset_name_;
    if (name.empty()) name = fs::path(p_.manifest.empty() ? p_.questions : p_.manifest).stem().string();
    std::vector<NamedResult> results;
    for (const auto& path : model_paths_) {
      if (!fs::exists(path)) fail(ErrorCode::io, "model file not found: " + path);
      const auto lm = load(path);
      const auto [scores, labels] = score(lm, lex ? &*lex : nullptr);
      results.push_back({lm.kind, name, confusion(scores, labels, threshold_)});
    }
    const auto table = report(results);
    std::ofstream(c_.out("report.txt")) << table;
    std::ofstream(c_.out("report.json")) << report_json(results).dump(2) << '\n';
    std::cout << table;
  }

  std::string question_text_;
  std::string iid_;
  std::vector<std::string> tags_;

  void add_predict() {
    auto* sub = command("predict", "Score one question (and image, for relevance models)", [this] { run_predict(); });
    sub->add_option("--model", p_.model, "Model file from train")->required();
    sub->add_option("--question", question_text_, "Question text")->required();
    sub->add_option("--iid", iid_, "Image id (relevance models)");
    sub->add_option("--tags", tags_, "POS tags of the question (visual models)");
    input(sub, "--features", p_.features, "Image feature store (relevance models)", false);
    input(sub, "--lexicon", p_.lexicon, "Lexicon used when --tags is absent", false);
    add_embeddings(sub, false);
    sub->add_option("--threshold", threshold_, "Decision threshold")->check(CLI::Range(0.0, 1.0));
  }

  void run_predict() {
    if (!fs::exists(p_.model)) fail(ErrorCode::io, "model file not found: " + p_.model);
    const auto lm = load(p_.model);
    const auto tokens = tokenize(question_text_);
    if (tokens.empty()) fail(ErrorCode::invalid_argument, "--question has no tokens");
    double prob = 0;
    if (is_visual(lm.kind)) {
      auto tags = tags_;
      if (tags.empty()) {
        const auto lex = lexicon();
        if (!lex) fail(ErrorCode::invalid_argument, "visual models need --tags or --lexicon");
        tags = lexicon_tag(tokens, *lex);
      }
      if (lm.kind == "lr-visual") {
        const auto& m = std::get<LRModel>(lm.model);
        prob = lr_predict(m, pos_ngrams(tags, lm.header.at("n_max").get<int>(), static_cast<std::uint32_t>(m.dim())));
      } else {
        prob = poslstm_forward(std::get<PosLstmModel>(lm.model), tags);
      }
    } else {
      if (iid_.empty()) fail(ErrorCode::invalid_argument, lm.kind + " needs --iid");
      require(p_.features, "--features");
      const auto store = open_feature_store(p_.features);
      if (auto* rel = std::get_if<RelNetModel>(&lm.model)) {
        prob = relnet_forward(*rel, store.row_as_double(iid_), tokens);
      } else {
        require(p_.embeddings, "--embeddings");
        if (!lm.pca) fail(ErrorCode::corrupt, lm.kind + " model file lacks its PCA block");
        const auto table = load_embeddings(p_.embeddings, lm.header.at("embed_dim").get<std::size_t>());
        const auto x = fused_features(store.row(iid_), &*lm.pca, tokens, table);
        prob = std::holds_alternative<LRModel>(lm.model) ? lr_predict(std::get<LRModel>(lm.model), x) : mlp_forward(std::get<MLPModel>(lm.model), x);
      }
    }
    json out{{"model", lm.kind}, {"question", question_text_}, {"probability", prob}, {"label", prob >= threshold_ ? 1 : 0}};
    if (!iid_.empty()) out["iid"] = iid_;
    std::ofstream(c_.out("prediction.json")) << out.dump(2) << '\n';
    std::cout << out.dump() << '\n';
  }

  // -------------------------------------------------------------------------
  // export-features / stats

  void add_export() {
    auto* sub = command("export-features", "Dense CSV (label, PCA image block, question embedding) for external learners",
                        [this] { run_export(); });
    input(sub, "--manifest", p_.manifest, "Dataset manifest");
    input(sub, "--features", p_.features, "Image feature store (QRFS)");
    input(sub, "--questions", p_.questions, "Questions (JSONL)");
    add_embeddings(sub, true);
    add_pca_source(sub);
  }

  void run_export() {
    const auto data = relevance_data();
    const auto pca = pca_for(data.store);
    const auto n = export_features(data.manifest.pairs, data.store, data.questions, embeddings(), pca, c_.out("features.csv"));
    std::cout << "exported " << n << " rows with " << pca.output_dim() + embed_dim_ << " features\n";
  }

  void add_stats() {
    auto* sub = command("stats", "Validate a manifest and print its stats table", [this] { run_stats(); });
    input(sub, "--manifest", p_.manifest, "Dataset manifest");
  }

  void run_stats() {
    const auto m = read_manifest(p_.manifest);
    const auto table = format_stats_table(m.stats);
    std::ofstream(c_.out("stats.txt")) << table;
    std::cout << table;
  }
};

}  // namespace

int main(int argc, char** argv) {
  Cli cli;
  return cli.run(argc, argv);
}
