// Writes the bundled mini corpus (20 images, 50 questions) used by the tests
// and the CLI smoke run. Output is a pure function of the fixed seed.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "qrel/qrel.hpp"

namespace {

struct Word {
  std::string token;
  std::string tag;
};

const std::vector<std::string> kObjects = {"dog",    "cat",  "car",      "bus",        "person", "horse", "bird", "bench",
                                           "umbrella", "pizza", "cup", "truck", "boat", "hot dog", "teddy bear"};

const std::map<std::string, std::string> kPlurals = {{"person", "people"}, {"bus", "buses"}, {"hot dog", "hot dogs"},
                                                     {"teddy bear", "teddy bears"}};

const std::vector<std::pair<std::string, std::string>> kAntonyms = {
    {"small", "large"}, {"black", "white"}, {"old", "new"}, {"wet", "dry"}, {"empty", "full"}, {"open", "closed"}};

std::string plural(const std::string& obj) {
  auto it = kPlurals.find(obj);
  return it != kPlurals.end() ? it->second : obj + "s";
}

void push_object(std::vector<Word>& words, const std::string& obj, bool plural_form = false) {
  const auto surface = plural_form ? plural(obj) : obj;
  auto parts = qrel::tokenize(surface);
  for (std::size_t i = 0; i < parts.size(); ++i) {
    const bool head = i + 1 == parts.size();
    words.push_back({parts[i], head ? (plural_form ? "NNS" : "NN") : "NN"});
  }
}

qrel::QuestionRecord make_question(const std::string& qid, const std::string& iid, const std::vector<Word>& words) {
  qrel::QuestionRecord q;
  q.qid = qid;
  q.iid = iid;
  q.pos_tags.emplace();
  for (const auto& w : words) {
    q.text += (q.text.empty() ? "" : " ") + w.token;
    q.tokens.push_back(w.token);
    q.pos_tags->push_back(w.tag);
  }
  q.text += "?";
  q.visual = true;
  return q;
}

}  // namespace

int main(int argc, char** argv) {
  const std::filesystem::path out = argc > 1 ? argv[1] : "data/mini";
  std::filesystem::create_directories(out);
  qrel::Rng rng(2024);
  constexpr std::uint32_t kFeatureDim = 64;
  constexpr std::size_t kEmbedDim = 16;

  // Images: 2-3 objects each, some with attributes.
  qrel::AnnotationMap annotations;
  std::vector<std::string> iids;
  for (int i = 0; i < 20; ++i) {
    qrel::ImageAnnotation a;
    a.iid = "img" + std::string(i < 10 ? "0" : "") + std::to_string(i);
    const std::size_t n_obj = 2 + rng.below(2);
    while (a.objects.size() < n_obj) a.objects.insert(kObjects[rng.below(kObjects.size())]);
    for (const auto& obj : a.objects) {
      if (rng.uniform() < 0.7) {
        const auto& pair = kAntonyms[rng.below(kAntonyms.size())];
        a.scene_graph[obj].insert(rng.uniform() < 0.5 ? pair.first : pair.second);
      }
    }
    iids.push_back(a.iid);
    annotations.emplace(a.iid, std::move(a));
  }

  // Features: sum of per-object directions plus noise, so that images
  // sharing objects are close in cosine.
  std::map<std::string, std::vector<double>> directions;
  for (const auto& obj : kObjects) {
    std::vector<double> d(kFeatureDim);
    for (auto& x : d) x = rng.normal();
    directions[obj] = std::move(d);
  }
  std::vector<float> data;
  for (const auto& iid : iids) {
    std::vector<double> v(kFeatureDim, 0.0);
    for (const auto& obj : annotations.at(iid).objects)
      for (std::uint32_t k = 0; k < kFeatureDim; ++k) v[k] += directions[obj][k];
    for (auto& x : v) x += 0.4 * rng.normal();
    for (double x : v) data.push_back(static_cast<float>(x));
  }
  qrel::FeatureStore(kFeatureDim, iids, data).save((out / "features.bin").string());

  // Questions: 2-3 per image, drawn from fixed templates.
  std::vector<qrel::QuestionRecord> questions;
  int qn = 0;
  for (std::size_t i = 0; questions.size() < 50; i = (i + 1) % iids.size()) {
    const auto& a = annotations.at(iids[i]);
    std::vector<std::string> objs(a.objects.begin(), a.objects.end());
    const auto& obj = objs[rng.below(objs.size())];
    const auto& other = objs[(rng.below(objs.size()))];
    auto attr_of = [&](const std::string& o) -> std::string {
      auto it = a.scene_graph.find(o);
      return it == a.scene_graph.end() ? std::string{} : *it->second.begin();
    };
    std::vector<Word> w;
    switch (rng.below(7)) {
      case 0:
        w = {{"is", "VBZ"}, {"the", "DT"}};
        push_object(w, obj);
        w.push_back({"sleeping", "VBG"});
        break;
      case 1:
        w = {{"what", "WP"}, {"color", "NN"}, {"is", "VBZ"}, {"the", "DT"}};
        push_object(w, obj);
        break;
      case 2: {
        w = {{"is", "VBZ"}, {"the", "DT"}};
        if (auto at = attr_of(obj); !at.empty()) w.push_back({at, "JJ"});
        push_object(w, obj);
        w.insert(w.end(), {{"on", "IN"}, {"the", "DT"}, {"left", "NN"}});
        break;
      }
      case 3:
        w = {{"how", "WRB"}, {"many", "JJ"}};
        push_object(w, obj, true);
        w.insert(w.end(), {{"are", "VBP"}, {"there", "EX"}});
        break;
      case 4:
        w = {{"is", "VBZ"}, {"there", "EX"}, {"a", "DT"}};
        push_object(w, obj);
        w.insert(w.end(), {{"next", "JJ"}, {"to", "TO"}, {"the", "DT"}});
        push_object(w, other);
        break;
      case 5:
        w = {{"what", "WP"}, {"is", "VBZ"}, {"the", "DT"}, {"man", "NN"}, {"holding", "VBG"}};
        break;
      default: {
        w = {{"is", "VBZ"}, {"the", "DT"}};
        if (auto at = attr_of(obj); !at.empty()) w.push_back({at, "JJ"});
        push_object(w, obj);
        w.insert(w.end(), {{"near", "IN"}, {"the", "DT"}});
        if (auto at = attr_of(other); !at.empty()) w.push_back({at, "JJ"});
        push_object(w, other);
        break;
      }
    }
    ++qn;
    questions.push_back(make_question("q" + std::string(qn < 10 ? "0" : "") + std::to_string(qn), iids[i], w));
  }
  qrel::write_questions((out / "questions.jsonl").string(), questions);
  qrel::write_annotations((out / "annotations.jsonl").string(), annotations);

  // Visual vs non-visual questions (no image) for the visualness models.
  const std::vector<std::vector<Word>> non_visual = {
      {{"who", "WP"}, {"is", "VBZ"}, {"the", "DT"}, {"president", "NN"}, {"of", "IN"}, {"zimbabwe", "NNP"}},
      {{"name", "VB"}, {"the", "DT"}, {"national", "JJ"}, {"rugby", "NN"}, {"team", "NN"}, {"of", "IN"}, {"argentina", "NNP"}},
      {{"what", "WP"}, {"is", "VBZ"}, {"the", "DT"}, {"capital", "NN"}, {"of", "IN"}, {"france", "NNP"}},
      {{"why", "WRB"}, {"do", "VBP"}, {"we", "PRP"}, {"exist", "VB"}},
      {{"when", "WRB"}, {"did", "VBD"}, {"the", "DT"}, {"war", "NN"}, {"end", "VB"}},
      {{"who", "WP"}, {"wrote", "VBD"}, {"hamlet", "NNP"}},
      {{"define", "VB"}, {"gravity", "NN"}},
      {{"how", "WRB"}, {"old", "JJ"}, {"is", "VBZ"}, {"the", "DT"}, {"universe", "NN"}},
  };
  std::vector<qrel::QuestionRecord> visualness;
  for (std::size_t i = 0; i < 16; ++i) {
    auto q = questions[i];
    q.qid = "v" + std::to_string(i);
    q.iid.reset();
    visualness.push_back(std::move(q));
  }
  for (std::size_t i = 0; i < 16; ++i) {
    auto q = make_question("n" + std::to_string(i), "", non_visual[i % non_visual.size()]);
    q.iid.reset();
    q.visual = false;
    visualness.push_back(std::move(q));
  }
  qrel::write_questions((out / "visualness.jsonl").string(), visualness);

  // Vocabulary, antonyms, lexicon, embeddings.
  {
    std::ofstream v(out / "vocab.txt");
    for (const auto& obj : kObjects) {
      v << obj;
      if (auto it = kPlurals.find(obj); it != kPlurals.end() && obj == "person") v << '\t' << it->second;
      v << '\n';
    }
    std::ofstream ant(out / "antonyms.tsv");
    for (const auto& [a, b] : kAntonyms) ant << a << '\t' << b << '\n';
  }
  std::map<std::string, std::string> lexicon;
  for (const auto& q : questions)
    for (std::size_t k = 0; k < q.tokens.size(); ++k) lexicon.emplace(q.tokens[k], (*q.pos_tags)[k]);
  for (const auto& q : visualness)
    for (std::size_t k = 0; k < q.tokens.size(); ++k) lexicon.emplace(q.tokens[k], (*q.pos_tags)[k]);
  {
    std::ofstream lex(out / "lexicon.tsv");
    for (const auto& [tok, tag] : lexicon) lex << tok << '\t' << tag << '\n';
    std::ofstream emb(out / "embeddings.txt");
    emb << std::setprecision(6);
    for (const auto& [tok, tag] : lexicon) {
      emb << tok;
      for (std::size_t k = 0; k < kEmbedDim; ++k) emb << ' ' << rng.uniform(-1.0, 1.0);
      emb << '\n';
    }
  }
  std::cout << "wrote mini corpus to " << out.string() << ": " << iids.size() << " images, " << questions.size() << " questions\n";
  return 0;
}
