#include <gtest/gtest.h>

#include "qrel/premise.hpp"
#include "test_util.hpp"

using namespace qrel;

namespace {

QuestionRecord question(const std::vector<std::string>& tokens, std::optional<std::vector<std::string>> tags = std::nullopt) {
  QuestionRecord q;
  q.qid = "q";
  q.tokens = tokens;
  for (const auto& t : tokens) q.text += (q.text.empty() ? "" : " ") + t;
  q.pos_tags = std::move(tags);
  return q;
}

std::vector<std::string> objects(const std::vector<Premise>& ps) {
  std::vector<std::string> out;
  for (const auto& p : ps) out.push_back(p.object);
  return out;
}

ImageAnnotation ann(std::set<std::string> objs, std::map<std::string, std::set<std::string>> sg = {}) {
  return {"img", std::move(objs), std::move(sg)};
}

}  // namespace

TEST(FirstOrder, Examples) {
  ObjectVocabulary v{"dog", "cat"};
  EXPECT_EQ(objects(extract_first_order(question({"is", "the", "dog", "sleeping"}), v)), (std::vector<std::string>{"dog"}));
  EXPECT_EQ(objects(extract_first_order(question({"are", "the", "dogs", "barking"}), v)), (std::vector<std::string>{"dog"}));
  ObjectVocabulary hv{"dog", "hot dog"};
  EXPECT_EQ(objects(extract_first_order(question({"is", "that", "a", "hot", "dog"}), hv)), (std::vector<std::string>{"hot dog"}));
}

TEST(FirstOrder, PluralOverridesAndEsStripping) {
  ObjectVocabulary v{"person", "bus", "bench"};
  v.add_plural("people", "person");
  EXPECT_EQ(objects(extract_first_order(question({"are", "people", "waiting"}), v)), (std::vector<std::string>{"person"}));
  EXPECT_EQ(objects(extract_first_order(question({"how", "many", "buses"}), v)), (std::vector<std::string>{"bus"}));
  EXPECT_EQ(objects(extract_first_order(question({"empty", "benches"}), v)), (std::vector<std::string>{"bench"}));
}

TEST(FirstOrder, LoadsVocabularyFile) {
  testutil::TempDir dir;
  testutil::write_text(dir.file("v.txt"), "dog\nTeddy Bear\nperson\tpeople\n\n");
  auto v = load_vocabulary(dir.file("v.txt"));
  EXPECT_TRUE(v.contains("teddy bear"));
  EXPECT_EQ(objects(extract_first_order(question({"the", "people", "and", "teddy", "bears"}), v)),
            (std::vector<std::string>{"person", "teddy bear"}));
}

TEST(SecondOrder, Examples) {
  ObjectVocabulary v{"dog", "cat", "mat"};
  auto p = extract_second_order(question({"black", "dog"}, {{"JJ", "NN"}}), v);
  ASSERT_EQ(p.size(), 1u);
  EXPECT_EQ(p[0].attribute, "black");
  EXPECT_EQ(p[0].object, "dog");

  auto two = extract_second_order(
      question({"is", "the", "small", "cat", "on", "the", "large", "mat"}, {{"VBZ", "DT", "JJ", "NN", "IN", "DT", "JJ", "NN"}}), v);
  ASSERT_EQ(two.size(), 2u);
  EXPECT_EQ(two[0].text(), "small cat");
  EXPECT_EQ(two[1].text(), "large mat");

  EXPECT_TRUE(extract_second_order(question({"is", "the", "dog", "here"}, {{"VBZ", "DT", "NN", "RB"}}), v).empty());
  EXPECT_THROW(extract_second_order(question({"black", "dog"}), v), Error);
}

TEST(Falsify, FirstOrderExamples) {
  const std::vector<Premise> dog{first_order("dog")};
  EXPECT_EQ(objects(falsified_first_order(dog, ann({"cat"}))), (std::vector<std::string>{"dog"}));
  EXPECT_TRUE(falsified_first_order(dog, ann({"dog"})).empty());
  const std::vector<Premise> dog_cat{first_order("dog"), first_order("cat")};
  EXPECT_EQ(objects(falsified_first_order(dog_cat, ann({"cat"}))), (std::vector<std::string>{"dog"}));
}

TEST(Falsify, SecondOrderExamples) {
  AntonymLexicon ant;
  ant.add("small", "large");
  const auto p = second_order("small", "cat");
  EXPECT_TRUE(falsified_second_order(p, ann({"cat"}, {{"cat", {"large"}}}), ant));
  EXPECT_FALSE(falsified_second_order(p, ann({"cat"}, {{"cat", {"small"}}}), ant));
  EXPECT_FALSE(falsified_second_order(p, ann({"dog"}), ant));
  EXPECT_THROW(falsified_second_order(first_order("cat"), ann({"cat"}), ant), Error);
}

TEST(Properties, RandomisedInvariants) {
  const std::vector<std::string> lemmas{"dog", "cat", "car", "hot dog", "bus", "person"};
  ObjectVocabulary v;
  for (const auto& l : lemmas) v.add(l);
  const std::vector<std::string> words{"is", "the", "dog", "dogs", "cat", "hot", "buses", "car", "red", "a", "person"};
  const std::vector<std::string> attrs{"small", "large", "black", "white", "old", "new"};
  AntonymLexicon ant;
  ant.add("small", "large");
  ant.add("black", "white");
  ant.add("old", "new");
  Rng rng(77);
  for (int trial = 0; trial < 300; ++trial) {
    std::vector<std::string> toks;
    for (std::size_t i = 0, n = 1 + rng.below(8); i < n; ++i) toks.push_back(words[rng.below(words.size())]);
    const auto first = extract_first_order(question(toks), v);
    for (const auto& p : first) EXPECT_TRUE(v.contains(p.object));

    std::set<std::string> objs;
    for (const auto& l : lemmas)
      if (rng.uniform() < 0.4) objs.insert(l);
    std::set<std::string> all_objs = objs;
    for (const auto& p : first) all_objs.insert(p.object);
    EXPECT_TRUE(falsified_first_order(first, ann(all_objs)).empty());

    // Monotonicity: adding objects never grows the falsified list.
    auto more = objs;
    more.insert(lemmas[rng.below(lemmas.size())]);
    EXPECT_LE(falsified_first_order(first, ann(more)).size(), falsified_first_order(first, ann(objs)).size());

    // Antonym symmetry.
    const auto& a = attrs[rng.below(attrs.size())];
    const auto& b = attrs[rng.below(attrs.size())];
    EXPECT_EQ(falsified_second_order(second_order(a, "cat"), ann({"cat"}, {{"cat", {b}}}), ant),
              falsified_second_order(second_order(b, "cat"), ann({"cat"}, {{"cat", {a}}}), ant));
  }
}
