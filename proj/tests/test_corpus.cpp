#include <gtest/gtest.h>

#include "alloc_counter.hpp"
#include "qrel/corpus.hpp"
#include "test_util.hpp"

using namespace qrel;
using testutil::TempDir;

namespace {

ErrorCode code_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "expected qrel::Error";
  return ErrorCode::invalid_argument;
}

LabeledPair positive(std::string qid, std::string iid) {
  LabeledPair p;
  p.qid = std::move(qid);
  p.iid = std::move(iid);
  p.has_first_order = true;
  return p;
}

LabeledPair negative(std::string qid, std::string iid, PremiseOrder order, std::vector<std::string> falsified) {
  LabeledPair p;
  p.qid = std::move(qid);
  p.iid = std::move(iid);
  p.label = Label::irrelevant;
  p.order = order;
  p.falsified = std::move(falsified);
  return p;
}

}  // namespace

TEST(QuestionStream, EmptyFileYieldsNothing) {
  TempDir dir;
  testutil::write_text(dir.file("q.jsonl"), "");
  QuestionStream s(dir.file("q.jsonl"));
  EXPECT_FALSE(s.next().has_value());
}

TEST(QuestionStream, ReadsFieldsVerbatim) {
  TempDir dir;
  testutil::write_text(dir.file("q.jsonl"),
                       R"({"qid":"q1","text":"is the dog sleeping?","tokens":["is","the","dog","sleeping"],"pos_tags":["VBZ","DT","NN","VBG"]})"
                       "\n");
  auto qs = read_questions(dir.file("q.jsonl"));
  ASSERT_EQ(qs.size(), 1u);
  EXPECT_EQ(qs[0].qid, "q1");
  EXPECT_EQ(qs[0].text, "is the dog sleeping?");
  EXPECT_EQ(qs[0].tokens, (std::vector<std::string>{"is", "the", "dog", "sleeping"}));
  ASSERT_TRUE(qs[0].pos_tags);
  EXPECT_EQ(*qs[0].pos_tags, (std::vector<std::string>{"VBZ", "DT", "NN", "VBG"}));
  EXPECT_FALSE(qs[0].iid);
}

TEST(QuestionStream, TagCountMismatchNamesTheLine) {
  TempDir dir;
  testutil::write_text(dir.file("q.jsonl"),
                       R"({"qid":"q1","text":"a","tokens":["a"]})"
                       "\n"
                       R"({"qid":"q2","text":"x","tokens":["a","b","c"],"pos_tags":["DT","NN"]})"
                       "\n");
  QuestionStream s(dir.file("q.jsonl"));
  ASSERT_TRUE(s.next());
  try {
    s.next();
    FAIL() << "expected an error";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::parse);
    EXPECT_NE(std::string(e.what()).find("q.jsonl:2"), std::string::npos) << e.what();
  }
}

TEST(QuestionStream, MalformedJsonNamesTheLine) {
  TempDir dir;
  testutil::write_text(dir.file("q.jsonl"), "\n{not json}\n");
  try {
    read_questions(dir.file("q.jsonl"));
    FAIL();
  } catch (const Error& e) {
    EXPECT_NE(std::string(e.what()).find(":2"), std::string::npos);
  }
}

TEST(QuestionStream, PeakMemoryIndependentOfRecordCount) {
  TempDir dir;
  const std::string line =
      R"({"qid":"q","text":"what color is the dog","tokens":["what","color","is","the","dog"],"pos_tags":["WP","NN","VBZ","DT","NN"]})";
  auto measure = [&](std::size_t n) {
    {
      std::ofstream out(dir.file("q.jsonl"));
      for (std::size_t i = 0; i < n; ++i) out << line << '\n';
    }
    const auto base = alloc_counter::live.load();
    alloc_counter::reset_peak();
    std::size_t count = 0;
    {
      QuestionStream s(dir.file("q.jsonl"));
      while (auto q = s.next()) ++count;
    }
    EXPECT_EQ(count, n);
    return alloc_counter::peak_above(base);
  };
  const auto small = measure(1000);
  const auto large = measure(10000);
  EXPECT_LE(large, small + 256) << "small=" << small << " large=" << large;
}

TEST(Annotations, RoundTripAndValidation) {
  TempDir dir;
  AnnotationMap m;
  m["img1"] = ImageAnnotation{"img1", {"cat", "mat"}, {{"cat", {"small"}}}};
  write_annotations(dir.file("a.jsonl"), m);
  EXPECT_EQ(read_annotations(dir.file("a.jsonl")), m);

  testutil::write_text(dir.file("bad.jsonl"), R"({"iid":"x","objects":["cat"],"scene_graph":{"dog":["big"]}})");
  EXPECT_THROW(read_annotations(dir.file("bad.jsonl")), Error);
}

TEST(FeatureStore, ReportsDim4096) {
  TempDir dir;
  std::vector<float> data(2 * 4096, 0.25f);
  FeatureStore({4096}, {"a", "b"}, data).save(dir.file("f.bin"));
  EXPECT_EQ(open_feature_store(dir.file("f.bin")).dim(), 4096u);
}

TEST(FeatureStore, RoundTripIsBitExact) {
  TempDir dir;
  auto store = testutil::random_store(5, 8, 3);
  // A few awkward values.
  std::vector<float> data;
  for (std::size_t r = 0; r < 5; ++r) {
    auto row = store.row(r);
    data.insert(data.end(), row.begin(), row.end());
  }
  data[0] = -0.0f;
  data[1] = 1e-40f;  // subnormal
  data[2] = 3.4e38f;
  FeatureStore fs(8, store.ids(), data);
  fs.save(dir.file("f.bin"));
  auto back = open_feature_store(dir.file("f.bin"));
  ASSERT_EQ(back.size(), 5u);
  for (std::size_t r = 0; r < 5; ++r) {
    EXPECT_EQ(back.id(r), fs.id(r));
    for (std::size_t k = 0; k < 8; ++k) {
      EXPECT_EQ(std::bit_cast<std::uint32_t>(back.row(r)[k]), std::bit_cast<std::uint32_t>(fs.row(r)[k]));
    }
  }
}

TEST(FeatureStore, LayoutMatchesFormat) {
  TempDir dir;
  FeatureStore({2}, {"ab"}, {1.0f, -2.0f}).save(dir.file("f.bin"));
  const auto bytes = testutil::read_text(dir.file("f.bin"));
  const std::string expected("QRFS\x01\0\0\0\x01\0\0\0\x02\0\0\0\x02\0ab\0\0\x80\x3f\0\0\0\xc0", 28);
  EXPECT_EQ(bytes, expected);
}

TEST(FeatureStore, DistinctErrors) {
  TempDir dir;
  testutil::write_text(dir.file("magic.bin"), "XXXX\x01\0\0\0");
  EXPECT_EQ(code_of([&] { open_feature_store(dir.file("magic.bin")); }), ErrorCode::bad_magic);

  FeatureStore({4}, {"a", "b"}, std::vector<float>(8, 1.0f)).save(dir.file("full.bin"));
  auto bytes = testutil::read_text(dir.file("full.bin"));
  testutil::write_text(dir.file("trunc.bin"), bytes.substr(0, bytes.size() - 3));
  EXPECT_EQ(code_of([&] { open_feature_store(dir.file("trunc.bin")); }), ErrorCode::truncated);

  // Same bytes, second id rewritten to duplicate the first.
  auto dup = bytes;
  const auto pos = dup.find('b', 16);
  dup[pos] = 'a';
  testutil::write_text(dir.file("dup.bin"), dup);
  EXPECT_EQ(code_of([&] { open_feature_store(dir.file("dup.bin")); }), ErrorCode::duplicate);

  auto fs = open_feature_store(dir.file("full.bin"));
  EXPECT_EQ(code_of([&] { fs.row("zzz"); }), ErrorCode::not_found);
  EXPECT_EQ(code_of([&] { open_feature_store(dir.file("missing.bin")); }), ErrorCode::io);
}

TEST(Manifest, EmptyRoundTrip) {
  TempDir dir;
  DatasetManifest m = DatasetManifest::from_pairs({});
  write_manifest(m, dir.file("m.jsonl"));
  auto back = read_manifest(dir.file("m.jsonl"));
  EXPECT_TRUE(back.pairs.empty());
  EXPECT_EQ(back.stats, DatasetStats{});
}

TEST(Manifest, CountsAndRoundTrip) {
  TempDir dir;
  auto m = DatasetManifest::from_pairs({positive("q1", "a"), positive("q2", "b"), negative("q1", "c", PremiseOrder::first, {"dog"}),
                                        negative("q1", "d", PremiseOrder::second, {"small cat"}),
                                        negative("q2", "e", PremiseOrder::first, {"cat", "dog"})});
  EXPECT_EQ(m.stats.total, 5u);
  EXPECT_EQ(m.stats.relevant, 2u);
  EXPECT_EQ(m.stats.non_relevant, 3u);
  EXPECT_EQ(m.stats.first_order_non_relevant, 2u);
  EXPECT_EQ(m.stats.second_order_non_relevant, 1u);
  EXPECT_EQ(m.stats.first_order_relevant, 2u);
  write_manifest(m, dir.file("m.jsonl"));
  EXPECT_EQ(read_manifest(dir.file("m.jsonl")), m);
}

TEST(Manifest, TamperedStatsIsCorruption) {
  TempDir dir;
  auto m = DatasetManifest::from_pairs({positive("q1", "a"), negative("q1", "c", PremiseOrder::first, {"dog"})});
  write_manifest(m, dir.file("m.jsonl"));
  auto text = testutil::read_text(dir.file("m.jsonl"));
  const auto pos = text.find("\"total\":2");
  ASSERT_NE(pos, std::string::npos);
  text.replace(pos, 9, "\"total\":3");
  testutil::write_text(dir.file("m.jsonl"), text);
  EXPECT_EQ(code_of([&] { read_manifest(dir.file("m.jsonl")); }), ErrorCode::corrupt);
}

TEST(Manifest, RejectsDuplicatesAndInvalidPairs) {
  TempDir dir;
  auto dup = DatasetManifest::from_pairs({positive("q1", "a"), positive("q1", "a")});
  EXPECT_EQ(code_of([&] { write_manifest(dup, dir.file("m.jsonl")); }), ErrorCode::duplicate);

  LabeledPair bad = negative("q1", "b", PremiseOrder::first, {});
  EXPECT_THROW(validate(bad), Error);
  LabeledPair bad2 = positive("q1", "b");
  bad2.order = PremiseOrder::first;
  EXPECT_THROW(validate(bad2), Error);
}

TEST(Manifest, StatsArePureFunctionOfPairs) {
  Rng rng(11);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<LabeledPair> pairs;
    for (int i = 0; i < 30; ++i) {
      const auto qid = "q" + std::to_string(i);
      if (rng.uniform() < 0.5) {
        auto p = positive(qid, "a");
        p.has_first_order = rng.uniform() < 0.5;
        p.has_second_order = rng.uniform() < 0.5;
        pairs.push_back(p);
      } else {
        pairs.push_back(negative(qid, "b", rng.uniform() < 0.5 ? PremiseOrder::first : PremiseOrder::second, {"x"}));
      }
    }
    auto s = compute_stats(pairs);
    EXPECT_EQ(s.total, s.relevant + s.non_relevant);
    EXPECT_EQ(s.first_order_non_relevant + s.second_order_non_relevant, s.non_relevant);
    EXPECT_EQ(s.first_order_total, s.first_order_relevant + s.first_order_non_relevant);
    EXPECT_EQ(stats_from_json(to_json(s)), s);
  }
}
