#include <gtest/gtest.h>

#include <fstream>
#include <set>

#include "dialrel/corpus.hpp"
#include "dialrel/errors.hpp"
#include "support.hpp"

using namespace dialrel;
namespace fs = std::filesystem;

namespace {

// HUMOD-like raw file: one record per context, a gold and a random response.
fs::path write_humod_raw(const fs::path& dir, std::size_t contexts) {
  const auto path = dir / "humod.jsonl";
  std::ofstream out(path);
  for (std::size_t i = 0; i < contexts; ++i) {
    out << R"({"id":"h)" << i << R"(","context":["hi there","how are you",)"
        << R"("fine thanks","what about you"],"gold":"great, thank you )" << i
        << R"(","random":"the train leaves at nine","gold_ratings":[5,4,5],"random_ratings":[1,2,1]})" << '\n';
  }
  return path;
}

AdapterConfig humod_adapter() {
  return {{"format", "jsonl"},
          {"context_field", "context"},
          {"context_id_field", "id"},
          {"response_fields", "gold,random"},
          {"ratings_fields", "gold_ratings,random_ratings"},
          {"sources", "human,random_human"}};
}

Corpus contexts_only(Dataset d, std::size_t n) {
  Corpus c;
  c.dataset = d;
  for (std::size_t i = 0; i < n; ++i) {
    EvalExample ex;
    ex.id = "c" + std::to_string(i) + "-r0";
    ex.dataset = d;
    ex.context_id = "c" + std::to_string(i);
    ex.context.turns = {{0, "turn"}};
    ex.response.text = "reply " + std::to_string(i);
    ex.response.source = ResponseSource::human;
    ex.response.ratings = {3};
    ex.response.mean_rating = 3;
    c.examples.push_back(ex);
  }
  return c;
}

std::map<Split, std::set<std::string>> split_contexts(const Corpus& c) {
  std::map<Split, std::set<std::string>> m;
  for (const auto& ex : c.examples) m[ex.split].insert(ex.context_id);
  return m;
}

}  // namespace

TEST(MeanRating, Arithmetic) {
  EXPECT_NEAR(mean_rating({5, 4, 5}), 14.0 / 3.0, 1e-15);
  EXPECT_THROW(mean_rating({}), std::invalid_argument);
}

TEST(Ingest, HumodShape) {
  const auto dir = testsupport::temp_dir("ingest_humod");
  const auto corpus = ingest(Dataset::HUMOD, write_humod_raw(dir, 4750), humod_adapter());
  EXPECT_EQ(corpus.examples.size(), 9500u);
  EXPECT_EQ(corpus.context_order().size(), 4750u);
  const auto& ex = corpus.examples.front();
  EXPECT_EQ(ex.context.turns.size(), 4u);
  EXPECT_EQ(ex.context.turns[1].speaker, 1);
  EXPECT_EQ(ex.response.source, ResponseSource::human);
  EXPECT_NEAR(ex.response.mean_rating, 14.0 / 3.0, 1e-12);
  EXPECT_EQ(corpus.examples[1].response.source, ResponseSource::random_human);
  EXPECT_EQ(ex.id, "h0-r0");
}

TEST(Ingest, EmptyFileHasNoRecords) {
  const auto dir = testsupport::temp_dir("ingest_empty");
  std::ofstream(dir / "empty.jsonl").close();
  try {
    ingest(Dataset::HUMOD, dir / "empty.jsonl", humod_adapter());
    FAIL() << "expected DataError";
  } catch (const DataError& e) {
    EXPECT_NE(std::string(e.what()).find("no records"), std::string::npos);
  }
}

TEST(Ingest, RatingOutsideLikertRange) {
  const auto dir = testsupport::temp_dir("ingest_range");
  std::ofstream(dir / "bad.jsonl") << R"({"context":["a"],"response":"b","ratings":[4]})" << '\n';
  EXPECT_THROW(ingest(Dataset::USR_TC, dir / "bad.jsonl", {}), DataError);
  EXPECT_NO_THROW(ingest(Dataset::HUMOD, dir / "bad.jsonl", {}));
}

TEST(Ingest, MalformedRecordNamesIndex) {
  const auto dir = testsupport::temp_dir("ingest_malformed");
  std::ofstream(dir / "bad.jsonl") << R"({"context":["a"],"response":"b","ratings":[4]})" << "\n{oops\n";
  try {
    ingest(Dataset::HUMOD, dir / "bad.jsonl", {});
    FAIL() << "expected DataError";
  } catch (const DataError& e) {
    EXPECT_NE(std::string(e.what()).find("1"), std::string::npos);
  }
}

TEST(Ingest, DelimitedLayout) {
  const auto dir = testsupport::temp_dir("ingest_tsv");
  {
    std::ofstream out(dir / "pdd.tsv");
    out << "context\tresponse\tratings\n";
    out << "hello __eou__ hi\tnice to meet you\t4,5,3\n";
    out << "what time is it\tbananas\t1,1,2\n";
  }
  const auto c = ingest(Dataset::P_DD, dir / "pdd.tsv", {{"format", "tsv"}});
  ASSERT_EQ(c.examples.size(), 2u);
  EXPECT_EQ(c.examples[0].context.turns.size(), 2u);
  EXPECT_EQ(c.examples[0].context.turns[1].text, "hi");
  EXPECT_DOUBLE_EQ(c.examples[1].response.mean_rating, 4.0 / 3.0);
}

TEST(Splits, Humod) {
  const auto dir = testsupport::temp_dir("splits_humod");
  const auto corpus = make_splits(ingest(Dataset::HUMOD, write_humod_raw(dir, 4750), humod_adapter()));
  auto m = split_contexts(corpus);
  EXPECT_EQ(m[Split::train].size(), 3750u);
  EXPECT_EQ(m[Split::valid].size(), 500u);
  EXPECT_EQ(m[Split::test].size(), 500u);
  EXPECT_TRUE(m[Split::train].count("h0"));
  EXPECT_TRUE(m[Split::valid].count("h3750"));
  EXPECT_TRUE(m[Split::test].count("h4749"));
}

TEST(Splits, UsrTcAndTestOnlySets) {
  auto m = split_contexts(make_splits(contexts_only(Dataset::USR_TC, 60)));
  EXPECT_EQ(m[Split::valid].size(), 30u);
  EXPECT_EQ(m[Split::test].size(), 30u);
  EXPECT_TRUE(m[Split::valid].count("c0"));
  m = split_contexts(make_splits(contexts_only(Dataset::P_DD, 200)));
  EXPECT_EQ(m[Split::test].size(), 200u);
  EXPECT_EQ(m.count(Split::train), 0u);
  m = split_contexts(make_splits(contexts_only(Dataset::FED_REL, 375)));
  EXPECT_EQ(m[Split::test].size(), 375u);
}

TEST(ShuffleNegatives, HumodPool) {
  const auto dir = testsupport::temp_dir("shuffle");
  const auto corpus = make_splits(ingest(Dataset::HUMOD, write_humod_raw(dir, 4750), humod_adapter()));
  const auto a = shuffle_negatives(corpus, 3750, 0);
  ASSERT_EQ(a.size(), 3750u);
  const auto gold = gold_responses(corpus);
  for (const auto& n : a) {
    EXPECT_NE(n.source_context_id, n.context_id);
    EXPECT_EQ(n.negative_text, gold.at(n.source_context_id)->response.text);
  }
  const auto b = shuffle_negatives(corpus, 3750, 0);
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_EQ(a[i].source_context_id, b[i].source_context_id);
  const auto c = shuffle_negatives(corpus, 3750, 1);
  std::size_t same = 0;
  for (std::size_t i = 0; i < a.size(); ++i) same += a[i].source_context_id == c[i].source_context_id;
  EXPECT_LT(same, 100u);
}

TEST(ShuffleNegatives, SingleResponsePoolRejected) {
  auto corpus = contexts_only(Dataset::HUMOD, 1);
  corpus.examples[0].split = Split::train;
  EXPECT_ANY_THROW(shuffle_negatives(corpus, 1, 0));
}

TEST(CorpusFile, RoundTrip) {
  const auto dir = testsupport::temp_dir("corpus_rt");
  const auto corpus = make_splits(ingest(Dataset::HUMOD, write_humod_raw(dir, 20), humod_adapter()));
  write_corpus(corpus, dir / "c.jsonl");
  const auto back = read_corpus(dir / "c.jsonl");
  ASSERT_EQ(back.examples.size(), corpus.examples.size());
  EXPECT_EQ(back.dataset, corpus.dataset);
  for (std::size_t i = 0; i < back.examples.size(); ++i) {
    const auto& x = back.examples[i];
    const auto& y = corpus.examples[i];
    EXPECT_EQ(x.id, y.id);
    EXPECT_EQ(x.split, y.split);
    EXPECT_EQ(x.context, y.context);
    EXPECT_EQ(x.response.ratings, y.response.ratings);
    EXPECT_EQ(x.response.mean_rating, y.response.mean_rating);
  }
}
