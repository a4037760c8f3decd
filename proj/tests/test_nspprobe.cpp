#include <gtest/gtest.h>

#include <algorithm>

#include "dialrel/errors.hpp"
#include "dialrel/nspprobe.hpp"
#include "dialrel/rng.hpp"
#include "support.hpp"

using namespace dialrel;

namespace {

NspHead random_head(Engine& eng, std::uint32_t dim) {
  NspHead h;
  h.dim = dim;
  for (auto& row : h.weights) {
    row.resize(dim);
    for (auto& w : row) w = static_cast<float>(standard_normal(eng));
  }
  h.bias = {static_cast<float>(standard_normal(eng)), static_cast<float>(standard_normal(eng))};
  return h;
}

}  // namespace

TEST(TopK, MagnitudeRankingAndTies) {
  RelevanceModel m;
  m.weights = {0.5, 0.01, -0.3};
  EXPECT_EQ(top_k_mask(m, 2), (FeatureMask{true, false, true}));
  EXPECT_EQ(top_k_mask(m, 3), (FeatureMask{true, true, true}));
  m.weights = {-0.2, 0.2, 0.1};
  EXPECT_EQ(top_k_mask(m, 1), (FeatureMask{true, false, false}));
  EXPECT_THROW(top_k_mask(m, 4), std::invalid_argument);
}

TEST(Predict, BiasDecidesZeroFeature) {
  NspHead h;
  h.dim = 2;
  h.weights = {std::vector<float>{1, 1}, std::vector<float>{-1, 2}};
  const std::vector<float> zero{0, 0};
  h.bias = {0.0f, 1.0f};
  EXPECT_EQ(nsp_predict(h, zero), NspLabel::not_next);
  h.bias = {1.0f, 0.0f};
  EXPECT_EQ(nsp_predict(h, zero), NspLabel::is_next);
  h.bias = {0.5f, 0.5f};
  EXPECT_EQ(nsp_predict(h, zero), NspLabel::is_next);
}

TEST(Predict, MatchesAffineOracle) {
  Engine eng(21);
  for (int t = 0; t < 200; ++t) {
    const auto h = random_head(eng, 24);
    std::vector<float> x(24);
    for (auto& v : x) v = static_cast<float>(standard_normal(eng));
    long double s[2];
    for (int r = 0; r < 2; ++r) {
      s[r] = h.bias[r];
      for (std::size_t i = 0; i < x.size(); ++i) s[r] += static_cast<long double>(h.weights[r][i]) * x[i];
    }
    EXPECT_EQ(nsp_predict(h, x), s[0] >= s[1] ? NspLabel::is_next : NspLabel::not_next);
  }
}

TEST(Accuracy, MaskPropertiesAndOrder) {
  Engine eng(5);
  const auto h = random_head(eng, 16);
  std::vector<std::vector<float>> feats(300, std::vector<float>(16));
  std::vector<LabeledFeature> pairs;
  for (auto& f : feats) {
    for (auto& v : f) v = static_cast<float>(standard_normal(eng));
    pairs.push_back({f, uniform_below(eng, 2) ? NspLabel::is_next : NspLabel::not_next});
  }
  const double base = nsp_accuracy(h, pairs);
  EXPECT_GE(base, 0.0);
  EXPECT_LE(base, 1.0);
  EXPECT_EQ(nsp_accuracy(h, pairs, FeatureMask(16, true)), base);

  auto shuffled = pairs;
  std::reverse(shuffled.begin(), shuffled.end());
  EXPECT_EQ(nsp_accuracy(h, shuffled), base);
  auto doubled = pairs;
  doubled.insert(doubled.end(), pairs.begin(), pairs.end());
  EXPECT_EQ(nsp_accuracy(h, doubled), base);

  // Zeroing head columns outside the mask makes masking a no-op.
  FeatureMask mask(16, false);
  for (std::size_t i = 0; i < 16; i += 3) mask[i] = true;
  auto zeroed = h;
  for (auto& row : zeroed.weights) {
    for (std::size_t i = 0; i < 16; ++i) {
      if (!mask[i]) row[i] = 0;
    }
  }
  for (const auto& p : pairs) EXPECT_EQ(nsp_predict(zeroed, p.feature, mask), nsp_predict(zeroed, p.feature));
}

TEST(Accuracy, AllCorrectAndEmpty) {
  NspHead h;
  h.dim = 1;
  h.weights = {std::vector<float>{1}, std::vector<float>{-1}};
  const std::vector<float> pos{1}, neg{-1};
  std::vector<LabeledFeature> pairs{{pos, NspLabel::is_next}, {neg, NspLabel::not_next}};
  EXPECT_EQ(nsp_accuracy(h, pairs), 1.0);
  EXPECT_THROW(nsp_accuracy(h, std::vector<LabeledFeature>{}), std::invalid_argument);
}

TEST(Labels, RoundTripAndJoin) {
  const auto dir = testsupport::temp_dir("labels");
  std::vector<LabelRecord> labels{{"p0", NspLabel::is_next}, {"p1", NspLabel::not_next}};
  write_labels(labels, dir / "l.jsonl");
  const auto back = read_labels(dir / "l.jsonl");
  ASSERT_EQ(back.size(), 2u);
  EXPECT_EQ(back[1].label, NspLabel::not_next);
  EXPECT_EQ(parse_nsp_label("0"), NspLabel::is_next);
  EXPECT_EQ(parse_nsp_label("1"), NspLabel::not_next);

  FeatureStore store(2);
  store.add({"p0", FeatureKind::SOLO_NSP, 2, {1, 2}, 0, 0, {}, ""});
  EXPECT_THROW(labeled_features(store, labels), DataError);
  store.add({"p1", FeatureKind::SOLO_NSP, 2, {3, 4}, 0, 0, {}, ""});
  const auto joined = labeled_features(store, labels);
  ASSERT_EQ(joined.size(), 2u);
  EXPECT_EQ(joined[1].feature[0], 3.0f);
}
