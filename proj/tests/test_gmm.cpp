#include <gtest/gtest.h>

#include "support/fixtures.hpp"
#include "synsel/gmm.hpp"

using namespace synsel;

namespace {

std::vector<std::vector<double>> blob(Rng& rng, double cx, double cy, std::size_t n) {
  std::vector<std::vector<double>> out;
  for (std::size_t i = 0; i < n; ++i) out.push_back({cx + 0.1 * rng.normal(), cy + 0.1 * rng.normal()});
  return out;
}

}  // namespace

TEST(GaussianMixture, SeparatesWellSeparatedClusters) {
  Rng rng(3);
  auto a = blob(rng, 0.0, 0.0, 200);
  auto b = blob(rng, 5.0, 5.0, 200);
  const auto ga = GaussianMixture::fit(a, 10, 1);
  const auto gb = GaussianMixture::fit(b, 10, 1);
  EXPECT_EQ(ga.components(), 10u);
  EXPECT_EQ(ga.dim(), 2u);
  std::size_t right = 0;
  for (const auto& x : blob(rng, 0.0, 0.0, 50)) right += ga.log_likelihood(x) > gb.log_likelihood(x);
  for (const auto& x : blob(rng, 5.0, 5.0, 50)) right += gb.log_likelihood(x) > ga.log_likelihood(x);
  EXPECT_EQ(right, 100u);
}

TEST(GaussianMixture, SameSeedSameModel) {
  Rng rng(5);
  auto a = blob(rng, 1.0, -1.0, 100);
  const auto g1 = GaussianMixture::fit(a, 3, 9);
  const auto g2 = GaussianMixture::fit(a, 3, 9);
  EXPECT_EQ(g1.log_likelihood({1.0, -1.0}), g2.log_likelihood({1.0, -1.0}));
  EXPECT_THROW(GaussianMixture::fit({}, 1, 1), Error);
  EXPECT_THROW(GaussianMixture::fit(a, 101, 1), Error);
}

TEST(HashedEmbedder, IgnoresTheTargetAndNormalizes) {
  const auto lex = fixtures::small_little();
  const auto embed = hashed_context_embedder(16, 3);
  const auto s = fixtures::sentence("s", lex, Word::kFirst, "the small dog barked .");
  const auto v = embed(s);
  const auto w = embed(swap_target(s, lex));
  EXPECT_EQ(v, w);
  double norm = 0.0;
  for (double x : v) norm += x * x;
  EXPECT_NEAR(norm, 1.0, 1e-12);
}

TEST(GmmBaseline, PrefersCandidatesTypicalOfTheirWord) {
  const auto& data = fixtures::small_synthetic_data();
  auto pool = sample_candidate_pool(data.pool, 10, 1);
  // Replace candidate 9 of each word with a sentence from the other word,
  // relabeled: its context belongs to the partner and should rank last.
  for (Word w : kBothWords) {
    TargetSentence odd = fill_target(data.pool.test(other(w))[50], w, data.lexicon);
    odd.context_owner = w;
    odd.sentence_id = "odd-" + std::to_string(to_int(w));
    pool.candidates[slot(w)][9] = odd;
  }
  const std::array<std::vector<TargetSentence>, 2> train{data.pool.train(Word::kFirst), data.pool.train(Word::kSecond)};
  const auto sel = gmm_baseline_select(pool, train, hashed_context_embedder(), 11);
  EXPECT_EQ(sel.components, (std::array<std::size_t, 2>{kGmmComponents, kGmmComponents}));
  EXPECT_TRUE(sel.warnings.empty());
  for (Word w : kBothWords) {
    ASSERT_EQ(sel.top3[slot(w)].size(), 3u);
    for (const auto& id : sel.top3[slot(w)]) EXPECT_EQ(id.rfind("odd", 0), std::string::npos);
  }
  const auto again = gmm_baseline_select(pool, train, hashed_context_embedder(), 11);
  EXPECT_EQ(again.top3, sel.top3);
}

TEST(GmmBaseline, ShortTrainingListsReduceComponents) {
  const auto& data = fixtures::small_synthetic_data();
  const auto pool = sample_candidate_pool(data.pool, 5, 1);
  const std::array<std::vector<TargetSentence>, 2> train{
      std::vector<TargetSentence>(data.pool.train(Word::kFirst).begin(), data.pool.train(Word::kFirst).begin() + 6),
      data.pool.train(Word::kSecond)};
  const auto sel = gmm_baseline_select(pool, train, hashed_context_embedder(), 2);
  EXPECT_EQ(sel.components[0], 6u);
  EXPECT_EQ(sel.warnings.size(), 1u);
  EXPECT_THROW(gmm_baseline_select(pool, {std::vector<TargetSentence>{}, train[1]}, hashed_context_embedder(), 2),
               Error);
}
