#include <gtest/gtest.h>

#include <bit>

#include "support/fixtures.hpp"
#include "synsel/selector.hpp"

using namespace synsel;

namespace {

std::size_t popcount_subsets(unsigned n, int k) {
  std::size_t count = 0;
  for (unsigned mask = 0; mask < (1u << n); ++mask) count += std::popcount(mask) == k;
  return count;
}

// One-question matrix over 4 w1 and 3 w2 candidates, gold w1. w2 rows all
// score 0.5, so a set is correct iff its w1 mean beats 0.5.
ScoreMatrix tie_matrix() {
  auto m = ScoreMatrix::empty("p", {"a0", "a1", "z2", "m3"}, {"b0", "b1", "b2"}, {"q0"}, {Word::kFirst});
  const double w1[4] = {1.0, 1.0, 0.0, 0.0};
  for (std::size_t i = 0; i < 4; ++i) {
    m.set(m.row(Word::kFirst, i), 0, Word::kFirst, w1[i]);
    m.set(m.row(Word::kFirst, i), 0, Word::kSecond, 0.0);
  }
  for (std::size_t i = 0; i < 3; ++i) {
    m.set(m.row(Word::kSecond, i), 0, Word::kFirst, 0.0);
    m.set(m.row(Word::kSecond, i), 0, Word::kSecond, 0.5);
  }
  return m;
}

}  // namespace

TEST(Enumeration, TenByTenGivesEverySetOnce) {
  const auto sets = enumerate_example_sets(10, 10);
  const std::size_t expected = popcount_subsets(10, 3) * popcount_subsets(10, 3);
  EXPECT_EQ(expected, 14400u);
  EXPECT_EQ(sets.size(), expected);
  std::set<SetIndex> distinct(sets.begin(), sets.end());
  EXPECT_EQ(distinct.size(), sets.size());
  EXPECT_TRUE(std::is_sorted(sets.begin(), sets.end()));
  for (const auto& s : sets) {
    EXPECT_TRUE(s[0] < s[1] && s[1] < s[2] && s[3] < s[4] && s[4] < s[5]);
  }
}

TEST(Enumeration, SmallAndInvalidPools) {
  EXPECT_EQ(enumerate_example_sets(4, 3).size(), 4u);
  EXPECT_EQ(enumerate_example_sets(3, 3).size(), 1u);
  EXPECT_THROW(enumerate_example_sets(2, 10), Error);
}

TEST(Selection, TiedBestSetsGiveTheirExactUnion) {
  const auto r = select_from_matrix(tie_matrix(), Aggregation::kMean);
  EXPECT_EQ(r.best_correct, 1u);
  ASSERT_EQ(r.argmax_sets.size(), 2u);
  EXPECT_EQ(r.argmax_sets[0], (SetIds{"a0", "a1", "z2", "b0", "b1", "b2"}));
  EXPECT_EQ(r.argmax_sets[1], (SetIds{"a0", "a1", "m3", "b0", "b1", "b2"}));
  EXPECT_EQ(r.selected_union[0], (std::vector<std::string>{"a0", "a1", "m3", "z2"}));
  EXPECT_EQ(r.selected_union[1], (std::vector<std::string>{"b0", "b1", "b2"}));
  // a0 and a1 appear twice; m3 and z2 once each, so the id order decides.
  EXPECT_EQ(r.most_common_three[0], (std::vector<std::string>{"a0", "a1", "m3"}));
  EXPECT_EQ(r.most_common_three[1], (std::vector<std::string>{"b0", "b1", "b2"}));
  EXPECT_EQ(r.to_json()["argmax_set_count"], 2);
}

TEST(Selection, AggregationChangesTheWinners) {
  // Max aggregation: any set with a0 or a1 reaches 1.0 > 0.5.
  const auto r = select_from_matrix(tie_matrix(), Aggregation::kMax);
  EXPECT_EQ(r.argmax_sets.size(), 4u);
}

TEST(Selection, MostCommonThreeOrdersByFrequencyThenId) {
  const std::vector<SetIds> sets{{"c", "b", "a", "x", "y", "z"}, {"c", "b", "d", "x", "y", "w"},
                                 {"c", "e", "d", "x", "v", "w"}};
  const auto top = most_common_three(sets);
  EXPECT_EQ(top[0], (std::vector<std::string>{"c", "b", "d"}));
  EXPECT_EQ(top[1], (std::vector<std::string>{"x", "w", "y"}));
  EXPECT_TRUE(most_common_three(std::vector<SetIds>{})[0].empty());
}

TEST(Selection, MetricsAgainstHandCounts) {
  // 5 selected, 6 gold, 3 hits.
  const auto m = selection_metrics({std::vector<std::string>{"a", "b", "c"}, std::vector<std::string>{"x", "y"}},
                                   {std::vector<std::string>{"a", "b", "d"}, std::vector<std::string>{"x", "v", "w"}});
  EXPECT_DOUBLE_EQ(m.precision, 3.0 / 5.0);
  EXPECT_DOUBLE_EQ(m.recall, 3.0 / 6.0);
  EXPECT_DOUBLE_EQ(m.f1, 2.0 * 0.6 * 0.5 / 1.1);
  EXPECT_THROW(selection_metrics({}, {}), Error);
}

TEST(Selection, MatrixPathEqualsNaiveQuizzing) {
  const auto& data = fixtures::small_synthetic_data();
  auto cfg = AgentConfig::light_defaults(AgentMode::kEntailment);
  cfg.epochs = 3;
  const auto agent =
      train_agent(build_entailment_instances(data.pool, data.lexicon, MixRatio{2, 1}, 3, 1500), data.lexicon, cfg);
  const auto quiz = make_quiz(data.pool, 20, 17);
  const auto qids = quiz.question_ids();
  const auto pool = sample_candidate_pool(data.pool, 5, 4, {qids.begin(), qids.end()});
  const auto fast = select_best_sets(agent, pool, quiz);
  const auto naive = select_best_sets_naive(agent, pool, quiz);
  EXPECT_EQ(fast.argmax_sets, naive.argmax_sets);
  EXPECT_EQ(fast.best_accuracy, naive.best_accuracy);
  EXPECT_EQ(fast.selected_union, naive.selected_union);
  EXPECT_EQ(fast.most_common_three, naive.most_common_three);

  // Every set, not only the winners, scores the same both ways.
  const auto m = build_score_matrix(agent, pool, quiz);
  EXPECT_TRUE(m.complete());
  for (const auto& idx : enumerate_example_sets(pool)) {
    EXPECT_EQ(cached_correct(m, idx, cfg.aggregation), run_quiz(agent, materialize(pool, idx), quiz).correct());
  }
}

TEST(Selection, QuizQuestionsMayNotBeCandidates) {
  const auto& data = fixtures::small_synthetic_data();
  const auto agent = Agent::oracle(AgentMode::kEntailment, data.lexicon);
  const auto quiz = make_quiz(data.pool, 10, 1);
  auto pool = sample_candidate_pool(data.pool, 5, 2);
  pool.candidates[slot(quiz.questions[0].gold)][0] = quiz.questions[0].sentence;
  EXPECT_THROW(build_score_matrix(agent, pool, quiz), Error);
}

TEST(Selection, OracleContextAgentTakesTheNaivePath) {
  const auto& data = fixtures::small_synthetic_data();
  const auto agent = Agent::oracle(AgentMode::kContext, data.lexicon);
  const auto quiz = make_quiz(data.pool, 8, 1);
  const auto qids = quiz.question_ids();
  const auto pool = sample_candidate_pool(data.pool, 4, 2, {qids.begin(), qids.end()});
  const auto r = select_best_sets(agent, pool, quiz);
  EXPECT_EQ(r.best_accuracy, 1.0);
  EXPECT_EQ(r.argmax_sets.size(), 16u);
  EXPECT_FALSE(r.metrics.has_value());
}

TEST(CandidatePool, RecordRoundTripAndValidation) {
  const auto& data = fixtures::small_synthetic_data();
  auto pool = sample_candidate_pool(data.pool, 10, 3);
  pool.gold = {std::vector<std::string>{pool.of(Word::kFirst)[1].sentence_id},
               std::vector<std::string>{pool.of(Word::kSecond)[4].sentence_id}};
  const auto back = CandidatePool::from_records(pool.to_records());
  EXPECT_EQ(back.gold, pool.gold);
  EXPECT_EQ(back.of(Word::kSecond).size(), 10u);
  EXPECT_EQ(back.of(Word::kFirst)[2].tokens, pool.of(Word::kFirst)[2].tokens);
  EXPECT_THROW(back.validate(true), Error);  // strict wants 3 gold per word

  auto dup = pool;
  dup.candidates[0][1] = dup.candidates[0][0];
  EXPECT_THROW(dup.validate(), Error);
  auto swapped = pool;
  swapped.candidates[0][0] = swap_target(swapped.candidates[0][0], data.lexicon);
  EXPECT_THROW(swapped.validate(), Error);
}
