#include <gtest/gtest.h>

#include "support/fixtures.hpp"
#include "synsel/behavior.hpp"

using namespace synsel;

TEST(BehaviorCheck, OracleFlipsEverySet) {
  const auto& data = fixtures::small_synthetic_data();
  for (AgentMode mode : {AgentMode::kEntailment, AgentMode::kContext}) {
    const auto agent = Agent::oracle(mode, data.lexicon);
    const auto r = run_behavior_check(agent, data.pool, 30, 20, 5);
    ASSERT_EQ(r.n_sets, 30u);
    for (std::size_t i = 0; i < r.n_sets; ++i) {
      EXPECT_EQ(r.acc_good[i], 1.0);
      EXPECT_EQ(r.acc_bad[i], 0.0);
    }
    EXPECT_EQ(r.delta, 1.0);
    EXPECT_EQ(r.lexical_acc, 1.0);
    EXPECT_FALSE(r.t_score.has_value());
    EXPECT_FALSE(r.p_value.has_value());
    EXPECT_NE(r.t_error.find("degenerate"), std::string::npos);
    const auto j = r.to_json();
    EXPECT_TRUE(j["t"].is_null());
    EXPECT_EQ(BehaviorReport::from_json(j).t_error, r.t_error);
  }
}

TEST(BehaviorCheck, SetsAvoidQuizQuestionsAndAreDistinct) {
  const auto& data = fixtures::small_synthetic_data();
  const auto agent = Agent::oracle(AgentMode::kEntailment, data.lexicon);
  const auto r = run_behavior_check(agent, data.pool, 40, 30, 8);
  std::set<std::string> q(r.question_ids.begin(), r.question_ids.end());
  std::set<std::string> sets;
  for (const auto& id : r.set_ids) {
    EXPECT_TRUE(sets.insert(id).second);
    for (const auto& member : split(id, '+')) EXPECT_FALSE(q.contains(member));
  }
  // Same seed, same report.
  EXPECT_EQ(run_behavior_check(agent, data.pool, 40, 30, 8).to_json(), r.to_json());
}

TEST(SampleExampleSets, CapacityIsChecked) {
  const auto lex = fixtures::small_little();
  const auto pool = fixtures::toy_pool(lex, 4);
  const std::array<std::vector<TargetSentence>, 2> by_word{pool.test(Word::kFirst), pool.test(Word::kSecond)};
  // C(4,3)^2 = 16 distinct sets exist.
  EXPECT_EQ(sample_example_sets(pool.pair_id, by_word, 16, 1).size(), 16u);
  EXPECT_THROW(sample_example_sets(pool.pair_id, by_word, 17, 1), Error);
}

TEST(Summarize, WelchVariantAndMismatch) {
  BehaviorReport r;
  r.acc_good = {0.9, 0.8, 1.0, 0.7};
  r.acc_bad = {0.1, 0.3, 0.2, 0.2};
  summarize(r, TTestVariant::kWelch);
  EXPECT_NEAR(r.delta, 0.85 - 0.2, 1e-12);
  EXPECT_TRUE(r.p_value.has_value());
  r.acc_bad.pop_back();
  EXPECT_THROW(summarize(r), Error);
}

TEST(DeltaSummary, CorrelatesAccuracyAndGap) {
  std::vector<BehaviorReport> reports;
  for (const auto& row : fixtures::reference_delta_table()) {
    BehaviorReport r;
    r.pair_id = row.pair;
    r.lexical_acc = row.acc;
    r.delta = row.delta;
    reports.push_back(r);
  }
  const auto s = delta_summary(reports);
  EXPECT_EQ(s.rows.size(), 30u);
  EXPECT_NEAR(s.pearson, 0.87, 0.03);
  EXPECT_NE(s.to_csv().find("\"small/little\",0.87,0.71"), std::string::npos);
  EXPECT_THROW(delta_summary({reports[0]}), Error);
}

TEST(BehaviorCheck, TrainedEntailmentAgentSeparatesConditions) {
  const auto& data = fixtures::small_synthetic_data();
  const auto agent = fixtures::train_entailment_agent(data);
  const auto r = run_behavior_check(agent, data.pool, 20, 40, 2);
  EXPECT_GT(r.lexical_acc, 0.8);
  EXPECT_GT(r.delta, 0.5);
}
