#pragma once

#include <set>
#include <sstream>

#include "synsel/quiz.hpp"

namespace synsel {

enum class MaterialCondition { kAppropriate, kInappropriate };

enum class TTestVariant { kPaired, kWelch };

// Swaps the target word of every member; each corrupted sentence stays in
// the slot it was presented in.
inline ExampleSet corrupt_example_set(const ExampleSet& set, const PairLexicon& lex) {
  return swap_all(set, lex);
}

struct BehaviorReport {
  std::string pair_id;
  std::size_t n_sets = 0;
  std::string quiz_id;
  std::vector<std::string> question_ids;
  std::vector<std::string> set_ids;
  std::vector<double> acc_good;
  std::vector<double> acc_bad;
  std::optional<double> t_score;
  std::optional<double> p_value;
  std::string t_error;  // set when the test is undefined
  double delta = 0.0;
  double lexical_acc = 0.0;

  Json to_json() const {
    Json j{{"pair_id", pair_id}, {"n_sets", n_sets}};
    j["t"] = t_score ? Json(*t_score) : Json(nullptr);
    j["p"] = p_value ? Json(*p_value) : Json(nullptr);
    j["acc"] = lexical_acc;
    j["delta"] = delta;
    if (!t_error.empty()) j["t_error"] = t_error;
    j["quiz_id"] = quiz_id;
    j["question_ids"] = question_ids;
    j["set_ids"] = set_ids;
    j["acc_good"] = acc_good;
    j["acc_bad"] = acc_bad;
    return j;
  }

  static BehaviorReport from_json(const Json& j) {
    BehaviorReport r;
    r.pair_id = j.at("pair_id").get<std::string>();
    r.n_sets = j.at("n_sets").get<std::size_t>();
    if (!j.at("t").is_null()) r.t_score = j.at("t").get<double>();
    if (!j.at("p").is_null()) r.p_value = j.at("p").get<double>();
    r.lexical_acc = j.at("acc").get<double>();
    r.delta = j.at("delta").get<double>();
    r.t_error = j.value("t_error", std::string{});
    r.quiz_id = j.value("quiz_id", std::string{});
    r.question_ids = j.value("question_ids", std::vector<std::string>{});
    r.set_ids = j.value("set_ids", std::vector<std::string>{});
    r.acc_good = j.value("acc_good", std::vector<double>{});
    r.acc_bad = j.value("acc_bad", std::vector<double>{});
    return r;
  }
};

// Fills delta, lexical_acc and the test statistics from the two lists.
inline void summarize(BehaviorReport& r, TTestVariant variant = TTestVariant::kPaired) {
  if (r.acc_good.size() != r.acc_bad.size()) throw Error("behavior report: list lengths differ");
  r.n_sets = r.acc_good.size();
  r.lexical_acc = mean(r.acc_good);
  r.delta = r.lexical_acc - mean(r.acc_bad);
  r.t_score.reset();
  r.p_value.reset();
  r.t_error.clear();
  try {
    const auto t = variant == TTestVariant::kPaired ? paired_t_test(r.acc_good, r.acc_bad)
                                                    : welch_t_test(r.acc_good, r.acc_bad);
    r.t_score = t.t_score;
    r.p_value = t.p_value;
  } catch (const DegenerateStatistic& e) {
    r.t_error = e.what();
  }
}

// Draws n distinct 3+3 sets (uniform over combinations, without
// replacement) from the given per-word sentences.
inline std::vector<ExampleSet> sample_example_sets(const std::string& pair_id,
                                                   const std::array<std::vector<TargetSentence>, 2>& by_word,
                                                   std::size_t n, std::uint64_t seed) {
  auto choose3 = [](double m) { return m < 3 ? 0.0 : m * (m - 1) * (m - 2) / 6.0; };
  const double capacity = choose3(static_cast<double>(by_word[0].size())) *
                          choose3(static_cast<double>(by_word[1].size()));
  if (capacity < static_cast<double>(n)) {
    throw Error("insufficient pool: " + std::to_string(by_word[0].size()) + "+" +
                std::to_string(by_word[1].size()) + " sentences cannot form " + std::to_string(n) +
                " distinct 3+3 sets");
  }
  Rng rng(derive_seed(seed, 0x5e75));
  std::set<std::array<std::size_t, 6>> seen;
  std::vector<ExampleSet> out;
  while (out.size() < n) {
    std::array<std::size_t, 6> key{};
    for (std::size_t w = 0; w < 2; ++w) {
      auto idx = rng.sample_indices(by_word[w].size(), 3);
      std::sort(idx.begin(), idx.end());
      std::copy(idx.begin(), idx.end(), key.begin() + 3 * static_cast<std::ptrdiff_t>(w));
    }
    if (!seen.insert(key).second) continue;
    ExampleSet set;
    set.pair_id = pair_id;
    for (std::size_t i = 0; i < 6; ++i) set.examples[i] = by_word[i / 3][key[i]];
    out.push_back(std::move(set));
  }
  return out;
}

struct BehaviorOptions {
  TTestVariant variant = TTestVariant::kPaired;
  std::size_t workers = 0;  // 0: hardware concurrency
};

// One k-question quiz is drawn from the test split and shared by every set
// under both conditions; sets come from the remaining test sentences.
inline BehaviorReport run_behavior_check(const Agent& agent, const SentencePool& pool, std::size_t n_sets,
                                         std::size_t k, std::uint64_t seed,
                                         const BehaviorOptions& opt = {}) {
  if (n_sets < 1) throw Error("behavior check needs at least one set");
  const PairLexicon& lex = agent.lexicon();
  if (pool.pair_id != lex.pair.pair_id) throw Error("behavior check: pool and agent pairs differ");
  const Quiz quiz = make_quiz(pool, k, derive_seed(seed, 0x9a12));
  const auto qids = quiz.question_ids();
  const std::unordered_set<std::string> used(qids.begin(), qids.end());
  std::array<std::vector<TargetSentence>, 2> rest;
  for (Word w : kBothWords) {
    for (const auto& s : pool.test(w)) {
      if (!used.contains(s.sentence_id)) rest[slot(w)].push_back(s);
    }
  }
  const auto sets = sample_example_sets(pool.pair_id, rest, n_sets, seed);

  struct Pair {
    double good = 0.0;
    double bad = 0.0;
  };
  const auto results = parallel_map(
      sets.size(),
      [&](std::size_t i) {
        return Pair{run_quiz(agent, sets[i], quiz).accuracy,
                    run_quiz(agent, corrupt_example_set(sets[i], lex), quiz).accuracy};
      },
      opt.workers);

  BehaviorReport r;
  r.pair_id = pool.pair_id;
  r.quiz_id = quiz.quiz_id;
  r.question_ids = qids;
  for (std::size_t i = 0; i < sets.size(); ++i) {
    r.set_ids.push_back(sets[i].id());
    r.acc_good.push_back(results[i].good);
    r.acc_bad.push_back(results[i].bad);
  }
  summarize(r, opt.variant);
  return r;
}

struct DeltaRow {
  std::string pair_id;
  double acc = 0.0;
  double delta = 0.0;
};

struct DeltaSummary {
  std::vector<DeltaRow> rows;
  double pearson = 0.0;

  std::string to_csv() const {
    std::ostringstream out;
    out << "pair,acc,delta\n";
    for (const auto& r : rows) out << '"' << r.pair_id << "\"," << r.acc << ',' << r.delta << '\n';
    out << "# pearson(acc, delta) = " << pearson << '\n';
    return out.str();
  }
};

inline DeltaSummary delta_summary(const std::vector<BehaviorReport>& reports) {
  if (reports.size() < 2) throw Error("delta_summary needs at least 2 reports");
  DeltaSummary s;
  std::vector<double> acc, delta;
  for (const auto& r : reports) {
    s.rows.push_back({r.pair_id, r.lexical_acc, r.delta});
    acc.push_back(r.lexical_acc);
    delta.push_back(r.delta);
  }
  s.pearson = pearson_correlation(acc, delta);
  return s;
}

}  // namespace synsel
