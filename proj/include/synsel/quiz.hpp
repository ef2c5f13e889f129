#pragma once

#include <future>
#include <thread>
#include <unordered_set>

#include "synsel/agent.hpp"
#include "synsel/stats.hpp"

namespace synsel {

struct QuizQuestion {
  TargetSentence sentence;  // the blank sits at target_index
  Word gold = Word::kFirst;
};

struct Quiz {
  std::string quiz_id;
  std::string pair_id;
  std::vector<QuizQuestion> questions;
  std::size_t k = 0;
  std::uint64_t seed = 0;

  std::vector<std::string> question_ids() const {
    std::vector<std::string> ids;
    ids.reserve(questions.size());
    for (const auto& q : questions) ids.push_back(q.sentence.sentence_id);
    return ids;
  }

  std::vector<Json> to_records() const {
    std::vector<Json> out;
    for (const auto& q : questions) {
      Json s = q.sentence.to_json();
      s["tokens"][q.sentence.target_index] = "___";
      out.push_back(Json{{"quiz_id", quiz_id}, {"question_id", q.sentence.sentence_id},
                         {"gold", to_int(q.gold)}, {"sentence", s}});
    }
    return out;
  }
};

// k questions from the test split, ceil(k/2) gold w1 and floor(k/2) gold w2,
// sampled without replacement and shuffled. Ids in `exclude` are never used.
inline Quiz make_quiz(const SentencePool& pool, std::size_t k, std::uint64_t seed,
                      const std::unordered_set<std::string>& exclude = {}) {
  if (k == 0) throw Error("quiz size must be positive");
  Quiz quiz;
  quiz.pair_id = pool.pair_id;
  quiz.k = k;
  quiz.seed = seed;
  quiz.quiz_id = pool.pair_id + ":k" + std::to_string(k) + ":s" + std::to_string(seed);
  const std::array<std::size_t, 2> need{(k + 1) / 2, k / 2};
  for (Word w : kBothWords) {
    std::vector<const TargetSentence*> cands;
    for (const auto& s : pool.test(w)) {
      if (!exclude.contains(s.sentence_id)) cands.push_back(&s);
    }
    if (cands.size() < need[slot(w)]) {
      throw Error("insufficient test sentences for a k=" + std::to_string(k) + " quiz: need " +
                  std::to_string(need[slot(w)]) + " for word " + std::to_string(to_int(w)) +
                  ", have " + std::to_string(cands.size()));
    }
    Rng rng(derive_seed(seed, 0x51000 + static_cast<std::uint64_t>(to_int(w))));
    for (std::size_t i : rng.sample_indices(cands.size(), need[slot(w)])) {
      quiz.questions.push_back({*cands[i], w});
    }
  }
  Rng rng(derive_seed(seed, 0x51515));
  rng.shuffle(quiz.questions);
  return quiz;
}

struct QuestionOutcome {
  std::string question_id;
  Word chosen = Word::kFirst;
  Word gold = Word::kFirst;
};

struct QuizResult {
  std::string quiz_id;
  std::string set_id;
  double accuracy = 0.0;
  std::vector<QuestionOutcome> per_question;

  std::size_t correct() const {
    std::size_t n = 0;
    for (const auto& q : per_question) n += q.chosen == q.gold;
    return n;
  }

  Json to_json() const { return Json{{"set_id", set_id}, {"quiz_id", quiz_id}, {"accuracy", accuracy}}; }
};

inline QuizResult run_quiz(const Agent& agent, const ExampleSet& set, const Quiz& quiz) {
  if (set.pair_id != quiz.pair_id || agent.lexicon().pair.pair_id != quiz.pair_id) {
    throw Error("run_quiz: agent, set and quiz must share a pair (agent " +
                agent.lexicon().pair.pair_id + ", set " + set.pair_id + ", quiz " + quiz.pair_id + ")");
  }
  if (quiz.questions.empty()) throw Error("run_quiz: empty quiz");
  QuizResult r;
  r.quiz_id = quiz.quiz_id;
  r.set_id = set.id();
  for (const auto& q : quiz.questions) {
    r.per_question.push_back({q.sentence.sentence_id, agent.answer(set, q.sentence), q.gold});
  }
  r.accuracy = static_cast<double>(r.correct()) / static_cast<double>(quiz.questions.size());
  return r;
}

// Maps fn over [0, n) on up to `workers` threads; results keep index order.
template <typename Fn>
auto parallel_map(std::size_t n, Fn fn, std::size_t workers = 0) {
  using R = std::invoke_result_t<Fn, std::size_t>;
  if (workers == 0) workers = std::max(1u, std::thread::hardware_concurrency());
  std::vector<R> out(n);
  if (workers <= 1 || n <= 1) {
    for (std::size_t i = 0; i < n; ++i) out[i] = fn(i);
    return out;
  }
  std::vector<std::future<void>> tasks;
  const std::size_t chunk = (n + workers - 1) / workers;
  for (std::size_t b = 0; b < n; b += chunk) {
    const std::size_t e = std::min(n, b + chunk);
    tasks.push_back(std::async(std::launch::async, [&, b, e] {
      for (std::size_t i = b; i < e; ++i) out[i] = fn(i);
    }));
  }
  for (auto& t : tasks) t.get();
  return out;
}

struct KCalibration {
  std::size_t k = 0;
  std::vector<double> correlations;  // defined pairs only
  std::size_t excluded = 0;          // pairs with a zero-variance vector
  std::optional<double> min;
  std::optional<double> median;
};

struct CalibrationReport {
  std::vector<std::size_t> k_candidates;
  std::vector<KCalibration> per_k;

  Json to_json() const {
    Json rows = Json::array();
    for (const auto& c : per_k) {
      Json r{{"k", c.k}, {"correlations", c.correlations}, {"excluded", c.excluded}};
      r["min"] = c.min ? Json(*c.min) : Json(nullptr);
      r["median"] = c.median ? Json(*c.median) : Json(nullptr);
      rows.push_back(r);
    }
    return Json{{"k_candidates", k_candidates}, {"per_k", rows}};
  }
};

inline constexpr std::size_t kCalibrationQuizzes = 5;

// For each k, builds five quizzes with distinct derived seeds, scores every
// set on each, and correlates the five accuracy vectors pairwise. `score`
// maps (set index, quiz) to an accuracy.
template <typename Score>
CalibrationReport calibrate_quiz_size(std::size_t n_sets, const SentencePool& pool,
                                      const std::vector<std::size_t>& k_candidates, std::uint64_t seed,
                                      Score&& score) {
  if (n_sets < 2) throw Error("calibration needs at least 2 example sets");
  if (k_candidates.size() < 2) throw Error("calibration needs at least 2 k candidates");
  CalibrationReport report;
  report.k_candidates = k_candidates;
  for (std::size_t k : k_candidates) {
    std::vector<std::vector<double>> acc;
    for (std::size_t qi = 0; qi < kCalibrationQuizzes; ++qi) {
      const Quiz quiz = make_quiz(pool, k, derive_seed(seed, k * 16 + qi));
      std::vector<double> v(n_sets);
      for (std::size_t s = 0; s < n_sets; ++s) v[s] = score(s, quiz);
      acc.push_back(std::move(v));
    }
    KCalibration kc;
    kc.k = k;
    for (std::size_t a = 0; a < acc.size(); ++a) {
      for (std::size_t b = a + 1; b < acc.size(); ++b) {
        try {
          kc.correlations.push_back(pearson_correlation(acc[a], acc[b]));
        } catch (const DegenerateStatistic&) {
          ++kc.excluded;
        }
      }
    }
    if (!kc.correlations.empty()) {
      std::vector<double> sorted = kc.correlations;
      std::sort(sorted.begin(), sorted.end());
      kc.min = sorted.front();
      const std::size_t n = sorted.size();
      kc.median = n % 2 ? sorted[n / 2] : 0.5 * (sorted[n / 2 - 1] + sorted[n / 2]);
    }
    report.per_k.push_back(std::move(kc));
  }
  return report;
}

inline CalibrationReport calibrate_quiz_size(const Agent& agent, const std::vector<ExampleSet>& sets,
                                             const SentencePool& pool,
                                             const std::vector<std::size_t>& k_candidates,
                                             std::uint64_t seed) {
  return calibrate_quiz_size(sets.size(), pool, k_candidates, seed,
                             [&](std::size_t s, const Quiz& quiz) {
                               return run_quiz(agent, sets[s], quiz).accuracy;
                             });
}

}  // namespace synsel
