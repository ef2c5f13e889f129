#pragma once

#include <map>
#include <set>

#include "synsel/quiz.hpp"

namespace synsel {

// Candidate example sentences for one pair, with the annotator's helpful
// picks. Candidates are authentic sentences of their word.
struct CandidatePool {
  std::string pair_id;
  std::array<std::vector<TargetSentence>, 2> candidates;
  std::array<std::vector<std::string>, 2> gold;

  static constexpr std::size_t kPerWord = 10;
  static constexpr std::size_t kGoldPerWord = 3;

  const std::vector<TargetSentence>& of(Word w) const { return candidates[slot(w)]; }

  // strict: the annotated layout of 10 candidates and 3 gold ids per word.
  void validate(bool strict = false) const {
    for (Word w : kBothWords) {
      const auto& c = of(w);
      if (c.size() < ExampleSet::kPerWord) {
        throw Error("candidate pool needs at least 3 sentences per word, word " +
                    std::to_string(to_int(w)) + " has " + std::to_string(c.size()));
      }
      if (strict && c.size() != kPerWord) {
        throw Error("candidate pool must have exactly 10 sentences per word");
      }
      std::set<std::string> ids;
      for (const auto& s : c) {
        if (s.pair_id != pair_id) throw Error("candidate " + s.sentence_id + " is from another pair");
        if (s.filled_word != w || !s.authentic()) {
          throw Error("candidate " + s.sentence_id + " is not an authentic sentence of its word");
        }
        if (!ids.insert(s.sentence_id).second) throw Error("duplicate candidate " + s.sentence_id);
      }
      const auto& g = gold[slot(w)];
      if (g.size() > kGoldPerWord || (strict && g.size() != kGoldPerWord)) {
        throw Error("candidate pool must mark 3 gold sentences per word");
      }
      for (const auto& id : g) {
        if (!ids.contains(id)) throw Error("gold id " + id + " is not a candidate");
      }
    }
  }

  std::vector<Json> to_records() const {
    std::vector<Json> out;
    for (Word w : kBothWords) {
      const auto& g = gold[slot(w)];
      for (const auto& s : of(w)) {
        out.push_back(Json{{"pair_id", pair_id},
                           {"word", to_int(w)},
                           {"sentence_id", s.sentence_id},
                           {"tokens", s.tokens},
                           {"target_index", s.target_index},
                           {"gold", std::find(g.begin(), g.end(), s.sentence_id) != g.end()}});
      }
    }
    return out;
  }

  static CandidatePool from_records(const std::vector<Json>& recs) {
    CandidatePool p;
    for (const auto& r : recs) {
      TargetSentence s;
      s.pair_id = r.at("pair_id").get<std::string>();
      if (p.pair_id.empty()) p.pair_id = s.pair_id;
      if (s.pair_id != p.pair_id) throw Error("candidate pool mixes pairs");
      s.sentence_id = r.at("sentence_id").get<std::string>();
      s.tokens = r.at("tokens").get<std::vector<std::string>>();
      s.target_index = r.at("target_index").get<std::size_t>();
      if (s.target_index >= s.tokens.size()) throw Error("candidate " + s.sentence_id + ": bad target_index");
      s.filled_word = s.context_owner = word_from_int(r.at("word").get<int>());
      s.split = Split::kTest;
      if (r.value("gold", false)) p.gold[slot(s.filled_word)].push_back(s.sentence_id);
      p.candidates[slot(s.filled_word)].push_back(std::move(s));
    }
    p.validate();
    return p;
  }
};

// Draws a candidate pool (no gold) from the test split, skipping `exclude`.
inline CandidatePool sample_candidate_pool(const SentencePool& pool, std::size_t per_word, std::uint64_t seed,
                                           const std::unordered_set<std::string>& exclude = {}) {
  CandidatePool cp;
  cp.pair_id = pool.pair_id;
  for (Word w : kBothWords) {
    std::vector<const TargetSentence*> cands;
    for (const auto& s : pool.test(w)) {
      if (!exclude.contains(s.sentence_id)) cands.push_back(&s);
    }
    if (cands.size() < per_word) throw Error("not enough test sentences for the candidate pool");
    Rng rng(derive_seed(seed, 0xca9d + static_cast<std::uint64_t>(to_int(w))));
    for (std::size_t i : rng.sample_indices(cands.size(), per_word)) {
      cp.candidates[slot(w)].push_back(*cands[i]);
    }
  }
  return cp;
}

// P(entail) for every (candidate, question, fill). Candidates are numbered
// word-1 first, then word-2; fill 0 puts w1 in the blank, fill 1 puts w2.
struct ScoreMatrix {
  std::string pair_id;
  std::array<std::size_t, 2> per_word{};
  std::vector<std::string> example_ids;
  std::vector<std::string> question_ids;
  std::vector<Word> gold;
  std::vector<double> cells;

  std::size_t n_examples() const { return example_ids.size(); }
  std::size_t n_questions() const { return question_ids.size(); }
  std::size_t index(std::size_t e, std::size_t q, Word fill) const {
    return (e * n_questions() + q) * 2 + slot(fill);
  }
  double at(std::size_t e, std::size_t q, Word fill) const { return cells.at(index(e, q, fill)); }
  void set(std::size_t e, std::size_t q, Word fill, double p) { cells.at(index(e, q, fill)) = p; }

  // Candidate row of the i-th sentence of word w.
  std::size_t row(Word w, std::size_t i) const { return w == Word::kFirst ? i : per_word[0] + i; }

  static ScoreMatrix empty(std::string pair_id, std::vector<std::string> first_ids,
                           std::vector<std::string> second_ids, std::vector<std::string> question_ids,
                           std::vector<Word> gold) {
    if (question_ids.size() != gold.size()) throw Error("score matrix: one gold word per question");
    ScoreMatrix m;
    m.pair_id = std::move(pair_id);
    m.per_word = {first_ids.size(), second_ids.size()};
    m.example_ids = std::move(first_ids);
    m.example_ids.insert(m.example_ids.end(), second_ids.begin(), second_ids.end());
    m.question_ids = std::move(question_ids);
    m.gold = std::move(gold);
    m.cells.assign(m.n_examples() * m.n_questions() * 2, std::numeric_limits<double>::quiet_NaN());
    return m;
  }

  bool complete() const {
    return std::none_of(cells.begin(), cells.end(), [](double p) { return std::isnan(p); });
  }
};

inline ScoreMatrix build_score_matrix(const Agent& agent, const CandidatePool& pool, const Quiz& quiz,
                                      std::size_t workers = 0) {
  if (agent.mode() != AgentMode::kEntailment) {
    throw Error("build_score_matrix needs an entailment-mode agent");
  }
  if (pool.pair_id != quiz.pair_id || agent.lexicon().pair.pair_id != pool.pair_id) {
    throw Error("build_score_matrix: agent, pool and quiz must share a pair");
  }
  pool.validate();
  std::array<std::vector<std::string>, 2> ids;
  std::unordered_set<std::string> cand_ids;
  for (Word w : kBothWords) {
    for (const auto& s : pool.of(w)) {
      ids[slot(w)].push_back(s.sentence_id);
      cand_ids.insert(s.sentence_id);
    }
  }
  std::vector<Word> gold;
  for (const auto& q : quiz.questions) {
    if (cand_ids.contains(q.sentence.sentence_id)) {
      throw Error("quiz question " + q.sentence.sentence_id + " is also a candidate");
    }
    gold.push_back(q.gold);
  }
  ScoreMatrix m = ScoreMatrix::empty(pool.pair_id, ids[0], ids[1], quiz.question_ids(), gold);

  const auto& lex = agent.lexicon();
  std::vector<std::array<TargetSentence, 2>> filled;
  for (const auto& q : quiz.questions) {
    filled.push_back({fill_target(q.sentence, Word::kFirst, lex), fill_target(q.sentence, Word::kSecond, lex)});
  }
  std::vector<const TargetSentence*> rows;
  for (Word w : kBothWords) {
    for (const auto& s : pool.of(w)) rows.push_back(&s);
  }
  const auto row_scores = parallel_map(
      rows.size(),
      [&](std::size_t e) {
        std::vector<std::pair<const TargetSentence*, const TargetSentence*>> pairs;
        for (const auto& f : filled) {
          for (Word w : kBothWords) pairs.emplace_back(rows[e], &f[slot(w)]);
        }
        std::vector<double> out;
        for (const auto& d : agent.predict_entailment_batch(pairs)) out.push_back(d.entail());
        return out;
      },
      workers);
  for (std::size_t e = 0; e < rows.size(); ++e) {
    std::copy(row_scores[e].begin(), row_scores[e].end(),
              m.cells.begin() + static_cast<std::ptrdiff_t>(e * m.n_questions() * 2));
  }
  return m;
}

// Slot indices of a 3+3 set: three into the w1 list, three into the w2 list.
using SetIndex = std::array<std::size_t, 6>;

inline std::vector<std::array<std::size_t, 3>> combinations3(std::size_t n) {
  std::vector<std::array<std::size_t, 3>> out;
  for (std::size_t a = 0; a < n; ++a) {
    for (std::size_t b = a + 1; b < n; ++b) {
      for (std::size_t c = b + 1; c < n; ++c) out.push_back({a, b, c});
    }
  }
  return out;
}

// All C(n1,3)*C(n2,3) sets in lexicographic order of (w1 triple, w2 triple).
inline std::vector<SetIndex> enumerate_example_sets(std::size_t n_first, std::size_t n_second) {
  if (n_first < 3 || n_second < 3) {
    throw Error("enumerating sets needs at least 3 candidates per word (have " + std::to_string(n_first) +
                "/" + std::to_string(n_second) + ")");
  }
  const auto c1 = combinations3(n_first);
  const auto c2 = combinations3(n_second);
  std::vector<SetIndex> out;
  out.reserve(c1.size() * c2.size());
  for (const auto& a : c1) {
    for (const auto& b : c2) out.push_back({a[0], a[1], a[2], b[0], b[1], b[2]});
  }
  return out;
}

inline std::vector<SetIndex> enumerate_example_sets(const CandidatePool& pool) {
  return enumerate_example_sets(pool.of(Word::kFirst).size(), pool.of(Word::kSecond).size());
}

inline ExampleSet materialize(const CandidatePool& pool, const SetIndex& idx) {
  ExampleSet set;
  set.pair_id = pool.pair_id;
  for (std::size_t i = 0; i < 6; ++i) set.examples[i] = pool.candidates[i / 3].at(idx[i]);
  return set;
}

// Number of quiz questions a set answers correctly, read from the cache.
// Mirrors Agent::answer_fitb_entailment on authentic candidates exactly.
inline std::size_t cached_correct(const ScoreMatrix& m, const SetIndex& idx, Aggregation how) {
  std::size_t correct = 0;
  std::array<double, 3> probs{};
  for (std::size_t q = 0; q < m.n_questions(); ++q) {
    std::array<double, 2> score{};
    for (Word w : kBothWords) {
      for (std::size_t i = 0; i < 3; ++i) probs[i] = m.at(m.row(w, idx[3 * slot(w) + i]), q, w);
      score[slot(w)] = aggregate(probs, how);
    }
    correct += pick_word(score[0], score[1]) == m.gold[q];
  }
  return correct;
}

struct SelectionMetrics {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
};

using SetIds = std::array<std::string, 6>;

struct SelectionResult {
  std::string pair_id;
  double best_accuracy = 0.0;
  std::size_t best_correct = 0;
  std::size_t n_questions = 0;
  std::vector<SetIds> argmax_sets;
  std::array<std::vector<std::string>, 2> selected_union;  // sorted per word
  std::array<std::vector<std::string>, 2> most_common_three;
  std::optional<SelectionMetrics> metrics;

  std::size_t union_size() const { return selected_union[0].size() + selected_union[1].size(); }

  Json to_json() const {
    Json j{{"pair_id", pair_id},
           {"best_accuracy", best_accuracy},
           {"argmax_set_count", argmax_sets.size()},
           {"selected_union", Json{{"w1", selected_union[0]}, {"w2", selected_union[1]}}},
           {"most_common_three", Json{{"w1", most_common_three[0]}, {"w2", most_common_three[1]}}}};
    if (metrics) {
      j["precision"] = metrics->precision;
      j["recall"] = metrics->recall;
      j["f1"] = metrics->f1;
    } else {
      j["precision"] = j["recall"] = j["f1"] = nullptr;
    }
    return j;
  }
};

// Per word, the three sentences appearing in the most argmax sets; equal
// counts are ordered by ascending sentence_id.
inline std::array<std::vector<std::string>, 2> most_common_three(const std::vector<SetIds>& argmax_sets) {
  std::array<std::vector<std::string>, 2> out;
  if (argmax_sets.empty()) return out;
  for (std::size_t w = 0; w < 2; ++w) {
    std::map<std::string, std::size_t> freq;
    for (const auto& s : argmax_sets) {
      for (std::size_t i = 0; i < 3; ++i) ++freq[s[3 * w + i]];
    }
    std::vector<std::pair<std::string, std::size_t>> ranked(freq.begin(), freq.end());
    std::stable_sort(ranked.begin(), ranked.end(),
                     [](const auto& a, const auto& b) { return a.second > b.second; });
    for (std::size_t i = 0; i < std::min<std::size_t>(3, ranked.size()); ++i) {
      out[w].push_back(ranked[i].first);
    }
  }
  return out;
}

inline std::array<std::vector<std::string>, 2> most_common_three(const SelectionResult& r) {
  return most_common_three(r.argmax_sets);
}

inline SelectionMetrics selection_metrics(const std::array<std::vector<std::string>, 2>& selected,
                                          const std::array<std::vector<std::string>, 2>& gold) {
  std::size_t n_sel = 0, n_gold = 0, hit = 0;
  for (std::size_t w = 0; w < 2; ++w) {
    const std::set<std::string> g(gold[w].begin(), gold[w].end());
    n_sel += selected[w].size();
    n_gold += g.size();
    for (const auto& id : selected[w]) hit += g.contains(id);
  }
  if (n_gold == 0) throw Error("selection metrics need gold sentences");
  SelectionMetrics m;
  m.precision = n_sel ? static_cast<double>(hit) / static_cast<double>(n_sel) : 0.0;
  m.recall = static_cast<double>(hit) / static_cast<double>(n_gold);
  m.f1 = m.precision + m.recall > 0.0 ? 2.0 * m.precision * m.recall / (m.precision + m.recall) : 0.0;
  return m;
}

// Builds the result from per-set correct counts aligned with `sets`.
inline SelectionResult assemble_selection(const std::string& pair_id, const std::vector<SetIds>& sets,
                                          const std::vector<std::size_t>& correct, std::size_t n_questions,
                                          const std::array<std::vector<std::string>, 2>& gold = {}) {
  if (n_questions == 0) throw Error("selection needs a nonempty quiz");
  if (sets.empty()) throw Error("selection needs at least one set");
  SelectionResult r;
  r.pair_id = pair_id;
  r.n_questions = n_questions;
  r.best_correct = *std::max_element(correct.begin(), correct.end());
  r.best_accuracy = static_cast<double>(r.best_correct) / static_cast<double>(n_questions);
  std::array<std::set<std::string>, 2> uni;
  for (std::size_t i = 0; i < sets.size(); ++i) {
    if (correct[i] != r.best_correct) continue;
    r.argmax_sets.push_back(sets[i]);
    for (std::size_t s = 0; s < 6; ++s) uni[s / 3].insert(sets[i][s]);
  }
  for (std::size_t w = 0; w < 2; ++w) r.selected_union[w].assign(uni[w].begin(), uni[w].end());
  r.most_common_three = most_common_three(r.argmax_sets);
  if (!gold[0].empty() || !gold[1].empty()) r.metrics = selection_metrics(r.selected_union, gold);
  return r;
}

inline std::vector<SetIds> set_ids(const std::vector<SetIndex>& sets,
                                   const std::array<std::vector<std::string>, 2>& ids) {
  std::vector<SetIds> out;
  out.reserve(sets.size());
  for (const auto& s : sets) {
    SetIds x;
    for (std::size_t i = 0; i < 6; ++i) x[i] = ids[i / 3].at(s[i]);
    out.push_back(std::move(x));
  }
  return out;
}

// Exhaustive search over every 3+3 set, reading only the score matrix.
inline SelectionResult select_from_matrix(const ScoreMatrix& m, Aggregation how,
                                          const std::array<std::vector<std::string>, 2>& gold = {}) {
  if (!m.complete()) throw Error("score matrix has missing cells");
  const auto sets = enumerate_example_sets(m.per_word[0], m.per_word[1]);
  std::vector<std::size_t> correct(sets.size());
  for (std::size_t i = 0; i < sets.size(); ++i) correct[i] = cached_correct(m, sets[i], how);
  const std::array<std::vector<std::string>, 2> ids{
      std::vector<std::string>(m.example_ids.begin(), m.example_ids.begin() + static_cast<std::ptrdiff_t>(m.per_word[0])),
      std::vector<std::string>(m.example_ids.begin() + static_cast<std::ptrdiff_t>(m.per_word[0]), m.example_ids.end())};
  return assemble_selection(m.pair_id, set_ids(sets, ids), correct, m.n_questions(), gold);
}

inline std::array<std::vector<std::string>, 2> candidate_ids(const CandidatePool& pool) {
  std::array<std::vector<std::string>, 2> ids;
  for (Word w : kBothWords) {
    for (const auto& s : pool.of(w)) ids[slot(w)].push_back(s.sentence_id);
  }
  return ids;
}

// Reference path: runs the full quiz for every set through the agent.
inline SelectionResult select_best_sets_naive(const Agent& agent, const CandidatePool& pool, const Quiz& quiz,
                                              std::size_t workers = 0) {
  if (quiz.questions.empty()) throw Error("selection needs a nonempty quiz");
  pool.validate();
  const auto sets = enumerate_example_sets(pool);
  const auto correct = parallel_map(
      sets.size(), [&](std::size_t i) { return run_quiz(agent, materialize(pool, sets[i]), quiz).correct(); },
      workers);
  return assemble_selection(pool.pair_id, set_ids(sets, candidate_ids(pool)), correct, quiz.questions.size(),
                            pool.gold);
}

// Entailment agents search through the score matrix; context agents have no
// per-example factorization and are quizzed set by set.
inline SelectionResult select_best_sets(const Agent& agent, const CandidatePool& pool, const Quiz& quiz,
                                        std::size_t workers = 0) {
  if (quiz.questions.empty()) throw Error("selection needs a nonempty quiz");
  if (agent.mode() == AgentMode::kContext) return select_best_sets_naive(agent, pool, quiz, workers);
  const ScoreMatrix m = build_score_matrix(agent, pool, quiz, workers);
  return select_from_matrix(m, agent.config().aggregation, pool.gold);
}

}  // namespace synsel
