#pragma once

#include <array>
#include <string>
#include <vector>

#include "synsel/agent.hpp"
#include "synsel/study.hpp"
#include "synsel/synthetic.hpp"

namespace fixtures {

using namespace synsel;

inline PairLexicon small_little() {
  return PairLexicon::from_pair(NearSynonymPair{"small-little", "small", "little", Pos::kAdj});
}

// Authentic sentence built from text; the target is the first token equal to
// the word's base form.
inline TargetSentence sentence(const std::string& id, const PairLexicon& lex, Word w, const std::string& text,
                               Split split = Split::kTest) {
  TargetSentence s;
  s.sentence_id = id;
  s.pair_id = lex.pair.pair_id;
  s.tokens = tokenize(text);
  auto it = std::find(s.tokens.begin(), s.tokens.end(), lex.pair.word(w));
  if (it == s.tokens.end()) throw Error("fixture sentence lacks its target: " + text);
  s.target_index = static_cast<std::size_t>(it - s.tokens.begin());
  s.filled_word = w;
  s.context_owner = w;
  s.split = split;
  return s;
}

// A pool of n train and n test sentences per word with disjoint contexts.
inline SentencePool toy_pool(const PairLexicon& lex, std::size_t n) {
  SentencePool pool;
  pool.pair_id = lex.pair.pair_id;
  for (Word w : kBothWords) {
    const std::string tag = w == Word::kFirst ? "a" : "b";
    for (std::size_t i = 0; i < 2 * n; ++i) {
      const Split split = i < n ? Split::kTrain : Split::kTest;
      const std::string id = lex.pair.pair_id + ":" + tag + std::to_string(i);
      auto s = sentence(id, lex, w,
                        "The " + lex.pair.word(w) + " ctx" + tag + std::to_string(i % 7) + " thing number " +
                            std::to_string(i) + " .",
                        split);
      (split == Split::kTrain ? pool.per_word_train : pool.per_word_test)[slot(w)].push_back(s);
    }
  }
  return pool;
}

// Transcription of the reference per-pair accuracy and accuracy gap table.
struct DeltaTableRow {
  const char* pair;
  double acc;
  double delta;
};

inline const std::array<DeltaTableRow, 30>& reference_delta_table() {
  static const std::array<DeltaTableRow, 30> rows{{
      {"accountability/responsibility", .83, .76}, {"particular/peculiar", .84, .73},
      {"previous/former", .86, .76},               {"elder/senior", .86, .79},
      {"small/little", .87, .71},                  {"special/specific", .88, .74},
      {"accountability/liability", .88, .79},      {"specific/peculiar", .89, .73},
      {"career/job", .89, .80},                    {"traffic/transport", .89, .80},
      {"traffic/transportation", .89, .80},        {"tiny/little", .90, .79},
      {"elder/elderly", .90, .80},                 {"creativity/innovation", .90, .83},
      {"common/ordinary", .91, .82},               {"senior/elderly", .91, .82},
      {"acknowledge/admit", .91, .81},             {"opportunity/possibility", .91, .82},
      {"delay/postpone", .91, .82},                {"task/job", .92, .83},
      {"duty/task", .92, .84},                     {"real/authentic", .92, .86},
      {"particular/specific", .92, .86},           {"briefly/shortly", .92, .85},
      {"decoration/ornament", .93, .87},           {"duty/job", .93, .86},
      {"achievement/accomplishment", .93, .88},    {"responsibility/liability", .94, .88},
      {"commitment/responsibility", .94, .88},     {"cooperation/collaboration", .95, .89},
  }};
  return rows;
}

// ---- study fixtures -----------------------------------------------------------

inline QuestionSet question_set(std::size_t i, const std::string& pair_id = "blick-dax") {
  QuestionSet s;
  char buf[16];
  std::snprintf(buf, sizeof buf, "set%02zu", i);
  s.set_id = buf;
  s.pair_id = pair_id;
  s.choices = {"blick", "dax"};
  s.provenance = "fixture";
  for (std::size_t q = 0; q < 3; ++q) {
    s.questions.push_back({s.set_id + ".q" + std::to_string(q), "The ___ morq" + std::to_string(q) + " zena .",
                           q == 1 ? Word::kSecond : Word::kFirst});
  }
  return s;
}

inline Catalog study_catalog(std::size_t n = 30) {
  std::vector<QuestionSet> sets;
  for (std::size_t i = 0; i < n; ++i) sets.push_back(question_set(i));
  return Catalog(std::move(sets));
}

// Ten candidates per word; the two agents pick different leading threes.
inline PairSelection study_selection() {
  PairSelection sel;
  sel.pair_id = "blick-dax";
  for (Word w : kBothWords) {
    const std::string word = w == Word::kFirst ? "blick" : "dax";
    for (int i = 0; i < 10; ++i) {
      sel.candidates[slot(w)].push_back(
          {word + "-c" + std::to_string(i), "Example " + std::to_string(i) + " of the " + word + " word ."});
    }
  }
  sel.picks[StudyArm::kEntailment] = {std::vector<std::string>{"blick-c0", "blick-c1", "blick-c2"},
                                      std::vector<std::string>{"dax-c0", "dax-c1", "dax-c2"}};
  sel.picks[StudyArm::kContext] = {std::vector<std::string>{"blick-c7", "blick-c8", "blick-c9"},
                                   std::vector<std::string>{"dax-c5", "dax-c6", "dax-c7"}};
  return sel;
}

inline std::map<std::string, PairSelection> study_selections() { return {{"blick-dax", study_selection()}}; }

// Answers every question of the session's sets with the gold choice, except
// the ones listed in `wrong` (question ids), which get the other word.
inline std::vector<AnswerInput> answers_for(const StudySession& s, const Catalog& catalog,
                                            const std::set<std::string>& wrong = {}) {
  std::vector<AnswerInput> out;
  for (const auto& set_id : s.assigned_sets) {
    for (const auto& q : catalog.at(set_id).questions) {
      out.push_back({q.question_id, wrong.contains(q.question_id) ? other(q.gold) : q.gold});
    }
  }
  return out;
}

// Per proficiency group and arm: participant deltas, and the totals of
// readme reveals and difficulty ratings over the group's (participant, set)
// records. Each participant gets five sets of every arm.
struct GroupPlan {
  std::size_t participants = 0;
  double proficiency = 0.0;
  std::array<std::vector<int>, 3> deltas;
  std::array<std::size_t, 3> readme_total{};
  std::array<int, 3> rating_total{};
};

inline std::vector<int> deltas(std::size_t plus, std::size_t minus, std::size_t zero) {
  std::vector<int> d(plus, 1);
  d.insert(d.end(), minus, -1);
  d.insert(d.end(), zero, 0);
  return d;
}

// Twelve above-average and seventeen below-average participants whose
// records reproduce the reference per-group means.
inline std::array<GroupPlan, 2> reference_plan() {
  GroupPlan above{12, 80.0, {deltas(10, 1, 1), deltas(6, 1, 5), deltas(3, 3, 6)}, {260, 266, 208}, {144, 142, 143}};
  GroupPlan below{17, 60.0, {deltas(6, 3, 8), deltas(6, 10, 1), deltas(8, 0, 9)}, {461, 460, 460}, {219, 228, 210}};
  return {above, below};
}

// First seed from `start` whose assignment gives five sets to every arm.
inline std::uint64_t balanced_seed(const Catalog& catalog, const std::string& participant, std::uint64_t start = 0) {
  for (std::uint64_t seed = start;; ++seed) {
    std::array<int, 3> n{};
    for (const auto& [set, arm] : assign_sets(catalog, participant, seed, 15)) ++n[arm_index(arm)];
    if (n == std::array<int, 3>{5, 5, 5}) return seed;
  }
}

// Drives the service through the whole protocol for all 29 participants.
inline void build_reference_sessions(StudyService& svc) {
  const Catalog& catalog = svc.catalog();
  std::int64_t clock = 1'700'000'000'000;
  auto tick = [&clock] { return clock += 1000; };
  std::size_t pid = 0;
  for (const auto& plan : reference_plan()) {
    std::array<std::size_t, 3> record{};  // running (participant, set) index per arm
    const std::array<std::size_t, 3> records{plan.participants * 5, plan.participants * 5, plan.participants * 5};
    for (std::size_t p = 0; p < plan.participants; ++p, ++pid) {
      const std::string participant = "p" + std::to_string(pid);
      const auto s = svc.create_session(participant, balanced_seed(catalog, participant));
      std::set<std::string> pre_wrong, post_wrong;
      for (StudyArm arm : kAllArms) {
        const int d = plan.deltas[arm_index(arm)].at(p);
        for (const auto& set_id : s.assigned_sets) {
          if (s.model_assignment.at(set_id) != arm) continue;
          const std::string q = catalog.at(set_id).questions[0].question_id;
          if (d > 0) pre_wrong.insert(q);
          if (d < 0) post_wrong.insert(q);
          break;
        }
      }
      svc.submit_answers(s.session_id, TestPhase::kPretest, answers_for(s, catalog, pre_wrong), tick());
      for (const auto& set_id : s.assigned_sets) {
        const std::size_t a = arm_index(s.model_assignment.at(set_id));
        const std::size_t r = record[a]++;
        const std::size_t reads = plan.readme_total[a] / records[a] + (r < plan.readme_total[a] % records[a]);
        for (std::size_t k = 0; k < reads; ++k) {
          svc.record_readme(s.session_id, set_id, k < 3 ? Word::kFirst : Word::kSecond, tick());
        }
        const int rating = plan.rating_total[a] / static_cast<int>(records[a]) +
                           (static_cast<int>(r) < plan.rating_total[a] % static_cast<int>(records[a]));
        svc.record_questionnaire(s.session_id, set_id, rating, tick());
      }
      svc.submit_answers(s.session_id, TestPhase::kPosttest, answers_for(s, catalog, post_wrong), tick());
      svc.set_proficiency(s.session_id, plan.proficiency);
    }
  }
}

// Reference per-group, per-arm values (above first; entailment, context,
// random) and the improved-participant counts.
struct ReferenceReport {
  std::array<std::array<double, 3>, 2> improvement{{{0.75, 0.42, 0.00}, {0.18, -0.24, 0.47}}};
  std::array<std::array<double, 3>, 2> examples{{{4.34, 4.43, 3.46}, {5.42, 5.41, 5.41}}};
  std::array<std::array<double, 3>, 2> rating{{{2.40, 2.36, 2.39}, {2.58, 2.68, 2.47}}};
  std::array<std::size_t, 3> improved{16, 12, 11};
  std::array<std::size_t, 2> group_size{12, 17};
};

// ---- synthetic pipeline ---------------------------------------------------------

inline const SyntheticData& synthetic_data() {
  static const SyntheticData data = generate_synthetic_pool(SyntheticOptions{});
  return data;
}

// Smaller variant for unit tests.
inline const SyntheticData& small_synthetic_data() {
  static const SyntheticData data = [] {
    SyntheticOptions o;
    o.train_per_word = 300;
    o.test_per_word = 60;
    return generate_synthetic_pool(o);
  }();
  return data;
}

inline Agent train_entailment_agent(const SyntheticData& data, MixRatio ratio = {2, 1}, std::uint64_t seed = 1) {
  auto inst = build_entailment_instances(data.pool, data.lexicon, ratio, seed);
  return train_agent(inst, data.lexicon, AgentConfig::light_defaults(AgentMode::kEntailment));
}

inline Agent train_context_agent(const SyntheticData& data, MixRatio ratio, std::uint64_t seed = 1) {
  auto inst = build_context_instances(data.pool, data.lexicon, ratio, seed);
  return train_agent(inst, data.lexicon, AgentConfig::light_defaults(AgentMode::kContext));
}

}  // namespace fixtures
