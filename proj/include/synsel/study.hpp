#pragma once

#include <chrono>
#include <map>
#include <atomic>
#include <memory>
#include <mutex>
#include <set>
#include <shared_mutex>

#include "synsel/corpus.hpp"

namespace synsel {

enum class StudyArm { kEntailment, kContext, kRandom };

inline constexpr StudyArm kAllArms[3] = {StudyArm::kEntailment, StudyArm::kContext, StudyArm::kRandom};

inline std::size_t arm_index(StudyArm a) { return static_cast<std::size_t>(a); }

inline std::string to_string(StudyArm a) {
  switch (a) {
    case StudyArm::kEntailment: return "entailment";
    case StudyArm::kContext: return "context";
    case StudyArm::kRandom: return "random";
  }
  return "random";
}

inline StudyArm parse_study_arm(std::string_view s) {
  if (s == "entailment") return StudyArm::kEntailment;
  if (s == "context") return StudyArm::kContext;
  if (s == "random") return StudyArm::kRandom;
  throw Error("unknown study arm '" + std::string(s) + "'");
}

// Errors carry the wire status they map to.
class StudyError : public Error {
 public:
  enum class Kind { kInvalid, kNotFound, kConflict };
  StudyError(Kind kind, const std::string& what) : Error(what), kind_(kind) {}
  Kind kind() const { return kind_; }

 private:
  Kind kind_;
};

inline StudyError invalid(const std::string& what) { return {StudyError::Kind::kInvalid, what}; }
inline StudyError not_found(const std::string& what) { return {StudyError::Kind::kNotFound, what}; }
inline StudyError conflict(const std::string& what) { return {StudyError::Kind::kConflict, what}; }

// ---- catalog ----------------------------------------------------------------

struct StudyQuestion {
  std::string question_id;
  std::string text;  // sentence with the blank written as ___
  Word gold = Word::kFirst;
};

struct QuestionSet {
  std::string set_id;
  std::string pair_id;
  std::array<std::string, 2> choices;  // the pair's two words
  std::vector<StudyQuestion> questions;
  std::string provenance;

  static constexpr std::size_t kQuestions = 3;

  void validate() const {
    if (set_id.empty()) throw invalid("question set without set_id");
    if (questions.size() != kQuestions) {
      throw invalid("question set " + set_id + " must have exactly 3 questions");
    }
    if (choices[0].empty() || choices[1].empty() || choices[0] == choices[1]) {
      throw invalid("question set " + set_id + " needs the pair's two distinct words as choices");
    }
    std::set<std::string> ids;
    for (const auto& q : questions) {
      if (q.question_id.empty() || !ids.insert(q.question_id).second) {
        throw invalid("question set " + set_id + " has a missing or repeated question id");
      }
    }
  }

  Json to_json(bool with_gold = true) const {
    Json qs = Json::array();
    for (const auto& q : questions) {
      Json j{{"question_id", q.question_id}, {"text", q.text}};
      if (with_gold) j["gold"] = to_int(q.gold);
      qs.push_back(j);
    }
    Json j{{"set_id", set_id}, {"pair_id", pair_id}, {"choices", choices}, {"questions", qs}};
    if (with_gold) j["provenance"] = provenance;
    return j;
  }

  static QuestionSet from_json(const Json& j) {
    QuestionSet s;
    s.set_id = j.at("set_id").get<std::string>();
    s.pair_id = j.at("pair_id").get<std::string>();
    s.choices = j.at("choices").get<std::array<std::string, 2>>();
    s.provenance = j.value("provenance", std::string{});
    for (const auto& q : j.at("questions")) {
      s.questions.push_back({q.at("question_id").get<std::string>(), q.at("text").get<std::string>(),
                             word_from_int(q.at("gold").get<int>())});
    }
    s.validate();
    return s;
  }
};

class Catalog {
 public:
  Catalog() = default;
  explicit Catalog(std::vector<QuestionSet> sets) : sets_(std::move(sets)) {
    std::sort(sets_.begin(), sets_.end(), [](const auto& a, const auto& b) { return a.set_id < b.set_id; });
    for (std::size_t i = 0; i < sets_.size(); ++i) {
      sets_[i].validate();
      if (!by_id_.emplace(sets_[i].set_id, i).second) throw invalid("duplicate set id " + sets_[i].set_id);
      for (const auto& q : sets_[i].questions) {
        if (!question_set_.emplace(q.question_id, i).second) {
          throw invalid("question id " + q.question_id + " appears in two sets");
        }
      }
    }
  }

  // Every *.jsonl file in dir, one question set per line.
  static Catalog read_dir(const std::filesystem::path& dir) {
    if (!std::filesystem::is_directory(dir)) throw Error("catalog directory not found: " + dir.string());
    std::vector<std::filesystem::path> files;
    for (const auto& e : std::filesystem::directory_iterator(dir)) {
      if (e.path().extension() == ".jsonl") files.push_back(e.path());
    }
    std::sort(files.begin(), files.end());
    std::vector<QuestionSet> sets;
    for (const auto& f : files) {
      for (const auto& r : io::read_jsonl(f)) sets.push_back(QuestionSet::from_json(r));
    }
    return Catalog(std::move(sets));
  }

  const std::vector<QuestionSet>& sets() const { return sets_; }
  std::size_t size() const { return sets_.size(); }

  const QuestionSet& at(const std::string& set_id) const {
    auto it = by_id_.find(set_id);
    if (it == by_id_.end()) throw not_found("unknown question set " + set_id);
    return sets_[it->second];
  }

  const QuestionSet* set_of_question(const std::string& question_id) const {
    auto it = question_set_.find(question_id);
    return it == question_set_.end() ? nullptr : &sets_[it->second];
  }

 private:
  std::vector<QuestionSet> sets_;
  std::map<std::string, std::size_t> by_id_;
  std::map<std::string, std::size_t> question_set_;
};

// ---- model selections ---------------------------------------------------------

struct ExampleSentence {
  std::string sentence_id;
  std::string text;
};

// Example material for one pair: the candidate pool and the most common
// three chosen by each agent.
struct PairSelection {
  std::string pair_id;
  std::array<std::vector<ExampleSentence>, 2> candidates;
  std::map<StudyArm, std::array<std::vector<std::string>, 2>> picks;

  const ExampleSentence& candidate(Word w, const std::string& id) const {
    for (const auto& c : candidates[slot(w)]) {
      if (c.sentence_id == id) return c;
    }
    throw Error("selection for " + pair_id + " picks unknown sentence " + id);
  }

  // Up to three sentences for the word. The random arm draws from the
  // candidates with the given seed.
  std::vector<ExampleSentence> examples(StudyArm arm, Word w, std::uint64_t seed) const {
    std::vector<ExampleSentence> out;
    const auto& cands = candidates[slot(w)];
    if (arm == StudyArm::kRandom) {
      Rng rng(derive_seed(seed, static_cast<std::uint64_t>(to_int(w))));
      for (std::size_t i : rng.sample_indices(cands.size(), std::min<std::size_t>(3, cands.size()))) {
        out.push_back(cands[i]);
      }
      return out;
    }
    auto it = picks.find(arm);
    if (it == picks.end()) return out;
    for (const auto& id : it->second[slot(w)]) {
      if (out.size() == 3) break;
      out.push_back(candidate(w, id));
    }
    return out;
  }

  Json to_json() const {
    auto sentences = [](const std::vector<ExampleSentence>& v) {
      Json a = Json::array();
      for (const auto& s : v) a.push_back(Json{{"sentence_id", s.sentence_id}, {"text", s.text}});
      return a;
    };
    Json j{{"pair_id", pair_id},
           {"candidates", Json{{"w1", sentences(candidates[0])}, {"w2", sentences(candidates[1])}}}};
    for (const auto& [arm, ids] : picks) j[to_string(arm)] = Json{{"w1", ids[0]}, {"w2", ids[1]}};
    return j;
  }

  static PairSelection from_json(const Json& j) {
    PairSelection s;
    s.pair_id = j.at("pair_id").get<std::string>();
    for (Word w : kBothWords) {
      const char* key = w == Word::kFirst ? "w1" : "w2";
      for (const auto& c : j.at("candidates").at(key)) {
        s.candidates[slot(w)].push_back({c.at("sentence_id").get<std::string>(), c.at("text").get<std::string>()});
      }
    }
    for (StudyArm arm : {StudyArm::kEntailment, StudyArm::kContext}) {
      if (!j.contains(to_string(arm))) continue;
      const auto& p = j.at(to_string(arm));
      s.picks[arm] = {p.at("w1").get<std::vector<std::string>>(), p.at("w2").get<std::vector<std::string>>()};
      for (Word w : kBothWords) {
        for (const auto& id : s.picks[arm][slot(w)]) s.candidate(w, id);
      }
    }
    return s;
  }
};

inline std::filesystem::path selection_file(const std::filesystem::path& dir, const std::string& pair_id) {
  return dir / (pair_id + ".selection.json");
}

inline std::map<std::string, PairSelection> read_selections(const std::filesystem::path& dir) {
  std::map<std::string, PairSelection> out;
  if (!std::filesystem::is_directory(dir)) throw Error("selections directory not found: " + dir.string());
  const std::string suffix = ".selection.json";
  for (const auto& e : std::filesystem::directory_iterator(dir)) {
    const std::string name = e.path().filename().string();
    if (name.size() <= suffix.size() || name.compare(name.size() - suffix.size(), suffix.size(), suffix)) continue;
    auto sel = PairSelection::from_json(Json::parse(io::read_file(e.path())));
    out.emplace(sel.pair_id, std::move(sel));
  }
  return out;
}

// ---- sessions -----------------------------------------------------------------

enum class TestPhase { kPretest, kPosttest };

inline std::string to_string(TestPhase p) { return p == TestPhase::kPretest ? "pretest" : "posttest"; }

inline TestPhase parse_test_phase(std::string_view s) {
  if (s == "pretest") return TestPhase::kPretest;
  if (s == "posttest") return TestPhase::kPosttest;
  throw invalid("unknown phase '" + std::string(s) + "'");
}

struct TimedAnswer {
  Word choice = Word::kFirst;
  std::int64_t timestamp = 0;
};

struct ReadmeEvent {
  std::string set_id;
  Word word = Word::kFirst;
  std::size_t example_index = 0;
  std::int64_t timestamp = 0;
};

inline std::int64_t now_millis() {
  return std::chrono::duration_cast<std::chrono::milliseconds>(
             std::chrono::system_clock::now().time_since_epoch())
      .count();
}

// Session state is a fold over its event log; apply() is the only mutator.
struct StudySession {
  std::string session_id;
  std::string participant_id;
  std::uint64_t seed = 0;
  std::vector<std::string> assigned_sets;
  std::map<std::string, StudyArm> model_assignment;
  std::map<std::string, TimedAnswer> pretest_answers;
  std::map<std::string, TimedAnswer> posttest_answers;
  std::vector<ReadmeEvent> readme_events;
  std::map<std::string, int> questionnaire;
  std::optional<double> proficiency_score;
  std::size_t events = 0;

  bool assigned(const std::string& set_id) const { return model_assignment.contains(set_id); }

  std::size_t readme_count(const std::string& set_id, Word w) const {
    std::size_t n = 0;
    for (const auto& e : readme_events) n += e.set_id == set_id && e.word == w;
    return n;
  }

  std::size_t readme_count(const std::string& set_id) const {
    return readme_count(set_id, Word::kFirst) + readme_count(set_id, Word::kSecond);
  }

  const std::map<std::string, TimedAnswer>& answers(TestPhase p) const {
    return p == TestPhase::kPretest ? pretest_answers : posttest_answers;
  }

  bool complete(TestPhase p, const Catalog& catalog) const {
    const auto& a = answers(p);
    for (const auto& id : assigned_sets) {
      for (const auto& q : catalog.at(id).questions) {
        if (!a.contains(q.question_id)) return false;
      }
    }
    return true;
  }

  void apply(const Json& ev) {
    const std::string type = ev.at("type").get<std::string>();
    if (type == "created") {
      session_id = ev.at("session_id").get<std::string>();
      participant_id = ev.at("participant_id").get<std::string>();
      seed = ev.at("seed").get<std::uint64_t>();
      assigned_sets = ev.at("assigned_sets").get<std::vector<std::string>>();
      model_assignment.clear();
      for (const auto& [set, arm] : ev.at("model_assignment").items()) {
        model_assignment[set] = parse_study_arm(arm.get<std::string>());
      }
    } else if (type == "answer") {
      auto& a = parse_test_phase(ev.at("phase").get<std::string>()) == TestPhase::kPretest ? pretest_answers
                                                                                           : posttest_answers;
      a[ev.at("question_id").get<std::string>()] = {word_from_int(ev.at("choice").get<int>()),
                                                    ev.at("timestamp").get<std::int64_t>()};
    } else if (type == "readme") {
      readme_events.push_back({ev.at("set_id").get<std::string>(), word_from_int(ev.at("word").get<int>()),
                               ev.at("example_index").get<std::size_t>(), ev.at("timestamp").get<std::int64_t>()});
    } else if (type == "questionnaire") {
      questionnaire[ev.at("set_id").get<std::string>()] = ev.at("rating").get<int>();
    } else if (type == "proficiency") {
      proficiency_score = ev.at("score").get<double>();
    } else {
      throw Error("unknown session event type '" + type + "'");
    }
    ++events;
  }

  Json to_json() const {
    auto answers_json = [](const std::map<std::string, TimedAnswer>& m) {
      Json j = Json::object();
      for (const auto& [q, a] : m) j[q] = Json{{"choice", to_int(a.choice)}, {"timestamp", a.timestamp}};
      return j;
    };
    Json assignment = Json::object();
    for (const auto& [s, a] : model_assignment) assignment[s] = to_string(a);
    Json readme = Json::array();
    for (const auto& e : readme_events) {
      readme.push_back(Json{{"set_id", e.set_id}, {"word", to_int(e.word)},
                            {"example_index", e.example_index}, {"timestamp", e.timestamp}});
    }
    Json j{{"session_id", session_id},
           {"participant_id", participant_id},
           {"seed", seed},
           {"assigned_sets", assigned_sets},
           {"model_assignment", assignment},
           {"pretest_answers", answers_json(pretest_answers)},
           {"posttest_answers", answers_json(posttest_answers)},
           {"readme_events", readme},
           {"questionnaire", questionnaire},
           {"events", events}};
    j["proficiency_score"] = proficiency_score ? Json(*proficiency_score) : Json(nullptr);
    return j;
  }

  static StudySession from_json(const Json& j) {
    StudySession s;
    s.session_id = j.at("session_id").get<std::string>();
    s.participant_id = j.at("participant_id").get<std::string>();
    s.seed = j.at("seed").get<std::uint64_t>();
    s.assigned_sets = j.at("assigned_sets").get<std::vector<std::string>>();
    for (const auto& [set, arm] : j.at("model_assignment").items()) {
      s.model_assignment[set] = parse_study_arm(arm.get<std::string>());
    }
    for (auto* part : {&s.pretest_answers, &s.posttest_answers}) {
      const char* key = part == &s.pretest_answers ? "pretest_answers" : "posttest_answers";
      for (const auto& [q, a] : j.at(key).items()) {
        (*part)[q] = {word_from_int(a.at("choice").get<int>()), a.at("timestamp").get<std::int64_t>()};
      }
    }
    for (const auto& e : j.at("readme_events")) {
      s.readme_events.push_back({e.at("set_id").get<std::string>(), word_from_int(e.at("word").get<int>()),
                                 e.at("example_index").get<std::size_t>(), e.at("timestamp").get<std::int64_t>()});
    }
    s.questionnaire = j.at("questionnaire").get<std::map<std::string, int>>();
    if (!j.at("proficiency_score").is_null()) s.proficiency_score = j.at("proficiency_score").get<double>();
    s.events = j.at("events").get<std::size_t>();
    return s;
  }
};

inline std::string session_id_for(const std::string& participant_id, std::uint64_t seed) {
  static const char* kHex = "0123456789abcdef";
  std::uint64_t h = derive_seed(seed, fnv1a(participant_id));
  std::string id = "s";
  for (int i = 0; i < 16; ++i) {
    id += kHex[(h >> 60) & 0xf];
    h <<= 4;
  }
  return id;
}

// Sets drawn without replacement from the catalog, each tagged with an arm
// drawn uniformly. Deterministic in (participant, seed).
inline std::vector<std::pair<std::string, StudyArm>> assign_sets(const Catalog& catalog,
                                                                 const std::string& participant_id,
                                                                 std::uint64_t seed, std::size_t n) {
  if (catalog.size() < n) throw invalid("catalog has fewer than " + std::to_string(n) + " sets");
  Rng rng(derive_seed(seed, fnv1a(participant_id)));
  std::vector<std::pair<std::string, StudyArm>> out;
  for (std::size_t i : rng.sample_indices(catalog.size(), n)) {
    out.emplace_back(catalog.sets()[i].set_id, kAllArms[rng.below(3)]);
  }
  return out;
}

// ---- analytics ----------------------------------------------------------------

struct ArmOutcome {
  std::size_t sets = 0;
  int improvement = 0;  // post correct - pre correct over the arm's sets
  std::size_t examples_read = 0;
  std::size_t ratings = 0;
  int rating_sum = 0;
};

inline std::size_t correct_answers(const StudySession& s, const QuestionSet& set, TestPhase p) {
  std::size_t n = 0;
  const auto& a = s.answers(p);
  for (const auto& q : set.questions) {
    auto it = a.find(q.question_id);
    n += it != a.end() && it->second.choice == q.gold;
  }
  return n;
}

inline std::array<ArmOutcome, 3> compute_improvement(const StudySession& s, const Catalog& catalog) {
  if (!s.complete(TestPhase::kPretest, catalog) || !s.complete(TestPhase::kPosttest, catalog)) {
    throw conflict("session " + s.session_id + ": both tests must be complete");
  }
  std::array<ArmOutcome, 3> out{};
  for (const auto& set_id : s.assigned_sets) {
    const auto& set = catalog.at(set_id);
    auto& o = out[arm_index(s.model_assignment.at(set_id))];
    ++o.sets;
    o.improvement += static_cast<int>(correct_answers(s, set, TestPhase::kPosttest)) -
                     static_cast<int>(correct_answers(s, set, TestPhase::kPretest));
    o.examples_read += s.readme_count(set_id);
    if (auto it = s.questionnaire.find(set_id); it != s.questionnaire.end()) {
      ++o.ratings;
      o.rating_sum += it->second;
    }
  }
  return out;
}

struct ArmGroupStats {
  std::optional<double> improvement;    // mean over participants with sets in the arm
  std::optional<double> examples_read;  // mean over (participant, set) records
  std::optional<double> rating;         // mean over rated records
  std::size_t participants = 0;
  std::size_t records = 0;
};

struct StudyReport {
  double threshold = 0.0;
  std::array<std::size_t, 2> group_size{};  // above, below
  std::array<std::array<ArmGroupStats, 3>, 2> stats{};
  std::array<std::size_t, 3> improved{};

  Json to_json() const {
    auto opt = [](const std::optional<double>& v) { return v ? Json(*v) : Json(nullptr); };
    Json groups = Json::object();
    const char* names[2] = {"above", "below"};
    for (std::size_t g = 0; g < 2; ++g) {
      Json arms = Json::object();
      for (StudyArm a : kAllArms) {
        const auto& s = stats[g][arm_index(a)];
        arms[to_string(a)] = Json{{"improvement", opt(s.improvement)}, {"examples_read", opt(s.examples_read)},
                                  {"difficulty_rating", opt(s.rating)}, {"participants", s.participants},
                                  {"records", s.records}};
      }
      groups[names[g]] = Json{{"size", group_size[g]}, {"arms", arms}};
    }
    Json improved_j = Json::object();
    for (StudyArm a : kAllArms) improved_j[to_string(a)] = improved[arm_index(a)];
    return Json{{"threshold", threshold}, {"groups", groups}, {"improved", improved_j}};
  }
};

// Participants at or above the mean proficiency form the above group. A
// participant counts as improved under an arm when its summed delta is > 0.
inline StudyReport group_report(const std::vector<StudySession>& sessions, const Catalog& catalog) {
  if (sessions.empty()) throw invalid("group report needs at least one session");
  std::vector<std::string> missing;
  double total = 0.0;
  for (const auto& s : sessions) {
    if (!s.proficiency_score) {
      missing.push_back(s.session_id);
    } else {
      total += *s.proficiency_score;
    }
  }
  if (!missing.empty()) throw conflict("sessions without proficiency score: " + join(missing, ", "));
  StudyReport r;
  r.threshold = total / static_cast<double>(sessions.size());

  struct Acc {
    double improvement = 0.0;
    std::size_t participants = 0;
    std::size_t examples = 0;
    std::size_t records = 0;
    int rating_sum = 0;
    std::size_t ratings = 0;
  };
  std::array<std::array<Acc, 3>, 2> acc{};
  for (const auto& s : sessions) {
    const std::size_t g = *s.proficiency_score >= r.threshold ? 0 : 1;
    ++r.group_size[g];
    const auto outcome = compute_improvement(s, catalog);
    for (StudyArm a : kAllArms) {
      const auto& o = outcome[arm_index(a)];
      if (o.sets == 0) continue;
      auto& x = acc[g][arm_index(a)];
      x.improvement += o.improvement;
      ++x.participants;
      x.examples += o.examples_read;
      x.records += o.sets;
      x.rating_sum += o.rating_sum;
      x.ratings += o.ratings;
      if (o.improvement > 0) ++r.improved[arm_index(a)];
    }
  }
  for (std::size_t g = 0; g < 2; ++g) {
    for (std::size_t a = 0; a < 3; ++a) {
      const auto& x = acc[g][a];
      auto& st = r.stats[g][a];
      st.participants = x.participants;
      st.records = x.records;
      if (x.participants) st.improvement = x.improvement / static_cast<double>(x.participants);
      if (x.records) st.examples_read = static_cast<double>(x.examples) / static_cast<double>(x.records);
      if (x.ratings) st.rating = static_cast<double>(x.rating_sum) / static_cast<double>(x.ratings);
    }
  }
  return r;
}

// ---- service ------------------------------------------------------------------

struct StudyOptions {
  std::size_t sets_per_session = 15;
  std::size_t readme_cap = 3;
  std::size_t snapshot_every = 25;  // events between snapshots; 0 disables
};

struct AnswerInput {
  std::string question_id;
  Word choice = Word::kFirst;
};

// Owns the sessions of one study. With a store directory each session keeps
// <id>.events.jsonl (append-only) and <id>.snapshot.json; loading replays the
// log on top of the snapshot.
//
// Each session has a single writer at a time. A write works on a copy of the
// state, appends its events to the log, then publishes the copy, so readers
// only ever load an immutable published state.
class StudyService {
 public:
  StudyService(Catalog catalog, std::map<std::string, PairSelection> selections,
               std::filesystem::path store = {}, StudyOptions opt = {})
      : catalog_(std::move(catalog)), selections_(std::move(selections)), store_(std::move(store)),
        opt_(opt) {
    if (!store_.empty()) {
      std::filesystem::create_directories(store_);
      for (const auto& id : stored_session_ids(store_)) {
        auto entry = std::make_unique<Entry>();
        entry->state = std::make_shared<const StudySession>(replay(store_, id));
        by_participant_[entry->state->participant_id] = id;
        sessions_.emplace(id, std::move(entry));
      }
    }
  }

  const Catalog& catalog() const { return catalog_; }
  const StudyOptions& options() const { return opt_; }

  // Same participant and seed returns the existing session.
  StudySession create_session(const std::string& participant_id, std::uint64_t seed) {
    if (participant_id.empty()) throw invalid("participant_id is required");
    if (catalog_.size() < opt_.sets_per_session) {
      throw invalid("catalog has " + std::to_string(catalog_.size()) + " sets, sessions need " +
                    std::to_string(opt_.sets_per_session));
    }
    std::unique_lock lock(table_mutex_);
    if (auto it = by_participant_.find(participant_id); it != by_participant_.end()) {
      const auto existing = std::atomic_load(&sessions_.at(it->second)->state);
      if (existing->seed == seed) return *existing;
      throw conflict("participant " + participant_id + " already has session " + existing->session_id);
    }
    std::vector<std::string> assigned;
    Json assignment = Json::object();
    for (const auto& [set_id, arm] : assign_sets(catalog_, participant_id, seed, opt_.sets_per_session)) {
      assigned.push_back(set_id);
      assignment[set_id] = to_string(arm);
    }
    const std::string id = session_id_for(participant_id, seed);
    StudySession draft;
    std::vector<Json> events{Json{{"type", "created"}, {"session_id", id}, {"participant_id", participant_id},
                                  {"seed", seed}, {"assigned_sets", assigned},
                                  {"model_assignment", assignment}}};
    auto entry = std::make_unique<Entry>();
    commit(*entry, draft, events);
    StudySession out = *entry->state;
    by_participant_[participant_id] = id;
    sessions_.emplace(id, std::move(entry));
    return out;
  }

  StudySession session(const std::string& id) const { return *snapshot(id); }

  // One published state per session, taken together under the table lock.
  std::vector<StudySession> sessions() const {
    std::shared_lock lock(table_mutex_);
    std::vector<std::shared_ptr<const StudySession>> snaps;
    for (const auto& [id, e] : sessions_) snaps.push_back(std::atomic_load(&e->state));
    lock.unlock();
    std::vector<StudySession> out;
    for (const auto& s : snaps) out.push_back(*s);
    return out;
  }

  // Questions of the assigned sets, without gold answers.
  Json pretest(const std::string& id) const {
    const auto st = snapshot(id);
    Json sets = Json::array();
    for (const auto& set_id : st->assigned_sets) sets.push_back(catalog_.at(set_id).to_json(false));
    return Json{{"session_id", id}, {"sets", sets}};
  }

  // Answers are write-once; resubmitting the same choice is a no-op.
  Json submit_answers(const std::string& id, TestPhase phase, const std::vector<AnswerInput>& answers,
                      std::optional<std::int64_t> ts = std::nullopt) {
    return write(id, [&](StudySession& st, std::vector<Json>& events) {
      if (phase == TestPhase::kPosttest && !st.complete(TestPhase::kPretest, catalog_)) {
        throw conflict("pretest is not complete");
      }
      const auto& existing = st.answers(phase);
      std::set<std::string> batch;
      for (const auto& a : answers) {
        const QuestionSet* set = catalog_.set_of_question(a.question_id);
        if (!set || !st.assigned(set->set_id)) {
          throw invalid("question " + a.question_id + " is not part of this session");
        }
        if (!batch.insert(a.question_id).second) throw invalid("question " + a.question_id + " answered twice");
        if (auto it = existing.find(a.question_id); it != existing.end()) {
          if (it->second.choice != a.choice) throw conflict("question " + a.question_id + " was already answered");
          continue;
        }
        events.push_back(Json{{"type", "answer"}, {"phase", to_string(phase)}, {"question_id", a.question_id},
                              {"choice", to_int(a.choice)}, {"timestamp", ts.value_or(now_millis())}});
      }
      return [&events, this](const StudySession& after) {
        return Json{{"accepted", events.size()},
                    {"pretest_complete", after.complete(TestPhase::kPretest, catalog_)},
                    {"posttest_complete", after.complete(TestPhase::kPosttest, catalog_)}};
      };
    });
  }

  // The set's questions plus the examples revealed so far. Unrevealed
  // sentences never appear in the payload.
  Json serve_posttest(const std::string& id, const std::string& set_id) const {
    const auto st = snapshot(id);
    const QuestionSet& set = assigned_set(*st, set_id);
    if (!st->complete(TestPhase::kPretest, catalog_)) throw conflict("pretest is not complete");
    Json examples = Json::object();
    for (Word w : kBothWords) {
      const auto all = examples_for(*st, set, w);
      const std::size_t available = std::min(opt_.readme_cap, all.size());
      const std::size_t revealed = std::min(st->readme_count(set_id, w), available);
      Json shown = Json::array();
      for (std::size_t i = 0; i < revealed; ++i) shown.push_back(all[i].text);
      examples[w == Word::kFirst ? "w1" : "w2"] =
          Json{{"word", set.choices[slot(w)]}, {"revealed", shown}, {"remaining", available - revealed}};
    }
    Json j = set.to_json(false);
    j["examples"] = examples;
    return j;
  }

  // Reveals the next example for the word; rejected once the cap is hit.
  Json record_readme(const std::string& id, const std::string& set_id, Word w,
                     std::optional<std::int64_t> ts = std::nullopt) {
    return write(id, [&](StudySession& st, std::vector<Json>& events) {
      const QuestionSet& set = assigned_set(st, set_id);
      if (!st.complete(TestPhase::kPretest, catalog_)) throw conflict("pretest is not complete");
      const auto all = examples_for(st, set, w);
      const std::size_t n = st.readme_count(set_id, w);
      if (n >= std::min(opt_.readme_cap, all.size())) {
        throw conflict("no more examples for '" + set.choices[slot(w)] + "' in set " + set_id);
      }
      events.push_back(Json{{"type", "readme"}, {"set_id", set_id}, {"word", to_int(w)}, {"example_index", n},
                            {"timestamp", ts.value_or(now_millis())}});
      Json out{{"set_id", set_id}, {"word", set.choices[slot(w)]}, {"example_index", n},
               {"example", all[n].text}, {"revealed_count", n + 1}};
      return [out](const StudySession&) { return out; };
    });
  }

  void record_questionnaire(const std::string& id, const std::string& set_id, int rating,
                            std::optional<std::int64_t> ts = std::nullopt) {
    if (rating < 1 || rating > 4) throw invalid("difficulty rating must be 1-4");
    write(id, [&](StudySession& st, std::vector<Json>& events) {
      assigned_set(st, set_id);
      events.push_back(Json{{"type", "questionnaire"}, {"set_id", set_id}, {"rating", rating},
                            {"timestamp", ts.value_or(now_millis())}});
      return [](const StudySession&) { return Json::object(); };
    });
  }

  // Imported from the external proficiency test.
  void set_proficiency(const std::string& id, double score) {
    if (!std::isfinite(score)) throw invalid("proficiency score must be finite");
    write(id, [&](StudySession&, std::vector<Json>& events) {
      events.push_back(Json{{"type", "proficiency"}, {"score", score}});
      return [](const StudySession&) { return Json::object(); };
    });
  }

  // Recomputed from every session's raw records.
  StudyReport report() const { return group_report(sessions(), catalog_); }

  void snapshot_all() const {
    for (const auto& s : sessions()) write_snapshot(s);
  }

  // Session state from its log, starting from the snapshot when present.
  static StudySession replay(const std::filesystem::path& store, const std::string& id, bool use_snapshot = true) {
    StudySession s;
    const auto snap = store / (id + ".snapshot.json");
    if (use_snapshot && std::filesystem::exists(snap)) {
      s = StudySession::from_json(Json::parse(io::read_file(snap)));
    }
    for (const auto& ev : io::read_jsonl(store / (id + ".events.jsonl"))) {
      if (ev.at("seq").get<std::size_t>() <= s.events) continue;
      s.apply(ev);
    }
    if (s.session_id != id) throw Error("event log " + id + " does not start with a created event");
    return s;
  }

  static std::vector<std::string> stored_session_ids(const std::filesystem::path& store) {
    if (!std::filesystem::is_directory(store)) throw Error("sessions directory not found: " + store.string());
    const std::string suffix = ".events.jsonl";
    std::vector<std::string> ids;
    for (const auto& f : std::filesystem::directory_iterator(store)) {
      const std::string name = f.path().filename().string();
      if (name.size() > suffix.size() && !name.compare(name.size() - suffix.size(), suffix.size(), suffix)) {
        ids.push_back(name.substr(0, name.size() - suffix.size()));
      }
    }
    std::sort(ids.begin(), ids.end());
    return ids;
  }

  static std::vector<StudySession> read_sessions(const std::filesystem::path& store, bool use_snapshots = true) {
    std::vector<StudySession> out;
    for (const auto& id : stored_session_ids(store)) out.push_back(replay(store, id, use_snapshots));
    return out;
  }

 private:
  struct Entry {
    std::mutex writer;
    std::shared_ptr<const StudySession> state;
  };

  std::shared_ptr<const StudySession> snapshot(const std::string& id) const {
    std::shared_lock lock(table_mutex_);
    auto it = sessions_.find(id);
    if (it == sessions_.end()) throw not_found("unknown session " + id);
    return std::atomic_load(&it->second->state);
  }

  // fn validates against a draft, pushes events, and returns a callable that
  // builds the response from the committed state.
  template <typename Fn>
  Json write(const std::string& id, Fn fn) {
    std::shared_lock lock(table_mutex_);
    auto it = sessions_.find(id);
    if (it == sessions_.end()) throw not_found("unknown session " + id);
    Entry& e = *it->second;
    std::lock_guard g(e.writer);
    StudySession draft = *e.state;
    std::vector<Json> events;
    auto respond = fn(draft, events);
    commit(e, draft, events);
    return respond(*e.state);
  }

  const QuestionSet& assigned_set(const StudySession& st, const std::string& set_id) const {
    const QuestionSet& set = catalog_.at(set_id);
    if (!st.assigned(set_id)) throw not_found("set " + set_id + " is not assigned to this session");
    return set;
  }

  std::vector<ExampleSentence> examples_for(const StudySession& st, const QuestionSet& set, Word w) const {
    auto it = selections_.find(set.pair_id);
    if (it == selections_.end()) return {};
    return it->second.examples(st.model_assignment.at(set.set_id), w, derive_seed(st.seed, fnv1a(set.set_id)));
  }

  // Appends before publishing, so a published state is always in the log.
  void commit(Entry& e, StudySession& draft, std::vector<Json>& events) {
    bool snap = false;
    for (auto& ev : events) {
      ev["seq"] = draft.events + 1;
      draft.apply(ev);
      if (!store_.empty()) io::append_jsonl(store_ / (draft.session_id + ".events.jsonl"), ev);
      snap = snap || (opt_.snapshot_every && draft.events % opt_.snapshot_every == 0);
    }
    if (snap) write_snapshot(draft);
    std::atomic_store(&e.state, std::make_shared<const StudySession>(std::move(draft)));
  }

  void write_snapshot(const StudySession& s) const {
    if (store_.empty()) return;
    const auto path = store_ / (s.session_id + ".snapshot.json");
    io::write_file(path.string() + ".tmp", s.to_json().dump() + "\n");
    std::filesystem::rename(path.string() + ".tmp", path);
  }

  Catalog catalog_;
  std::map<std::string, PairSelection> selections_;
  std::filesystem::path store_;
  StudyOptions opt_;
  mutable std::shared_mutex table_mutex_;
  std::map<std::string, std::unique_ptr<Entry>> sessions_;
  std::map<std::string, std::string> by_participant_;
};

}  // namespace synsel
