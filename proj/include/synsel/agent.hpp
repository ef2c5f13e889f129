#pragma once

#include <filesystem>
#include <memory>
#include <variant>

#include "synsel/light_backend.hpp"
#include "synsel/transformer_backend.hpp"

namespace synsel {

inline std::unique_ptr<ClassifierBackend> make_backend(const AgentConfig& cfg) {
  switch (cfg.backend) {
    case BackendKind::kOracle: return std::make_unique<OracleBackend>(cfg.mode);
    case BackendKind::kLight: return std::make_unique<LightBackend>(cfg.mode);
    case BackendKind::kTransformer: return std::make_unique<TransformerBackend>(cfg.mode, cfg);
  }
  throw Error("unknown backend");
}

inline ModelInput make_entailment_input(const TargetSentence& example, const TargetSentence& question,
                                        std::size_t max_len) {
  return ModelInput{encode_entailment_input(example, question, max_len),
                    {SpanSignature{example.filled_word, example.context_owner},
                     SpanSignature{question.filled_word, question.context_owner}}};
}

inline ModelInput make_context_input(const ExampleSet& set, const std::array<std::size_t, 6>& order,
                                     const TargetSentence& question, std::size_t max_len) {
  ModelInput in{encode_context_input(set, order, question, max_len), {}};
  for (std::size_t i : order) {
    in.spans.push_back({set.examples[i].filled_word, set.examples[i].context_owner});
  }
  in.spans.push_back({question.filled_word, question.context_owner});
  return in;
}

inline LabeledInput to_labeled(const EntailmentInstance& inst, std::size_t max_len) {
  return LabeledInput{make_entailment_input(inst.example, inst.question, max_len),
                      inst.label == EntailLabel::kEntail ? std::size_t{0} : std::size_t{1}};
}

inline LabeledInput to_labeled(const ContextInstance& inst, std::size_t max_len) {
  return LabeledInput{make_context_input(inst.example_set, inst.order, inst.question, max_len),
                      slot(inst.answer)};
}

struct FitbEntailmentAnswer {
  Word chosen = Word::kFirst;
  std::array<double, 2> scores{};  // aggregated P(entail) per candidate word
  bool tie = false;
  // P(entail) per set member in slot order, each paired with the question
  // filled by the word that member shows.
  std::array<double, 6> member_probs{};
};

struct FitbContextAnswer {
  Word chosen = Word::kFirst;
  PredictionDistribution distribution;
  bool tie = false;
};

// Folds per-example probabilities into one candidate score.
inline double aggregate(std::span<const double> probs, Aggregation how) {
  if (probs.empty()) throw Error("aggregate: no probabilities");
  switch (how) {
    case Aggregation::kMean: {
      double s = 0.0;
      for (double p : probs) s += p;
      return s / static_cast<double>(probs.size());
    }
    case Aggregation::kMax: return *std::max_element(probs.begin(), probs.end());
    case Aggregation::kVote: {
      std::size_t votes = 0;
      for (double p : probs) votes += p > 0.5;
      return static_cast<double>(votes) / static_cast<double>(probs.size());
    }
  }
  return 0.0;
}

// Ties go to w1.
inline Word pick_word(double score_first, double score_second, bool* tie = nullptr) {
  if (tie) *tie = score_first == score_second;
  return score_second > score_first ? Word::kSecond : Word::kFirst;
}

// A trained learner-like agent for one near-synonym pair.
class Agent {
 public:
  Agent(AgentConfig cfg, PairLexicon lex, std::unique_ptr<ClassifierBackend> backend,
        TrainingReport report = {})
      : cfg_(std::move(cfg)), lex_(std::move(lex)), backend_(std::move(backend)),
        report_(std::move(report)) {}

  // Untrained-but-usable oracle agent (training is a no-op for it).
  static Agent oracle(AgentMode mode, PairLexicon lex) {
    AgentConfig cfg;
    cfg.mode = mode;
    cfg.backend = BackendKind::kOracle;
    return Agent(cfg, std::move(lex), std::make_unique<OracleBackend>(mode));
  }

  const AgentConfig& config() const { return cfg_; }
  AgentMode mode() const { return cfg_.mode; }
  const PairLexicon& lexicon() const { return lex_; }
  const TrainingReport& report() const { return report_; }
  const ClassifierBackend& backend() const { return *backend_; }

  PredictionDistribution predict_entailment(const TargetSentence& example,
                                            const TargetSentence& question) const {
    require(AgentMode::kEntailment, "predict_entailment");
    if (example.pair_id != question.pair_id) throw Error("predict_entailment: pair mismatch");
    const ModelInput in = make_entailment_input(example, question, cfg_.max_sequence_length);
    return backend_->predict(std::span<const ModelInput>(&in, 1)).front();
  }

  std::vector<PredictionDistribution> predict_entailment_batch(
      const std::vector<std::pair<const TargetSentence*, const TargetSentence*>>& pairs) const {
    require(AgentMode::kEntailment, "predict_entailment");
    std::vector<ModelInput> inputs;
    inputs.reserve(pairs.size());
    for (const auto& [e, q] : pairs) {
      inputs.push_back(make_entailment_input(*e, *q, cfg_.max_sequence_length));
    }
    return backend_->predict(inputs);
  }

  // For each candidate word w: fill the blank with w, pair the question with
  // the members showing w, aggregate their P(entail); highest score wins.
  FitbEntailmentAnswer answer_fitb_entailment(const ExampleSet& set,
                                              const TargetSentence& question) const {
    require(AgentMode::kEntailment, "answer_fitb_entailment");
    check_pair(set, question);
    std::array<TargetSentence, 2> filled{fill_target(question, Word::kFirst, lex_),
                                         fill_target(question, Word::kSecond, lex_)};
    std::vector<std::pair<const TargetSentence*, const TargetSentence*>> pairs;
    for (const auto& e : set.examples) pairs.emplace_back(&e, &filled[slot(e.filled_word)]);
    const auto preds = predict_entailment_batch(pairs);

    FitbEntailmentAnswer ans;
    std::array<std::vector<double>, 2> per_word;
    for (std::size_t i = 0; i < 6; ++i) {
      ans.member_probs[i] = preds[i].entail();
      per_word[slot(set.examples[i].filled_word)].push_back(preds[i].entail());
    }
    for (Word w : kBothWords) {
      if (per_word[slot(w)].empty()) {
        throw Error("answer_fitb_entailment: empty set slot for '" + lex_.pair.word(w) + "'");
      }
      ans.scores[slot(w)] = aggregate(per_word[slot(w)], cfg_.aggregation);
    }
    ans.chosen = pick_word(ans.scores[0], ans.scores[1], &ans.tie);
    return ans;
  }

  FitbContextAnswer answer_fitb_context(const ExampleSet& set, const TargetSentence& question,
                                        const std::array<std::size_t, 6>& order = {0, 1, 2, 3, 4, 5}) const {
    require(AgentMode::kContext, "answer_fitb_context");
    check_pair(set, question);
    const ModelInput in = make_context_input(set, order, question, cfg_.max_sequence_length);
    FitbContextAnswer ans;
    ans.distribution = backend_->predict(std::span<const ModelInput>(&in, 1)).front();
    ans.chosen = pick_word(ans.distribution.p(Word::kFirst), ans.distribution.p(Word::kSecond), &ans.tie);
    return ans;
  }

  // Mode-dispatching FITB answer.
  Word answer(const ExampleSet& set, const TargetSentence& question) const {
    return cfg_.mode == AgentMode::kEntailment ? answer_fitb_entailment(set, question).chosen
                                               : answer_fitb_context(set, question).chosen;
  }

  // Artifact layout: config.json (config echo + backend settings),
  // lexicon.json, report.json, and the backend's own files.
  void save(const std::filesystem::path& dir) const {
    std::filesystem::create_directories(dir);
    Json cfg = cfg_.to_json();
    cfg["backend_settings"] = backend_->describe();
    cfg["pair_id"] = lex_.pair.pair_id;
    io::write_file(dir / "config.json", cfg.dump(2) + "\n");
    io::write_file(dir / "lexicon.json", lex_.to_json().dump(2) + "\n");
    io::write_file(dir / "report.json", report_.to_json().dump(2) + "\n");
    backend_->save(dir);
  }

  static Agent load(const std::filesystem::path& dir) {
    const Json cfgj = Json::parse(io::read_file(dir / "config.json"));
    AgentConfig cfg = AgentConfig::from_json(cfgj);
    PairLexicon lex = PairLexicon::from_json(Json::parse(io::read_file(dir / "lexicon.json")));
    TrainingReport report;
    if (std::filesystem::exists(dir / "report.json")) {
      report = TrainingReport::from_json(Json::parse(io::read_file(dir / "report.json")));
    }
    auto backend = make_backend(cfg);
    backend->load(dir, cfg);
    return Agent(std::move(cfg), std::move(lex), std::move(backend), std::move(report));
  }

 private:
  void require(AgentMode m, const char* op) const {
    if (cfg_.mode != m) {
      throw Error(std::string(op) + " needs a " + to_string(m) + "-mode agent, this one is " +
                  to_string(cfg_.mode));
    }
  }

  void check_pair(const ExampleSet& set, const TargetSentence& question) const {
    if (set.pair_id != lex_.pair.pair_id || question.pair_id != lex_.pair.pair_id) {
      throw Error("agent for pair " + lex_.pair.pair_id + " got material from another pair");
    }
  }

  AgentConfig cfg_;
  PairLexicon lex_;
  std::unique_ptr<ClassifierBackend> backend_;
  TrainingReport report_;
};

namespace detail {

template <typename Instance>
Agent train_on(const std::vector<Instance>& instances, const PairLexicon& lex, const AgentConfig& cfg,
               AgentMode expected) {
  cfg.validate();
  if (cfg.mode != expected) {
    throw Error("mode mismatch: instances are " + to_string(expected) + ", config says " +
                to_string(cfg.mode));
  }
  if (instances.empty()) throw Error("train_agent: no instances");
  std::vector<LabeledInput> all;
  all.reserve(instances.size());
  for (const auto& inst : instances) all.push_back(to_labeled(inst, cfg.max_sequence_length));

  Rng rng(derive_seed(cfg.seed, 0x484f4c44));
  rng.shuffle(all);
  std::size_t n_held = static_cast<std::size_t>(cfg.heldout_fraction * static_cast<double>(all.size()));
  if (n_held >= all.size()) n_held = all.size() - 1;
  const std::span<const LabeledInput> everything(all);
  const auto heldout = everything.first(n_held);
  const auto train = everything.subspan(n_held);

  auto backend = make_backend(cfg);
  TrainingReport report = backend->train(train, heldout, cfg);
  return Agent(cfg, lex, std::move(backend), std::move(report));
}

}  // namespace detail

// Holds a cut of the instances out for per-epoch accuracy, trains the
// configured backend on the rest, and returns the agent with its report.
inline Agent train_agent(const std::vector<EntailmentInstance>& instances, const PairLexicon& lex,
                         const AgentConfig& cfg) {
  return detail::train_on(instances, lex, cfg, AgentMode::kEntailment);
}

inline Agent train_agent(const std::vector<ContextInstance>& instances, const PairLexicon& lex,
                         const AgentConfig& cfg) {
  return detail::train_on(instances, lex, cfg, AgentMode::kContext);
}

using InstanceList = std::variant<std::vector<EntailmentInstance>, std::vector<ContextInstance>>;

// Reads an instance file; every record must share one type.
inline InstanceList read_instances(const std::filesystem::path& path) {
  const auto recs = io::read_jsonl(path);
  if (recs.empty()) throw Error("instance file is empty: " + path.string());
  const std::string type = recs.front().at("type").get<std::string>();
  if (type == "entail") {
    std::vector<EntailmentInstance> out;
    for (const auto& r : recs) out.push_back(EntailmentInstance::from_json(r));
    return out;
  }
  if (type == "context") {
    std::vector<ContextInstance> out;
    for (const auto& r : recs) out.push_back(ContextInstance::from_json(r));
    return out;
  }
  throw Error("unknown instance type '" + type + "'");
}

inline Agent train_agent(const InstanceList& instances, const PairLexicon& lex, const AgentConfig& cfg) {
  return std::visit([&](const auto& v) { return train_agent(v, lex, cfg); }, instances);
}

}  // namespace synsel
