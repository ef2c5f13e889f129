#pragma once

#include <array>
#include <cmath>
#include <filesystem>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "synsel/encoding.hpp"

namespace synsel {

enum class AgentMode { kEntailment, kContext };

inline std::string to_string(AgentMode m) {
  return m == AgentMode::kEntailment ? "entail" : "context";
}

inline AgentMode parse_agent_mode(std::string_view s) {
  if (s == "entail" || s == "entailment") return AgentMode::kEntailment;
  if (s == "context") return AgentMode::kContext;
  throw Error("unknown mode '" + std::string(s) + "' (expected entail|context)");
}

enum class BackendKind { kTransformer, kLight, kOracle };

inline std::string to_string(BackendKind b) {
  switch (b) {
    case BackendKind::kTransformer: return "transformer";
    case BackendKind::kLight: return "light";
    case BackendKind::kOracle: return "oracle";
  }
  return "light";
}

inline BackendKind parse_backend_kind(std::string_view s) {
  if (s == "transformer") return BackendKind::kTransformer;
  if (s == "light") return BackendKind::kLight;
  if (s == "oracle") return BackendKind::kOracle;
  throw Error("unknown backend '" + std::string(s) + "' (expected transformer|light|oracle)");
}

// How an entailment agent folds the three per-example probabilities for a
// candidate word into one score.
enum class Aggregation { kMean, kMax, kVote };

inline std::string to_string(Aggregation a) {
  switch (a) {
    case Aggregation::kMean: return "mean";
    case Aggregation::kMax: return "max";
    case Aggregation::kVote: return "vote";
  }
  return "mean";
}

inline Aggregation parse_aggregation(std::string_view s) {
  if (s == "mean") return Aggregation::kMean;
  if (s == "max") return Aggregation::kMax;
  if (s == "vote") return Aggregation::kVote;
  throw Error("unknown aggregation '" + std::string(s) + "'");
}

struct AgentConfig {
  AgentMode mode = AgentMode::kEntailment;
  std::size_t max_sequence_length = 256;
  double learning_rate = 5e-5;
  double warmup_ratio = 0.30;
  std::string optimizer = "adam";
  double weight_decay = 0.01;
  std::size_t epochs = 3;
  std::size_t batch_size = 32;
  std::uint64_t seed = 42;
  BackendKind backend = BackendKind::kLight;
  Aggregation aggregation = Aggregation::kMean;
  double heldout_fraction = 0.1;
  // light backend
  std::size_t embedding_dim = 16;
  std::size_t max_vocab = 20000;
  double init_scale = 0.1;
  std::size_t question_warmup_epochs = 0;
  // transformer backend
  std::string pretrained_model = "bert-base-uncased";

  // Settings suited to the embedding classifier on desk-scale data; the
  // plain defaults mirror the transformer fine-tuning recipe.
  static AgentConfig light_defaults(AgentMode mode) {
    AgentConfig c;
    c.mode = mode;
    c.backend = BackendKind::kLight;
    c.learning_rate = 0.02;
    c.epochs = 8;
    c.batch_size = 32;
    if (mode == AgentMode::kContext) c.question_warmup_epochs = 2;
    return c;
  }

  void validate() const {
    if (!(warmup_ratio > 0.0 && warmup_ratio < 1.0)) throw Error("warmup_ratio must be in (0, 1)");
    if (max_sequence_length < 16) throw Error("max_sequence_length must be at least 16");
    if (!(learning_rate > 0.0)) throw Error("learning_rate must be positive");
    if (batch_size == 0) throw Error("batch_size must be positive");
    if (optimizer != "adam") throw Error("only the adam optimizer is supported");
    if (!(heldout_fraction >= 0.0 && heldout_fraction < 1.0)) {
      throw Error("heldout_fraction must be in [0, 1)");
    }
    if (!(weight_decay >= 0.0)) throw Error("weight_decay must be non-negative");
    if (question_warmup_epochs > 0 && question_warmup_epochs >= epochs) {
      throw Error("question_warmup_epochs must be smaller than epochs");
    }
    if (embedding_dim == 0) throw Error("embedding_dim must be positive");
  }

  Json to_json() const {
    return Json{{"mode", to_string(mode)},
                {"max_sequence_length", max_sequence_length},
                {"learning_rate", learning_rate},
                {"warmup_ratio", warmup_ratio},
                {"optimizer", optimizer},
                {"weight_decay", weight_decay},
                {"epochs", epochs},
                {"batch_size", batch_size},
                {"seed", seed},
                {"backend", to_string(backend)},
                {"aggregation", to_string(aggregation)},
                {"heldout_fraction", heldout_fraction},
                {"embedding_dim", embedding_dim},
                {"max_vocab", max_vocab},
                {"init_scale", init_scale},
                {"question_warmup_epochs", question_warmup_epochs},
                {"pretrained_model", pretrained_model}};
  }

  // Missing keys keep their defaults, so a config file may be partial.
  static AgentConfig from_json(const Json& j) { return from_json(j, AgentConfig()); }

  static AgentConfig from_json(const Json& j, AgentConfig c) {
    if (j.contains("mode")) c.mode = parse_agent_mode(j.at("mode").get<std::string>());
    if (j.contains("backend")) c.backend = parse_backend_kind(j.at("backend").get<std::string>());
    if (j.contains("aggregation")) {
      c.aggregation = parse_aggregation(j.at("aggregation").get<std::string>());
    }
    c.max_sequence_length = j.value("max_sequence_length", c.max_sequence_length);
    c.learning_rate = j.value("learning_rate", c.learning_rate);
    c.warmup_ratio = j.value("warmup_ratio", c.warmup_ratio);
    c.optimizer = j.value("optimizer", c.optimizer);
    c.weight_decay = j.value("weight_decay", c.weight_decay);
    c.epochs = j.value("epochs", c.epochs);
    c.batch_size = j.value("batch_size", c.batch_size);
    c.seed = j.value("seed", c.seed);
    c.heldout_fraction = j.value("heldout_fraction", c.heldout_fraction);
    c.embedding_dim = j.value("embedding_dim", c.embedding_dim);
    c.max_vocab = j.value("max_vocab", c.max_vocab);
    c.init_scale = j.value("init_scale", c.init_scale);
    c.question_warmup_epochs = j.value("question_warmup_epochs", c.question_warmup_epochs);
    c.pretrained_model = j.value("pretrained_model", c.pretrained_model);
    c.validate();
    return c;
  }
};

// Two-way distribution. Index 0 is entail (entailment mode) or w1 (context
// mode); index 1 is not_entail or w2.
struct PredictionDistribution {
  std::array<double, 2> probs{0.5, 0.5};

  double entail() const { return probs[0]; }
  double not_entail() const { return probs[1]; }
  double p(Word w) const { return probs[slot(w)]; }

  static PredictionDistribution from_logits(double z0, double z1) {
    const double m = std::max(z0, z1);
    const double e0 = std::exp(z0 - m);
    const double e1 = std::exp(z1 - m);
    return PredictionDistribution{{e0 / (e0 + e1), e1 / (e0 + e1)}};
  }
};

// Per-span provenance carried next to the encoding. Learned backends ignore
// it; the analytic oracle reads nothing else.
struct SpanSignature {
  Word filled = Word::kFirst;
  Word context = Word::kFirst;
};

struct ModelInput {
  EncodedSequence encoded;
  std::vector<SpanSignature> spans;  // layout order, matching segment ids
};

struct LabeledInput {
  ModelInput input;
  std::size_t label = 0;  // index into PredictionDistribution::probs
};

struct TrainingReport {
  double initial_loss = 0.0;
  std::vector<double> epoch_loss;
  std::vector<double> heldout_accuracy;
  std::size_t steps = 0;
  std::size_t train_size = 0;
  std::size_t heldout_size = 0;

  double final_loss() const { return epoch_loss.empty() ? initial_loss : epoch_loss.back(); }
  double final_heldout_accuracy() const {
    return heldout_accuracy.empty() ? 0.0 : heldout_accuracy.back();
  }

  Json to_json() const {
    return Json{{"initial_loss", initial_loss}, {"epoch_loss", epoch_loss},
                {"heldout_accuracy", heldout_accuracy}, {"steps", steps},
                {"train_size", train_size}, {"heldout_size", heldout_size}};
  }

  static TrainingReport from_json(const Json& j) {
    TrainingReport r;
    r.initial_loss = j.value("initial_loss", 0.0);
    r.epoch_loss = j.value("epoch_loss", std::vector<double>{});
    r.heldout_accuracy = j.value("heldout_accuracy", std::vector<double>{});
    r.steps = j.value("steps", std::size_t{0});
    r.train_size = j.value("train_size", std::size_t{0});
    r.heldout_size = j.value("heldout_size", std::size_t{0});
    return r;
  }
};

class ClassifierBackend {
 public:
  virtual ~ClassifierBackend() = default;
  virtual BackendKind kind() const = 0;
  virtual TrainingReport train(std::span<const LabeledInput> train,
                               std::span<const LabeledInput> heldout, const AgentConfig& cfg) = 0;
  virtual std::vector<PredictionDistribution> predict(std::span<const ModelInput> batch) const = 0;
  virtual void save(const std::filesystem::path& dir) const = 0;
  virtual void load(const std::filesystem::path& dir, const AgentConfig& cfg) = 0;
  // Backend-specific settings echoed into the model artifact.
  virtual Json describe() const { return Json::object(); }
};

inline std::size_t argmax(const PredictionDistribution& d) { return d.probs[1] > d.probs[0] ? 1 : 0; }

inline double accuracy(const ClassifierBackend& backend, std::span<const LabeledInput> data) {
  if (data.empty()) return 0.0;
  std::vector<ModelInput> inputs;
  inputs.reserve(data.size());
  for (const auto& d : data) inputs.push_back(d.input);
  const auto preds = backend.predict(inputs);
  std::size_t correct = 0;
  for (std::size_t i = 0; i < data.size(); ++i) correct += argmax(preds[i]) == data[i].label;
  return static_cast<double>(correct) / static_cast<double>(data.size());
}

// Computes the label rule exactly from span provenance. Entailment mode:
// entail iff the two spans agree on word and context. Context mode: the
// probability of w1 is the share of examples written in the question's
// context that show w1.
class OracleBackend : public ClassifierBackend {
 public:
  explicit OracleBackend(AgentMode mode) : mode_(mode) {}

  BackendKind kind() const override { return BackendKind::kOracle; }

  TrainingReport train(std::span<const LabeledInput> train, std::span<const LabeledInput> heldout,
                       const AgentConfig&) override {
    TrainingReport r;
    r.train_size = train.size();
    r.heldout_size = heldout.size();
    r.heldout_accuracy.push_back(accuracy(*this, heldout));
    return r;
  }

  std::vector<PredictionDistribution> predict(std::span<const ModelInput> batch) const override {
    std::vector<PredictionDistribution> out;
    out.reserve(batch.size());
    for (const auto& in : batch) out.push_back(predict_one(in));
    return out;
  }

  void save(const std::filesystem::path&) const override {}
  void load(const std::filesystem::path&, const AgentConfig&) override {}

 private:
  PredictionDistribution predict_one(const ModelInput& in) const {
    if (mode_ == AgentMode::kEntailment) {
      if (in.spans.size() != 2) throw Error("oracle: entailment input needs 2 span signatures");
      const bool entail = in.spans[0].filled == in.spans[1].filled &&
                          in.spans[0].context == in.spans[1].context;
      return PredictionDistribution{{entail ? 1.0 : 0.0, entail ? 0.0 : 1.0}};
    }
    if (in.spans.size() != 7) throw Error("oracle: context input needs 7 span signatures");
    const Word q = in.spans[6].context;
    std::size_t showing_first = 0;
    std::size_t matching = 0;
    for (std::size_t k = 0; k < 6; ++k) {
      if (in.spans[k].context != q) continue;
      ++matching;
      showing_first += in.spans[k].filled == Word::kFirst;
    }
    if (matching == 0) return PredictionDistribution{{0.5, 0.5}};
    const double p1 = static_cast<double>(showing_first) / static_cast<double>(matching);
    return PredictionDistribution{{p1, 1.0 - p1}};
  }

  AgentMode mode_;
};

}  // namespace synsel
