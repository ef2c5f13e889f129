#include <gtest/gtest.h>

#include "support/fixtures.hpp"
#include "synsel/light_backend.hpp"

using namespace synsel;

TEST(WarmupLinearSchedule, RampsThenDecays) {
  WarmupLinearSchedule s(1.0, 0.3, 10);
  EXPECT_EQ(s.warmup_steps(), 3u);
  EXPECT_DOUBLE_EQ(s.rate(0), 1.0 / 3.0);
  EXPECT_DOUBLE_EQ(s.rate(2), 1.0);
  EXPECT_DOUBLE_EQ(s.rate(3), 1.0);
  EXPECT_DOUBLE_EQ(s.rate(9), 1.0 / 7.0);
}

TEST(Adam, FirstStepIsSignedLearningRate) {
  Adam adam(3);
  std::vector<double> p{1.0, -2.0, 0.5};
  adam.step(p, {0.3, -4.0, 0.0}, 0.1);
  EXPECT_NEAR(p[0], 0.9, 1e-6);
  EXPECT_NEAR(p[1], -1.9, 1e-6);
  EXPECT_DOUBLE_EQ(p[2], 0.5);

  Adam decayed(1);
  std::vector<double> q{2.0};
  decayed.step(q, {0.0}, 0.1, 0.5);
  EXPECT_DOUBLE_EQ(q[0], 2.0 - 0.1 * 0.5 * 2.0);
}

namespace {

std::vector<LabeledInput> labeled(AgentMode mode, std::size_t n) {
  const auto& data = fixtures::small_synthetic_data();
  std::vector<LabeledInput> out;
  if (mode == AgentMode::kEntailment) {
    for (const auto& i : build_entailment_instances(data.pool, data.lexicon, MixRatio{2, 1}, 9, n)) {
      out.push_back(to_labeled(i, 256));
    }
  } else {
    for (const auto& i : build_context_instances(data.pool, data.lexicon, MixRatio{2, 1}, 9, n)) {
      out.push_back(to_labeled(i, 256));
    }
  }
  return out;
}

// Central differences against the analytic gradient on every coordinate
// the input touches.
void check_gradient(AgentMode mode) {
  const auto data = labeled(mode, 40);
  LightBackend b(mode);
  AgentConfig cfg = AgentConfig::light_defaults(mode);
  cfg.embedding_dim = 4;
  cfg.init_scale = 0.5;
  b.initialize(data, cfg);
  std::vector<double> grad;
  const double h = 1e-6;
  std::size_t checked = 0;
  for (std::size_t k = 0; k < 3; ++k) {
    const auto& li = data[k];
    b.loss_and_gradient(li.input, li.label, grad);
    auto& p = b.parameters();
    std::vector<double> scratch;
    for (std::size_t i = 0; i < p.size(); ++i) {
      if (grad[i] == 0.0 && i % 7 != 0) continue;
      const double keep = p[i];
      p[i] = keep + h;
      const double up = b.loss_and_gradient(li.input, li.label, scratch);
      p[i] = keep - h;
      const double down = b.loss_and_gradient(li.input, li.label, scratch);
      p[i] = keep;
      const double numeric = (up - down) / (2 * h);
      EXPECT_NEAR(grad[i], numeric, 1e-6 + 1e-4 * std::abs(numeric)) << "param " << i;
      ++checked;
    }
  }
  EXPECT_GT(checked, 30u);
}

}  // namespace

TEST(LightBackendGradient, EntailmentMatchesFiniteDifferences) { check_gradient(AgentMode::kEntailment); }

TEST(LightBackendGradient, ContextMatchesFiniteDifferences) { check_gradient(AgentMode::kContext); }

TEST(LightBackend, TrainingLowersLossAndSurvivesSaveLoad) {
  const auto data = labeled(AgentMode::kEntailment, 600);
  LightBackend b(AgentMode::kEntailment);
  AgentConfig cfg = AgentConfig::light_defaults(AgentMode::kEntailment);
  cfg.epochs = 4;
  const auto report = b.train(std::span(data).first(500), std::span(data).subspan(500), cfg);
  EXPECT_LT(report.final_loss(), report.initial_loss);
  EXPECT_EQ(report.epoch_loss.size(), 4u);
  EXPECT_EQ(report.steps, 4u * 16u);

  const auto dir = std::filesystem::temp_directory_path() / "synsel-light-rt";
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  b.save(dir);
  LightBackend c(AgentMode::kEntailment);
  c.load(dir, cfg);
  std::vector<ModelInput> inputs;
  for (std::size_t i = 500; i < 520; ++i) inputs.push_back(data[i].input);
  const auto p1 = b.predict(inputs);
  const auto p2 = c.predict(inputs);
  for (std::size_t i = 0; i < inputs.size(); ++i) EXPECT_EQ(p1[i].probs, p2[i].probs);

  LightBackend wrong(AgentMode::kContext);
  EXPECT_THROW(wrong.load(dir, cfg), Error);
  std::filesystem::remove_all(dir);
}

TEST(LightBackend, PredictionIsBatchInvariant) {
  const auto data = labeled(AgentMode::kContext, 200);
  LightBackend b(AgentMode::kContext);
  AgentConfig cfg = AgentConfig::light_defaults(AgentMode::kContext);
  cfg.epochs = 3;
  b.train(data, {}, cfg);
  std::vector<ModelInput> inputs;
  for (std::size_t i = 0; i < 10; ++i) inputs.push_back(data[i].input);
  const auto all = b.predict(inputs);
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    EXPECT_EQ(b.predict(std::span(inputs).subspan(i, 1))[0].probs, all[i].probs);
  }
}

TEST(AgentConfig, ValidationAndPartialJson) {
  auto c = AgentConfig::from_json(Json{{"epochs", 5}, {"aggregation", "vote"}});
  EXPECT_EQ(c.epochs, 5u);
  EXPECT_EQ(c.aggregation, Aggregation::kVote);
  EXPECT_EQ(c.max_sequence_length, 256u);
  EXPECT_THROW(AgentConfig::from_json(Json{{"warmup_ratio", 1.0}}), Error);
  EXPECT_THROW(AgentConfig::from_json(Json{{"optimizer", "sgd"}}), Error);
  EXPECT_THROW(AgentConfig::from_json(Json{{"epochs", 2}, {"question_warmup_epochs", 2}}), Error);
  const auto round = AgentConfig::from_json(AgentConfig::light_defaults(AgentMode::kContext).to_json());
  EXPECT_EQ(round.question_warmup_epochs, 2u);
  EXPECT_EQ(round.mode, AgentMode::kContext);
}
