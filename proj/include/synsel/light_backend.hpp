#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <unordered_map>

#include "synsel/backend.hpp"

namespace synsel {

// Linear warmup over the first warmup_ratio of steps, then linear decay to 0.
class WarmupLinearSchedule {
 public:
  WarmupLinearSchedule(double peak, double warmup_ratio, std::size_t total_steps)
      : peak_(peak),
        total_(std::max<std::size_t>(total_steps, 1)),
        warmup_(std::max<std::size_t>(
            1, static_cast<std::size_t>(std::ceil(warmup_ratio * static_cast<double>(total_))))) {}

  double rate(std::size_t step) const {
    if (step < warmup_) {
      return peak_ * static_cast<double>(step + 1) / static_cast<double>(warmup_);
    }
    if (total_ <= warmup_) return peak_;
    return peak_ * static_cast<double>(total_ - step) / static_cast<double>(total_ - warmup_);
  }

  std::size_t warmup_steps() const { return warmup_; }
  std::size_t total_steps() const { return total_; }

 private:
  double peak_;
  std::size_t total_;
  std::size_t warmup_;
};

// Adam over one flat parameter vector.
class Adam {
 public:
  explicit Adam(std::size_t n) : m_(n, 0.0), v_(n, 0.0) {}

  // Decoupled weight decay: params shrink by lr * weight_decay each step.
  void step(std::vector<double>& params, const std::vector<double>& grad, double lr,
            double weight_decay = 0.0) {
    ++t_;
    const double c1 = 1.0 - std::pow(kBeta1, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(kBeta2, static_cast<double>(t_));
    for (std::size_t i = 0; i < params.size(); ++i) {
      m_[i] = kBeta1 * m_[i] + (1.0 - kBeta1) * grad[i];
      v_[i] = kBeta2 * v_[i] + (1.0 - kBeta2) * grad[i] * grad[i];
      params[i] -= lr * ((m_[i] / c1) / (std::sqrt(v_[i] / c2) + kEps) + weight_decay * params[i]);
    }
  }

 private:
  static constexpr double kBeta1 = 0.9;
  static constexpr double kBeta2 = 0.999;
  static constexpr double kEps = 1e-8;
  std::vector<double> m_;
  std::vector<double> v_;
  std::size_t t_ = 0;
};

// Embedding classifier for desk-scale runs. Every content span is pooled
// into a context vector (mean of its context-token embeddings) and a target
// vector (embedding of the slot token). A linear head reads:
//   entailment: [c_e*c_q, t_e*t_q, |c_e-c_q|, |t_e-t_q|]
//   context:    [c_q, m] with m = 1/6 sum_k (c_k . c_q) t_k
// In context mode the first question_warmup_epochs update only the question
// path, the way a pretrained encoder already predicts a masked word from its
// own sentence before fine-tuning starts.
// Inference is per-input and sequential, so batching never changes a result.
class LightBackend : public ClassifierBackend {
 public:
  explicit LightBackend(AgentMode mode) : mode_(mode) {}

  BackendKind kind() const override { return BackendKind::kLight; }

  TrainingReport train(std::span<const LabeledInput> train, std::span<const LabeledInput> heldout,
                       const AgentConfig& cfg) override {
    initialize(train, cfg);

    std::vector<Prepared> prepared;
    prepared.reserve(train.size());
    for (const auto& li : train) prepared.push_back(prepare(li.input));

    TrainingReport report;
    report.train_size = train.size();
    report.heldout_size = heldout.size();
    report.initial_loss = dataset_loss(prepared, train);

    const std::size_t per_epoch = (train.size() + cfg.batch_size - 1) / cfg.batch_size;
    WarmupLinearSchedule schedule(cfg.learning_rate, cfg.warmup_ratio, per_epoch * cfg.epochs);
    Adam adam(params_.size());
    std::vector<double> grad(params_.size(), 0.0);
    Rng rng(derive_seed(cfg.seed, 0x4c49));
    std::vector<std::size_t> order(train.size());
    std::iota(order.begin(), order.end(), std::size_t{0});

    std::size_t step = 0;
    for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
      question_only_ = mode_ == AgentMode::kContext && epoch < cfg.question_warmup_epochs;
      rng.shuffle(order);
      double epoch_loss = 0.0;
      for (std::size_t b = 0; b < train.size(); b += cfg.batch_size) {
        const std::size_t e = std::min(train.size(), b + cfg.batch_size);
        std::fill(grad.begin(), grad.end(), 0.0);
        double batch_loss = 0.0;
        const double scale = 1.0 / static_cast<double>(e - b);
        for (std::size_t i = b; i < e; ++i) {
          const std::size_t idx = order[i];
          batch_loss += forward_backward(prepared[idx], train[idx].label, &grad, scale);
        }
        if (!std::isfinite(batch_loss)) {
          throw Error("training diverged: non-finite loss at step " + std::to_string(step));
        }
        adam.step(params_, grad, schedule.rate(step), cfg.weight_decay);
        epoch_loss += batch_loss;
        ++step;
      }
      report.epoch_loss.push_back(epoch_loss / static_cast<double>(train.size()));
      report.heldout_accuracy.push_back(accuracy(*this, heldout));
    }
    question_only_ = false;
    report.steps = step;
    return report;
  }

  std::vector<PredictionDistribution> predict(std::span<const ModelInput> batch) const override {
    if (params_.empty()) throw Error("light backend: model is not trained");
    std::vector<PredictionDistribution> out;
    out.reserve(batch.size());
    for (const auto& in : batch) {
      const auto z = logits(prepare(in));
      out.push_back(PredictionDistribution::from_logits(z[0], z[1]));
    }
    return out;
  }

  void save(const std::filesystem::path& dir) const override {
    std::string vocab;
    for (const auto& w : vocab_list_) vocab += w + '\n';
    io::write_file(dir / "vocab.txt", vocab);
    Json j{{"format", "synsel-light-v1"},
           {"mode", to_string(mode_)},
           {"dim", dim_},
           {"vocab_size", vocab_list_.size()},
           {"params", params_}};
    io::write_file(dir / "weights.json", j.dump() + "\n");
  }

  void load(const std::filesystem::path& dir, const AgentConfig&) override {
    const Json j = Json::parse(io::read_file(dir / "weights.json"));
    if (j.at("format") != "synsel-light-v1") throw Error("unsupported light weights format");
    if (parse_agent_mode(j.at("mode").get<std::string>()) != mode_) {
      throw Error("light weights were trained for another mode");
    }
    dim_ = j.at("dim").get<std::size_t>();
    vocab_list_ = io::read_lines(dir / "vocab.txt");
    if (vocab_list_.size() != j.at("vocab_size").get<std::size_t>()) {
      throw Error("vocab.txt does not match weights.json");
    }
    vocab_.clear();
    for (std::size_t i = 0; i < vocab_list_.size(); ++i) vocab_[vocab_list_[i]] = static_cast<int>(i);
    params_ = j.at("params").get<std::vector<double>>();
    if (params_.size() != param_count()) throw Error("light weights have the wrong size");
  }

  Json describe() const override {
    return Json{{"embedding_dim", dim_}, {"vocab_size", vocab_list_.size()},
                {"features", mode_ == AgentMode::kEntailment ? "product+absdiff" : "context+attention"}};
  }

  std::size_t vocab_size() const { return vocab_list_.size(); }

  // Builds the vocabulary from train and draws initial parameters.
  void initialize(std::span<const LabeledInput> train, const AgentConfig& cfg) {
    if (train.empty()) throw Error("light backend: empty training set");
    dim_ = cfg.embedding_dim;
    build_vocab(train, cfg.max_vocab);
    init_params(cfg);
  }

  std::vector<double>& parameters() { return params_; }

  // Cross-entropy of one input and its gradient with respect to parameters().
  double loss_and_gradient(const ModelInput& in, std::size_t label, std::vector<double>& grad) const {
    grad.assign(params_.size(), 0.0);
    return forward_backward(prepare(in), label, &grad, 1.0);
  }

 private:
  struct SpanIds {
    std::vector<int> context;
    int target = -1;
  };
  using Prepared = std::vector<SpanIds>;

  static constexpr const char* kUnk = "[UNK]";

  std::size_t n_spans() const { return mode_ == AgentMode::kEntailment ? 2 : 7; }
  std::size_t n_features() const { return mode_ == AgentMode::kEntailment ? 4 * dim_ : 2 * dim_; }
  std::size_t embedding_size() const { return vocab_list_.size() * dim_; }
  std::size_t param_count() const { return embedding_size() + 2 * n_features() + 2; }
  std::size_t head_w() const { return embedding_size(); }
  std::size_t head_b() const { return embedding_size() + 2 * n_features(); }

  void build_vocab(std::span<const LabeledInput> train, std::size_t max_vocab) {
    std::map<std::string, std::size_t> counts;
    for (const auto& li : train) {
      const auto& enc = li.input.encoded;
      for (std::size_t i = 0; i < enc.size(); ++i) {
        if (enc.roles[i] == TokenRole::kContext || enc.roles[i] == TokenRole::kTarget) {
          ++counts[to_lower(enc.tokens[i])];
        }
      }
    }
    std::vector<std::pair<std::string, std::size_t>> ranked(counts.begin(), counts.end());
    std::stable_sort(ranked.begin(), ranked.end(),
                     [](const auto& a, const auto& b) { return a.second > b.second; });
    if (max_vocab > 1 && ranked.size() > max_vocab - 1) ranked.resize(max_vocab - 1);
    vocab_list_.assign(1, kUnk);
    for (auto& [w, c] : ranked) vocab_list_.push_back(w);
    vocab_.clear();
    for (std::size_t i = 0; i < vocab_list_.size(); ++i) vocab_[vocab_list_[i]] = static_cast<int>(i);
  }

  void init_params(const AgentConfig& cfg) {
    params_.assign(param_count(), 0.0);
    Rng rng(derive_seed(cfg.seed, 0x494e4954));
    for (std::size_t i = 0; i < embedding_size(); ++i) params_[i] = cfg.init_scale * rng.normal();
  }

  int lookup(const std::string& tok) const {
    auto it = vocab_.find(to_lower(tok));
    return it == vocab_.end() ? 0 : it->second;
  }

  Prepared prepare(const ModelInput& in) const {
    const auto& enc = in.encoded;
    Prepared spans(n_spans());
    for (std::size_t i = 0; i < enc.size(); ++i) {
      const std::size_t seg = enc.segments[i];
      if (seg >= spans.size()) throw Error("light backend: unexpected segment id");
      switch (enc.roles[i]) {
        case TokenRole::kContext: spans[seg].context.push_back(lookup(enc.tokens[i])); break;
        case TokenRole::kTarget: spans[seg].target = lookup(enc.tokens[i]); break;
        default: break;
      }
    }
    return spans;
  }

  const double* emb(int id) const { return &params_[static_cast<std::size_t>(id) * dim_]; }

  std::vector<double> pool_context(const SpanIds& s) const {
    std::vector<double> c(dim_, 0.0);
    if (s.context.empty()) return c;
    for (int id : s.context) {
      const double* e = emb(id);
      for (std::size_t d = 0; d < dim_; ++d) c[d] += e[d];
    }
    const double inv = 1.0 / static_cast<double>(s.context.size());
    for (auto& x : c) x *= inv;
    return c;
  }

  std::vector<double> pool_target(const SpanIds& s) const {
    if (s.target < 0) return std::vector<double>(dim_, 0.0);
    const double* e = emb(s.target);
    return std::vector<double>(e, e + dim_);
  }

  struct Forward {
    std::vector<std::vector<double>> c;  // per span
    std::vector<std::vector<double>> t;
    std::vector<double> sims;            // context mode: c_k . c_q
    std::vector<double> features;
    std::array<double, 2> z{};
  };

  Forward run(const Prepared& spans) const {
    Forward f;
    for (const auto& s : spans) {
      f.c.push_back(pool_context(s));
      f.t.push_back(pool_target(s));
    }
    const std::size_t nf = n_features();
    f.features.assign(nf, 0.0);
    if (mode_ == AgentMode::kEntailment) {
      for (std::size_t d = 0; d < dim_; ++d) {
        f.features[d] = f.c[0][d] * f.c[1][d];
        f.features[dim_ + d] = f.t[0][d] * f.t[1][d];
        f.features[2 * dim_ + d] = std::abs(f.c[0][d] - f.c[1][d]);
        f.features[3 * dim_ + d] = std::abs(f.t[0][d] - f.t[1][d]);
      }
    } else {
      const auto& cq = f.c[6];
      f.sims.assign(6, 0.0);
      for (std::size_t k = 0; k < 6; ++k) {
        double s = 0.0;
        for (std::size_t d = 0; d < dim_; ++d) s += f.c[k][d] * cq[d];
        f.sims[k] = s;
      }
      for (std::size_t d = 0; d < dim_; ++d) {
        f.features[d] = cq[d];
        double m = 0.0;
        for (std::size_t k = 0; k < 6; ++k) m += f.sims[k] * f.t[k][d];
        f.features[dim_ + d] = m / 6.0;
      }
    }
    const double* w = &params_[head_w()];
    const double* b = &params_[head_b()];
    for (std::size_t o = 0; o < 2; ++o) {
      double z = b[o];
      for (std::size_t i = 0; i < nf; ++i) z += w[o * nf + i] * f.features[i];
      f.z[o] = z;
    }
    return f;
  }

  std::array<double, 2> logits(const Prepared& spans) const { return run(spans).z; }

  double dataset_loss(const std::vector<Prepared>& prepared,
                      std::span<const LabeledInput> data) const {
    double total = 0.0;
    for (std::size_t i = 0; i < prepared.size(); ++i) {
      const auto z = logits(prepared[i]);
      const auto p = PredictionDistribution::from_logits(z[0], z[1]);
      total += -std::log(std::max(p.probs[data[i].label], 1e-300));
    }
    return total / static_cast<double>(prepared.size());
  }

  // Accumulates scale * dLoss/dparams into grad; returns the example loss.
  double forward_backward(const Prepared& spans, std::size_t label, std::vector<double>* grad,
                          double scale) const {
    const Forward f = run(spans);
    const auto p = PredictionDistribution::from_logits(f.z[0], f.z[1]);
    const double loss = -std::log(std::max(p.probs[label], 1e-300));
    std::array<double, 2> dz{p.probs[0] * scale, p.probs[1] * scale};
    dz[label] -= scale;

    const std::size_t nf = n_features();
    const double* w = &params_[head_w()];
    auto& g = *grad;
    // Question-only phase: the example features get no gradient at all.
    const std::size_t trained = question_only_ ? dim_ : nf;
    std::vector<double> df(nf, 0.0);
    for (std::size_t o = 0; o < 2; ++o) {
      g[head_b() + o] += dz[o];
      for (std::size_t i = 0; i < trained; ++i) {
        g[head_w() + o * nf + i] += dz[o] * f.features[i];
        df[i] += dz[o] * w[o * nf + i];
      }
    }

    std::vector<std::vector<double>> dc(spans.size(), std::vector<double>(dim_, 0.0));
    std::vector<std::vector<double>> dt(spans.size(), std::vector<double>(dim_, 0.0));
    if (mode_ == AgentMode::kEntailment) {
      for (std::size_t d = 0; d < dim_; ++d) {
        dc[0][d] += df[d] * f.c[1][d];
        dc[1][d] += df[d] * f.c[0][d];
        dt[0][d] += df[dim_ + d] * f.t[1][d];
        dt[1][d] += df[dim_ + d] * f.t[0][d];
        const double sc = f.c[0][d] > f.c[1][d] ? 1.0 : (f.c[0][d] < f.c[1][d] ? -1.0 : 0.0);
        dc[0][d] += df[2 * dim_ + d] * sc;
        dc[1][d] -= df[2 * dim_ + d] * sc;
        const double st = f.t[0][d] > f.t[1][d] ? 1.0 : (f.t[0][d] < f.t[1][d] ? -1.0 : 0.0);
        dt[0][d] += df[3 * dim_ + d] * st;
        dt[1][d] -= df[3 * dim_ + d] * st;
      }
    } else {
      const auto& cq = f.c[6];
      for (std::size_t d = 0; d < dim_; ++d) dc[6][d] += df[d];
      for (std::size_t k = 0; k < 6; ++k) {
        double dm_dot_t = 0.0;
        for (std::size_t d = 0; d < dim_; ++d) {
          const double dm = df[dim_ + d] / 6.0;
          dt[k][d] += dm * f.sims[k];
          dm_dot_t += dm * f.t[k][d];
        }
        for (std::size_t d = 0; d < dim_; ++d) {
          dc[k][d] += dm_dot_t * cq[d];
          dc[6][d] += dm_dot_t * f.c[k][d];
        }
      }
    }

    for (std::size_t s = 0; s < spans.size(); ++s) {
      const auto& ids = spans[s].context;
      if (!ids.empty()) {
        const double inv = 1.0 / static_cast<double>(ids.size());
        for (int id : ids) {
          double* ge = &g[static_cast<std::size_t>(id) * dim_];
          for (std::size_t d = 0; d < dim_; ++d) ge[d] += dc[s][d] * inv;
        }
      }
      if (spans[s].target >= 0) {
        double* ge = &g[static_cast<std::size_t>(spans[s].target) * dim_];
        for (std::size_t d = 0; d < dim_; ++d) ge[d] += dt[s][d];
      }
    }
    return loss;
  }

  AgentMode mode_;
  bool question_only_ = false;
  std::size_t dim_ = 16;
  std::vector<std::string> vocab_list_;
  std::unordered_map<std::string, int> vocab_;
  std::vector<double> params_;
};

}  // namespace synsel
