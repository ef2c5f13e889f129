#pragma once

#include <unistd.h>

#include <atomic>
#include <cstdlib>
#include <filesystem>
#include <string>

#include "synsel/backend.hpp"

namespace synsel {

// Adapter for fine-tuning a pretrained bidirectional transformer with a
// sequence-classification head. Training and inference run in an external
// Python worker (tools/hf_backend.py, or $SYNSEL_HF_WORKER) that exchanges
// line-delimited JSON with this process. Each record carries the encoded
// tokens, their segment ids, and (for training) the label index.
class TransformerBackend : public ClassifierBackend {
 public:
  explicit TransformerBackend(AgentMode mode, AgentConfig cfg = {})
      : mode_(mode), cfg_(std::move(cfg)) {}

  BackendKind kind() const override { return BackendKind::kTransformer; }

  // The hyperparameters handed to the worker.
  Json describe() const override {
    return Json{{"pretrained_model", cfg_.pretrained_model},
                {"max_sequence_length", cfg_.max_sequence_length},
                {"learning_rate", cfg_.learning_rate},
                {"warmup_ratio", cfg_.warmup_ratio},
                {"optimizer", cfg_.optimizer},
                {"epochs", cfg_.epochs},
                {"batch_size", cfg_.batch_size},
                {"seed", cfg_.seed},
                {"num_labels", 2},
                {"mode", to_string(mode_)}};
  }

  static Json record(const ModelInput& in, std::optional<std::size_t> label) {
    std::vector<int> segs(in.encoded.segments.begin(), in.encoded.segments.end());
    Json j{{"tokens", in.encoded.tokens}, {"segments", segs}};
    if (label) j["label"] = *label;
    return j;
  }

  TrainingReport train(std::span<const LabeledInput> train, std::span<const LabeledInput> heldout,
                       const AgentConfig& cfg) override {
    cfg_ = cfg;
    const auto work = scratch_dir();
    write_records(work / "train.jsonl", train);
    write_records(work / "heldout.jsonl", heldout);
    io::write_file(work / "config.json", describe().dump(2));
    model_dir_ = work / "model";
    run({"train", "--config", (work / "config.json").string(), "--train",
         (work / "train.jsonl").string(), "--heldout", (work / "heldout.jsonl").string(), "--out",
         model_dir_.string()});
    return TrainingReport::from_json(Json::parse(io::read_file(model_dir_ / "report.json")));
  }

  std::vector<PredictionDistribution> predict(std::span<const ModelInput> batch) const override {
    if (model_dir_.empty()) throw Error("transformer backend: no model loaded");
    const auto work = scratch_dir();
    std::vector<Json> recs;
    for (const auto& in : batch) recs.push_back(record(in, std::nullopt));
    io::write_jsonl(work / "batch.jsonl", recs);
    run({"predict", "--model", model_dir_.string(), "--input", (work / "batch.jsonl").string(),
         "--out", (work / "probs.jsonl").string()});
    std::vector<PredictionDistribution> out;
    for (const auto& r : io::read_jsonl(work / "probs.jsonl")) {
      out.push_back(PredictionDistribution{{r.at(0).get<double>(), r.at(1).get<double>()}});
    }
    if (out.size() != batch.size()) throw Error("transformer worker returned a short batch");
    return out;
  }

  void save(const std::filesystem::path& dir) const override {
    if (model_dir_.empty()) return;
    std::filesystem::copy(model_dir_, dir / "transformer",
                          std::filesystem::copy_options::recursive |
                              std::filesystem::copy_options::overwrite_existing);
  }

  void load(const std::filesystem::path& dir, const AgentConfig& cfg) override {
    cfg_ = cfg;
    model_dir_ = dir / "transformer";
    if (!std::filesystem::exists(model_dir_)) throw Error("no transformer checkpoint in " + dir.string());
  }

  static std::filesystem::path worker_script() {
    if (const char* env = std::getenv("SYNSEL_HF_WORKER")) return env;
#ifdef SYNSEL_SOURCE_DIR
    return std::filesystem::path(SYNSEL_SOURCE_DIR) / "tools" / "hf_backend.py";
#else
    return "tools/hf_backend.py";
#endif
  }

 private:
  static void write_records(const std::filesystem::path& path, std::span<const LabeledInput> data) {
    std::vector<Json> recs;
    recs.reserve(data.size());
    for (const auto& d : data) recs.push_back(record(d.input, d.label));
    io::write_jsonl(path, recs);
  }

  static std::filesystem::path scratch_dir() {
    static std::atomic<unsigned> counter{0};
    auto dir = std::filesystem::temp_directory_path() /
               ("synsel-hf-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
    std::filesystem::create_directories(dir);
    return dir;
  }

  static std::string quote(const std::string& s) {
    std::string out = "'";
    for (char c : s) {
      if (c == '\'') {
        out += "'\\''";
      } else {
        out += c;
      }
    }
    return out + "'";
  }

  static void run(const std::vector<std::string>& args) {
    const auto script = worker_script();
    if (!std::filesystem::exists(script)) {
      throw Error("transformer worker not found at " + script.string());
    }
    std::string cmd = "python3 " + quote(script.string());
    for (const auto& a : args) cmd += " " + quote(a);
    const int rc = std::system(cmd.c_str());
    if (rc != 0) throw Error("transformer worker failed (exit " + std::to_string(rc) + "): " + cmd);
  }

  AgentMode mode_;
  AgentConfig cfg_;
  std::filesystem::path model_dir_;
};

}  // namespace synsel
