// synsel: corpus ingestion, agent training, evaluation, example selection and
// the learner-study service.

#include <CLI11.hpp>

#include <csignal>
#include <iostream>

#include "synsel/behavior.hpp"
#include "synsel/gmm.hpp"
#include "synsel/selector.hpp"
#include "synsel/study_http.hpp"
#include "synsel/synthetic.hpp"

using namespace synsel;
namespace fs = std::filesystem;

namespace {

void print_json(const Json& j) { std::cout << j.dump(2) << "\n"; }

AgentMode mode_flag(const std::string& s) { return parse_agent_mode(s == "entail" ? "entailment" : s); }

// The pool directory's only pair, or the requested one.
LoadedPool load_pool(const fs::path& dir, const std::string& pair) {
  if (!pair.empty()) return read_pool_dir(dir, pair);
  const auto pairs = list_pool_pairs(dir);
  if (pairs.size() != 1) throw Error("pool directory holds " + std::to_string(pairs.size()) + " pairs; pass --pair");
  return read_pool_dir(dir, pairs.front());
}

std::array<std::vector<TargetSentence>, 2> test_sentences_except(const SentencePool& pool,
                                                                 const std::unordered_set<std::string>& skip) {
  std::array<std::vector<TargetSentence>, 2> out;
  for (Word w : kBothWords) {
    for (const auto& s : pool.test(w)) {
      if (!skip.contains(s.sentence_id)) out[slot(w)].push_back(s);
    }
  }
  return out;
}

std::vector<std::size_t> parse_k_list(const std::string& s) {
  std::vector<std::size_t> ks;
  for (const auto& part : split(s, ',')) ks.push_back(std::stoul(part));
  return ks;
}

int cmd_ingest(const fs::path& pairs_file, const fs::path& corpus_dir, const fs::path& lexicon, std::size_t per_word,
               std::size_t train, std::uint64_t seed, const fs::path& out, std::size_t min_len, std::size_t max_len) {
  const auto pairs = read_pair_list(pairs_file);
  const auto docs = read_corpus_dir(corpus_dir);
  LexiconTagger tagger = lexicon.empty() ? LexiconTagger() : LexiconTagger::from_file(lexicon);
  fs::create_directories(out);
  io::write_file(out / "pairs.tsv", format_pair_list(pairs));
  int failures = 0;
  Json summary = Json::array();
  for (const auto& pair : pairs) {
    tagger.ensure(pair.w1, pair.pos);
    tagger.ensure(pair.w2, pair.pos);
    const auto lex = PairLexicon::from_pair(pair);
    const auto ingested = ingest_corpus(docs, lex, tagger, IngestOptions{min_len, max_len});
    Json row{{"pair_id", pair.pair_id}, {"sentences", ingested.sentences.size()},
             {"skipped", ingested.skipped.to_json()}};
    try {
      write_pool_dir(out, build_pool(ingested.sentences, pair, per_word, train, seed), lex);
    } catch (const Error& e) {
      row["error"] = e.what();
      ++failures;
    }
    summary.push_back(row);
  }
  print_json(summary);
  return failures ? 1 : 0;
}

int cmd_synth(const SyntheticOptions& opt, const fs::path& out) {
  const auto corpus = generate_synthetic_corpus(opt);
  fs::create_directories(out / "corpus");
  for (const auto& d : corpus.documents) io::write_file(out / "corpus" / d.name, join(d.lines, "\n") + "\n");
  io::write_file(out / "pairs.tsv", format_pair_list({corpus.pair}));
  io::write_file(out / "lexicon.tsv", join(corpus.tagger_lexicon, "\n") + "\n");
  print_json(Json{{"pair_id", corpus.pair.pair_id}, {"documents", corpus.documents.size()}, {"out", out.string()}});
  return 0;
}

int cmd_build_instances(const fs::path& pool_dir, const std::string& pair, const std::string& mode,
                        const std::string& ratio_s, std::uint64_t seed, std::optional<std::size_t> total,
                        const fs::path& out) {
  const auto lp = load_pool(pool_dir, pair);
  const auto ratio = MixRatio::parse(ratio_s);
  std::vector<Json> recs;
  if (mode_flag(mode) == AgentMode::kEntailment) {
    recs = to_records(build_entailment_instances(lp.pool, lp.lexicon, ratio, seed, total));
  } else {
    recs = to_records(build_context_instances(lp.pool, lp.lexicon, ratio, seed, total));
  }
  if (out.has_parent_path()) fs::create_directories(out.parent_path());
  io::write_jsonl(out, recs);
  io::write_file(out.string() + ".lexicon.json", lp.lexicon.to_json().dump(2) + "\n");
  print_json(Json{{"instances", recs.size()}, {"out", out.string()}});
  return 0;
}

int cmd_train(const fs::path& instances, const std::string& mode, const std::string& backend,
              const fs::path& config, fs::path lexicon, const fs::path& out) {
  const AgentMode m = mode_flag(mode);
  const BackendKind kind = parse_backend_kind(backend);
  AgentConfig cfg = kind == BackendKind::kLight ? AgentConfig::light_defaults(m) : AgentConfig{};
  if (!config.empty()) cfg = AgentConfig::from_json(Json::parse(io::read_file(config)), cfg);
  cfg.mode = m;
  cfg.backend = kind;
  if (lexicon.empty()) lexicon = instances.string() + ".lexicon.json";
  const auto lex = PairLexicon::from_json(Json::parse(io::read_file(lexicon)));
  const auto data = read_instances(instances);
  if ((m == AgentMode::kEntailment) != std::holds_alternative<std::vector<EntailmentInstance>>(data)) {
    throw Error("instance file does not match --mode " + mode);
  }
  Agent agent = kind == BackendKind::kOracle ? Agent::oracle(m, lex) : train_agent(data, lex, cfg);
  agent.save(out);
  print_json(Json{{"out", out.string()}, {"report", agent.report().to_json()}});
  return 0;
}

int cmd_eval(const fs::path& model, const fs::path& pool_dir, std::size_t k, std::size_t n_sets, std::uint64_t seed,
             const fs::path& out) {
  const Agent agent = Agent::load(model);
  const auto lp = read_pool_dir(pool_dir, agent.lexicon().pair.pair_id);
  const Quiz quiz = make_quiz(lp.pool, k, seed);
  const auto qids = quiz.question_ids();
  const auto sets = sample_example_sets(lp.pool.pair_id, test_sentences_except(lp.pool, {qids.begin(), qids.end()}),
                                        n_sets, seed);
  const auto results =
      parallel_map(sets.size(), [&](std::size_t i) { return run_quiz(agent, sets[i], quiz).to_json(); });
  std::vector<double> acc;
  for (const auto& r : results) acc.push_back(r["accuracy"].get<double>());
  if (!out.empty()) {
    io::write_jsonl(out, results);
    io::write_jsonl(out.string() + ".quiz.jsonl", quiz.to_records());
  }
  print_json(Json{{"pair_id", lp.pool.pair_id}, {"quiz_id", quiz.quiz_id}, {"sets", sets.size()},
                  {"mean_accuracy", mean(acc)}});
  return 0;
}

// Sets come from the first half of the test split and quizzes from the
// second, so no quiz question is ever one of the examples.
int cmd_calibrate(const fs::path& model, const fs::path& pool_dir, const std::string& ks, std::size_t n_sets,
                  std::uint64_t seed, const fs::path& out) {
  const Agent agent = Agent::load(model);
  const auto lp = read_pool_dir(pool_dir, agent.lexicon().pair.pair_id);
  std::array<std::vector<TargetSentence>, 2> example_half;
  SentencePool quiz_pool = lp.pool;
  for (Word w : kBothWords) {
    const auto& test = lp.pool.test(w);
    const auto mid = test.begin() + static_cast<std::ptrdiff_t>(test.size() / 2);
    example_half[slot(w)].assign(test.begin(), mid);
    quiz_pool.per_word_test[slot(w)].assign(mid, test.end());
  }
  const auto sets = sample_example_sets(lp.pool.pair_id, example_half, n_sets, seed);
  const auto report = calibrate_quiz_size(agent, sets, quiz_pool, parse_k_list(ks), seed);
  if (!out.empty()) io::write_file(out, report.to_json().dump(2) + "\n");
  print_json(report.to_json());
  return 0;
}

int cmd_behavior(const fs::path& model, const fs::path& pool_dir, std::size_t n_sets, std::size_t k,
                 std::uint64_t seed, bool welch, const fs::path& out) {
  const Agent agent = Agent::load(model);
  const auto lp = read_pool_dir(pool_dir, agent.lexicon().pair.pair_id);
  BehaviorOptions opt;
  if (welch) opt.variant = TTestVariant::kWelch;
  const auto r = run_behavior_check(agent, lp.pool, n_sets, k, seed, opt);
  if (!out.empty()) io::write_file(out, r.to_json().dump(2) + "\n");
  Json summary{{"pair_id", r.pair_id}, {"n_sets", r.n_sets}, {"acc", r.lexical_acc}, {"delta", r.delta}};
  summary["t"] = r.t_score ? Json(*r.t_score) : Json(nullptr);
  summary["p"] = r.p_value ? Json(*r.p_value) : Json(nullptr);
  if (!r.t_error.empty()) summary["t_error"] = r.t_error;
  print_json(summary);
  return 0;
}

int cmd_sample_candidates(const fs::path& pool_dir, const std::string& pair, std::size_t per_word, std::uint64_t seed,
                          const fs::path& out) {
  const auto lp = load_pool(pool_dir, pair);
  const auto cp = sample_candidate_pool(lp.pool, per_word, seed);
  io::write_jsonl(out, cp.to_records());
  print_json(Json{{"pair_id", cp.pair_id}, {"per_word", per_word}, {"out", out.string()}});
  return 0;
}

// Adds this agent's most common three to <dir>/<pair>.selection.json,
// keeping picks already stored there for the other agent.
void update_selection_file(const fs::path& dir, const CandidatePool& pool, StudyArm arm,
                           const std::array<std::vector<std::string>, 2>& picks) {
  fs::create_directories(dir);
  const auto path = selection_file(dir, pool.pair_id);
  PairSelection sel;
  if (fs::exists(path)) sel = PairSelection::from_json(Json::parse(io::read_file(path)));
  sel.pair_id = pool.pair_id;
  for (Word w : kBothWords) {
    sel.candidates[slot(w)].clear();
    for (const auto& s : pool.of(w)) sel.candidates[slot(w)].push_back({s.sentence_id, join(s.tokens)});
  }
  sel.picks[arm] = picks;
  io::write_file(path, sel.to_json().dump(2) + "\n");
}

int cmd_select(const fs::path& model, const fs::path& candidates, const fs::path& sentences, std::size_t k,
               std::uint64_t seed, const std::string& baseline, const fs::path& out, const fs::path& selections) {
  const Agent agent = Agent::load(model);
  const auto pool = CandidatePool::from_records(io::read_jsonl(candidates));
  const auto lp = read_pool_dir(sentences, pool.pair_id);
  std::unordered_set<std::string> exclude;
  for (Word w : kBothWords) {
    for (const auto& s : pool.of(w)) exclude.insert(s.sentence_id);
  }
  const Quiz quiz = make_quiz(lp.pool, k, seed, exclude);
  const auto r = select_best_sets(agent, pool, quiz);
  Json result = r.to_json();
  if (baseline == "gmm") {
    const std::array<std::vector<TargetSentence>, 2> train{lp.pool.train(Word::kFirst), lp.pool.train(Word::kSecond)};
    const auto g = gmm_baseline_select(pool, train, hashed_context_embedder(), seed);
    Json gj{{"top3", {{"w1", g.top3[0]}, {"w2", g.top3[1]}}}, {"components", g.components}, {"warnings", g.warnings}};
    if (!pool.gold[0].empty() || !pool.gold[1].empty()) {
      const auto m = selection_metrics(g.top3, pool.gold);
      gj["precision"] = m.precision;
      gj["recall"] = m.recall;
      gj["f1"] = m.f1;
    }
    result["gmm_baseline"] = gj;
  } else if (baseline != "none") {
    throw Error("--baseline must be gmm or none");
  }
  if (!out.empty()) io::write_file(out, result.dump(2) + "\n");
  if (!selections.empty()) {
    const StudyArm arm = agent.mode() == AgentMode::kEntailment ? StudyArm::kEntailment : StudyArm::kContext;
    update_selection_file(selections, pool, arm, r.most_common_three);
  }
  print_json(result);
  return 0;
}

httplib::Server* g_server = nullptr;

int cmd_serve(const fs::path& catalog, const fs::path& selections, const fs::path& store, const std::string& host,
              int port) {
  StudyService svc(Catalog::read_dir(catalog), read_selections(selections), store);
  httplib::Server server;
  mount_study_routes(server, svc);
  g_server = &server;
  std::signal(SIGINT, [](int) { g_server->stop(); });
  std::signal(SIGTERM, [](int) { g_server->stop(); });
  std::cerr << "serving " << svc.catalog().size() << " question sets on " << host << ":" << port << ", sessions in "
            << store.string() << "\n";
  if (!server.listen(host, port)) throw Error("cannot listen on " + host + ":" + std::to_string(port));
  svc.snapshot_all();
  return 0;
}

int cmd_report(const fs::path& sessions, const fs::path& catalog, bool from_log) {
  print_json(group_report(StudyService::read_sessions(sessions, !from_log), Catalog::read_dir(catalog)).to_json());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Learner-like agents for near-synonym example sentence selection"};
  app.require_subcommand(1);
  std::function<int()> action;

  std::string pair, mode = "entail", ratio = "2:1", backend = "light", ks = "10,50,100,200", baseline = "none";
  std::string host = "127.0.0.1";
  fs::path pairs_file, corpus, lexicon, out, pool, instances, config, model, candidates, sentences, selections,
      catalog, store = "sessions";
  std::size_t per_word = 5000, train = 4000, k = 100, n_sets = 50, min_len = 5, max_len = 60;
  std::optional<std::size_t> total;
  std::uint64_t seed = 1;
  int port = 8080;
  bool welch = false, from_log = false;
  SyntheticOptions synth;

  auto* ingest = app.add_subcommand("ingest", "Extract target sentences and build per-pair pools");
  ingest->add_option("--pairs", pairs_file, "Pair list (pair_id, w1, w2, pos; tab separated)")->required();
  ingest->add_option("--corpus", corpus, "Directory of plain-text files, one sentence per line")->required();
  ingest->add_option("--lexicon", lexicon, "Tagger lexicon (word<TAB>TAG[,TAG])");
  ingest->add_option("--per-word", per_word, "Sentences sampled per word")->capture_default_str();
  ingest->add_option("--train", train, "Of which go to the train split")->capture_default_str();
  ingest->add_option("--min-tokens", min_len)->capture_default_str();
  ingest->add_option("--max-tokens", max_len)->capture_default_str();
  ingest->add_option("--seed", seed)->capture_default_str();
  ingest->add_option("--out", out, "Pool directory")->required();
  ingest->callback([&] {
    action = [&] { return cmd_ingest(pairs_file, corpus, lexicon, per_word, train, seed, out, min_len, max_len); };
  });

  auto* syn = app.add_subcommand("synth", "Write a synthetic two-word corpus with disjoint collocates");
  syn->add_option("--train-per-word", synth.train_per_word)->capture_default_str();
  syn->add_option("--test-per-word", synth.test_per_word)->capture_default_str();
  syn->add_option("--ambiguity", synth.ambiguity, "Share of sentences with partner collocates")->capture_default_str();
  syn->add_option("--seed", synth.seed)->capture_default_str();
  syn->add_option("--out", out)->required();
  syn->callback([&] { action = [&] { return cmd_synth(synth, out); }; });

  auto* build = app.add_subcommand("build-instances", "Build entailment or context training instances");
  build->add_option("--pool", pool)->required();
  build->add_option("--pair", pair, "Pair id (needed when the pool holds several)");
  build->add_option("--mode", mode)->check(CLI::IsMember({"entail", "context"}))->capture_default_str();
  build->add_option("--ratio", ratio, "normal:perturbed")->capture_default_str();
  build->add_option("--total", total, "Instance count (default: one per train sentence)");
  build->add_option("--seed", seed)->capture_default_str();
  build->add_option("--out", out)->required();
  build->callback([&] { action = [&] { return cmd_build_instances(pool, pair, mode, ratio, seed, total, out); }; });

  auto* tr = app.add_subcommand("train", "Train an agent");
  tr->add_option("--instances", instances)->required();
  tr->add_option("--mode", mode)->check(CLI::IsMember({"entail", "context"}))->capture_default_str();
  tr->add_option("--backend", backend)->check(CLI::IsMember({"transformer", "light", "oracle"}))->capture_default_str();
  tr->add_option("--config", config, "JSON overrides for the agent configuration");
  tr->add_option("--lexicon", lexicon, "Pair lexicon (default: written next to the instances)");
  tr->add_option("--out", out)->required();
  tr->callback([&] { action = [&] { return cmd_train(instances, mode, backend, config, lexicon, out); }; });

  auto* ev = app.add_subcommand("eval-fitb", "Fill-in-the-blank accuracy over sampled example sets");
  ev->add_option("--model", model)->required();
  ev->add_option("--pool", pool)->required();
  ev->add_option("--k", k)->capture_default_str();
  ev->add_option("--sets", n_sets)->capture_default_str();
  ev->add_option("--seed", seed)->capture_default_str();
  ev->add_option("--out", out, "Per-set result rows");
  ev->callback([&] { action = [&] { return cmd_eval(model, pool, k, n_sets, seed, out); }; });

  auto* cal = app.add_subcommand("calibrate-k", "Quiz-size stability across independent quizzes");
  cal->add_option("--model", model)->required();
  cal->add_option("--pool", pool)->required();
  cal->add_option("--k", ks, "Comma-separated quiz sizes")->capture_default_str();
  cal->add_option("--sets", n_sets)->capture_default_str();
  cal->add_option("--seed", seed)->capture_default_str();
  cal->add_option("--out", out);
  cal->callback([&] { action = [&] { return cmd_calibrate(model, pool, ks, n_sets, seed, out); }; });

  auto* beh = app.add_subcommand("behavior-check", "Accuracy on authentic versus swapped example sets");
  beh->add_option("--model", model)->required();
  beh->add_option("--pool", pool)->required();
  beh->add_option("--sets", n_sets)->capture_default_str();
  beh->add_option("--k", k)->capture_default_str();
  beh->add_option("--seed", seed)->capture_default_str();
  beh->add_flag("--welch", welch, "Welch t-test instead of the paired test");
  beh->add_option("--out", out);
  beh->callback([&] { action = [&] { return cmd_behavior(model, pool, n_sets, k, seed, welch, out); }; });

  auto* cand = app.add_subcommand("sample-candidates", "Draw a candidate pool from a pool's test split");
  cand->add_option("--pool", pool)->required();
  cand->add_option("--pair", pair);
  cand->add_option("--per-word", per_word)->default_val(10);
  cand->add_option("--seed", seed)->capture_default_str();
  cand->add_option("--out", out)->required();
  cand->callback([&] { action = [&] { return cmd_sample_candidates(pool, pair, per_word, seed, out); }; });

  auto* sel = app.add_subcommand("select", "Exhaustive example-set search over a candidate pool");
  sel->add_option("--model", model)->required();
  sel->add_option("--pool", candidates, "Candidate-pool file")->required();
  sel->add_option("--sentences", sentences, "Pool directory the quiz is drawn from")->required();
  sel->add_option("--k", k)->capture_default_str();
  sel->add_option("--seed", seed)->capture_default_str();
  sel->add_option("--baseline", baseline)->check(CLI::IsMember({"gmm", "none"}))->capture_default_str();
  sel->add_option("--out", out);
  sel->add_option("--selections", selections, "Directory of study selection files to update");
  sel->callback([&] {
    action = [&] { return cmd_select(model, candidates, sentences, k, seed, baseline, out, selections); };
  });

  auto* serve = app.add_subcommand("serve", "Run the learner-study service");
  serve->add_option("--catalog", catalog, "Directory of question-set files")->required();
  serve->add_option("--selections", selections, "Directory of selection files")->required();
  serve->add_option("--store", store, "Session event logs")->capture_default_str();
  serve->add_option("--host", host)->capture_default_str();
  serve->add_option("--port", port)->capture_default_str();
  serve->callback([&] { action = [&] { return cmd_serve(catalog, selections, store, host, port); }; });

  auto* rep = app.add_subcommand("report", "Group report recomputed from session logs");
  rep->add_option("--sessions", store, "Session store directory")->required();
  rep->add_option("--catalog", catalog)->required();
  rep->add_flag("--from-log", from_log, "Ignore snapshots and replay full logs");
  rep->callback([&] { action = [&] { return cmd_report(store, catalog, from_log); }; });

  CLI11_PARSE(app, argc, argv);
  try {
    return action();
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
