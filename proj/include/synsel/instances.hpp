#pragma once

#include <array>
#include <optional>
#include <string>
#include <vector>

#include "synsel/corpus.hpp"

namespace synsel {

enum class EntailLabel { kEntail, kNotEntail };

inline std::string to_string(EntailLabel l) {
  return l == EntailLabel::kEntail ? "entail" : "not_entail";
}

inline EntailLabel parse_entail_label(std::string_view s) {
  if (s == "entail") return EntailLabel::kEntail;
  if (s == "not_entail") return EntailLabel::kNotEntail;
  throw Error("unknown entailment label '" + std::string(s) + "'");
}

// Moves the target slot to the other pair member, keeping the inflection
// class and leading capitalization. The context is untouched, so
// context_owner stays and filled_word flips.
inline TargetSentence swap_target(const TargetSentence& s, const PairLexicon& lex) {
  if (s.pair_id != lex.pair.pair_id) {
    throw Error("swap_target: sentence " + s.sentence_id + " is not from pair " + lex.pair.pair_id);
  }
  const std::string& token = s.target();
  const auto cls = lex.inflections.classify(s.filled_word, token);
  if (!cls) {
    throw Error("swap_target: no inflection-matched form available for '" + token + "'");
  }
  const Word to = other(s.filled_word);
  auto form = lex.inflections.form(to, *cls);
  if (!form) {
    throw Error("swap_target: no " + *cls + " form of '" + lex.pair.word(to) +
                "' to replace '" + token + "'");
  }
  if (!token.empty() && std::isupper(static_cast<unsigned char>(token[0])) && !form->empty()) {
    (*form)[0] = static_cast<char>(std::toupper(static_cast<unsigned char>((*form)[0])));
  }
  TargetSentence out = s;
  out.tokens[s.target_index] = *form;
  out.filled_word = to;
  return out;
}

// Returns s with its slot filled by w (a no-op when already filled by w).
inline TargetSentence fill_target(const TargetSentence& s, Word w, const PairLexicon& lex) {
  return s.filled_word == w ? s : swap_target(s, lex);
}

// Entailment holds exactly when the example and question agree on both the
// word in the slot and the word the context belongs to.
inline EntailLabel entail_label(const TargetSentence& example, const TargetSentence& question) {
  if (example.pair_id != question.pair_id) {
    throw Error("entail_label: pair mismatch (" + example.pair_id + " vs " + question.pair_id + ")");
  }
  return example.filled_word == question.filled_word &&
                 example.context_owner == question.context_owner
             ? EntailLabel::kEntail
             : EntailLabel::kNotEntail;
}

// Case template of an (example, question) pairing, normalized to the
// example's context word a:
//   example authentic:  2 = Q[a]^a, 3 = Q[b]^b, 4 = Q[b]^a, 5 = Q[a]^b
//   example swapped:    6 = Q[a]^a, 7 = Q[b]^b, 8 = Q[b]^a, 9 = Q[a]^b
inline int entail_template(const TargetSentence& example, const TargetSentence& question) {
  const Word a = example.context_owner;
  const bool same_context = question.context_owner == a;
  const bool question_authentic = question.authentic();
  int base;
  if (same_context) {
    base = question_authentic ? 0 : 2;
  } else {
    base = question_authentic ? 1 : 3;
  }
  return (example.authentic() ? 2 : 6) + base;
}

struct EntailmentInstance {
  TargetSentence example;
  TargetSentence question;
  EntailLabel label = EntailLabel::kNotEntail;
  bool perturbed = false;
  int template_id = 0;

  Json to_json() const {
    return Json{{"type", "entail"},
                {"template", template_id},
                {"pair_id", example.pair_id},
                {"example_ids", Json::array({example.sentence_id})},
                {"question_id", question.sentence_id},
                {"label", to_string(label)},
                {"perturbed", perturbed},
                {"example", example.to_json()},
                {"question", question.to_json()}};
  }

  static EntailmentInstance from_json(const Json& j) {
    if (j.at("type") != "entail") throw Error("expected an entail instance record");
    EntailmentInstance inst;
    inst.example = TargetSentence::from_json(j.at("example"));
    inst.question = TargetSentence::from_json(j.at("question"));
    inst.label = parse_entail_label(j.at("label").get<std::string>());
    inst.perturbed = j.at("perturbed").get<bool>();
    inst.template_id = j.at("template").get<int>();
    if (inst.label != entail_label(inst.example, inst.question)) {
      throw Error("instance " + inst.example.sentence_id + "/" + inst.question.sentence_id +
                  ": label disagrees with the entailment rule");
    }
    return inst;
  }
};

// Six sentences: slots 0-2 are presented for w1, slots 3-5 for w2.
struct ExampleSet {
  std::string pair_id;
  std::array<TargetSentence, 6> examples;

  static constexpr std::size_t kPerWord = 3;

  static Word slot_word(std::size_t i) { return i < kPerWord ? Word::kFirst : Word::kSecond; }

  // Members whose slot currently shows w (what a learner reads as "an
  // example of w"), in slot order.
  std::vector<const TargetSentence*> showing(Word w) const {
    std::vector<const TargetSentence*> out;
    for (const auto& e : examples) {
      if (e.filled_word == w) out.push_back(&e);
    }
    return out;
  }

  std::string id() const {
    std::string out;
    for (std::size_t i = 0; i < examples.size(); ++i) {
      if (i) out += '+';
      out += examples[i].sentence_id;
      if (!examples[i].authentic()) out += '*';
    }
    return out;
  }

  void validate() const {
    for (std::size_t i = 0; i < examples.size(); ++i) {
      if (examples[i].pair_id != pair_id) {
        throw Error("example set: member " + examples[i].sentence_id + " is from another pair");
      }
    }
  }

  bool operator==(const ExampleSet&) const = default;

  Json to_json() const {
    Json arr = Json::array();
    for (const auto& e : examples) arr.push_back(e.to_json());
    return Json{{"pair_id", pair_id}, {"examples", arr}};
  }

  static ExampleSet from_json(const Json& j) {
    ExampleSet s;
    s.pair_id = j.at("pair_id").get<std::string>();
    const auto& arr = j.at("examples");
    if (arr.size() != 6) throw Error("example set must have exactly 6 members");
    for (std::size_t i = 0; i < 6; ++i) s.examples[i] = TargetSentence::from_json(arr[i]);
    s.validate();
    return s;
  }
};

// Builds an authentic set from three sentences per word.
inline ExampleSet make_example_set(const std::string& pair_id,
                                   std::span<const TargetSentence> first,
                                   std::span<const TargetSentence> second) {
  if (first.size() != ExampleSet::kPerWord || second.size() != ExampleSet::kPerWord) {
    throw Error("example set needs 3 sentences per word");
  }
  ExampleSet set;
  set.pair_id = pair_id;
  for (std::size_t i = 0; i < 3; ++i) {
    set.examples[i] = first[i];
    set.examples[i + 3] = second[i];
  }
  set.validate();
  return set;
}

// Swaps every member's target word; slot assignment is preserved.
inline ExampleSet swap_all(const ExampleSet& set, const PairLexicon& lex) {
  ExampleSet out = set;
  for (auto& e : out.examples) e = swap_target(e, lex);
  return out;
}

struct ContextInstance {
  ExampleSet example_set;
  std::array<std::size_t, 6> order{0, 1, 2, 3, 4, 5};  // presentation order of slots
  TargetSentence question;                             // authentic; masked at encoding
  Word answer = Word::kFirst;
  bool perturbed = false;
  int template_id = 0;

  Json to_json() const {
    Json ids = Json::array();
    for (std::size_t i : order) ids.push_back(example_set.examples[i].sentence_id);
    return Json{{"type", "context"},
                {"template", template_id},
                {"pair_id", example_set.pair_id},
                {"set_ids", ids},
                {"question_id", question.sentence_id},
                {"label", answer == Word::kFirst ? "w1" : "w2"},
                {"perturbed", perturbed},
                {"order", order},
                {"set", example_set.to_json()},
                {"question", question.to_json()}};
  }

  static ContextInstance from_json(const Json& j) {
    if (j.at("type") != "context") throw Error("expected a context instance record");
    ContextInstance inst;
    inst.example_set = ExampleSet::from_json(j.at("set"));
    inst.order = j.at("order").get<std::array<std::size_t, 6>>();
    inst.question = TargetSentence::from_json(j.at("question"));
    const std::string label = j.at("label").get<std::string>();
    if (label != "w1" && label != "w2") throw Error("context label must be w1 or w2");
    inst.answer = label == "w1" ? Word::kFirst : Word::kSecond;
    inst.perturbed = j.at("perturbed").get<bool>();
    inst.template_id = j.at("template").get<int>();
    return inst;
  }
};

struct MixRatio {
  std::size_t normal = 2;
  std::size_t perturbed = 1;

  void validate() const {
    if (normal == 0) throw Error("mix ratio: normal weight must be positive");
  }
  bool no_perturbation() const { return perturbed == 0; }

  // "2:1"; "1:0" disables perturbed instances (ablation runs).
  static MixRatio parse(std::string_view s) {
    const auto parts = split(s, ':');
    if (parts.size() != 2) throw Error("ratio must look like N:M, got '" + std::string(s) + "'");
    MixRatio r{std::stoul(parts[0]), std::stoul(parts[1])};
    r.validate();
    return r;
  }

  // Normal-instance share of total, rounded to nearest.
  std::size_t normal_count(std::size_t total) const {
    const std::size_t w = normal + perturbed;
    return (total * normal * 2 + w) / (2 * w);
  }
};

namespace detail {

inline const TargetSentence& pick(const std::vector<TargetSentence>& v, Rng& rng) {
  return v[rng.below(v.size())];
}

// Splits n into per-template counts: half entail, the rest spread evenly
// over the three not-entail templates (remainder to the earliest).
inline std::array<std::size_t, 4> template_counts(std::size_t n) {
  const std::size_t entail = (n + 1) / 2;
  const std::size_t rest = n - entail;
  std::array<std::size_t, 3> neg{rest / 3, rest / 3, rest / 3};
  for (std::size_t i = 0; i < rest % 3; ++i) ++neg[i];
  return {entail, neg[0], neg[1], neg[2]};
}

}  // namespace detail

// Entailment training instances. Normal instances use authentic examples
// (templates 2-5); perturbed instances use swapped examples (templates 6-9).
// Within each group entail and not_entail are balanced 1:1 by downsampling
// the three not-entail templates. Questions come from the train split; the
// corrupted question variants are produced with swap_target.
inline std::vector<EntailmentInstance> build_entailment_instances(
    const SentencePool& pool, const PairLexicon& lex, const MixRatio& ratio, std::uint64_t seed,
    std::optional<std::size_t> total = std::nullopt) {
  ratio.validate();
  for (Word w : kBothWords) {
    if (pool.train(w).size() < 2) {
      throw Error("pool too small: need at least 2 train sentences for '" + lex.pair.word(w) +
                  "', have " + std::to_string(pool.train(w).size()));
    }
  }
  const std::size_t n_total =
      total.value_or(3 * (pool.train(Word::kFirst).size() + pool.train(Word::kSecond).size()));
  if (n_total < ratio.normal + ratio.perturbed) {
    throw Error("pool too small to satisfy ratio: " + std::to_string(n_total) + " instances");
  }
  const std::size_t n_normal = ratio.normal_count(n_total);
  const std::size_t n_perturbed = n_total - n_normal;

  Rng rng(derive_seed(seed, 0x454e54));
  std::vector<EntailmentInstance> out;
  out.reserve(n_total);

  // Template order inside a group: entail, then the three not-entail cases.
  // {same context?, question authentic?}
  struct Shape {
    int offset;
    bool same_context;
    bool question_authentic;
  };
  // Offsets relative to the group's first template (2 or 6).
  constexpr std::array<Shape, 4> kNormalShapes{
      Shape{0, true, true}, Shape{1, false, true}, Shape{2, true, false}, Shape{3, false, false}};
  constexpr std::array<Shape, 4> kPerturbedShapes{
      Shape{2, true, false}, Shape{0, true, true}, Shape{1, false, true}, Shape{3, false, false}};

  for (const bool perturbed : {false, true}) {
    const std::size_t n = perturbed ? n_perturbed : n_normal;
    if (n == 0) continue;
    const auto counts = detail::template_counts(n);
    const auto& shapes = perturbed ? kPerturbedShapes : kNormalShapes;
    // Emit in ascending template id.
    std::array<std::size_t, 4> by_offset{};
    for (std::size_t k = 0; k < 4; ++k) by_offset[static_cast<std::size_t>(shapes[k].offset)] = k;
    for (std::size_t off = 0; off < 4; ++off) {
      const Shape& sh = shapes[by_offset[off]];
      const std::size_t count = counts[by_offset[off]];
      for (std::size_t i = 0; i < count; ++i) {
        const Word a = (i % 2 == 0) ? Word::kFirst : Word::kSecond;
        const TargetSentence& e = detail::pick(pool.train(a), rng);
        const Word j = sh.same_context ? a : other(a);
        const auto& qpool = pool.train(j);
        const TargetSentence* q = &detail::pick(qpool, rng);
        while (q->sentence_id == e.sentence_id) q = &detail::pick(qpool, rng);

        EntailmentInstance inst;
        inst.example = perturbed ? swap_target(e, lex) : e;
        inst.question = sh.question_authentic ? *q : swap_target(*q, lex);
        inst.label = entail_label(inst.example, inst.question);
        inst.perturbed = perturbed;
        inst.template_id = entail_template(inst.example, inst.question);
        out.push_back(std::move(inst));
      }
    }
  }
  return out;
}

// Context-modeling instances. Normal (11: question in w1 context, 12: w2)
// pair an authentic set with the gold word; perturbed (13, 14) pair the
// fully swapped set with the opposite word. Set members exclude the
// question and are drawn without replacement; presentation is shuffled.
inline std::vector<ContextInstance> build_context_instances(
    const SentencePool& pool, const PairLexicon& lex, const MixRatio& ratio, std::uint64_t seed,
    std::optional<std::size_t> total = std::nullopt) {
  ratio.validate();
  for (Word w : kBothWords) {
    if (pool.train(w).size() < ExampleSet::kPerWord + 1) {
      throw Error("pool too small: need at least 4 train sentences for '" + lex.pair.word(w) +
                  "', have " + std::to_string(pool.train(w).size()));
    }
  }
  const std::size_t n_total =
      total.value_or(pool.train(Word::kFirst).size() + pool.train(Word::kSecond).size());
  if (n_total < ratio.normal + ratio.perturbed) {
    throw Error("pool too small to satisfy ratio: " + std::to_string(n_total) + " instances");
  }
  const std::size_t n_normal = ratio.normal_count(n_total);
  const std::size_t n_perturbed = n_total - n_normal;

  Rng rng(derive_seed(seed, 0x435458));
  auto draw_three = [&](Word w, const std::string& exclude) {
    const auto& src = pool.train(w);
    std::vector<TargetSentence> picked;
    std::vector<std::size_t> used;
    while (picked.size() < ExampleSet::kPerWord) {
      const std::size_t idx = rng.below(src.size());
      if (src[idx].sentence_id == exclude) continue;
      if (std::find(used.begin(), used.end(), idx) != used.end()) continue;
      used.push_back(idx);
      picked.push_back(src[idx]);
    }
    return picked;
  };

  std::vector<ContextInstance> out;
  out.reserve(n_total);
  for (const bool perturbed : {false, true}) {
    const std::size_t n = perturbed ? n_perturbed : n_normal;
    for (Word ctx : kBothWords) {
      const std::size_t count = ctx == Word::kFirst ? (n + 1) / 2 : n / 2;
      for (std::size_t i = 0; i < count; ++i) {
        ContextInstance inst;
        inst.question = detail::pick(pool.train(ctx), rng);
        const auto first = draw_three(Word::kFirst, inst.question.sentence_id);
        const auto second = draw_three(Word::kSecond, inst.question.sentence_id);
        inst.example_set = make_example_set(pool.pair_id, first, second);
        if (perturbed) inst.example_set = swap_all(inst.example_set, lex);
        std::vector<std::size_t> order{0, 1, 2, 3, 4, 5};
        rng.shuffle(order);
        std::copy(order.begin(), order.end(), inst.order.begin());
        inst.answer = perturbed ? other(ctx) : ctx;
        inst.perturbed = perturbed;
        inst.template_id = (perturbed ? 13 : 11) + (ctx == Word::kFirst ? 0 : 1);
        out.push_back(std::move(inst));
      }
    }
  }
  return out;
}

// Instance files mix nothing: every record has the same "type".
inline std::vector<Json> to_records(const std::vector<EntailmentInstance>& v) {
  std::vector<Json> out;
  out.reserve(v.size());
  for (const auto& i : v) out.push_back(i.to_json());
  return out;
}

inline std::vector<Json> to_records(const std::vector<ContextInstance>& v) {
  std::vector<Json> out;
  out.reserve(v.size());
  for (const auto& i : v) out.push_back(i.to_json());
  return out;
}

}  // namespace synsel
