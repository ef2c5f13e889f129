#include <gtest/gtest.h>

#include "support/fixtures.hpp"
#include "synsel/encoding.hpp"

using namespace synsel;
using fixtures::sentence;

namespace {

// (example filled, example context, question filled, question context)
// written out by hand: only the four cases where the example and question
// agree on both entries entail.
struct LabelRow {
  int ef, ec, qf, qc;
  bool entail;
};

constexpr LabelRow kLabelTable[16] = {
    {1, 1, 1, 1, true},  {1, 1, 1, 2, false}, {1, 1, 2, 1, false}, {1, 1, 2, 2, false},
    {1, 2, 1, 1, false}, {1, 2, 1, 2, true},  {1, 2, 2, 1, false}, {1, 2, 2, 2, false},
    {2, 1, 1, 1, false}, {2, 1, 1, 2, false}, {2, 1, 2, 1, true},  {2, 1, 2, 2, false},
    {2, 2, 1, 1, false}, {2, 2, 1, 2, false}, {2, 2, 2, 1, false}, {2, 2, 2, 2, true},
};

TargetSentence variant(const PairLexicon& lex, int filled, int ctx, const std::string& id) {
  auto base = sentence(id, lex, word_from_int(ctx),
                       ctx == 1 ? "The small dog ran home ." : "A little bit of sugar helps .");
  return fill_target(base, word_from_int(filled), lex);
}

}  // namespace

TEST(EntailLabel, AllSixteenCombinations) {
  const auto lex = fixtures::small_little();
  std::size_t entails = 0;
  for (const auto& row : kLabelTable) {
    const auto e = variant(lex, row.ef, row.ec, "e");
    const auto q = variant(lex, row.qf, row.qc, "q");
    const bool got = entail_label(e, q) == EntailLabel::kEntail;
    EXPECT_EQ(got, row.entail) << row.ef << row.ec << "|" << row.qf << row.qc;
    entails += got;
  }
  EXPECT_EQ(entails, 4u);
}

TEST(EntailLabel, PairMismatchThrows) {
  auto a = sentence("a", fixtures::small_little(), Word::kFirst, "The small dog .");
  auto b = a;
  b.pair_id = "other";
  EXPECT_THROW(entail_label(a, b), Error);
}

TEST(SwapTarget, PreservesCaseAndInflectionClass) {
  const auto lex = fixtures::small_little();
  auto s = sentence("s", lex, Word::kFirst, "The small dog .");
  s.tokens[1] = "Small";
  const auto t = swap_target(s, lex);
  EXPECT_EQ(t.target(), "Little");
  EXPECT_EQ(t.filled_word, Word::kSecond);
  EXPECT_EQ(t.context_owner, Word::kFirst);
  EXPECT_EQ(swap_target(t, lex).target(), "Small");

  auto verbs = PairLexicon::from_pair(NearSynonymPair{"delay-postpone", "delay", "postpone", Pos::kVerb});
  auto v = sentence("v", verbs, Word::kFirst, "They delay the launch .");
  v.tokens[1] = "delayed";
  EXPECT_EQ(swap_target(v, verbs).target(), "postponed");
}

TEST(EntailmentInstances, RatioBalanceAndConsistentLabels) {
  const auto& data = fixtures::small_synthetic_data();
  const auto inst = build_entailment_instances(data.pool, data.lexicon, MixRatio{2, 1}, 5, 900);
  ASSERT_EQ(inst.size(), 900u);
  std::size_t perturbed = 0, entail = 0;
  for (const auto& i : inst) {
    perturbed += i.perturbed;
    entail += i.label == EntailLabel::kEntail;
    EXPECT_EQ(i.label, entail_label(i.example, i.question));
    EXPECT_EQ(i.perturbed, !i.example.authentic());
    EXPECT_EQ(i.question.split, Split::kTrain);
    EXPECT_EQ(i.template_id, entail_template(i.example, i.question));
    EXPECT_NE(i.example.sentence_id, i.question.sentence_id);
  }
  EXPECT_EQ(perturbed, 300u);
  EXPECT_EQ(entail, 450u);
  // Round trip through the record format.
  for (std::size_t k = 0; k < 5; ++k) {
    const auto back = EntailmentInstance::from_json(inst[k].to_json());
    EXPECT_EQ(back.example, inst[k].example);
    EXPECT_EQ(back.label, inst[k].label);
  }
  const auto again = build_entailment_instances(data.pool, data.lexicon, MixRatio{2, 1}, 5, 900);
  EXPECT_EQ(again[17].to_json(), inst[17].to_json());
}

TEST(EntailmentInstances, NoPerturbationRatio) {
  const auto& data = fixtures::small_synthetic_data();
  for (const auto& i : build_entailment_instances(data.pool, data.lexicon, MixRatio::parse("1:0"), 2, 200)) {
    EXPECT_FALSE(i.perturbed);
  }
  EXPECT_THROW(MixRatio::parse("0:1"), Error);
  EXPECT_THROW(MixRatio::parse("2-1"), Error);
}

TEST(ContextInstances, PerturbedSetsFlipTheAnswer) {
  const auto& data = fixtures::small_synthetic_data();
  const auto inst = build_context_instances(data.pool, data.lexicon, MixRatio{2, 1}, 3, 300);
  ASSERT_EQ(inst.size(), 300u);
  std::size_t perturbed = 0;
  for (const auto& i : inst) {
    perturbed += i.perturbed;
    EXPECT_TRUE(i.question.authentic());
    EXPECT_EQ(i.answer, i.perturbed ? other(i.question.context_owner) : i.question.context_owner);
    std::set<std::size_t> order(i.order.begin(), i.order.end());
    EXPECT_EQ(order.size(), 6u);
    for (std::size_t k = 0; k < 6; ++k) {
      const auto& e = i.example_set.examples[k];
      EXPECT_NE(e.sentence_id, i.question.sentence_id);
      EXPECT_EQ(e.context_owner, ExampleSet::slot_word(k));
      EXPECT_EQ(e.authentic(), !i.perturbed);
    }
  }
  EXPECT_EQ(perturbed, 100u);
  const auto back = ContextInstance::from_json(inst[4].to_json());
  EXPECT_EQ(back.example_set, inst[4].example_set);
  EXPECT_EQ(back.order, inst[4].order);
}

TEST(ExampleSetCorruption, SwapAllKeepsSlots) {
  const auto& data = fixtures::small_synthetic_data();
  const auto& t1 = data.pool.test(Word::kFirst);
  const auto& t2 = data.pool.test(Word::kSecond);
  auto set = make_example_set("blick-dax", std::span(t1).first(3), std::span(t2).first(3));
  auto bad = swap_all(set, data.lexicon);
  for (std::size_t k = 0; k < 6; ++k) {
    EXPECT_EQ(bad.examples[k].context_owner, set.examples[k].context_owner);
    EXPECT_EQ(bad.examples[k].filled_word, other(set.examples[k].filled_word));
  }
  EXPECT_EQ(bad.showing(Word::kFirst).size(), 3u);
  EXPECT_EQ(bad.showing(Word::kFirst)[0]->context_owner, Word::kSecond);
  EXPECT_EQ(swap_all(bad, data.lexicon), set);
}

TEST(Encoding, ProportionalTruncationOfLongPairs) {
  const auto lex = fixtures::small_little();
  std::string long_text;
  for (int i = 0; i < 199; ++i) long_text += (i == 120 ? "small " : "w" + std::to_string(i) + " ");
  auto a = sentence("a", lex, Word::kFirst, long_text);
  auto b = sentence("b", lex, Word::kFirst, long_text);
  a.tokens.push_back(".");
  b.tokens.push_back(".");
  ASSERT_EQ(a.tokens.size(), 200u);
  const auto seq = encode_entailment_input(a, b, 256);
  EXPECT_EQ(seq.size(), 256u);
  EXPECT_EQ(seq.span_length(0), 126u);
  EXPECT_EQ(seq.span_length(1), 127u);
  // Both targets survive truncation.
  EXPECT_EQ(std::count(seq.roles.begin(), seq.roles.end(), TokenRole::kTarget), 2);
}

TEST(Encoding, ShortPairsAreUntouched) {
  const auto lex = fixtures::small_little();
  auto a = sentence("a", lex, Word::kFirst, "The small dog .");
  auto b = sentence("b", lex, Word::kSecond, "A little cat .");
  const auto seq = encode_entailment_input(a, b, 256);
  EXPECT_EQ(seq.tokens, (std::vector<std::string>{"[CLS]", "The", "small", "dog", ".", "[SEP]", "A", "little",
                                                  "cat", ".", "[SEP]"}));
  EXPECT_EQ(seq.segments.front(), 0);
  EXPECT_EQ(seq.segments.back(), 1);
}

TEST(Encoding, ContextInputMasksOnlyTheQuestion) {
  const auto& data = fixtures::small_synthetic_data();
  const auto& t1 = data.pool.test(Word::kFirst);
  const auto& t2 = data.pool.test(Word::kSecond);
  auto set = make_example_set("blick-dax", std::span(t1).first(3), std::span(t2).first(3));
  const auto seq = encode_context_input(set, {5, 4, 3, 2, 1, 0}, t1[10], 512);
  EXPECT_EQ(std::count(seq.roles.begin(), seq.roles.end(), TokenRole::kMask), 1);
  EXPECT_EQ(std::count(seq.roles.begin(), seq.roles.end(), TokenRole::kTarget), 6);
  EXPECT_EQ(seq.span_length(0), t2[2].tokens.size());
  EXPECT_EQ(seq.span_length(6), t1[10].tokens.size());

  const auto tight = encode_context_input(set, t1[10], 64);
  EXPECT_LE(tight.size(), 64u);
  EXPECT_EQ(tight.span_length(6), t1[10].tokens.size());
}

TEST(Encoding, LongestFirstTrimming) {
  EXPECT_EQ(longest_first_keep({10, 4, 10}, 18), (std::vector<std::size_t>{7, 4, 7}));
  EXPECT_EQ(longest_first_keep({3, 3}, 10), (std::vector<std::size_t>{3, 3}));
  EXPECT_THROW(longest_first_keep({1, 1}, 1), Error);
}
