#pragma once

#include "synsel/corpus.hpp"

namespace synsel {

// Two pseudo-adjectives whose contexts draw on disjoint collocate sets. A
// small share of collocates is borrowed from the partner word so the task
// is not perfectly separable.
struct SyntheticOptions {
  std::string pair_id = "blick-dax";
  std::string first = "blick";
  std::string second = "dax";
  std::size_t train_per_word = 1000;
  std::size_t test_per_word = 200;
  std::size_t collocates_per_word = 12;
  std::size_t fillers = 40;
  std::size_t collocates_per_sentence = 3;
  double ambiguity = 0.05;
  std::size_t min_length = 8;
  std::size_t max_length = 14;
  std::size_t documents = 4;
  std::uint64_t seed = 7;
};

struct SyntheticCorpus {
  NearSynonymPair pair;
  std::vector<Document> documents;
  std::vector<std::string> tagger_lexicon;  // word<TAB>TAG lines for the pseudo-words
};

namespace detail {

inline std::vector<std::string> pseudo_words(const std::string& stem, std::size_t n) {
  std::vector<std::string> out;
  for (std::size_t i = 0; i < n; ++i) {
    std::string w = stem;
    std::size_t x = i;
    do {
      w += static_cast<char>('a' + x % 26);
      x /= 26;
    } while (x);
    out.push_back(w);
  }
  return out;
}

}  // namespace detail

inline SyntheticCorpus generate_synthetic_corpus(const SyntheticOptions& opt) {
  if (opt.min_length < 5 || opt.max_length < opt.min_length) throw Error("synthetic: bad length range");
  if (opt.collocates_per_word == 0 || opt.fillers == 0) throw Error("synthetic: empty vocabulary");
  if (opt.documents == 0) throw Error("synthetic: need at least one document");
  SyntheticCorpus corpus;
  corpus.pair = NearSynonymPair{opt.pair_id, opt.first, opt.second, Pos::kAdj};
  corpus.pair.validate();
  corpus.tagger_lexicon = {opt.first + "\tADJ", opt.second + "\tADJ"};

  const std::array<std::vector<std::string>, 2> colloc{
      detail::pseudo_words("mor", opt.collocates_per_word),
      detail::pseudo_words("tiv", opt.collocates_per_word)};
  const auto filler = detail::pseudo_words("zen", opt.fillers);
  const std::array<std::string, 2> target{opt.first, opt.second};

  // 10% headroom for duplicates dropped at ingestion.
  const std::size_t per_word = (opt.train_per_word + opt.test_per_word) * 11 / 10 + 10;
  Rng rng(derive_seed(opt.seed, 0x5917));
  corpus.documents.resize(opt.documents);
  for (std::size_t d = 0; d < opt.documents; ++d) corpus.documents[d].name = "doc" + std::to_string(d);

  for (std::size_t i = 0; i < 2 * per_word; ++i) {
    const std::size_t w = i % 2;
    const std::size_t len = opt.min_length + rng.below(opt.max_length - opt.min_length + 1);
    std::vector<std::string> toks(len - 1);
    for (auto& t : toks) t = filler[rng.below(filler.size())];
    const std::size_t pos = 1 + rng.below(toks.size() - 2);
    toks[pos] = target[w];
    // Collocates land within three tokens of the target.
    const std::size_t lo = pos > 3 ? pos - 3 : 0;
    const std::size_t hi = std::min(toks.size() - 1, pos + 3);
    for (std::size_t c = 0; c < opt.collocates_per_sentence; ++c) {
      std::size_t at = lo + rng.below(hi - lo + 1);
      if (at == pos) at = at + 1 <= hi ? at + 1 : at - 1;
      const std::size_t owner = rng.uniform() < opt.ambiguity ? 1 - w : w;
      toks[at] = colloc[owner][rng.below(colloc[owner].size())];
    }
    toks[0][0] = static_cast<char>(std::toupper(static_cast<unsigned char>(toks[0][0])));
    corpus.documents[i % opt.documents].lines.push_back(join(toks) + " .");
  }
  return corpus;
}

struct SyntheticData {
  PairLexicon lexicon;
  SentencePool pool;
  SkipReport skipped;
};

// Generates the corpus, runs it through ingestion with a tagger that knows
// the pseudo-words, and samples the train/test pool.
inline SyntheticData generate_synthetic_pool(const SyntheticOptions& opt) {
  const SyntheticCorpus corpus = generate_synthetic_corpus(opt);
  SyntheticData data{PairLexicon::from_pair(corpus.pair), {}, {}};
  LexiconTagger tagger;
  tagger.set(opt.first, {Pos::kAdj});
  tagger.set(opt.second, {Pos::kAdj});
  auto ingested = ingest_corpus(corpus.documents, data.lexicon, tagger);
  data.skipped = ingested.skipped;
  data.pool = build_pool(ingested.sentences, corpus.pair, opt.train_per_word + opt.test_per_word,
                         opt.train_per_word, opt.seed);
  return data;
}

}  // namespace synsel
