#pragma once

#include <array>
#include <filesystem>
#include <future>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "synsel/common.hpp"
#include "synsel/io.hpp"

namespace synsel {

// Coarse universal tag set. Pairs may only use the four open-class tags.
enum class Pos {
  kAdj, kAdp, kAdv, kAux, kConj, kDet, kNoun, kNum, kPart, kPron, kPropn,
  kPunct, kVerb, kOther
};

inline std::string to_string(Pos p) {
  switch (p) {
    case Pos::kAdj: return "ADJ";
    case Pos::kAdp: return "ADP";
    case Pos::kAdv: return "ADV";
    case Pos::kAux: return "AUX";
    case Pos::kConj: return "CONJ";
    case Pos::kDet: return "DET";
    case Pos::kNoun: return "NOUN";
    case Pos::kNum: return "NUM";
    case Pos::kPart: return "PART";
    case Pos::kPron: return "PRON";
    case Pos::kPropn: return "PROPN";
    case Pos::kPunct: return "PUNCT";
    case Pos::kVerb: return "VERB";
    case Pos::kOther: return "X";
  }
  return "X";
}

inline Pos parse_pos(std::string_view s) {
  static const std::map<std::string, Pos, std::less<>> kTags = {
      {"ADJ", Pos::kAdj},   {"ADP", Pos::kAdp},     {"ADV", Pos::kAdv},
      {"AUX", Pos::kAux},   {"CONJ", Pos::kConj},   {"DET", Pos::kDet},
      {"NOUN", Pos::kNoun}, {"NUM", Pos::kNum},     {"PART", Pos::kPart},
      {"PRON", Pos::kPron}, {"PROPN", Pos::kPropn}, {"PUNCT", Pos::kPunct},
      {"VERB", Pos::kVerb}, {"X", Pos::kOther}};
  auto it = kTags.find(s);
  if (it == kTags.end()) throw Error("unknown part-of-speech tag '" + std::string(s) + "'");
  return it->second;
}

inline bool is_pair_pos(Pos p) {
  return p == Pos::kAdj || p == Pos::kNoun || p == Pos::kVerb || p == Pos::kAdv;
}

struct NearSynonymPair {
  std::string pair_id;
  std::string w1;
  std::string w2;
  Pos pos = Pos::kAdj;

  const std::string& word(Word w) const { return w == Word::kFirst ? w1 : w2; }

  void validate() const {
    if (pair_id.empty()) throw Error("pair_id must be nonempty");
    if (w1.empty() || w2.empty()) throw Error("pair " + pair_id + ": words must be nonempty");
    if (to_lower(w1) == to_lower(w2)) throw Error("pair " + pair_id + ": w1 == w2");
    if (!is_pair_pos(pos)) {
      throw Error("pair " + pair_id + ": pos must be ADJ, NOUN, VERB or ADV, got " +
                  to_string(pos));
    }
  }

  bool operator==(const NearSynonymPair&) const = default;
};

// Pair list file: pair_id<TAB>w1<TAB>w2<TAB>pos, one per line.
inline std::vector<NearSynonymPair> parse_pair_list(const std::vector<std::string>& lines) {
  std::vector<NearSynonymPair> pairs;
  std::set<std::string> seen;
  std::size_t lineno = 0;
  for (const auto& line : lines) {
    ++lineno;
    if (line.empty() || line[0] == '#') continue;
    auto cols = split(line, '\t');
    if (cols.size() != 4) {
      throw Error("pair list line " + std::to_string(lineno) + ": expected 4 tab-separated fields");
    }
    NearSynonymPair p{cols[0], cols[1], cols[2], parse_pos(cols[3])};
    p.validate();
    if (!seen.insert(p.pair_id).second) throw Error("duplicate pair_id " + p.pair_id);
    pairs.push_back(std::move(p));
  }
  return pairs;
}

inline std::vector<NearSynonymPair> read_pair_list(const std::filesystem::path& path) {
  return parse_pair_list(io::read_lines(path));
}

inline std::string format_pair_list(const std::vector<NearSynonymPair>& pairs) {
  std::string out;
  for (const auto& p : pairs) {
    out += p.pair_id + '\t' + p.w1 + '\t' + p.w2 + '\t' + to_string(p.pos) + '\n';
  }
  return out;
}

namespace detail {

inline bool ends_with(std::string_view s, std::string_view suffix) {
  return s.size() >= suffix.size() && s.substr(s.size() - suffix.size()) == suffix;
}

inline bool is_vowel(char c) {
  return c == 'a' || c == 'e' || c == 'i' || c == 'o' || c == 'u';
}

inline std::string sibilant_suffix(const std::string& w) {
  if (ends_with(w, "s") || ends_with(w, "x") || ends_with(w, "z") || ends_with(w, "ch") ||
      ends_with(w, "sh")) {
    return w + "es";
  }
  if (w.size() >= 2 && w.back() == 'y' && !is_vowel(w[w.size() - 2])) {
    return w.substr(0, w.size() - 1) + "ies";
  }
  return w + "s";
}

inline std::string past_form(const std::string& w) {
  if (ends_with(w, "e")) return w + "d";
  if (w.size() >= 2 && w.back() == 'y' && !is_vowel(w[w.size() - 2])) {
    return w.substr(0, w.size() - 1) + "ied";
  }
  return w + "ed";
}

inline std::string gerund_form(const std::string& w) {
  if (ends_with(w, "e") && !ends_with(w, "ee") && w.size() > 2) {
    return w.substr(0, w.size() - 1) + "ing";
  }
  return w + "ing";
}

}  // namespace detail

// Per-pair table of inflected surface forms, keyed by inflection class
// ("base", "plural", "3sg", "past", "gerund"). Matching is case-insensitive.
class InflectionTable {
 public:
  InflectionTable() = default;

  // Regular English morphology for the pair's part of speech. Adjectives and
  // adverbs match their base form only.
  static InflectionTable generate(const NearSynonymPair& pair) {
    InflectionTable t;
    for (Word w : kBothWords) {
      const std::string base = to_lower(pair.word(w));
      t.add(w, "base", base);
      if (pair.pos == Pos::kNoun) {
        t.add(w, "plural", detail::sibilant_suffix(base));
      } else if (pair.pos == Pos::kVerb) {
        t.add(w, "3sg", detail::sibilant_suffix(base));
        t.add(w, "past", detail::past_form(base));
        t.add(w, "gerund", detail::gerund_form(base));
      }
    }
    return t;
  }

  void add(Word w, const std::string& cls, const std::string& form) {
    auto& forms = forms_[slot(w)];
    const std::string lower = to_lower(form);
    for (auto& [c, f] : forms) {
      if (c == cls) {
        f = lower;
        return;
      }
    }
    forms.emplace_back(cls, lower);
  }

  // Inflection class of token as a form of w, if any.
  std::optional<std::string> classify(Word w, std::string_view token) const {
    const std::string lower = to_lower(token);
    for (const auto& [cls, form] : forms_[slot(w)]) {
      if (form == lower) return cls;
    }
    return std::nullopt;
  }

  bool matches(Word w, std::string_view token) const { return classify(w, token).has_value(); }

  std::optional<std::string> form(Word w, std::string_view cls) const {
    for (const auto& [c, f] : forms_[slot(w)]) {
      if (c == cls) return f;
    }
    return std::nullopt;
  }

  const std::vector<std::pair<std::string, std::string>>& forms(Word w) const {
    return forms_[slot(w)];
  }

  bool operator==(const InflectionTable&) const = default;

  Json to_json() const {
    Json j = Json::object();
    for (Word w : kBothWords) {
      Json arr = Json::array();
      for (const auto& [c, f] : forms_[slot(w)]) arr.push_back({{"class", c}, {"form", f}});
      j[w == Word::kFirst ? "w1" : "w2"] = arr;
    }
    return j;
  }

  static InflectionTable from_json(const Json& j) {
    InflectionTable t;
    for (Word w : kBothWords) {
      for (const auto& e : j.at(w == Word::kFirst ? "w1" : "w2")) {
        t.add(w, e.at("class").get<std::string>(), e.at("form").get<std::string>());
      }
    }
    return t;
  }

 private:
  std::array<std::vector<std::pair<std::string, std::string>>, 2> forms_;
};

// A pair together with the morphology needed to move a target between words.
struct PairLexicon {
  NearSynonymPair pair;
  InflectionTable inflections;

  static PairLexicon from_pair(NearSynonymPair p) {
    p.validate();
    InflectionTable t = InflectionTable::generate(p);
    return PairLexicon{std::move(p), std::move(t)};
  }

  Json to_json() const {
    return Json{{"pair_id", pair.pair_id},
                {"w1", pair.w1},
                {"w2", pair.w2},
                {"pos", to_string(pair.pos)},
                {"inflections", inflections.to_json()}};
  }

  static PairLexicon from_json(const Json& j) {
    NearSynonymPair p{j.at("pair_id").get<std::string>(), j.at("w1").get<std::string>(),
                      j.at("w2").get<std::string>(), parse_pos(j.at("pos").get<std::string>())};
    p.validate();
    InflectionTable t = j.contains("inflections") ? InflectionTable::from_json(j.at("inflections"))
                                                  : InflectionTable::generate(p);
    return PairLexicon{std::move(p), std::move(t)};
  }
};

enum class Split { kTrain, kTest };

inline std::string to_string(Split s) { return s == Split::kTrain ? "train" : "test"; }

inline Split parse_split(std::string_view s) {
  if (s == "train") return Split::kTrain;
  if (s == "test") return Split::kTest;
  throw Error("unknown split '" + std::string(s) + "'");
}

// A sentence with one target-word slot. filled_word names the pair member
// occupying the slot; context_owner names the member the surrounding
// context was written for. Authentic sentences have the two equal.
struct TargetSentence {
  std::string sentence_id;
  std::string pair_id;
  std::vector<std::string> tokens;
  std::size_t target_index = 0;
  Word filled_word = Word::kFirst;
  Word context_owner = Word::kFirst;
  Split split = Split::kTrain;

  bool authentic() const { return filled_word == context_owner; }
  const std::string& target() const { return tokens.at(target_index); }

  bool operator==(const TargetSentence&) const = default;

  Json to_json() const {
    return Json{{"sentence_id", sentence_id},
                {"pair_id", pair_id},
                {"tokens", tokens},
                {"target_index", target_index},
                {"filled_word", to_int(filled_word)},
                {"context_owner", to_int(context_owner)},
                {"split", to_string(split)}};
  }

  static TargetSentence from_json(const Json& j) {
    TargetSentence s;
    s.sentence_id = j.at("sentence_id").get<std::string>();
    s.pair_id = j.at("pair_id").get<std::string>();
    s.tokens = j.at("tokens").get<std::vector<std::string>>();
    s.target_index = j.at("target_index").get<std::size_t>();
    s.filled_word = word_from_int(j.at("filled_word").get<int>());
    s.context_owner = word_from_int(j.at("context_owner").get<int>());
    s.split = j.contains("split") ? parse_split(j.at("split").get<std::string>()) : Split::kTest;
    if (s.target_index >= s.tokens.size()) {
      throw Error("sentence " + s.sentence_id + ": target_index out of range");
    }
    return s;
  }
};

// Checks the structural invariants of a sentence against its pair.
inline void validate_sentence(const TargetSentence& s, const PairLexicon& lex) {
  if (s.pair_id != lex.pair.pair_id) {
    throw Error("sentence " + s.sentence_id + " belongs to pair " + s.pair_id + ", not " +
                lex.pair.pair_id);
  }
  if (s.target_index >= s.tokens.size()) {
    throw Error("sentence " + s.sentence_id + ": target_index out of range");
  }
  if (!lex.inflections.matches(s.filled_word, s.target())) {
    throw Error("sentence " + s.sentence_id + ": token '" + s.target() +
                "' is not a form of " + lex.pair.word(s.filled_word));
  }
}

struct SentencePool {
  std::string pair_id;
  std::array<std::vector<TargetSentence>, 2> per_word_train;
  std::array<std::vector<TargetSentence>, 2> per_word_test;
  std::uint64_t seed = 0;

  const std::vector<TargetSentence>& train(Word w) const { return per_word_train[slot(w)]; }
  const std::vector<TargetSentence>& test(Word w) const { return per_word_test[slot(w)]; }

  std::vector<TargetSentence> all() const {
    std::vector<TargetSentence> out;
    for (const auto* part : {&per_word_train, &per_word_test}) {
      for (const auto& v : *part) out.insert(out.end(), v.begin(), v.end());
    }
    return out;
  }
};

// ---- tokenization and tagging ----------------------------------------------

// Whitespace split with punctuation peeled off token edges. Internal
// apostrophes and hyphens stay attached ("don't", "well-known").
inline std::vector<std::string> tokenize(std::string_view line) {
  auto is_punct = [](char c) {
    return c == '.' || c == ',' || c == ';' || c == ':' || c == '!' || c == '?' || c == '"' ||
           c == '(' || c == ')' || c == '[' || c == ']' || c == '\'' || c == '`';
  };
  std::vector<std::string> tokens;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && std::isspace(static_cast<unsigned char>(line[i]))) ++i;
    std::size_t j = i;
    while (j < line.size() && !std::isspace(static_cast<unsigned char>(line[j]))) ++j;
    if (j > i) {
      std::string_view word = line.substr(i, j - i);
      std::vector<std::string> trailing;
      while (!word.empty() && is_punct(word.front())) {
        tokens.emplace_back(1, word.front());
        word.remove_prefix(1);
      }
      while (!word.empty() && is_punct(word.back())) {
        trailing.emplace_back(1, word.back());
        word.remove_suffix(1);
      }
      if (!word.empty()) tokens.emplace_back(word);
      tokens.insert(tokens.end(), trailing.rbegin(), trailing.rend());
    }
    i = j;
  }
  return tokens;
}

class TaggerError : public Error {
 public:
  using Error::Error;
};

// Pluggable POS tagging routine: one tag per token, or TaggerError.
class PosTagger {
 public:
  virtual ~PosTagger() = default;
  virtual std::vector<Pos> tag(const std::vector<std::string>& tokens) const = 0;
};

namespace detail {

inline bool valid_utf8(std::string_view s) {
  std::size_t i = 0;
  while (i < s.size()) {
    const auto c = static_cast<unsigned char>(s[i]);
    std::size_t n = c < 0x80 ? 1 : (c >> 5) == 0x6 ? 2 : (c >> 4) == 0xe ? 3 : (c >> 3) == 0x1e ? 4 : 0;
    if (n == 0 || i + n > s.size()) return false;
    for (std::size_t k = 1; k < n; ++k) {
      if ((static_cast<unsigned char>(s[i + k]) >> 6) != 0x2) return false;
    }
    i += n;
  }
  return true;
}

}  // namespace detail

// Default adapter: lexicon lookup with a few contextual rules for the
// ADJ/NOUN and VERB/NOUN ambiguities that matter for target filtering.
// Words missing from the lexicon are tagged by shape (PUNCT, NUM, PROPN) or X.
class LexiconTagger : public PosTagger {
 public:
  LexiconTagger() {
    for (const char* w : {"a", "an", "the", "this", "that", "these", "those", "my", "your",
                          "his", "her", "its", "our", "their", "some", "any", "no", "every",
                          "each"}) {
      set(w, {Pos::kDet});
    }
    for (const char* w : {"of", "in", "on", "at", "for", "with", "by", "from", "about", "into",
                          "over", "under", "after", "before", "between", "through", "during"}) {
      set(w, {Pos::kAdp});
    }
    for (const char* w : {"i", "you", "he", "she", "it", "we", "they", "me", "him", "us", "them"}) {
      set(w, {Pos::kPron});
    }
    for (const char* w : {"is", "are", "was", "were", "be", "been", "being", "am", "has", "have",
                          "had", "do", "does", "did", "will", "would", "can", "could", "should",
                          "may", "might", "must"}) {
      set(w, {Pos::kAux});
    }
    for (const char* w : {"and", "or", "but", "nor", "so", "yet"}) set(w, {Pos::kConj});
    set("to", {Pos::kPart});
    set("not", {Pos::kPart});
  }

  // Lexicon file: word<TAB>TAG[,TAG...], first tag preferred.
  static LexiconTagger from_file(const std::filesystem::path& path) {
    LexiconTagger t;
    for (const auto& line : io::read_lines(path)) {
      if (line.empty() || line[0] == '#') continue;
      auto cols = split(line, '\t');
      if (cols.size() != 2) throw Error("lexicon line must be word<TAB>tags: " + line);
      std::vector<Pos> tags;
      for (const auto& t2 : split(cols[1], ',')) tags.push_back(parse_pos(t2));
      t.set(cols[0], tags);
    }
    return t;
  }

  void set(const std::string& word, std::vector<Pos> tags) {
    lexicon_[to_lower(word)] = std::move(tags);
  }

  // Adds the word with the given tag only when the lexicon lacks it.
  void ensure(const std::string& word, Pos tag) {
    lexicon_.try_emplace(to_lower(word), std::vector<Pos>{tag});
  }

  std::vector<Pos> tag(const std::vector<std::string>& tokens) const override {
    std::vector<Pos> out(tokens.size(), Pos::kOther);
    for (std::size_t i = 0; i < tokens.size(); ++i) {
      const std::string& tok = tokens[i];
      if (tok.empty() || !detail::valid_utf8(tok)) {
        throw TaggerError("cannot tag token at position " + std::to_string(i));
      }
      const auto cands = candidates(tok);
      if (cands.empty()) {
        out[i] = guess(tok, i);
        continue;
      }
      out[i] = cands.front();
      if (cands.size() == 1) continue;
      const bool prev_det = i > 0 && has(candidates(tokens[i - 1]), Pos::kDet);
      const bool prev_verb_cue =
          i > 0 && (to_lower(tokens[i - 1]) == "to" || has(candidates(tokens[i - 1]), Pos::kAux) ||
                    has(candidates(tokens[i - 1]), Pos::kPron));
      bool next_nominal = false;
      if (i + 1 < tokens.size()) {
        const auto next = candidates(tokens[i + 1]);
        next_nominal = next.empty() ? guess(tokens[i + 1], i + 1) != Pos::kPunct
                                    : (has(next, Pos::kNoun) || has(next, Pos::kAdj));
      }
      if (has(cands, Pos::kAdj) && has(cands, Pos::kNoun)) {
        if (next_nominal) {
          out[i] = Pos::kAdj;
        } else if (prev_det) {
          out[i] = Pos::kNoun;
        }
      } else if (has(cands, Pos::kVerb) && has(cands, Pos::kNoun)) {
        if (prev_det) {
          out[i] = Pos::kNoun;
        } else if (prev_verb_cue) {
          out[i] = Pos::kVerb;
        }
      }
    }
    return out;
  }

 private:
  static bool has(const std::vector<Pos>& v, Pos p) {
    return std::find(v.begin(), v.end(), p) != v.end();
  }

  std::vector<Pos> candidates(const std::string& tok) const {
    auto it = lexicon_.find(to_lower(tok));
    return it == lexicon_.end() ? std::vector<Pos>{} : it->second;
  }

  static Pos guess(const std::string& tok, std::size_t index) {
    const auto c = static_cast<unsigned char>(tok[0]);
    if (tok.size() == 1 && std::ispunct(c)) return Pos::kPunct;
    if (std::isdigit(c)) return Pos::kNum;
    if (index > 0 && std::isupper(c)) return Pos::kPropn;
    return Pos::kOther;
  }

  std::unordered_map<std::string, std::vector<Pos>> lexicon_;
};

// ---- ingestion --------------------------------------------------------------

struct Document {
  std::string name;
  std::vector<std::string> lines;  // one pre-extracted sentence per line
};

struct IngestOptions {
  std::size_t min_tokens = 5;
  std::size_t max_tokens = 60;
};

struct SkipReport {
  std::size_t lines_read = 0;
  std::size_t no_target = 0;
  std::size_t multiple_targets = 0;
  std::size_t length_out_of_bounds = 0;
  std::size_t pos_mismatch = 0;
  std::size_t duplicates = 0;
  std::size_t tagger_failures = 0;
  std::vector<std::string> tagger_failure_ids;

  Json to_json() const {
    return Json{{"lines_read", lines_read},
                {"no_target", no_target},
                {"multiple_targets", multiple_targets},
                {"length_out_of_bounds", length_out_of_bounds},
                {"pos_mismatch", pos_mismatch},
                {"duplicates", duplicates},
                {"tagger_failures", tagger_failures}};
  }
};

struct IngestResult {
  std::vector<TargetSentence> sentences;
  SkipReport skipped;
};

namespace detail {

struct DocumentScan {
  std::vector<TargetSentence> sentences;
  SkipReport skipped;
};

inline DocumentScan scan_document(const Document& doc, const PairLexicon& lex,
                                  const PosTagger& tagger, const IngestOptions& opt) {
  DocumentScan scan;
  for (std::size_t li = 0; li < doc.lines.size(); ++li) {
    ++scan.skipped.lines_read;
    auto tokens = tokenize(doc.lines[li]);
    if (tokens.empty()) continue;
    std::size_t hits = 0;
    std::size_t index = 0;
    Word word = Word::kFirst;
    for (std::size_t t = 0; t < tokens.size(); ++t) {
      for (Word w : kBothWords) {
        if (lex.inflections.matches(w, tokens[t])) {
          ++hits;
          index = t;
          word = w;
        }
      }
    }
    if (hits == 0) {
      ++scan.skipped.no_target;
      continue;
    }
    if (hits > 1) {
      ++scan.skipped.multiple_targets;
      continue;
    }
    if (tokens.size() < opt.min_tokens || tokens.size() > opt.max_tokens) {
      ++scan.skipped.length_out_of_bounds;
      continue;
    }
    const std::string id = lex.pair.pair_id + ":" + doc.name + ":" + std::to_string(li + 1);
    std::vector<Pos> tags;
    try {
      tags = tagger.tag(tokens);
      if (tags.size() != tokens.size()) throw TaggerError("tag count mismatch");
    } catch (const std::exception&) {
      ++scan.skipped.tagger_failures;
      scan.skipped.tagger_failure_ids.push_back(id);
      continue;
    }
    if (tags[index] != lex.pair.pos) {
      ++scan.skipped.pos_mismatch;
      continue;
    }
    TargetSentence s;
    s.sentence_id = id;
    s.pair_id = lex.pair.pair_id;
    s.tokens = std::move(tokens);
    s.target_index = index;
    s.filled_word = word;
    s.context_owner = word;
    scan.sentences.push_back(std::move(s));
  }
  return scan;
}

}  // namespace detail

// Extracts sentences carrying exactly one occurrence of either pair word,
// tagged with the pair's part of speech. Documents are scanned in parallel
// and merged in document order; duplicates (lowercased, whitespace-joined
// tokens) keep their first occurrence.
inline IngestResult ingest_corpus(const std::vector<Document>& docs, const PairLexicon& lex,
                                  const PosTagger& tagger, const IngestOptions& opt = {}) {
  std::vector<detail::DocumentScan> scans(docs.size());
  if (docs.size() > 1) {
    std::vector<std::future<detail::DocumentScan>> futures;
    futures.reserve(docs.size());
    for (const auto& d : docs) {
      futures.push_back(std::async(std::launch::async, [&d, &lex, &tagger, &opt] {
        return detail::scan_document(d, lex, tagger, opt);
      }));
    }
    for (std::size_t i = 0; i < docs.size(); ++i) scans[i] = futures[i].get();
  } else if (docs.size() == 1) {
    scans[0] = detail::scan_document(docs[0], lex, tagger, opt);
  }

  IngestResult result;
  std::unordered_set<std::string> seen;
  for (auto& scan : scans) {
    auto& r = result.skipped;
    const auto& s = scan.skipped;
    r.lines_read += s.lines_read;
    r.no_target += s.no_target;
    r.multiple_targets += s.multiple_targets;
    r.length_out_of_bounds += s.length_out_of_bounds;
    r.pos_mismatch += s.pos_mismatch;
    r.tagger_failures += s.tagger_failures;
    r.tagger_failure_ids.insert(r.tagger_failure_ids.end(), s.tagger_failure_ids.begin(),
                                s.tagger_failure_ids.end());
    for (auto& sent : scan.sentences) {
      if (!seen.insert(to_lower(join(sent.tokens))).second) {
        ++r.duplicates;
        continue;
      }
      result.sentences.push_back(std::move(sent));
    }
  }
  return result;
}

// Reads every regular file under dir (sorted by name) as a document.
inline std::vector<Document> read_corpus_dir(const std::filesystem::path& dir) {
  if (!std::filesystem::is_directory(dir)) throw Error("corpus directory not found: " + dir.string());
  std::vector<std::filesystem::path> files;
  for (const auto& e : std::filesystem::recursive_directory_iterator(dir)) {
    if (e.is_regular_file()) files.push_back(e.path());
  }
  std::sort(files.begin(), files.end());
  std::vector<Document> docs;
  for (const auto& f : files) {
    docs.push_back(Document{std::filesystem::relative(f, dir).generic_string(), io::read_lines(f)});
  }
  return docs;
}

// ---- pool construction ------------------------------------------------------

// Samples per_word_total sentences per word without replacement; the first
// train_count of each sample form the train split. Candidates are ordered by
// sentence_id before sampling so the result depends only on content and seed.
inline SentencePool build_pool(const std::vector<TargetSentence>& sentences,
                               const NearSynonymPair& pair, std::size_t per_word_total,
                               std::size_t train_count, std::uint64_t seed) {
  if (train_count >= per_word_total) {
    throw Error("train count must be smaller than per-word total");
  }
  SentencePool pool;
  pool.pair_id = pair.pair_id;
  pool.seed = seed;
  for (Word w : kBothWords) {
    std::vector<const TargetSentence*> cands;
    for (const auto& s : sentences) {
      if (s.pair_id == pair.pair_id && s.filled_word == w && s.authentic()) cands.push_back(&s);
    }
    if (cands.size() < per_word_total) {
      throw Error("insufficient candidates for '" + pair.word(w) + "': need " +
                  std::to_string(per_word_total) + " have " + std::to_string(cands.size()));
    }
    std::sort(cands.begin(), cands.end(), [](const auto* a, const auto* b) {
      return a->sentence_id < b->sentence_id;
    });
    Rng rng(derive_seed(seed, static_cast<std::uint64_t>(to_int(w))));
    const auto picks = rng.sample_indices(cands.size(), per_word_total);
    for (std::size_t i = 0; i < picks.size(); ++i) {
      TargetSentence s = *cands[picks[i]];
      s.split = i < train_count ? Split::kTrain : Split::kTest;
      (i < train_count ? pool.per_word_train : pool.per_word_test)[slot(w)].push_back(std::move(s));
    }
  }
  return pool;
}

// Pool file: train w1, train w2, test w1, test w2, one record per line.
inline std::string format_pool(const SentencePool& pool) {
  std::vector<Json> recs;
  for (const auto* part : {&pool.per_word_train, &pool.per_word_test}) {
    for (const auto& v : *part) {
      for (const auto& s : v) recs.push_back(s.to_json());
    }
  }
  return io::to_jsonl(recs);
}

inline SentencePool parse_pool_records(const std::vector<Json>& recs, std::uint64_t seed = 0) {
  SentencePool pool;
  pool.seed = seed;
  std::unordered_set<std::string> ids;
  for (const auto& r : recs) {
    TargetSentence s = TargetSentence::from_json(r);
    if (pool.pair_id.empty()) pool.pair_id = s.pair_id;
    if (s.pair_id != pool.pair_id) throw Error("pool mixes pairs " + pool.pair_id + " and " + s.pair_id);
    if (!ids.insert(s.sentence_id).second) throw Error("duplicate sentence_id " + s.sentence_id);
    auto& part = s.split == Split::kTrain ? pool.per_word_train : pool.per_word_test;
    part[slot(s.filled_word)].push_back(std::move(s));
  }
  return pool;
}

// A pool directory holds pairs.tsv plus, per pair, <pair_id>.pool.jsonl and
// <pair_id>.lexicon.json (pair + inflection table + pool seed).
inline std::filesystem::path pool_file(const std::filesystem::path& dir, const std::string& pair_id) {
  return dir / (pair_id + ".pool.jsonl");
}
inline std::filesystem::path lexicon_file(const std::filesystem::path& dir, const std::string& pair_id) {
  return dir / (pair_id + ".lexicon.json");
}

inline void write_pool_dir(const std::filesystem::path& dir, const SentencePool& pool,
                           const PairLexicon& lex) {
  io::write_file(pool_file(dir, pool.pair_id), format_pool(pool));
  Json meta = lex.to_json();
  meta["seed"] = pool.seed;
  io::write_file(lexicon_file(dir, pool.pair_id), meta.dump(2) + "\n");
}

struct LoadedPool {
  SentencePool pool;
  PairLexicon lexicon;
};

inline LoadedPool read_pool_dir(const std::filesystem::path& dir, const std::string& pair_id) {
  const Json meta = Json::parse(io::read_file(lexicon_file(dir, pair_id)));
  LoadedPool lp{parse_pool_records(io::read_jsonl(pool_file(dir, pair_id)),
                                   meta.value("seed", std::uint64_t{0})),
                PairLexicon::from_json(meta)};
  lp.pool.pair_id = pair_id;
  return lp;
}

// Pair ids present in a pool directory, sorted.
inline std::vector<std::string> list_pool_pairs(const std::filesystem::path& dir) {
  std::vector<std::string> ids;
  const std::string suffix = ".pool.jsonl";
  for (const auto& e : std::filesystem::directory_iterator(dir)) {
    const std::string name = e.path().filename().string();
    if (detail::ends_with(name, suffix)) ids.push_back(name.substr(0, name.size() - suffix.size()));
  }
  std::sort(ids.begin(), ids.end());
  return ids;
}

}  // namespace synsel
