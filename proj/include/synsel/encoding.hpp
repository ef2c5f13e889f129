#pragma once

#include <array>
#include <string>
#include <vector>

#include "synsel/instances.hpp"

namespace synsel {

enum class TokenRole : std::uint8_t { kCls, kSep, kContext, kTarget, kMask };

inline constexpr const char* kClsToken = "[CLS]";
inline constexpr const char* kSepToken = "[SEP]";
inline constexpr const char* kMaskToken = "[MASK]";

// Backend-neutral model input. Segment ids number the content spans in
// layout order (entailment: 0 example, 1 question; context: 0-5 examples in
// presentation order, 6 question). [CLS] carries segment 0 and each [SEP]
// the segment it closes.
struct EncodedSequence {
  std::vector<std::string> tokens;
  std::vector<std::uint8_t> segments;
  std::vector<TokenRole> roles;

  std::size_t size() const { return tokens.size(); }

  void push(std::string tok, std::uint8_t segment, TokenRole role) {
    tokens.push_back(std::move(tok));
    segments.push_back(segment);
    roles.push_back(role);
  }

  // Content length of a segment (excluding [CLS]/[SEP]).
  std::size_t span_length(std::uint8_t segment) const {
    std::size_t n = 0;
    for (std::size_t i = 0; i < tokens.size(); ++i) {
      if (segments[i] == segment && roles[i] != TokenRole::kCls && roles[i] != TokenRole::kSep) ++n;
    }
    return n;
  }

  bool operator==(const EncodedSequence&) const = default;
};

namespace detail {

// Window of `keep` tokens that contains the target, centred where possible.
inline std::pair<std::size_t, std::size_t> target_window(std::size_t len, std::size_t target,
                                                         std::size_t keep) {
  if (keep >= len) return {0, len};
  std::size_t start = target > keep / 2 ? target - keep / 2 : 0;
  if (start + keep > len) start = len - keep;
  return {start, start + keep};
}

inline void append_span(EncodedSequence& seq, const TargetSentence& s, std::size_t keep,
                        std::uint8_t segment, bool mask_target) {
  const auto [b, e] = target_window(s.tokens.size(), s.target_index, keep);
  for (std::size_t i = b; i < e; ++i) {
    if (i == s.target_index) {
      if (mask_target) {
        seq.push(kMaskToken, segment, TokenRole::kMask);
      } else {
        seq.push(s.tokens[i], segment, TokenRole::kTarget);
      }
    } else {
      seq.push(s.tokens[i], segment, TokenRole::kContext);
    }
  }
  seq.push(kSepToken, segment, TokenRole::kSep);
}

}  // namespace detail

// Token budget split between two spans when they do not fit: each span keeps
// floor/ceil of the budget in proportion to its length (at least one token).
inline std::pair<std::size_t, std::size_t> proportional_keep(std::size_t len_a, std::size_t len_b,
                                                             std::size_t budget) {
  if (len_a + len_b <= budget) return {len_a, len_b};
  std::size_t keep_a = budget * len_a / (len_a + len_b);
  keep_a = std::clamp<std::size_t>(keep_a, 1, len_a);
  std::size_t keep_b = std::min(len_b, budget - keep_a);
  if (keep_b == 0) {
    keep_b = 1;
    --keep_a;
  }
  return {keep_a, keep_b};
}

// [CLS] example [SEP] question [SEP]; truncation keeps a target-centred
// window of each span.
inline EncodedSequence encode_entailment_input(const TargetSentence& example,
                                               const TargetSentence& question,
                                               std::size_t max_sequence_length) {
  if (max_sequence_length < 16) throw Error("max_sequence_length must be at least 16");
  const std::size_t budget = max_sequence_length - 3;
  const auto [keep_e, keep_q] =
      proportional_keep(example.tokens.size(), question.tokens.size(), budget);
  EncodedSequence seq;
  seq.push(kClsToken, 0, TokenRole::kCls);
  detail::append_span(seq, example, keep_e, 0, false);
  detail::append_span(seq, question, keep_q, 1, false);
  return seq;
}

// Longest-first trimming: repeatedly shortens the currently longest span
// (lowest index on ties) by one token until the total fits.
inline std::vector<std::size_t> longest_first_keep(std::vector<std::size_t> lengths,
                                                   std::size_t budget) {
  std::size_t total = 0;
  for (auto l : lengths) total += l;
  while (total > budget) {
    std::size_t longest = 0;
    for (std::size_t i = 1; i < lengths.size(); ++i) {
      if (lengths[i] > lengths[longest]) longest = i;
    }
    if (lengths[longest] <= 1) throw Error("cannot trim spans below one token");
    --lengths[longest];
    --total;
  }
  return lengths;
}

// [CLS] e1 [SEP] ... e6 [SEP] question-with-[MASK] [SEP]. `order` gives the
// presentation order of the set's slots. The question span is never trimmed.
inline EncodedSequence encode_context_input(const ExampleSet& set,
                                            const std::array<std::size_t, 6>& order,
                                            const TargetSentence& question,
                                            std::size_t max_sequence_length) {
  if (max_sequence_length < 16) throw Error("max_sequence_length must be at least 16");
  const std::size_t overhead = 1 + 6 + 1;
  const std::size_t budget = max_sequence_length - overhead;
  if (question.tokens.size() + 6 > budget) {
    throw Error("question alone exceeds the sequence limit (" +
                std::to_string(question.tokens.size()) + " tokens, limit " +
                std::to_string(max_sequence_length) + ")");
  }
  std::vector<std::size_t> lengths;
  for (std::size_t i : order) lengths.push_back(set.examples.at(i).tokens.size());
  const auto keep = longest_first_keep(lengths, budget - question.tokens.size());

  EncodedSequence seq;
  seq.push(kClsToken, 0, TokenRole::kCls);
  for (std::size_t k = 0; k < 6; ++k) {
    detail::append_span(seq, set.examples[order[k]], keep[k], static_cast<std::uint8_t>(k), false);
  }
  detail::append_span(seq, question, question.tokens.size(), 6, true);
  return seq;
}

inline EncodedSequence encode_context_input(const ExampleSet& set, const TargetSentence& question,
                                            std::size_t max_sequence_length) {
  return encode_context_input(set, {0, 1, 2, 3, 4, 5}, question, max_sequence_length);
}

}  // namespace synsel
