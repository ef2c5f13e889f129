#pragma once

#ifndef ARMA_DONT_USE_WRAPPER
#define ARMA_DONT_USE_WRAPPER
#endif
#include <armadillo>
#include <functional>
#include <mutex>

#include "synsel/selector.hpp"

namespace synsel {

using ContextEmbedder = std::function<std::vector<double>(const TargetSentence&)>;

// Signed feature hashing of the tokens around the slot, weighted by
// 1/distance and L2-normalized. The target token itself is left out.
inline ContextEmbedder hashed_context_embedder(std::size_t dim = 32, std::size_t window = 5) {
  return [dim, window](const TargetSentence& s) {
    std::vector<double> v(dim, 0.0);
    const std::size_t lo = s.target_index > window ? s.target_index - window : 0;
    const std::size_t hi = std::min(s.tokens.size(), s.target_index + window + 1);
    for (std::size_t i = lo; i < hi; ++i) {
      if (i == s.target_index) continue;
      const std::uint64_t h = fnv1a(to_lower(s.tokens[i]));
      const double dist = static_cast<double>(i > s.target_index ? i - s.target_index : s.target_index - i);
      v[h % dim] += ((h >> 63) ? -1.0 : 1.0) / dist;
    }
    double norm = 0.0;
    for (double x : v) norm += x * x;
    if (norm > 0.0) {
      norm = std::sqrt(norm);
      for (auto& x : v) x /= norm;
    }
    return v;
  };
}

class GaussianMixture {
 public:
  // Diagonal-covariance EM after k-means seeding. Armadillo draws from one
  // global generator, so fits are serialized to stay reproducible.
  static GaussianMixture fit(const std::vector<std::vector<double>>& data, std::size_t components,
                             std::uint64_t seed, std::size_t em_iterations = 100) {
    if (data.empty()) throw Error("gmm: no data");
    if (components == 0 || components > data.size()) throw Error("gmm: bad component count");
    const std::size_t dim = data.front().size();
    arma::mat m(dim, data.size());
    for (std::size_t j = 0; j < data.size(); ++j) {
      if (data[j].size() != dim) throw Error("gmm: ragged data");
      for (std::size_t d = 0; d < dim; ++d) m(d, j) = data[j][d];
    }
    static std::mutex rng_mutex;
    std::lock_guard<std::mutex> lock(rng_mutex);
    arma::arma_rng::set_seed(seed);
    GaussianMixture g;
    if (!g.model_.learn(m, components, arma::maha_dist, arma::random_subset, 10,
                        static_cast<arma::uword>(em_iterations), 1e-6, false)) {
      throw Error("gmm: fitting failed");
    }
    return g;
  }

  std::size_t components() const { return model_.n_gaus(); }
  std::size_t dim() const { return model_.n_dims(); }

  double log_likelihood(const std::vector<double>& x) const {
    return model_.log_p(arma::vec(x));
  }

 private:
  arma::gmm_diag model_;
};

struct GmmSelection {
  std::array<std::vector<std::string>, 2> top3;
  std::array<std::size_t, 2> components{};
  std::vector<std::string> warnings;
};

inline constexpr std::size_t kGmmComponents = 10;

// Per word: fit a mixture on that word's training contexts, score each
// candidate by log p(own mixture) - log p(partner mixture), keep the top 3
// (ties by ascending sentence_id).
inline GmmSelection gmm_baseline_select(const CandidatePool& pool,
                                        const std::array<std::vector<TargetSentence>, 2>& train,
                                        const ContextEmbedder& embed, std::uint64_t seed,
                                        std::size_t components = kGmmComponents) {
  GmmSelection out;
  std::vector<GaussianMixture> models;
  for (Word w : kBothWords) {
    const auto& sents = train[slot(w)];
    if (sents.empty()) throw Error("gmm baseline: no training contexts for word " + std::to_string(to_int(w)));
    std::size_t k = components;
    if (sents.size() < k) {
      out.warnings.push_back("word " + std::to_string(to_int(w)) + ": only " + std::to_string(sents.size()) +
                             " training contexts, using " + std::to_string(sents.size()) + " components");
      k = sents.size();
    }
    std::vector<std::vector<double>> data;
    data.reserve(sents.size());
    for (const auto& s : sents) data.push_back(embed(s));
    models.push_back(GaussianMixture::fit(data, k, derive_seed(seed, static_cast<std::uint64_t>(to_int(w)))));
    out.components[slot(w)] = models.back().components();
  }
  for (Word w : kBothWords) {
    std::vector<std::pair<double, std::string>> scored;
    for (const auto& s : pool.of(w)) {
      const auto x = embed(s);
      scored.emplace_back(models[slot(w)].log_likelihood(x) - models[slot(other(w))].log_likelihood(x),
                          s.sentence_id);
    }
    std::sort(scored.begin(), scored.end(), [](const auto& a, const auto& b) {
      return a.first != b.first ? a.first > b.first : a.second < b.second;
    });
    for (std::size_t i = 0; i < std::min<std::size_t>(3, scored.size()); ++i) {
      out.top3[slot(w)].push_back(scored[i].second);
    }
  }
  return out;
}

}  // namespace synsel
