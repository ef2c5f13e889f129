#include <gsl/gsl_cdf.h>
#include <gsl/gsl_statistics_double.h>
#include <gtest/gtest.h>

#include "support/fixtures.hpp"
#include "synsel/stats.hpp"

using namespace synsel;

namespace {

struct Reference {
  double t;
  double p;
};

Reference gsl_paired(const std::vector<double>& a, const std::vector<double>& b) {
  std::vector<double> d(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) d[i] = a[i] - b[i];
  const double n = static_cast<double>(d.size());
  const double t = gsl_stats_mean(d.data(), 1, d.size()) / (gsl_stats_sd(d.data(), 1, d.size()) / std::sqrt(n));
  return {t, 2.0 * gsl_cdf_tdist_Q(std::abs(t), n - 1.0)};
}

Reference gsl_welch(const std::vector<double>& a, const std::vector<double>& b) {
  const double na = static_cast<double>(a.size()), nb = static_cast<double>(b.size());
  const double va = gsl_stats_variance(a.data(), 1, a.size()) / na;
  const double vb = gsl_stats_variance(b.data(), 1, b.size()) / nb;
  const double t = (gsl_stats_mean(a.data(), 1, a.size()) - gsl_stats_mean(b.data(), 1, b.size())) /
                   std::sqrt(va + vb);
  const double dof = (va + vb) * (va + vb) / (va * va / (na - 1) + vb * vb / (nb - 1));
  return {t, 2.0 * gsl_cdf_tdist_Q(std::abs(t), dof)};
}

// Accuracy-like vectors: multiples of 1/k, occasionally with ties.
std::vector<double> accuracies(Rng& rng, std::size_t n, std::size_t k, double shift) {
  std::vector<double> v(n);
  for (auto& x : v) {
    const double p = std::clamp(0.5 + shift + 0.2 * rng.normal(), 0.0, 1.0);
    std::size_t hits = 0;
    for (std::size_t i = 0; i < k; ++i) hits += rng.uniform() < p;
    x = static_cast<double>(hits) / static_cast<double>(k);
  }
  return v;
}

}  // namespace

TEST(StatsOracle, PairedTTestAndPearsonOnRandomFixtures) {
  Rng rng(2024);
  for (int f = 0; f < 100; ++f) {
    const std::size_t n = 5 + rng.below(60);
    const auto a = accuracies(rng, n, 10 + rng.below(90), 0.1 * rng.normal());
    const auto b = accuracies(rng, n, 10 + rng.below(90), 0.1 * rng.normal());
    const auto ref = gsl_paired(a, b);
    const auto got = paired_t_test(a, b);
    EXPECT_NEAR(got.t_score, ref.t, 1e-9 * std::max(1.0, std::abs(ref.t))) << "fixture " << f;
    EXPECT_NEAR(got.p_value, ref.p, 1e-9) << "fixture " << f;
    EXPECT_DOUBLE_EQ(got.dof, static_cast<double>(n - 1));
    EXPECT_NEAR(pearson_correlation(a, b), gsl_stats_correlation(a.data(), 1, b.data(), 1, n), 1e-9)
        << "fixture " << f;
  }
}

TEST(StatsOracle, WelchOnRandomFixtures) {
  Rng rng(7);
  for (int f = 0; f < 100; ++f) {
    const auto a = accuracies(rng, 4 + rng.below(40), 50, 0.0);
    const auto b = accuracies(rng, 4 + rng.below(40), 50, 0.05);
    const auto ref = gsl_welch(a, b);
    const auto got = welch_t_test(a, b);
    EXPECT_NEAR(got.t_score, ref.t, 1e-9 * std::max(1.0, std::abs(ref.t)));
    EXPECT_NEAR(got.p_value, ref.p, 1e-9);
  }
}

TEST(Stats, HandWorkedPairedExample) {
  // d = {1, 2, 3}: mean 2, sd 1, t = 2 / (1 / sqrt 3) = 2 sqrt 3.
  const std::vector<double> a{2, 4, 6}, b{1, 2, 3};
  const auto r = paired_t_test(a, b);
  EXPECT_NEAR(r.t_score, 2.0 * std::sqrt(3.0), 1e-12);
  EXPECT_DOUBLE_EQ(r.dof, 2.0);
  // Two-sided p for t = 2 sqrt 3 on 2 dof is 1 - t / sqrt(t^2 + 2).
  EXPECT_NEAR(r.p_value, 1.0 - r.t_score / std::sqrt(r.t_score * r.t_score + 2.0), 1e-12);
}

TEST(Stats, DegenerateAndInvalidInputs) {
  const std::vector<double> ones(10, 1.0), zeros(10, 0.0), mixed{0, 1, 0, 1, 1, 0, 1, 0, 1, 1};
  EXPECT_THROW(paired_t_test(ones, zeros), DegenerateStatistic);
  EXPECT_THROW(pearson_correlation(ones, mixed), DegenerateStatistic);
  EXPECT_THROW(paired_t_test(std::vector<double>{1.0}, std::vector<double>{0.0}), Error);
  EXPECT_THROW(paired_t_test(ones, std::vector<double>(9, 0.0)), Error);
  EXPECT_THROW(pearson_correlation(mixed, std::vector<double>(3, 0.0)), Error);
  try {
    paired_t_test(ones, zeros);
  } catch (const DegenerateStatistic& e) {
    EXPECT_NE(std::string(e.what()).find("degenerate"), std::string::npos);
  }
}

TEST(Stats, ReferenceAccuracyGapCorrelation) {
  std::vector<double> acc, delta;
  for (const auto& row : fixtures::reference_delta_table()) {
    acc.push_back(row.acc);
    delta.push_back(row.delta);
  }
  const double r = pearson_correlation(acc, delta);
  EXPECT_NEAR(r, gsl_stats_correlation(acc.data(), 1, delta.data(), 1, acc.size()), 1e-12);
  EXPECT_NEAR(r, 0.87, 0.03);
}
