#pragma once

#include <boost/math/distributions/students_t.hpp>
#include <cmath>
#include <span>
#include <vector>

#include "synsel/common.hpp"

namespace synsel {

// Raised when a statistic is undefined for the input (zero variance).
class DegenerateStatistic : public Error {
 public:
  explicit DegenerateStatistic(const std::string& what) : Error("degenerate: " + what) {}
};

struct TTestResult {
  double t_score = 0.0;
  double p_value = 1.0;
  double dof = 0.0;
};

inline double two_sided_p(double t, double dof) {
  boost::math::students_t dist(dof);
  return 2.0 * boost::math::cdf(boost::math::complement(dist, std::abs(t)));
}

// Two-sided paired t-test on a[i] - b[i] with n-1 degrees of freedom.
inline TTestResult paired_t_test(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw Error("paired_t_test: length mismatch");
  if (a.size() < 2) throw Error("paired_t_test: need at least 2 pairs");
  const std::size_t n = a.size();
  std::vector<double> d(n);
  for (std::size_t i = 0; i < n; ++i) d[i] = a[i] - b[i];
  const double m = mean(d);
  double ss = 0.0;
  for (double x : d) ss += (x - m) * (x - m);
  if (ss == 0.0) throw DegenerateStatistic("differences have zero variance");
  const double sd = std::sqrt(ss / static_cast<double>(n - 1));
  TTestResult r;
  r.dof = static_cast<double>(n - 1);
  r.t_score = m / (sd / std::sqrt(static_cast<double>(n)));
  r.p_value = two_sided_p(r.t_score, r.dof);
  return r;
}

// Unpaired two-sided test with Welch-Satterthwaite degrees of freedom.
inline TTestResult welch_t_test(std::span<const double> a, std::span<const double> b) {
  if (a.size() < 2 || b.size() < 2) throw Error("welch_t_test: need at least 2 values per group");
  auto var = [](std::span<const double> x) {
    const double m = mean(x);
    double ss = 0.0;
    for (double v : x) ss += (v - m) * (v - m);
    return ss / static_cast<double>(x.size() - 1);
  };
  const double va = var(a) / static_cast<double>(a.size());
  const double vb = var(b) / static_cast<double>(b.size());
  if (va + vb == 0.0) throw DegenerateStatistic("both groups have zero variance");
  TTestResult r;
  r.t_score = (mean(a) - mean(b)) / std::sqrt(va + vb);
  r.dof = (va + vb) * (va + vb) /
          (va * va / static_cast<double>(a.size() - 1) + vb * vb / static_cast<double>(b.size() - 1));
  r.p_value = two_sided_p(r.t_score, r.dof);
  return r;
}

inline double pearson_correlation(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw Error("pearson_correlation: length mismatch");
  if (x.size() < 2) throw Error("pearson_correlation: need at least 2 points");
  const double mx = mean(x);
  const double my = mean(y);
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
    syy += (y[i] - my) * (y[i] - my);
  }
  if (sxx == 0.0 || syy == 0.0) throw DegenerateStatistic("zero variance");
  return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

}  // namespace synsel
