#pragma once

// Two-sample tests for "same next-symbol distribution" on binary counts.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <string>
#include <string_view>

#include "pointpred/errors.hpp"

namespace pointpred {

/// Next-symbol counts: [0] = followed by 0, [1] = followed by 1.
using NextCounts = std::array<std::uint64_t, 2>;

inline std::uint64_t total(const NextCounts& c) { return c[0] + c[1]; }

inline NextCounts& operator+=(NextCounts& a, const NextCounts& b) {
  a[0] += b[0];
  a[1] += b[1];
  return a;
}

enum class HomogeneityTest { kChiSquared, kKolmogorovSmirnov };

inline std::string_view to_string(HomogeneityTest t) {
  return t == HomogeneityTest::kChiSquared ? "chi-squared" : "ks";
}

inline HomogeneityTest homogeneity_test_from_string(std::string_view s) {
  if (s == "chi-squared" || s == "chi2" || s == "chisq") return HomogeneityTest::kChiSquared;
  if (s == "ks" || s == "KS") return HomogeneityTest::kKolmogorovSmirnov;
  throw ConfigError("unknown homogeneity test '" + std::string(s) + "'");
}

/// Pearson chi-squared on the 2x2 table, one degree of freedom, no Yates
/// correction. A symbol column that is empty in both samples carries no
/// information; the samples are then identical and p = 1.
inline double chi_squared_p_value(const NextCounts& a, const NextCounts& b) {
  const double na = static_cast<double>(total(a));
  const double nb = static_cast<double>(total(b));
  if (na == 0.0 || nb == 0.0) return 1.0;
  const double c0 = static_cast<double>(a[0] + b[0]);
  const double c1 = static_cast<double>(a[1] + b[1]);
  if (c0 == 0.0 || c1 == 0.0) return 1.0;
  const double n = na + nb;
  double stat = 0.0;
  const double obs[2][2] = {{static_cast<double>(a[0]), static_cast<double>(a[1])},
                            {static_cast<double>(b[0]), static_cast<double>(b[1])}};
  const double rows[2] = {na, nb};
  const double cols[2] = {c0, c1};
  for (int r = 0; r < 2; ++r)
    for (int c = 0; c < 2; ++c) {
      const double expected = rows[r] * cols[c] / n;
      const double diff = obs[r][c] - expected;
      stat += diff * diff / expected;
    }
  // Survival function of chi-squared with 1 dof.
  return std::erfc(std::sqrt(stat / 2.0));
}

/// Asymptotic Kolmogorov distribution Q(lambda) = 2 sum (-1)^(k-1) exp(-2 k^2 lambda^2).
inline double kolmogorov_q(double lambda) {
  if (lambda < 1e-3) return 1.0;
  double sum = 0.0, sign = 1.0;
  for (int k = 1; k <= 200; ++k) {
    const double term = sign * std::exp(-2.0 * k * k * lambda * lambda);
    sum += term;
    if (std::abs(term) < 1e-16) break;
    sign = -sign;
  }
  return std::clamp(2.0 * sum, 0.0, 1.0);
}

/// Two-sample KS on binary samples: D is the gap between the empirical CDFs
/// at 0, with the usual small-sample correction to the effective size.
inline double ks_p_value(const NextCounts& a, const NextCounts& b) {
  const double na = static_cast<double>(total(a));
  const double nb = static_cast<double>(total(b));
  if (na == 0.0 || nb == 0.0) return 1.0;
  const double d = std::abs(static_cast<double>(a[0]) / na - static_cast<double>(b[0]) / nb);
  if (d == 0.0) return 1.0;
  const double ne = std::sqrt(na * nb / (na + nb));
  return kolmogorov_q((ne + 0.12 + 0.11 / ne) * d);
}

inline double homogeneity_p_value(const NextCounts& a, const NextCounts& b, HomogeneityTest test) {
  return test == HomogeneityTest::kChiSquared ? chi_squared_p_value(a, b) : ks_p_value(a, b);
}

/// True when the null hypothesis "same distribution" survives at level alpha.
inline bool same_distribution(const NextCounts& a, const NextCounts& b, double alpha, HomogeneityTest test) {
  return homogeneity_p_value(a, b, test) >= alpha;
}

}  // namespace pointpred
