#pragma once

// Plug-in entropy estimates over binary series. Blocks never span a day
// boundary; logarithms are base 2 throughout.

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <ostream>
#include <span>
#include <unordered_map>
#include <vector>

#include "pointpred/encoding.hpp"
#include "pointpred/errors.hpp"

namespace pointpred {

/// -sum p log2 p with 0 log 0 = 0.
inline double shannon_entropy(std::span<const double> dist) {
  if (dist.empty()) throw ArgumentError("empty distribution");
  double total = 0.0;
  for (double p : dist) {
    if (!(p >= 0.0) || !std::isfinite(p)) throw ArgumentError("distribution entries must be non-negative");
    total += p;
  }
  if (std::abs(total - 1.0) > 1e-9) throw ArgumentError("distribution does not sum to 1");
  double h = 0.0;
  for (double p : dist)
    if (p > 0.0) h -= p * std::log2(p);
  return h;
}

inline double shannon_entropy(std::initializer_list<double> dist) {
  return shannon_entropy(std::span<const double>(dist.begin(), dist.size()));
}

/// Entropy of the empirical distribution given by `counts`.
inline double entropy_of_counts(std::vector<std::uint64_t> counts) {
  std::sort(counts.begin(), counts.end());
  std::uint64_t n = 0;
  for (auto c : counts) n += c;
  if (n == 0) return 0.0;
  double h = 0.0;
  const double dn = static_cast<double>(n);
  for (auto c : counts) {
    if (c == 0) continue;
    const double p = static_cast<double>(c) / dn;
    h -= p * std::log2(p);
  }
  return h;
}

namespace detail {

// Unnormalized Shannon entropy (bits) of the length-L window distribution.
inline double window_entropy(const BinarySeries& series, std::size_t L) {
  if (L == 0) return 0.0;
  if (L > series.bins_per_day())
    throw ConfigError("block length " + std::to_string(L) + " exceeds the day length " +
                      std::to_string(series.bins_per_day()));
  if (L > 63) throw ConfigError("block length above 63 is not supported");
  const std::uint64_t mask = (1ULL << L) - 1;
  std::unordered_map<std::uint64_t, std::uint64_t> counts;
  for (std::size_t d = 0; d < series.n_days(); ++d) {
    auto day = series.day(d);
    std::uint64_t code = 0;
    for (std::size_t i = 0; i < day.size(); ++i) {
      code = ((code << 1) | day[i]) & mask;
      if (i + 1 >= L) ++counts[code];
    }
  }
  std::vector<std::uint64_t> c;
  c.reserve(counts.size());
  for (const auto& kv : counts) c.push_back(kv.second);
  return entropy_of_counts(std::move(c));
}

}  // namespace detail

/// Per-symbol block entropy H_L = H[X_1..X_L] / L.
inline double block_entropy(const BinarySeries& series, std::size_t L) {
  if (L == 0) throw ConfigError("block length must be >= 1");
  if (series.size() < L) throw DataError("series shorter than block length");
  return detail::window_entropy(series, L) / static_cast<double>(L);
}

struct EntropyEstimate {
  std::vector<double> block_entropies;  // H_1 .. H_{L_used}
  double h = 0.0;                       // H_{L_used}
  double conditional = 0.0;             // H[X_1..X_L] - H[X_1..X_{L-1}] at L_used
  std::size_t L_used = 0;
  bool plateau = false;       // |H_L - H_{L-1}| < 0.01 at L_used
  bool undersampled = false;  // fewer than 4 * 2^L windows available
};

inline constexpr double kPlateauTolerance = 0.01;

inline EntropyEstimate entropy_rate(const BinarySeries& series, std::size_t L_max) {
  if (L_max == 0) throw ConfigError("L_max must be >= 1");
  EntropyEstimate est;
  est.L_used = L_max;
  double prev_joint = 0.0;
  for (std::size_t L = 1; L <= L_max; ++L) {
    const double joint = detail::window_entropy(series, L);
    est.block_entropies.push_back(joint / static_cast<double>(L));
    est.conditional = joint - prev_joint;
    prev_joint = joint;
  }
  est.h = est.block_entropies.back();
  if (L_max >= 2)
    est.plateau = std::abs(est.block_entropies[L_max - 1] - est.block_entropies[L_max - 2]) < kPlateauTolerance;
  const std::size_t windows = series.n_days() * (series.bins_per_day() - L_max + 1);
  est.undersampled = L_max < 62 && static_cast<double>(windows) < 4.0 * std::ldexp(1.0, static_cast<int>(L_max));
  return est;
}

/// Largest integer strictly below log2(n).
inline std::size_t max_history_length(std::size_t n) {
  if (n < 2) throw ArgumentError("max_history_length needs n >= 2");
  const auto floor_log2 = static_cast<std::size_t>(std::bit_width(n) - 1);
  return std::has_single_bit(n) ? floor_log2 - 1 : floor_log2;
}

/// `L,H_L` table for plateau plots.
inline void write_block_entropy_csv(std::ostream& out, const EntropyEstimate& est) {
  out << "L,H_L\n";
  char buf[64];
  for (std::size_t i = 0; i < est.block_entropies.size(); ++i) {
    std::snprintf(buf, sizeof buf, "%zu,%.10f\n", i + 1, est.block_entropies[i]);
    out << buf;
  }
}

}  // namespace pointpred
