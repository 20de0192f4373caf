#pragma once

// Binned binary event series: construction from timestamps, daily windowing,
// coarsening, chronological splits, bit-flip corruption and rastergrams.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "pointpred/errors.hpp"
#include "pointpred/random.hpp"

namespace pointpred {

inline constexpr std::int64_t kSecondsPerDay = 86400;

using Bits = std::vector<std::uint8_t>;

struct EventLog {
  std::string user_id;
  std::vector<std::int64_t> timestamps;  // epoch seconds, sorted non-decreasing

  void validate() const {
    if (!std::is_sorted(timestamps.begin(), timestamps.end()))
      throw DataError("timestamps for user '" + user_id + "' are not sorted");
    if (!timestamps.empty() && timestamps.front() < 0)
      throw DataError("negative timestamp for user '" + user_id + "'");
  }
};

/// Half-open daily observation window [start, end) in seconds since midnight.
struct DayWindow {
  std::int64_t start_second_of_day = 7 * 3600;
  std::int64_t end_second_of_day = 23 * 3600;

  std::int64_t length() const { return end_second_of_day - start_second_of_day; }

  void validate(std::int64_t bin_seconds) const {
    if (bin_seconds < 1) throw ConfigError("bin_seconds must be >= 1");
    if (start_second_of_day < 0 || start_second_of_day >= kSecondsPerDay)
      throw ConfigError("window start must lie in [0, 86400)");
    if (end_second_of_day <= start_second_of_day || end_second_of_day > kSecondsPerDay)
      throw ConfigError("window end must lie in (start, 86400]");
    if (length() % bin_seconds != 0)
      throw ConfigError("window length " + std::to_string(length()) +
                        " s is not divisible by bin width " + std::to_string(bin_seconds) + " s");
  }
};

/// A binary series laid out as n_days consecutive days of bins_per_day bins.
/// Each day is treated as an independent realization: nothing downstream
/// builds a history that crosses a day boundary.
class BinarySeries {
 public:
  BinarySeries() = default;

  BinarySeries(Bits bits, std::int64_t bin_seconds, std::size_t bins_per_day, std::size_t n_days)
      : bits_(std::move(bits)), bin_seconds_(bin_seconds), bins_per_day_(bins_per_day), n_days_(n_days) {
    if (bin_seconds_ < 1) throw ConfigError("bin_seconds must be positive");
    if (bins_per_day_ < 1 || n_days_ < 1) throw ConfigError("bins_per_day and n_days must be positive");
    if (bits_.size() != bins_per_day_ * n_days_)
      throw DataError("series length " + std::to_string(bits_.size()) + " != bins_per_day x n_days = " +
                      std::to_string(bins_per_day_ * n_days_));
    for (auto b : bits_)
      if (b > 1) throw DataError("series values must be 0 or 1");
  }

  /// Parses a '0'/'1' string; its length must be a multiple of bins_per_day.
  static BinarySeries from_string(std::string_view text, std::size_t bins_per_day, std::int64_t bin_seconds = 600) {
    Bits bits;
    bits.reserve(text.size());
    for (char c : text) {
      if (c != '0' && c != '1') throw DataError(std::string("invalid bit character '") + c + "'");
      bits.push_back(static_cast<std::uint8_t>(c - '0'));
    }
    if (bins_per_day == 0 || bits.size() % bins_per_day != 0 || bits.empty())
      throw DataError("bit string length is not a positive multiple of bins_per_day");
    const std::size_t days = bits.size() / bins_per_day;
    return BinarySeries(std::move(bits), bin_seconds, bins_per_day, days);
  }

  const Bits& bits() const { return bits_; }
  std::size_t size() const { return bits_.size(); }
  bool empty() const { return bits_.empty(); }
  std::int64_t bin_seconds() const { return bin_seconds_; }
  std::size_t bins_per_day() const { return bins_per_day_; }
  std::size_t n_days() const { return n_days_; }

  std::span<const std::uint8_t> day(std::size_t d) const {
    return std::span<const std::uint8_t>(bits_).subspan(d * bins_per_day_, bins_per_day_);
  }

  std::size_t ones() const { return static_cast<std::size_t>(std::count(bits_.begin(), bits_.end(), 1)); }

  std::string to_string() const {
    std::string s(bits_.size(), '0');
    for (std::size_t i = 0; i < bits_.size(); ++i) s[i] = static_cast<char>('0' + bits_[i]);
    return s;
  }

  /// Same geometry, different bits (used by corruption and prediction).
  BinarySeries with_bits(Bits bits) const { return BinarySeries(std::move(bits), bin_seconds_, bins_per_day_, n_days_); }

  friend bool operator==(const BinarySeries&, const BinarySeries&) = default;

 private:
  Bits bits_;
  std::int64_t bin_seconds_ = 1;
  std::size_t bins_per_day_ = 0;
  std::size_t n_days_ = 0;
};

/// Bit i is 1 iff some event falls in the i-th half-open bin of the
/// concatenated daily windows starting at t0 (t0 is day 0's midnight).
inline BinarySeries binarize(const EventLog& events, std::int64_t t0, std::size_t n_days, const DayWindow& window,
                             std::int64_t bin_seconds) {
  window.validate(bin_seconds);
  if (n_days == 0) throw ConfigError("n_days must be positive");
  const auto bins_per_day = static_cast<std::size_t>(window.length() / bin_seconds);
  Bits bits(bins_per_day * n_days, 0);
  for (std::int64_t ts : events.timestamps) {
    const std::int64_t rel = ts - t0;
    if (rel < 0) continue;
    const std::int64_t d = rel / kSecondsPerDay;
    if (d >= static_cast<std::int64_t>(n_days)) continue;
    const std::int64_t sod = rel % kSecondsPerDay;
    if (sod < window.start_second_of_day || sod >= window.end_second_of_day) continue;
    const auto bin = static_cast<std::size_t>((sod - window.start_second_of_day) / bin_seconds);
    bits[static_cast<std::size_t>(d) * bins_per_day + bin] = 1;
  }
  return BinarySeries(std::move(bits), bin_seconds, bins_per_day, n_days);
}

/// ORs `factor` consecutive bins within each day.
inline BinarySeries coarsen(const BinarySeries& series, std::size_t factor) {
  if (factor == 0) throw ConfigError("coarsening factor must be positive");
  if (series.bins_per_day() % factor != 0)
    throw ConfigError("bins_per_day " + std::to_string(series.bins_per_day()) + " not divisible by factor " +
                      std::to_string(factor));
  const std::size_t out_per_day = series.bins_per_day() / factor;
  Bits out(out_per_day * series.n_days(), 0);
  for (std::size_t i = 0; i < series.size(); ++i)
    if (series.bits()[i]) out[i / factor] = 1;
  return BinarySeries(std::move(out), series.bin_seconds() * static_cast<std::int64_t>(factor), out_per_day,
                      series.n_days());
}

/// Concatenates the listed days (in the given order) into a new series.
inline BinarySeries select_days(const BinarySeries& series, std::span<const std::size_t> days) {
  if (days.empty()) throw ConfigError("cannot select zero days");
  Bits out;
  out.reserve(days.size() * series.bins_per_day());
  for (auto d : days) {
    if (d >= series.n_days()) throw ConfigError("day index out of range");
    auto span = series.day(d);
    out.insert(out.end(), span.begin(), span.end());
  }
  return BinarySeries(std::move(out), series.bin_seconds(), series.bins_per_day(), days.size());
}

inline BinarySeries day_range(const BinarySeries& series, std::size_t first, std::size_t count) {
  std::vector<std::size_t> days(count);
  std::iota(days.begin(), days.end(), first);
  return select_days(series, days);
}

/// Chronological split on day boundaries: the first train_days days train.
inline std::pair<BinarySeries, BinarySeries> split_train_test(const BinarySeries& series, std::size_t train_days) {
  if (train_days == 0 || train_days >= series.n_days())
    throw ConfigError("train_days must lie in (0, " + std::to_string(series.n_days()) + ")");
  return {day_range(series, 0, train_days), day_range(series, train_days, series.n_days() - train_days)};
}

/// Complements exactly round(q * length) distinct positions chosen uniformly
/// without replacement. Applying it twice with the same seed is the identity.
inline BinarySeries flip_bits(const BinarySeries& series, double q, std::uint64_t seed) {
  if (!(q >= 0.0 && q <= 1.0)) throw ArgumentError("flip proportion must lie in [0, 1]");
  const std::size_t n = series.size();
  const auto k = static_cast<std::size_t>(std::llround(q * static_cast<double>(n)));
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  Rng rng(seed);
  // Partial Fisher-Yates: the first k slots are a uniform k-subset.
  for (std::size_t i = 0; i < k; ++i) {
    const std::size_t j = i + static_cast<std::size_t>(rng.below(n - i));
    std::swap(idx[i], idx[j]);
  }
  Bits out = series.bits();
  for (std::size_t i = 0; i < k; ++i) out[idx[i]] ^= 1;
  return series.with_bits(std::move(out));
}

/// One row per day, one '0'/'1' character per bin.
inline std::vector<std::string> rastergram(const BinarySeries& series) {
  std::vector<std::string> rows;
  rows.reserve(series.n_days());
  for (std::size_t d = 0; d < series.n_days(); ++d) {
    std::string row(series.bins_per_day(), '0');
    auto day = series.day(d);
    for (std::size_t i = 0; i < day.size(); ++i) row[i] = static_cast<char>('0' + day[i]);
    rows.push_back(std::move(row));
  }
  return rows;
}

/// Fraction of bins containing at least one event.
inline double tweet_rate(const BinarySeries& series) {
  if (series.empty()) throw ArgumentError("tweet rate of an empty series is undefined");
  return static_cast<double>(series.ones()) / static_cast<double>(series.size());
}

inline std::size_t hamming_distance(const BinarySeries& a, const BinarySeries& b) {
  if (a.size() != b.size()) throw ArgumentError("hamming distance needs equal lengths");
  std::size_t d = 0;
  for (std::size_t i = 0; i < a.size(); ++i) d += a.bits()[i] != b.bits()[i];
  return d;
}

}  // namespace pointpred
