#pragma once

// Baseline predictor, accuracy, history-length cross-validation, per-series
// head-to-head evaluation, entropy-divergence quartiles and the bit-flip
// robustness experiment.

#include <algorithm>
#include <array>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <exception>
#include <mutex>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <thread>
#include <vector>

#include "pointpred/cssr.hpp"
#include "pointpred/encoding.hpp"
#include "pointpred/encoding_io.hpp"
#include "pointpred/errors.hpp"
#include "pointpred/esn.hpp"
#include "pointpred/infotheory.hpp"
#include "pointpred/random.hpp"

namespace pointpred {

struct BaselinePredictor {
  double p_hat = 0.0;
  std::uint8_t prediction = 0;
};

/// Majority vote: predicts 1 only when strictly more than half the bins are 1.
inline BaselinePredictor baseline_fit(const BinarySeries& train) {
  if (train.empty()) throw DataError("baseline needs a non-empty training series");
  BaselinePredictor b;
  b.p_hat = static_cast<double>(train.ones()) / static_cast<double>(train.size());
  b.prediction = b.p_hat > 0.5 ? 1 : 0;
  return b;
}

inline double accuracy(std::span<const std::uint8_t> predicted, std::span<const std::uint8_t> actual) {
  if (predicted.size() != actual.size())
    throw ArgumentError("accuracy needs equal lengths (" + std::to_string(predicted.size()) + " vs " +
                        std::to_string(actual.size()) + ")");
  if (actual.empty()) throw ArgumentError("accuracy of an empty sequence is undefined");
  std::size_t hits = 0;
  for (std::size_t i = 0; i < actual.size(); ++i) hits += predicted[i] == actual[i];
  return static_cast<double>(hits) / static_cast<double>(actual.size());
}

inline double baseline_accuracy(const BaselinePredictor& b, const BinarySeries& test) {
  const Bits pred(test.size(), b.prediction);
  return accuracy(pred, test.bits());
}

namespace detail {

inline std::size_t count_hits(const Bits& predicted, const Bits& actual) {
  std::size_t hits = 0;
  for (std::size_t i = 0; i < actual.size(); ++i) hits += predicted[i] == actual[i];
  return hits;
}

}  // namespace detail

struct CrossValidation {
  std::size_t selected_L = 0;
  std::vector<double> mean_accuracy;  // indexed by candidate L
};

/// Contiguous day-block folds. Every candidate L from 0 up to the cap for the
/// fold-train length is scored by held-out accuracy; ties go to the smaller L.
inline CrossValidation cross_validate(const BinarySeries& train, std::size_t n_folds, const CssrConfig& config) {
  config.validate();
  if (n_folds < 2) throw ConfigError("cross-validation needs at least 2 folds");
  if (train.n_days() % n_folds != 0)
    throw ConfigError(std::to_string(train.n_days()) + " training days do not divide into " +
                      std::to_string(n_folds) + " folds");
  const std::size_t fold_days = train.n_days() / n_folds;
  const std::size_t fold_train_bits = (n_folds - 1) * fold_days * train.bins_per_day();
  const std::size_t L_max = std::min({max_history_length(fold_train_bits), train.bins_per_day() - 1,
                                      kMaxHistoryLength});

  std::vector<std::size_t> hits(L_max + 1, 0);
  std::size_t scored = 0;
  for (std::size_t f = 0; f < n_folds; ++f) {
    std::vector<std::size_t> train_days, held_days;
    for (std::size_t d = 0; d < train.n_days(); ++d) (d / fold_days == f ? held_days : train_days).push_back(d);
    const BinarySeries fit = select_days(train, train_days);
    const BinarySeries held = select_days(train, held_days);
    const SuffixStats stats = count_suffixes(fit, L_max);
    for (std::size_t L = 0; L <= L_max; ++L) {
      CssrConfig c = config;
      c.history_length = L;
      const CausalStateModel model = infer(stats, c);
      hits[L] += detail::count_hits(predict_series(model, held), held.bits());
    }
    scored += held.size();
  }

  CrossValidation cv;
  for (std::size_t L = 0; L <= L_max; ++L) {
    cv.mean_accuracy.push_back(static_cast<double>(hits[L]) / static_cast<double>(scored));
    if (hits[L] > hits[cv.selected_L]) cv.selected_L = L;
  }
  return cv;
}

inline std::size_t cross_validate_history(const BinarySeries& train, std::size_t n_folds, const CssrConfig& config) {
  return cross_validate(train, n_folds, config).selected_L;
}

struct EvaluationConfig {
  CssrConfig cssr;                        // history_length is ignored unless fixed_L is set
  std::optional<std::size_t> fixed_L;    // skip cross-validation
  std::size_t n_folds = 9;
  EsnConfig esn;
  std::size_t entropy_block_length = 4;  // block length for h_train / h_test

  void validate() const {
    cssr.validate();
    esn.validate();
    if (!fixed_L && n_folds < 2) throw ConfigError("cross-validation needs at least 2 folds");
    if (entropy_block_length == 0) throw ConfigError("entropy block length must be positive");
  }
};

struct ReportRow {
  std::string series_id;
  double tweet_rate = 0.0;
  double baseline_accuracy = 0.0;
  std::optional<double> csm_accuracy;
  std::optional<double> esn_accuracy;
  std::optional<std::size_t> selected_L;
  std::optional<double> statistical_complexity;
  double h_train = 0.0;
  double h_test = 0.0;
  double abs_entropy_diff = 0.0;
  int quartile = 0;  // 1..4 once assigned
  std::vector<std::string> errors;

  std::optional<double> csm_improvement() const {
    if (!csm_accuracy) return std::nullopt;
    return *csm_accuracy - baseline_accuracy;
  }
  std::optional<double> esn_improvement() const {
    if (!esn_accuracy) return std::nullopt;
    return *esn_accuracy - baseline_accuracy;
  }
};

/// Fits baseline, causal state model and echo state network on `train`, scores
/// them on `test`. A model that fails on data or numerics leaves its fields
/// empty and records the message; configuration errors propagate.
inline ReportRow evaluate_pair(const BinarySeries& train, const BinarySeries& test, const EvaluationConfig& config,
                               std::string series_id = {}) {
  config.validate();
  if (train.bins_per_day() != test.bins_per_day() || train.bin_seconds() != test.bin_seconds())
    throw ArgumentError("train and test series have different geometry");
  ReportRow row;
  row.series_id = std::move(series_id);
  row.tweet_rate = static_cast<double>(train.ones() + test.ones()) / static_cast<double>(train.size() + test.size());
  const BaselinePredictor base = baseline_fit(train);
  row.baseline_accuracy = baseline_accuracy(base, test);

  try {
    const std::size_t L = config.fixed_L ? *config.fixed_L : cross_validate_history(train, config.n_folds, config.cssr);
    CssrConfig c = config.cssr;
    c.history_length = L;
    const CausalStateModel model = infer(train, c);
    row.selected_L = L;
    row.csm_accuracy = accuracy(predict_series(model, test), test.bits());
    row.statistical_complexity = statistical_complexity(model);
  } catch (const DataError& e) {
    row.errors.push_back(std::string("causal state model: ") + e.what());
  } catch (const NumericalError& e) {
    row.errors.push_back(std::string("causal state model: ") + e.what());
  }

  try {
    const EchoStateModel esn = train_esn(config.esn, train);
    row.esn_accuracy = accuracy(predict_sequence(esn, test).bits, test.bits());
  } catch (const DataError& e) {
    row.errors.push_back(std::string("echo state network: ") + e.what());
  } catch (const NumericalError& e) {
    row.errors.push_back(std::string("echo state network: ") + e.what());
  }

  const std::size_t Lb = std::min(config.entropy_block_length, train.bins_per_day());
  row.h_train = entropy_rate(train, Lb).h;
  row.h_test = entropy_rate(test, Lb).h;
  row.abs_entropy_diff = std::abs(row.h_train - row.h_test);
  return row;
}

struct QuartileSummary {
  std::array<std::optional<double>, 4> mean_difference;  // mean (csm - esn) accuracy
  std::array<std::size_t, 4> rows{0, 0, 0, 0};
  std::array<std::size_t, 4> scored{0, 0, 0, 0};
};

/// Ranks rows by abs_entropy_diff (stable, so ties keep input order) and
/// labels rank r of n with quartile floor(4r/n) + 1. Rows missing either
/// model accuracy are labelled but left out of the means.
inline QuartileSummary quartile_by_entropy_divergence(std::vector<ReportRow>& rows) {
  if (rows.size() < 4) throw DataError("quartiles need at least 4 rows");
  std::vector<std::size_t> order(rows.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return rows[a].abs_entropy_diff < rows[b].abs_entropy_diff; });
  QuartileSummary q;
  std::array<double, 4> sums{0, 0, 0, 0};
  const std::size_t n = rows.size();
  for (std::size_t r = 0; r < n; ++r) {
    auto& row = rows[order[r]];
    row.quartile = static_cast<int>(4 * r / n) + 1;
    const auto k = static_cast<std::size_t>(row.quartile - 1);
    ++q.rows[k];
    if (row.csm_accuracy && row.esn_accuracy) {
      sums[k] += *row.csm_accuracy - *row.esn_accuracy;
      ++q.scored[k];
    }
  }
  for (std::size_t k = 0; k < 4; ++k)
    if (q.scored[k] > 0) q.mean_difference[k] = sums[k] / static_cast<double>(q.scored[k]);
  return q;
}

namespace detail {

inline std::string format_value(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

inline std::string format_value(const std::optional<double>& v) { return v ? format_value(*v) : "NA"; }

}  // namespace detail

inline constexpr const char* kReportHeader =
    "series_id,tweet_rate,baseline_acc,csm_acc,esn_acc,csm_improvement,esn_improvement,selected_L,"
    "stat_complexity,h_train,h_test,abs_entropy_diff,quartile";

inline void write_report_csv(std::ostream& out, const std::vector<ReportRow>& rows) {
  using detail::format_value;
  out << kReportHeader << '\n';
  for (const auto& r : rows) {
    out << r.series_id << ',' << format_value(r.tweet_rate) << ',' << format_value(r.baseline_accuracy) << ','
        << format_value(r.csm_accuracy) << ',' << format_value(r.esn_accuracy) << ','
        << format_value(r.csm_improvement()) << ',' << format_value(r.esn_improvement()) << ','
        << (r.selected_L ? std::to_string(*r.selected_L) : "NA") << ',' << format_value(r.statistical_complexity)
        << ',' << format_value(r.h_train) << ',' << format_value(r.h_test) << ','
        << format_value(r.abs_entropy_diff) << ',' << (r.quartile > 0 ? std::to_string(r.quartile) : "NA")
        << '\n';
  }
}

/// Runs `task(i)` for i in [0, n) on up to `jobs` threads. The first
/// exception thrown by any task is rethrown after all workers finish.
template <class Task>
void parallel_for(std::size_t n, std::size_t jobs, Task&& task) {
  jobs = std::max<std::size_t>(1, std::min(jobs, n));
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  auto worker = [&] {
    for (std::size_t i = next++; i < n; i = next++) {
      try {
        task(i);
      } catch (...) {
        std::lock_guard<std::mutex> lock(failure_mutex);
        if (!failure) failure = std::current_exception();
        next = n;
      }
    }
  };
  if (jobs == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t j = 0; j < jobs; ++j) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  if (failure) std::rethrow_exception(failure);
}

/// Evaluates every series with a chronological split at train_days. The ESN
/// seed of each series is derived from `seed` and its id, so rows do not
/// depend on file order or scheduling. Output is sorted by series_id and,
/// with at least 4 rows, labelled with entropy-divergence quartiles.
inline std::vector<ReportRow> evaluate_batch(const std::vector<SeriesRecord>& records, std::size_t train_days,
                                             const EvaluationConfig& config, std::uint64_t seed, std::size_t jobs = 1,
                                             QuartileSummary* summary = nullptr) {
  config.validate();
  std::vector<ReportRow> rows(records.size());
  parallel_for(records.size(), jobs, [&](std::size_t i) {
    const auto& rec = records[i];
    const auto [train, test] = split_train_test(rec.series, train_days);
    EvaluationConfig c = config;
    c.esn.seed = derive_seed(seed, hash_id(rec.id));
    rows[i] = evaluate_pair(train, test, c, rec.id);
  });
  std::stable_sort(rows.begin(), rows.end(),
                   [](const ReportRow& a, const ReportRow& b) { return a.series_id < b.series_id; });
  if (rows.size() >= 4) {
    auto q = quartile_by_entropy_divergence(rows);
    if (summary) *summary = q;
  }
  return rows;
}

struct BitflipPoint {
  double q = 0.0;
  std::optional<double> csm_accuracy;
  std::optional<double> esn_accuracy;
};

/// Trains both models once on the whole series, then scores them on copies of
/// the same series with a proportion q of bits flipped. Flip seeds are
/// derive_seed(seed, index of q in the grid).
inline std::vector<BitflipPoint> bitflip_experiment(const BinarySeries& series, std::span<const double> q_grid,
                                                    const CssrConfig& cssr_config, const EsnConfig& esn_config,
                                                    std::uint64_t seed) {
  for (double q : q_grid)
    if (!(q >= 0.0 && q <= 1.0)) throw ArgumentError("flip proportions must lie in [0, 1]");
  std::optional<CausalStateModel> csm;
  std::optional<EchoStateModel> esn;
  try {
    csm = infer(series, cssr_config);
  } catch (const DataError&) {
  } catch (const NumericalError&) {
  }
  try {
    esn = train_esn(esn_config, series);
  } catch (const DataError&) {
  } catch (const NumericalError&) {
  }
  std::vector<BitflipPoint> out;
  for (std::size_t k = 0; k < q_grid.size(); ++k) {
    const BinarySeries flipped = flip_bits(series, q_grid[k], derive_seed(seed, k));
    BitflipPoint p;
    p.q = q_grid[k];
    if (csm) p.csm_accuracy = accuracy(predict_series(*csm, flipped), flipped.bits());
    if (esn) p.esn_accuracy = accuracy(predict_sequence(*esn, flipped).bits, flipped.bits());
    out.push_back(p);
  }
  return out;
}

struct BitflipSummaryRow {
  double q = 0.0;
  std::optional<double> csm_mean, csm_sd;
  std::optional<double> esn_mean, esn_sd;
};

namespace detail {

// Mean and sample standard deviation; the deviation needs two values.
inline std::pair<std::optional<double>, std::optional<double>> mean_sd(const std::vector<double>& v) {
  if (v.empty()) return {std::nullopt, std::nullopt};
  double m = 0.0;
  for (double x : v) m += x;
  m /= static_cast<double>(v.size());
  if (v.size() < 2) return {m, std::nullopt};
  double ss = 0.0;
  for (double x : v) ss += (x - m) * (x - m);
  return {m, std::sqrt(ss / static_cast<double>(v.size() - 1))};
}

}  // namespace detail

/// Per-q mean and standard deviation across series. Every per-series table
/// must use the same grid.
inline std::vector<BitflipSummaryRow> summarize_bitflip(const std::vector<std::vector<BitflipPoint>>& per_series) {
  if (per_series.empty()) return {};
  const std::size_t nq = per_series.front().size();
  for (const auto& t : per_series)
    if (t.size() != nq) throw ArgumentError("bit-flip tables use different grids");
  std::vector<BitflipSummaryRow> rows;
  for (std::size_t k = 0; k < nq; ++k) {
    std::vector<double> c, e;
    for (const auto& t : per_series) {
      if (t[k].csm_accuracy) c.push_back(*t[k].csm_accuracy);
      if (t[k].esn_accuracy) e.push_back(*t[k].esn_accuracy);
    }
    BitflipSummaryRow r;
    r.q = per_series.front()[k].q;
    std::tie(r.csm_mean, r.csm_sd) = detail::mean_sd(c);
    std::tie(r.esn_mean, r.esn_sd) = detail::mean_sd(e);
    rows.push_back(r);
  }
  return rows;
}

inline constexpr const char* kBitflipHeader = "q,csm_mean,csm_sd,esn_mean,esn_sd";

inline void write_bitflip_csv(std::ostream& out, const std::vector<BitflipSummaryRow>& rows) {
  using detail::format_value;
  out << kBitflipHeader << '\n';
  for (const auto& r : rows) {
    char q[32];
    std::snprintf(q, sizeof q, "%.2f", r.q);
    out << q << ',' << format_value(r.csm_mean) << ',' << format_value(r.csm_sd) << ','
        << format_value(r.esn_mean) << ',' << format_value(r.esn_sd) << '\n';
  }
}

/// 0, step, 2 step, ... up to and including 1 (within rounding).
inline std::vector<double> q_grid(double step) {
  if (!(step > 0.0 && step <= 1.0)) throw ConfigError("q grid step must lie in (0, 1]");
  std::vector<double> grid;
  const auto n = static_cast<std::size_t>(std::floor(1.0 / step + 1e-9));
  for (std::size_t k = 0; k <= n; ++k) grid.push_back(std::min(1.0, static_cast<double>(k) * step));
  return grid;
}

}  // namespace pointpred
