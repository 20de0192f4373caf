#pragma once

// Causal state models inferred by Causal State Splitting Reconstruction.
//
// Histories are stored as (length, code) pairs: the most recent symbol is the
// least significant bit of `code`, so prepending an older symbol a to a
// length-l history w gives (a << l) | w, and the successor of a length-L
// history after emitting b is ((w << 1) | b) masked to L bits. The string form
// is written oldest symbol first.

#include <array>
#include <cmath>
#include <cstdint>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include <json.hpp>

#include "pointpred/encoding.hpp"
#include "pointpred/errors.hpp"
#include "pointpred/graph.hpp"
#include "pointpred/homogeneity.hpp"
#include "pointpred/infotheory.hpp"

namespace pointpred {

inline constexpr std::size_t kMaxHistoryLength = 62;

inline std::uint64_t low_mask(std::size_t length) { return length >= 64 ? ~0ULL : (1ULL << length) - 1; }

inline std::string suffix_to_string(std::size_t length, std::uint64_t code) {
  std::string s(length, '0');
  for (std::size_t k = 0; k < length; ++k) s[k] = static_cast<char>('0' + ((code >> (length - 1 - k)) & 1ULL));
  return s;
}

inline std::pair<std::size_t, std::uint64_t> suffix_from_string(std::string_view s) {
  if (s.size() > kMaxHistoryLength) throw DataError("history string too long");
  std::uint64_t code = 0;
  for (char c : s) {
    if (c != '0' && c != '1') throw DataError("history strings must be binary");
    code = (code << 1) | static_cast<std::uint64_t>(c - '0');
  }
  return {s.size(), code};
}

/// Next-symbol counts for every observed history of length 0..max_length.
class SuffixStats {
 public:
  explicit SuffixStats(std::size_t max_length) : by_length_(max_length + 1) {}

  std::size_t max_length() const { return by_length_.size() - 1; }

  NextCounts counts(std::size_t length, std::uint64_t code) const {
    const auto& m = by_length_.at(length);
    auto it = m.find(code);
    return it == m.end() ? NextCounts{0, 0} : it->second;
  }

  const std::unordered_map<std::uint64_t, NextCounts>& level(std::size_t length) const {
    return by_length_.at(length);
  }

  void add(std::size_t length, std::uint64_t code, std::uint8_t next) { ++by_length_[length][code][next]; }

 private:
  std::vector<std::unordered_map<std::uint64_t, NextCounts>> by_length_;
};

/// Counts (history, next symbol) pairs for all history lengths up to L.
/// Histories never reach back across a day boundary.
inline SuffixStats count_suffixes(const BinarySeries& series, std::size_t L) {
  if (L >= series.bins_per_day())
    throw ConfigError("history length " + std::to_string(L) + " must be below bins_per_day " +
                      std::to_string(series.bins_per_day()));
  if (L > kMaxHistoryLength) throw ConfigError("history length above 62 is not supported");
  if (series.size() <= L) throw DataError("series too short for the history length");
  SuffixStats stats(L);
  for (std::size_t d = 0; d < series.n_days(); ++d) {
    auto day = series.day(d);
    std::uint64_t past = 0;
    for (std::size_t i = 0; i < day.size(); ++i) {
      const std::size_t reach = std::min(i, L);
      for (std::size_t l = 0; l <= reach; ++l) stats.add(l, past & low_mask(l), day[i]);
      past = (past << 1) | day[i];
    }
  }
  return stats;
}

struct CssrConfig {
  std::size_t history_length = 1;
  double alpha = 0.001;
  HomogeneityTest test = HomogeneityTest::kChiSquared;
  // Histories seen fewer times than this never found a new state.
  std::uint64_t min_count = 5;

  void validate() const {
    if (!(alpha > 0.0 && alpha < 1.0)) throw ConfigError("alpha must lie in (0, 1)");
    if (history_length > kMaxHistoryLength) throw ConfigError("history length above 62 is not supported");
  }
};

struct CausalState {
  std::string label;
  NextCounts counts{0, 0};
  std::array<double, 2> emit{1.0, 0.0};  // P(next symbol | state)
  std::array<int, 2> next{-1, -1};       // successor on each symbol, -1 if none

  double p1() const { return emit[1]; }
};

/// An inferred (or hand-built) epsilon-machine. Immutable once finalized, so
/// concurrent queries are safe.
struct CausalStateModel {
  std::size_t history_length = 0;
  double alpha = 0.001;
  HomogeneityTest test = HomogeneityTest::kChiSquared;
  std::vector<CausalState> states;
  // suffix_map[l] maps observed length-l histories to state indices.
  std::vector<std::unordered_map<std::uint64_t, std::size_t>> suffix_map;
  // Stationary-weighted P(1), used when no suffix of a history is mapped.
  std::optional<double> fallback_p1;

  std::optional<std::size_t> state_of(std::size_t length, std::uint64_t code) const {
    if (length >= suffix_map.size()) return std::nullopt;
    auto it = suffix_map[length].find(code);
    if (it == suffix_map[length].end()) return std::nullopt;
    return it->second;
  }

  void map_suffix(std::size_t length, std::uint64_t code, std::size_t state) {
    if (suffix_map.size() <= length) suffix_map.resize(length + 1);
    suffix_map[length][code] = state;
  }

  std::size_t mapped_suffix_count() const {
    std::size_t n = 0;
    for (const auto& m : suffix_map) n += m.size();
    return n;
  }

  void finalize();
};

namespace detail {

// Row-stochastic symbol-marginalized transition matrix. Emissions without a
// recorded successor are dropped and the row renormalized; a state with no
// successor at all is treated as absorbing.
inline std::vector<std::vector<double>> transition_matrix(const CausalStateModel& model) {
  const std::size_t n = model.states.size();
  std::vector<std::vector<double>> T(n, std::vector<double>(n, 0.0));
  for (std::size_t s = 0; s < n; ++s) {
    const auto& st = model.states[s];
    double row = 0.0;
    for (int b = 0; b < 2; ++b) {
      if (st.next[b] < 0 || st.emit[b] <= 0.0) continue;
      if (static_cast<std::size_t>(st.next[b]) >= n) throw DataError("transition to unknown state");
      T[s][static_cast<std::size_t>(st.next[b])] += st.emit[b];
      row += st.emit[b];
    }
    if (row <= 0.0) {
      T[s][s] = 1.0;
      continue;
    }
    for (auto& v : T[s]) v /= row;
  }
  return T;
}

}  // namespace detail

inline constexpr double kStationaryTolerance = 1e-12;
inline constexpr std::size_t kStationaryMaxIterations = 200000;

/// Left fixed point of the state transition matrix by power iteration on the
/// lazy chain (I + T) / 2, which has the same fixed point but no periodicity.
inline std::vector<double> stationary_distribution(const CausalStateModel& model) {
  const std::size_t n = model.states.size();
  if (n == 0) throw DataError("model has no states");
  const auto T = detail::transition_matrix(model);
  std::vector<double> pi(n, 1.0 / static_cast<double>(n)), nxt(n);
  double diff = 0.0;
  for (std::size_t it = 0; it < kStationaryMaxIterations; ++it) {
    std::fill(nxt.begin(), nxt.end(), 0.0);
    for (std::size_t i = 0; i < n; ++i) {
      if (pi[i] == 0.0) continue;
      nxt[i] += 0.5 * pi[i];
      for (std::size_t j = 0; j < n; ++j) nxt[j] += 0.5 * pi[i] * T[i][j];
    }
    double sum = 0.0;
    for (double v : nxt) sum += v;
    diff = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      nxt[i] /= sum;
      diff += std::abs(nxt[i] - pi[i]);
    }
    pi.swap(nxt);
    if (diff < kStationaryTolerance) return pi;
  }
  throw NumericalError("stationary distribution did not converge after " +
                       std::to_string(kStationaryMaxIterations) + " iterations over " + std::to_string(n) +
                       " states (last L1 change " + std::to_string(diff) + ")");
}

/// Entropy (bits) of the stationary distribution over causal states.
inline double statistical_complexity(const CausalStateModel& model) {
  const auto pi = stationary_distribution(model);
  return shannon_entropy(std::span<const double>(pi));
}

inline void CausalStateModel::finalize() {
  if (suffix_map.size() < history_length + 1) suffix_map.resize(history_length + 1);
  double fb = 0.0;
  try {
    const auto pi = stationary_distribution(*this);
    for (std::size_t s = 0; s < states.size(); ++s) fb += pi[s] * states[s].emit[1];
  } catch (const NumericalError&) {
    std::uint64_t n = 0, ones = 0;
    for (const auto& st : states) {
      n += total(st.counts);
      ones += st.counts[1];
    }
    fb = n ? static_cast<double>(ones) / static_cast<double>(n) : 0.0;
  }
  fallback_p1 = fb;
}

namespace detail {

struct WorkState {
  std::vector<std::uint64_t> members;  // histories of the current length
  NextCounts pooled{0, 0};
};

inline void sort_members(std::vector<WorkState>& states) {
  for (auto& s : states) std::sort(s.members.begin(), s.members.end());
}

// Grows histories one symbol further into the past, level by level, placing
// each extension in its parent's state, in another state with a matching
// next-symbol distribution, or in a new state.
inline std::vector<WorkState> split_states(const SuffixStats& stats, const CssrConfig& config) {
  std::vector<WorkState> states(1);
  states[0].members = {0};
  states[0].pooled = stats.counts(0, 0);

  auto matches = [&](const NextCounts& c, const NextCounts& ref) {
    return total(ref) > 0 && same_distribution(c, ref, config.alpha, config.test);
  };

  for (std::size_t l = 0; l < config.history_length; ++l) {
    const std::size_t n_existing = states.size();
    std::vector<NextCounts> snapshot;
    snapshot.reserve(n_existing);
    for (const auto& s : states) snapshot.push_back(s.pooled);
    std::vector<WorkState> next(n_existing);

    for (std::size_t s = 0; s < n_existing; ++s) {
      for (std::uint64_t w : states[s].members) {
        for (std::uint64_t a = 0; a < 2; ++a) {
          const std::uint64_t child = (a << l) | w;
          const NextCounts c = stats.counts(l + 1, child);
          if (total(c) == 0) continue;
          std::size_t target = s;
          if (total(c) >= config.min_count && !matches(c, snapshot[s])) {
            target = next.size();
            std::uint64_t best = 0;
            bool found = false;
            for (std::size_t t = 0; t < next.size(); ++t) {
              if (t == s) continue;
              const NextCounts& ref = t < n_existing ? snapshot[t] : next[t].pooled;
              if (!matches(c, ref)) continue;
              if (!found || total(ref) > best) {
                target = t;
                best = total(ref);
                found = true;
              }
            }
            if (!found) next.emplace_back();
          }
          next[target].members.push_back(child);
          next[target].pooled += c;
        }
      }
    }
    states.clear();
    for (auto& s : next)
      if (!s.members.empty()) states.push_back(std::move(s));
    sort_members(states);
  }
  return states;
}

// Splits states until every (state, symbol) pair with observed emissions has
// a single successor state.
inline void determinize(std::vector<WorkState>& states, const SuffixStats& stats, std::size_t L) {
  const std::uint64_t mask = low_mask(L);
  std::unordered_map<std::uint64_t, std::size_t> owner;
  auto rebuild_owner = [&] {
    owner.clear();
    for (std::size_t s = 0; s < states.size(); ++s)
      for (auto w : states[s].members) owner[w] = s;
  };
  rebuild_owner();

  bool changed = true;
  while (changed) {
    changed = false;
    for (std::size_t s = 0; s < states.size() && !changed; ++s) {
      for (std::uint8_t b = 0; b < 2 && !changed; ++b) {
        std::map<std::size_t, std::vector<std::uint64_t>> groups;
        std::vector<std::uint64_t> loose;
        for (auto w : states[s].members) {
          if (stats.counts(L, w)[b] == 0) {
            loose.push_back(w);
            continue;
          }
          auto it = owner.find(((w << 1) | b) & mask);
          if (it == owner.end()) loose.push_back(w);
          else groups[it->second].push_back(w);
        }
        if (groups.size() <= 1) continue;

        // The heaviest group keeps the state; histories without a defined
        // successor on b stay with it.
        auto weight = [&](const std::vector<std::uint64_t>& ws) {
          std::uint64_t n = 0;
          for (auto w : ws) n += total(stats.counts(L, w));
          return n;
        };
        auto keep = groups.begin();
        std::uint64_t keep_weight = weight(keep->second);
        for (auto it = std::next(groups.begin()); it != groups.end(); ++it) {
          const auto wgt = weight(it->second);
          if (wgt > keep_weight) {
            keep = it;
            keep_weight = wgt;
          }
        }
        std::vector<std::uint64_t> kept = keep->second;
        kept.insert(kept.end(), loose.begin(), loose.end());
        for (auto it = groups.begin(); it != groups.end(); ++it) {
          if (it == keep) continue;
          WorkState fresh;
          fresh.members = it->second;
          states.push_back(std::move(fresh));
        }
        states[s].members = std::move(kept);
        changed = true;
      }
    }
    if (changed) {
      for (auto& st : states) {
        std::sort(st.members.begin(), st.members.end());
        st.pooled = {0, 0};
        for (auto w : st.members) st.pooled += stats.counts(L, w);
      }
      rebuild_owner();
    }
  }
}

}  // namespace detail

/// CSSR on precomputed counts (which may extend beyond the configured L).
inline CausalStateModel infer(const SuffixStats& stats, const CssrConfig& config) {
  config.validate();
  const std::size_t L = config.history_length;
  if (L > stats.max_length()) throw ConfigError("suffix statistics are shallower than the history length");
  if (total(stats.counts(0, 0)) == 0) throw DataError("no observations to infer from");

  auto states = detail::split_states(stats, config);
  detail::determinize(states, stats, L);

  const std::uint64_t mask = low_mask(L);
  std::unordered_map<std::uint64_t, std::size_t> owner;
  for (std::size_t s = 0; s < states.size(); ++s)
    for (auto w : states[s].members) owner[w] = s;

  const std::size_t n = states.size();
  std::vector<std::array<int, 2>> next(n, {-1, -1});
  std::vector<NextCounts> pooled(n, {0, 0});
  for (std::size_t s = 0; s < n; ++s) {
    for (auto w : states[s].members) {
      const NextCounts c = stats.counts(L, w);
      pooled[s] += c;
      for (std::uint8_t b = 0; b < 2; ++b) {
        if (c[b] == 0) continue;
        auto it = owner.find(((w << 1) | b) & mask);
        if (it != owner.end()) next[s][b] = static_cast<int>(it->second);
      }
    }
  }

  // Keep the heaviest closed recurrent class.
  std::vector<std::vector<std::size_t>> adj(n);
  for (std::size_t s = 0; s < n; ++s)
    for (int b = 0; b < 2; ++b)
      if (next[s][b] >= 0 && pooled[s][b] > 0) adj[s].push_back(static_cast<std::size_t>(next[s][b]));
  auto classes = detail::recurrent_classes(adj);
  std::vector<std::size_t> keep;
  if (classes.empty()) {
    for (std::size_t s = 0; s < n; ++s) keep.push_back(s);
  } else {
    std::uint64_t best = 0;
    for (const auto& cls : classes) {
      std::uint64_t w = 0;
      for (auto s : cls) w += total(pooled[s]);
      if (keep.empty() || w > best) {
        keep = cls;
        best = w;
      }
    }
  }

  std::vector<int> relabel(n, -1);
  for (std::size_t i = 0; i < keep.size(); ++i) relabel[keep[i]] = static_cast<int>(i);

  CausalStateModel model;
  model.history_length = L;
  model.alpha = config.alpha;
  model.test = config.test;
  model.suffix_map.resize(L + 1);
  for (std::size_t i = 0; i < keep.size(); ++i) {
    const std::size_t s = keep[i];
    CausalState st;
    st.label = "S" + std::to_string(i);
    st.counts = pooled[s];
    const double tot = static_cast<double>(total(pooled[s]));
    st.emit = {static_cast<double>(pooled[s][0]) / tot, static_cast<double>(pooled[s][1]) / tot};
    for (int b = 0; b < 2; ++b)
      if (next[s][b] >= 0 && pooled[s][b] > 0) st.next[b] = relabel[static_cast<std::size_t>(next[s][b])];
    model.states.push_back(std::move(st));
  }

  // Full-length histories map to their state; a shorter history is mapped
  // only when every retained full-length extension of it agrees.
  std::vector<std::unordered_map<std::uint64_t, int>> votes(L + 1);
  for (std::size_t s = 0; s < n; ++s) {
    if (relabel[s] < 0) continue;
    for (auto w : states[s].members) {
      for (std::size_t l = 0; l <= L; ++l) {
        const std::uint64_t code = w & low_mask(l);
        auto [it, inserted] = votes[l].emplace(code, relabel[s]);
        if (!inserted && it->second != relabel[s]) it->second = -1;
      }
    }
  }
  for (std::size_t l = 0; l <= L; ++l)
    for (const auto& [code, s] : votes[l])
      if (s >= 0) model.suffix_map[l][code] = static_cast<std::size_t>(s);

  model.finalize();
  return model;
}

inline CausalStateModel infer(const BinarySeries& series, const CssrConfig& config) {
  config.validate();
  return infer(count_suffixes(series, config.history_length), config);
}

/// P(next = 1 | history), history given oldest symbol first. The longest
/// mapped suffix of the history decides the state.
inline double predict_distribution(const CausalStateModel& model, std::span<const std::uint8_t> history) {
  const std::size_t h = std::min(history.size(), model.history_length);
  std::uint64_t code = 0;
  for (std::size_t k = history.size() - h; k < history.size(); ++k) code = (code << 1) | (history[k] & 1U);
  for (std::size_t l = h + 1; l-- > 0;) {
    if (auto s = model.state_of(l, code & low_mask(l))) return model.states[*s].emit[1];
  }
  if (model.fallback_p1) return *model.fallback_p1;
  const auto pi = stationary_distribution(model);
  double p = 0.0;
  for (std::size_t s = 0; s < pi.size(); ++s) p += pi[s] * model.states[s].emit[1];
  return p;
}

inline double predict_distribution(const CausalStateModel& model, std::string_view history) {
  Bits bits;
  for (char c : history) {
    if (c != '0' && c != '1') throw ArgumentError("history must be a binary string");
    bits.push_back(static_cast<std::uint8_t>(c - '0'));
  }
  return predict_distribution(model, std::span<const std::uint8_t>(bits));
}

/// Threshold at 1/2; an exact tie predicts 0.
inline std::uint8_t threshold_prediction(double p1) { return p1 > 0.5 ? 1 : 0; }

inline std::uint8_t predict_next(const CausalStateModel& model, std::span<const std::uint8_t> history) {
  return threshold_prediction(predict_distribution(model, history));
}

inline std::uint8_t predict_next(const CausalStateModel& model, std::string_view history) {
  return threshold_prediction(predict_distribution(model, history));
}

/// One-step-ahead predictions for every bin, using only same-day history.
inline Bits predict_series(const CausalStateModel& model, const BinarySeries& series) {
  Bits out(series.size());
  for (std::size_t d = 0; d < series.n_days(); ++d) {
    auto day = series.day(d);
    for (std::size_t i = 0; i < day.size(); ++i)
      out[d * series.bins_per_day() + i] = predict_next(model, day.subspan(0, i));
  }
  return out;
}

// Serialization. States are shared with ProcessSpec's text form so that
// inferred models and generators diff directly.

inline nlohmann::json states_to_json(const std::vector<CausalState>& states, bool with_counts) {
  auto arr = nlohmann::json::array();
  for (const auto& st : states) {
    nlohmann::json j;
    j["label"] = st.label;
    j["emit"] = {st.emit[0], st.emit[1]};
    nlohmann::json nx = nlohmann::json::array();
    for (int b = 0; b < 2; ++b) nx.push_back(st.next[b] >= 0 ? nlohmann::json(st.next[b]) : nlohmann::json(nullptr));
    j["next"] = nx;
    if (with_counts) j["counts"] = {st.counts[0], st.counts[1]};
    arr.push_back(std::move(j));
  }
  return arr;
}

inline std::vector<CausalState> states_from_json(const nlohmann::json& arr) {
  std::vector<CausalState> states;
  for (const auto& j : arr) {
    CausalState st;
    st.label = j.at("label").get<std::string>();
    st.emit = {j.at("emit").at(0).get<double>(), j.at("emit").at(1).get<double>()};
    for (int b = 0; b < 2; ++b) {
      const auto& v = j.at("next").at(b);
      st.next[b] = v.is_null() ? -1 : v.get<int>();
    }
    if (j.contains("counts")) st.counts = {j["counts"].at(0).get<std::uint64_t>(), j["counts"].at(1).get<std::uint64_t>()};
    states.push_back(std::move(st));
  }
  for (const auto& st : states)
    for (int b = 0; b < 2; ++b)
      if (st.next[b] >= static_cast<int>(states.size())) throw DataError("transition to unknown state");
  return states;
}

inline nlohmann::json to_json(const CausalStateModel& model) {
  nlohmann::json j;
  j["format"] = "causal-state-model";
  j["history_length"] = model.history_length;
  j["alpha"] = model.alpha;
  j["test"] = std::string(to_string(model.test));
  j["states"] = states_to_json(model.states, true);
  // std::map keeps the suffix listing sorted (by length, then code).
  std::map<std::pair<std::size_t, std::uint64_t>, std::size_t> sorted;
  for (std::size_t l = 0; l < model.suffix_map.size(); ++l)
    for (const auto& [code, s] : model.suffix_map[l]) sorted[{l, code}] = s;
  nlohmann::json sm = nlohmann::json::array();
  for (const auto& [key, s] : sorted) sm.push_back({suffix_to_string(key.first, key.second), s});
  j["suffix_map"] = sm;
  return j;
}

inline CausalStateModel causal_state_model_from_json(const nlohmann::json& j) {
  if (j.value("format", "") != "causal-state-model") throw DataError("not a causal-state-model document");
  CausalStateModel model;
  model.history_length = j.at("history_length").get<std::size_t>();
  if (model.history_length > kMaxHistoryLength) throw DataError("history length too large");
  model.alpha = j.at("alpha").get<double>();
  model.test = homogeneity_test_from_string(j.at("test").get<std::string>());
  model.states = states_from_json(j.at("states"));
  model.suffix_map.resize(model.history_length + 1);
  for (const auto& entry : j.at("suffix_map")) {
    const auto [len, code] = suffix_from_string(entry.at(0).get<std::string>());
    const auto s = entry.at(1).get<std::size_t>();
    if (len > model.history_length || s >= model.states.size()) throw DataError("bad suffix_map entry");
    model.suffix_map[len][code] = s;
  }
  model.finalize();
  return model;
}

inline void save_model(std::ostream& out, const CausalStateModel& model) { out << to_json(model).dump(2) << '\n'; }

inline CausalStateModel load_causal_state_model(std::istream& in) {
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("malformed model file: ") + e.what());
  }
  return causal_state_model_from_json(j);
}

}  // namespace pointpred
