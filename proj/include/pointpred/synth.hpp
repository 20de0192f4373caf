#pragma once

// Ground-truth unifilar generators for the typical causal-state topologies,
// with closed-form oracles for complexity, entropy rate and best accuracy.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "pointpred/cssr.hpp"
#include "pointpred/encoding.hpp"
#include "pointpred/errors.hpp"
#include "pointpred/graph.hpp"
#include "pointpred/infotheory.hpp"
#include "pointpred/random.hpp"

namespace pointpred {

/// A unifilar machine. Each state emits 1 with probability emit[1] and moves
/// to next[symbol]; it reuses the causal-state layout for diffing.
struct ProcessSpec {
  std::vector<CausalState> states;

  void validate() const {
    if (states.empty()) throw ArgumentError("process spec has no states");
    for (const auto& st : states) {
      for (int b = 0; b < 2; ++b) {
        if (!(st.emit[b] >= 0.0 && st.emit[b] <= 1.0)) throw ArgumentError("emission probability outside [0, 1]");
        if (st.emit[b] > 0.0 && (st.next[b] < 0 || st.next[b] >= static_cast<int>(states.size())))
          throw ArgumentError("state '" + st.label + "' emits a symbol with no successor");
      }
      if (std::abs(st.emit[0] + st.emit[1] - 1.0) > 1e-12)
        throw ArgumentError("state '" + st.label + "' emissions do not sum to 1");
    }
  }
};

namespace detail {

inline void check_probability(double p, const char* name) {
  if (!(p >= 0.0 && p <= 1.0)) throw ArgumentError(std::string(name) + " must lie in [0, 1]");
}

inline CausalState spec_state(std::string label, double p1, int next0, int next1) {
  CausalState st;
  st.label = std::move(label);
  st.emit = {1.0 - p1, p1};
  st.next = {st.emit[0] > 0.0 ? next0 : -1, st.emit[1] > 0.0 ? next1 : -1};
  return st;
}

}  // namespace detail

/// One self-looping state emitting 1 with probability p.
inline ProcessSpec make_bernoulli(double p) {
  detail::check_probability(p, "p");
  return ProcessSpec{{detail::spec_state("S", p, 0, 0)}};
}

/// A (active) emits 1 and stays with probability p_aa, else emits 0 and
/// moves to P; P emits 0 and stays with probability p_pp, else emits 1 and
/// moves to A.
inline ProcessSpec make_bursting(double p_aa, double p_pp) {
  detail::check_probability(p_aa, "p_aa");
  detail::check_probability(p_pp, "p_pp");
  return ProcessSpec{{detail::spec_state("A", p_aa, 1, 0), detail::spec_state("P", 1.0 - p_pp, 1, 0)}};
}

struct ThreeStateParams {
  double a_stay = 0.7;  // A: emit 1, stay; else emit 0 -> P
  double p_to_a = 0.5;  // P: emit 1 -> A; else emit 0 -> R
  double r_stay = 0.8;  // R: emit 0, stay; else emit 1 -> A
};

inline ProcessSpec make_three_state(const ThreeStateParams& p = {}) {
  detail::check_probability(p.a_stay, "a_stay");
  detail::check_probability(p.p_to_a, "p_to_a");
  detail::check_probability(p.r_stay, "r_stay");
  return ProcessSpec{{detail::spec_state("A", p.a_stay, 1, 0), detail::spec_state("P", p.p_to_a, 2, 0),
                      detail::spec_state("R", 1.0 - p.r_stay, 2, 0)}};
}

struct FourStateParams {
  double a_stay = 0.7;  // A: emit 1, stay; else emit 0 -> P
  double p_to_a = 0.5;  // P: emit 1 -> A; else emit 0 -> I
  double i_to_a = 0.5;  // I: emit 1 -> A; else emit 0 -> R
  double r_stay = 0.8;  // R: emit 0, stay; else emit 1 -> A
};

inline ProcessSpec make_four_state(const FourStateParams& p = {}) {
  detail::check_probability(p.a_stay, "a_stay");
  detail::check_probability(p.p_to_a, "p_to_a");
  detail::check_probability(p.i_to_a, "i_to_a");
  detail::check_probability(p.r_stay, "r_stay");
  return ProcessSpec{{detail::spec_state("A", p.a_stay, 1, 0), detail::spec_state("P", p.p_to_a, 2, 0),
                      detail::spec_state("I", p.i_to_a, 3, 0), detail::spec_state("R", 1.0 - p.r_stay, 3, 0)}};
}

/// Deterministic cycle through |pattern| states emitting the pattern.
inline ProcessSpec make_periodic(std::string_view pattern) {
  if (pattern.empty()) throw ArgumentError("periodic pattern must be non-empty");
  ProcessSpec spec;
  const int n = static_cast<int>(pattern.size());
  for (int k = 0; k < n; ++k) {
    const char c = pattern[static_cast<std::size_t>(k)];
    if (c != '0' && c != '1') throw ArgumentError("periodic pattern must be binary");
    const int nxt = (k + 1) % n;
    spec.states.push_back(detail::spec_state("T" + std::to_string(k), c == '1' ? 1.0 : 0.0, nxt, nxt));
  }
  return spec;
}

/// Parameters for the string-keyed factory used by the command line.
struct SpecParams {
  double p = 0.5;
  double p_aa = 0.9;
  double p_pp = 0.8;
  ThreeStateParams three;
  FourStateParams four;
  std::string pattern = "01";
};

inline ProcessSpec make_spec(std::string_view kind, const SpecParams& params = {}) {
  if (kind == "bernoulli") return make_bernoulli(params.p);
  if (kind == "bursting") return make_bursting(params.p_aa, params.p_pp);
  if (kind == "three-state" || kind == "three_state") return make_three_state(params.three);
  if (kind == "four-state" || kind == "four_state") return make_four_state(params.four);
  if (kind == "periodic") return make_periodic(params.pattern);
  throw ArgumentError("unknown process kind '" + std::string(kind) + "'");
}

/// Exact stationary distribution from the balance equations, restricted to
/// the first closed recurrent class (other states get probability 0).
inline std::vector<double> oracle_stationary(const ProcessSpec& spec) {
  spec.validate();
  const std::size_t n = spec.states.size();
  std::vector<std::vector<std::size_t>> adj(n);
  for (std::size_t s = 0; s < n; ++s)
    for (int b = 0; b < 2; ++b)
      if (spec.states[s].emit[b] > 0.0) adj[s].push_back(static_cast<std::size_t>(spec.states[s].next[b]));
  const auto classes = detail::recurrent_classes(adj);
  if (classes.empty()) throw ArgumentError("process spec has no recurrent component");
  const auto& cls = classes.front();
  const auto m = static_cast<Eigen::Index>(cls.size());
  std::vector<Eigen::Index> pos(n, -1);
  for (Eigen::Index i = 0; i < m; ++i) pos[cls[static_cast<std::size_t>(i)]] = i;

  // pi (T - I) = 0 with the last equation replaced by sum(pi) = 1.
  Eigen::MatrixXd A = -Eigen::MatrixXd::Identity(m, m);
  for (Eigen::Index i = 0; i < m; ++i) {
    const auto& st = spec.states[cls[static_cast<std::size_t>(i)]];
    for (int b = 0; b < 2; ++b)
      if (st.emit[b] > 0.0) A(pos[static_cast<std::size_t>(st.next[b])], i) += st.emit[b];
  }
  A.row(m - 1).setOnes();
  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(m);
  rhs(m - 1) = 1.0;
  const Eigen::VectorXd x = A.fullPivLu().solve(rhs);
  std::vector<double> pi(n, 0.0);
  for (Eigen::Index i = 0; i < m; ++i) pi[cls[static_cast<std::size_t>(i)]] = x(i);
  return pi;
}

inline double oracle_complexity(const ProcessSpec& spec) {
  const auto pi = oracle_stationary(spec);
  double c = 0.0;
  for (double p : pi)
    if (p > 0.0) c -= p * std::log2(p);
  return c;
}

/// sum_s pi(s) H(emit_s): exact for unifilar machines.
inline double oracle_entropy_rate(const ProcessSpec& spec) {
  const auto pi = oracle_stationary(spec);
  double h = 0.0;
  for (std::size_t s = 0; s < pi.size(); ++s)
    h += pi[s] * shannon_entropy({spec.states[s].emit[0], spec.states[s].emit[1]});
  return h;
}

/// Accuracy of the best predictor that knows the current state.
inline double oracle_optimal_accuracy(const ProcessSpec& spec) {
  const auto pi = oracle_stationary(spec);
  double a = 0.0;
  for (std::size_t s = 0; s < pi.size(); ++s) a += pi[s] * std::max(spec.states[s].emit[0], spec.states[s].emit[1]);
  return a;
}

/// Each day starts in a state drawn from the stationary distribution.
inline BinarySeries generate(const ProcessSpec& spec, std::size_t n_days, std::size_t bins_per_day,
                             std::uint64_t seed, std::int64_t bin_seconds = 600) {
  const auto pi = oracle_stationary(spec);
  if (n_days == 0 || bins_per_day == 0) throw ConfigError("n_days and bins_per_day must be positive");
  Rng rng(seed);
  Bits bits;
  bits.reserve(n_days * bins_per_day);
  for (std::size_t d = 0; d < n_days; ++d) {
    double u = rng.uniform();
    std::size_t s = 0;
    for (; s + 1 < pi.size(); ++s) {
      if (u < pi[s]) break;
      u -= pi[s];
    }
    while (pi[s] == 0.0) s = (s + 1) % pi.size();
    for (std::size_t i = 0; i < bins_per_day; ++i) {
      const auto& st = spec.states[s];
      const std::uint8_t b = rng.uniform() < st.emit[1] ? 1 : 0;
      bits.push_back(b);
      s = static_cast<std::size_t>(st.next[b]);
    }
  }
  return BinarySeries(std::move(bits), bin_seconds, bins_per_day, n_days);
}

/// Ground truth as a (suffix-free) causal state model, so predictions and
/// complexity can be computed on it directly.
inline CausalStateModel to_model(const ProcessSpec& spec) {
  spec.validate();
  CausalStateModel model;
  model.states = spec.states;
  model.finalize();
  return model;
}

inline nlohmann::json to_json(const ProcessSpec& spec) {
  nlohmann::json j;
  j["format"] = "process-spec";
  j["states"] = states_to_json(spec.states, false);
  return j;
}

inline ProcessSpec process_spec_from_json(const nlohmann::json& j) {
  if (j.value("format", "") != "process-spec") throw DataError("not a process-spec document");
  ProcessSpec spec{states_from_json(j.at("states"))};
  spec.validate();
  return spec;
}

}  // namespace pointpred
