#pragma once

// Echo state networks for one-step-ahead binary prediction: a fixed random
// logistic reservoir driven by a window of recent bits plus output feedback,
// with a linear readout fit on logit targets by pseudo-inverse.

#include <Eigen/Dense>
#include <Eigen/SVD>

#include <cmath>
#include <cstdint>
#include <istream>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "pointpred/encoding.hpp"
#include "pointpred/errors.hpp"
#include "pointpred/random.hpp"

namespace pointpred {

/// Feedback at prediction time: the clipped observed previous bit (the same
/// signal the readout was trained with) or the network's own previous output.
enum class Feedback { kObserved, kFreeRunning };

inline std::string_view to_string(Feedback f) { return f == Feedback::kObserved ? "observed" : "free-running"; }

inline Feedback feedback_from_string(std::string_view s) {
  if (s == "observed") return Feedback::kObserved;
  if (s == "free-running" || s == "free") return Feedback::kFreeRunning;
  throw ConfigError("unknown feedback mode '" + std::string(s) + "'");
}

struct EsnConfig {
  std::size_t n_inputs = 10;
  std::size_t n_reservoir = 128;
  double spectral_radius_target = 0.99;
  double weight_lo = 0.0;
  double weight_hi = 1.0;
  double target_clip = 0.01;  // logit targets use clip(X, d, 1 - d)
  std::size_t washout = 20;   // leading steps of each day left out of the fit
  double svd_cutoff = 1e-10;  // relative singular value cutoff for the pseudo-inverse
  Feedback feedback = Feedback::kObserved;
  std::uint64_t seed = 0;

  void validate() const {
    if (n_inputs == 0 || n_reservoir == 0) throw ConfigError("ESN needs at least one input and one reservoir node");
    if (!(spectral_radius_target > 0.0 && spectral_radius_target < 1.0))
      throw ConfigError("spectral radius target must lie in (0, 1)");
    if (!(weight_lo < weight_hi)) throw ConfigError("weight interval must satisfy lo < hi");
    if (!(target_clip > 0.0 && target_clip < 0.5)) throw ConfigError("target clip must lie in (0, 0.5)");
    if (!(svd_cutoff >= 0.0)) throw ConfigError("svd cutoff must be non-negative");
  }
};

inline double logistic(double v) { return 1.0 / (1.0 + std::exp(-v)); }
inline double logit(double p) { return std::log(p / (1.0 - p)); }

inline constexpr double kSpectralTolerance = 1e-10;
inline constexpr std::size_t kSpectralMaxIterations = 10000;

/// Largest eigenvalue magnitude by power iteration on the norm ratio.
/// Converges when the dominant eigenvalue is real and simple in modulus
/// (always the case for non-negative irreducible matrices); otherwise throws.
inline double spectral_radius(const Eigen::MatrixXd& M) {
  if (M.rows() != M.cols()) throw ArgumentError("spectral radius needs a square matrix");
  const Eigen::Index n = M.rows();
  if (n == 0) return 0.0;
  Eigen::VectorXd v(n);
  for (Eigen::Index i = 0; i < n; ++i) v(i) = 1.0 + 0.01 * std::sin(static_cast<double>(i + 1));
  v.normalize();
  double lambda = 0.0;
  for (std::size_t it = 0; it < kSpectralMaxIterations; ++it) {
    Eigen::VectorXd w = M * v;
    const double norm = w.norm();
    if (norm == 0.0) return 0.0;
    if (std::abs(norm - lambda) <= kSpectralTolerance * std::max(1.0, norm)) return norm;
    lambda = norm;
    v = w / norm;
  }
  throw NumericalError("spectral radius power iteration did not converge in " +
                       std::to_string(kSpectralMaxIterations) + " iterations (last estimate " +
                       std::to_string(lambda) + ")");
}

/// Dense eigensolver route, used when power iteration cannot settle
/// (e.g. signed weights with a complex dominant pair).
inline double spectral_radius_dense(const Eigen::MatrixXd& M) {
  if (M.rows() != M.cols()) throw ArgumentError("spectral radius needs a square matrix");
  if (M.rows() == 0) return 0.0;
  Eigen::EigenSolver<Eigen::MatrixXd> es(M, false);
  if (es.info() != Eigen::Success) throw NumericalError("dense eigensolver failed");
  return es.eigenvalues().cwiseAbs().maxCoeff();
}

class EchoStateModel {
 public:
  EsnConfig config;
  Eigen::MatrixXd W;       // reservoir, n_reservoir x n_reservoir
  Eigen::MatrixXd W_in;    // n_reservoir x n_inputs
  Eigen::VectorXd W_fb;    // n_reservoir
  std::optional<Eigen::RowVectorXd> W_out;  // 1 x (n_inputs + n_reservoir) once trained
  Eigen::VectorXd y;       // running reservoir state
  double z_prev = 0.0;

  EchoStateModel() = default;

  /// Wraps explicit matrices (used for hand-checked examples and loading).
  EchoStateModel(EsnConfig cfg, Eigen::MatrixXd w, Eigen::MatrixXd w_in, Eigen::VectorXd w_fb)
      : config(cfg), W(std::move(w)), W_in(std::move(w_in)), W_fb(std::move(w_fb)) {
    const auto n = static_cast<Eigen::Index>(config.n_reservoir);
    if (W.rows() != n || W.cols() != n || W_in.rows() != n ||
        W_in.cols() != static_cast<Eigen::Index>(config.n_inputs) || W_fb.size() != n)
      throw ArgumentError("ESN matrix dimensions do not match the configuration");
    reset();
  }

  bool trained() const { return W_out.has_value(); }

  void reset() {
    y = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(config.n_reservoir));
    z_prev = 0.0;
  }

  /// y <- logistic(W_in x + W y + W_fb z_prev)
  const Eigen::VectorXd& step(const Eigen::VectorXd& x, double feedback) {
    if (x.size() != static_cast<Eigen::Index>(config.n_inputs))
      throw ArgumentError("input has " + std::to_string(x.size()) + " entries, expected " +
                          std::to_string(config.n_inputs));
    Eigen::VectorXd pre = W_in * x + W * y + W_fb * feedback;
    y = pre.unaryExpr([](double v) { return logistic(v); });
    z_prev = feedback;
    return y;
  }

  /// logistic(W_out [x | y]) for the current reservoir state.
  double output(const Eigen::VectorXd& x) const {
    if (!W_out) throw StateError("ESN readout has not been trained");
    const auto ni = static_cast<Eigen::Index>(config.n_inputs);
    const double a = W_out->head(ni).dot(x) + W_out->tail(W_out->size() - ni).dot(y);
    return logistic(a);
  }
};

/// The n bits before position i of the series, oldest first. The window
/// slides over the whole series (only the reservoir restarts each day); bins
/// before the first one read as 0.
inline Eigen::VectorXd input_window(std::span<const std::uint8_t> bits, std::size_t i, std::size_t n) {
  Eigen::VectorXd x = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(n));
  for (std::size_t k = 0; k < n; ++k) {
    if (i + k < n) continue;
    x(static_cast<Eigen::Index>(k)) = bits[i + k - n];
  }
  return x;
}

/// Samples W, W_in, W_fb uniformly from the weight interval and rescales W to
/// the target spectral radius. A degenerate draw (rho = 0) is retried on the
/// next seed substream, up to five attempts.
inline EchoStateModel build(const EsnConfig& config) {
  config.validate();
  const auto n = static_cast<Eigen::Index>(config.n_reservoir);
  const auto ni = static_cast<Eigen::Index>(config.n_inputs);
  for (std::uint64_t attempt = 0; attempt < 5; ++attempt) {
    Rng rng(derive_seed(config.seed, attempt));
    auto draw = [&] { return rng.uniform(config.weight_lo, config.weight_hi); };
    Eigen::MatrixXd W(n, n), W_in(n, ni);
    Eigen::VectorXd W_fb(n);
    for (Eigen::Index i = 0; i < n; ++i)
      for (Eigen::Index j = 0; j < n; ++j) W(i, j) = draw();
    for (Eigen::Index i = 0; i < n; ++i)
      for (Eigen::Index j = 0; j < ni; ++j) W_in(i, j) = draw();
    for (Eigen::Index i = 0; i < n; ++i) W_fb(i) = draw();

    double rho = 0.0;
    try {
      rho = spectral_radius(W);
    } catch (const NumericalError&) {
      rho = spectral_radius_dense(W);
    }
    if (rho == 0.0) continue;
    W *= config.spectral_radius_target / rho;
    return EchoStateModel(config, std::move(W), std::move(W_in), std::move(W_fb));
  }
  throw NumericalError("reservoir draws had zero spectral radius in 5 attempts");
}

/// Regression problem for the readout: rows [x_t | y_t] and logit targets,
/// collected under teacher forcing with the washout removed from each day.
struct ReadoutProblem {
  Eigen::MatrixXd S;
  Eigen::VectorXd D;
};

inline ReadoutProblem readout_problem(const EchoStateModel& model, const BinarySeries& series) {
  const auto& cfg = model.config;
  if (series.size() < cfg.washout + cfg.n_inputs + 1)
    throw DataError("series of " + std::to_string(series.size()) + " bins is too short for washout " +
                    std::to_string(cfg.washout) + " and " + std::to_string(cfg.n_inputs) + " inputs");
  const std::size_t per_day = series.bins_per_day() > cfg.washout ? series.bins_per_day() - cfg.washout : 0;
  const std::size_t rows = per_day * series.n_days();
  if (rows == 0) throw DataError("no regression rows remain after the per-day washout");
  const auto ni = static_cast<Eigen::Index>(cfg.n_inputs);
  const auto nr = static_cast<Eigen::Index>(cfg.n_reservoir);
  ReadoutProblem p{Eigen::MatrixXd(static_cast<Eigen::Index>(rows), ni + nr),
                   Eigen::VectorXd(static_cast<Eigen::Index>(rows))};
  const double lo = cfg.target_clip, hi = 1.0 - cfg.target_clip;
  EchoStateModel run = model;
  Eigen::Index r = 0;
  const std::span<const std::uint8_t> bits(series.bits());
  for (std::size_t d = 0; d < series.n_days(); ++d) {
    auto day = series.day(d);
    run.reset();
    double feedback = 0.0;
    for (std::size_t t = 0; t < day.size(); ++t) {
      const Eigen::VectorXd x = input_window(bits, d * series.bins_per_day() + t, cfg.n_inputs);
      run.step(x, feedback);
      const double target = day[t] ? hi : lo;
      if (t >= cfg.washout) {
        p.S.row(r).head(ni) = x.transpose();
        p.S.row(r).tail(nr) = run.y.transpose();
        p.D(r) = logit(target);
        ++r;
      }
      feedback = target;
    }
  }
  return p;
}

/// Minimum-norm least-squares readout W_out = (S^+ D)^T.
inline EchoStateModel train(const EchoStateModel& model, const BinarySeries& series) {
  const auto problem = readout_problem(model, series);
  Eigen::BDCSVD<Eigen::MatrixXd> svd(problem.S, Eigen::ComputeThinU | Eigen::ComputeThinV);
  svd.setThreshold(model.config.svd_cutoff);
  const Eigen::VectorXd w = svd.solve(problem.D);
  if (!w.allFinite()) throw NumericalError("ESN readout solve produced non-finite weights");
  EchoStateModel trained = model;
  trained.W_out = w.transpose();
  trained.reset();
  return trained;
}

inline EchoStateModel train_esn(const EsnConfig& config, const BinarySeries& series) {
  return train(build(config), series);
}

inline double readout_mse(const ReadoutProblem& p, const Eigen::RowVectorXd& w_out) {
  return (p.D - p.S * w_out.transpose()).squaredNorm() / static_cast<double>(p.D.size());
}

struct EsnPrediction {
  Bits bits;
  std::vector<double> probabilities;  // z_t in (0, 1)
};

/// Runs the trained network over every bin. The reservoir restarts at each
/// day. The model itself is not modified.
inline EsnPrediction predict_sequence(const EchoStateModel& model, const BinarySeries& series, Feedback mode) {
  if (!model.trained()) throw StateError("ESN readout has not been trained");
  const auto& cfg = model.config;
  EsnPrediction out;
  out.bits.reserve(series.size());
  out.probabilities.reserve(series.size());
  EchoStateModel run = model;
  const std::span<const std::uint8_t> bits(series.bits());
  for (std::size_t d = 0; d < series.n_days(); ++d) {
    auto day = series.day(d);
    run.reset();
    double feedback = 0.0;
    for (std::size_t t = 0; t < day.size(); ++t) {
      const Eigen::VectorXd x = input_window(bits, d * series.bins_per_day() + t, cfg.n_inputs);
      run.step(x, feedback);
      const double z = run.output(x);
      out.probabilities.push_back(z);
      out.bits.push_back(z > 0.5 ? 1 : 0);
      feedback = mode == Feedback::kFreeRunning ? z : (day[t] ? 1.0 - cfg.target_clip : cfg.target_clip);
    }
  }
  return out;
}

inline EsnPrediction predict_sequence(const EchoStateModel& model, const BinarySeries& series) {
  return predict_sequence(model, series, model.config.feedback);
}

namespace detail {

inline nlohmann::json matrix_to_json(const Eigen::MatrixXd& m) {
  std::vector<double> flat;
  flat.reserve(static_cast<std::size_t>(m.size()));
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index j = 0; j < m.cols(); ++j) flat.push_back(m(i, j));
  return {{"rows", m.rows()}, {"cols", m.cols()}, {"data", flat}};
}

inline Eigen::MatrixXd matrix_from_json(const nlohmann::json& j) {
  const auto rows = j.at("rows").get<Eigen::Index>();
  const auto cols = j.at("cols").get<Eigen::Index>();
  const auto& data = j.at("data");
  if (static_cast<Eigen::Index>(data.size()) != rows * cols) throw DataError("matrix data size mismatch");
  Eigen::MatrixXd m(rows, cols);
  std::size_t k = 0;
  for (Eigen::Index i = 0; i < rows; ++i)
    for (Eigen::Index j2 = 0; j2 < cols; ++j2) m(i, j2) = data[k++].get<double>();
  return m;
}

}  // namespace detail

inline nlohmann::json to_json(const EchoStateModel& model) {
  const auto& c = model.config;
  nlohmann::json j;
  j["format"] = "echo-state-model";
  j["config"] = {{"n_inputs", c.n_inputs},         {"n_reservoir", c.n_reservoir},
                 {"spectral_radius_target", c.spectral_radius_target},
                 {"weight_interval", {c.weight_lo, c.weight_hi}},
                 {"target_clip", c.target_clip},   {"washout", c.washout},
                 {"svd_cutoff", c.svd_cutoff},     {"feedback", std::string(to_string(c.feedback))},
                 {"seed", c.seed}};
  j["W"] = detail::matrix_to_json(model.W);
  j["W_in"] = detail::matrix_to_json(model.W_in);
  j["W_fb"] = detail::matrix_to_json(model.W_fb);
  j["W_out"] = model.W_out ? detail::matrix_to_json(*model.W_out) : nlohmann::json(nullptr);
  return j;
}

inline EchoStateModel echo_state_model_from_json(const nlohmann::json& j) {
  if (j.value("format", "") != "echo-state-model") throw DataError("not an echo-state-model document");
  const auto& jc = j.at("config");
  EsnConfig c;
  c.n_inputs = jc.at("n_inputs").get<std::size_t>();
  c.n_reservoir = jc.at("n_reservoir").get<std::size_t>();
  c.spectral_radius_target = jc.at("spectral_radius_target").get<double>();
  c.weight_lo = jc.at("weight_interval").at(0).get<double>();
  c.weight_hi = jc.at("weight_interval").at(1).get<double>();
  c.target_clip = jc.at("target_clip").get<double>();
  c.washout = jc.at("washout").get<std::size_t>();
  c.svd_cutoff = jc.at("svd_cutoff").get<double>();
  c.feedback = feedback_from_string(jc.value("feedback", std::string("observed")));
  c.seed = jc.at("seed").get<std::uint64_t>();
  c.validate();
  const Eigen::MatrixXd fb = detail::matrix_from_json(j.at("W_fb"));
  EchoStateModel model(c, detail::matrix_from_json(j.at("W")), detail::matrix_from_json(j.at("W_in")),
                       Eigen::VectorXd(Eigen::Map<const Eigen::VectorXd>(fb.data(), fb.size())));
  if (!j.at("W_out").is_null()) {
    const Eigen::MatrixXd w = detail::matrix_from_json(j.at("W_out"));
    if (w.rows() != 1 || w.cols() != static_cast<Eigen::Index>(c.n_inputs + c.n_reservoir))
      throw DataError("W_out has the wrong shape");
    model.W_out = Eigen::RowVectorXd(w.row(0));
  }
  return model;
}

inline void save_model(std::ostream& out, const EchoStateModel& model) { out << to_json(model).dump() << '\n'; }

inline EchoStateModel load_echo_state_model(std::istream& in) {
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("malformed model file: ") + e.what());
  }
  return echo_state_model_from_json(j);
}

}  // namespace pointpred
