#pragma once

// Command-line front end. run_cli parses arguments and dispatches; it is a
// header so the tests can drive it in-process.

#include <CLI11.hpp>

#include <algorithm>
#include <cstdint>
#include <fstream>
#include <iostream>
#include <limits>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "pointpred/pointpred.hpp"

namespace pointpred::cli {

enum ExitCode : int { kOk = 0, kUsage = 1, kData = 2, kNumerical = 3 };

/// Seconds since midnight from "HH:MM", "HH:MM:SS" or a plain integer.
inline std::int64_t parse_time_of_day(const std::string& text) {
  if (text.find(':') == std::string::npos) {
    std::size_t used = 0;
    long long v = 0;
    try {
      v = std::stoll(text, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used != text.size() || text.empty()) throw ConfigError("bad time of day '" + text + "'");
    return v;
  }
  int h = 0, m = 0, s = 0;
  char tail = 0;
  const int n = std::sscanf(text.c_str(), "%d:%d:%d%c", &h, &m, &s, &tail);
  if (n < 2 || n > 3 || h < 0 || h > 24 || m < 0 || m > 59 || s < 0 || s > 59)
    throw ConfigError("bad time of day '" + text + "'");
  return h * 3600LL + m * 60LL + s;
}

/// Either a comma-separated list of proportions or a single step size.
inline std::vector<double> parse_q_grid(const std::string& text) {
  auto number = [&](const std::string& s) {
    std::size_t used = 0;
    double v = 0.0;
    try {
      v = std::stod(s, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used == 0 || used != s.size()) throw ConfigError("bad q grid entry '" + s + "'");
    return v;
  };
  if (text.find(',') == std::string::npos) return q_grid(number(text));
  std::vector<double> grid;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    const double q = number(item);
    if (!(q >= 0.0 && q <= 1.0)) throw ConfigError("q grid entries must lie in [0, 1]");
    grid.push_back(q);
  }
  return grid;
}

struct GeometryOptions {
  std::int64_t dt = 600;
  std::string window_start = "07:00";
  std::string window_end = "23:00";

  DayWindow window() const {
    DayWindow w{parse_time_of_day(window_start), parse_time_of_day(window_end)};
    w.validate(dt);
    return w;
  }
};

struct ModelOptions {
  double alpha = 0.001;
  std::string test = "chi-squared";
  std::optional<std::size_t> L;
  std::size_t folds = 9;
  std::size_t reservoir_size = 128;
  std::size_t inputs = 10;
  double spectral_radius = 0.99;
  std::size_t washout = 20;
  std::string weight_interval = "0,1";
  std::string esn_feedback = "observed";

  CssrConfig cssr() const {
    CssrConfig c;
    c.alpha = alpha;
    c.test = homogeneity_test_from_string(test);
    if (L) c.history_length = *L;
    c.validate();
    return c;
  }

  EsnConfig esn() const {
    EsnConfig c;
    c.n_reservoir = reservoir_size;
    c.n_inputs = inputs;
    c.spectral_radius_target = spectral_radius;
    c.washout = washout;
    c.feedback = feedback_from_string(esn_feedback);
    const auto comma = weight_interval.find(',');
    if (comma == std::string::npos) throw ConfigError("weight interval must be 'lo,hi'");
    try {
      c.weight_lo = std::stod(weight_interval.substr(0, comma));
      c.weight_hi = std::stod(weight_interval.substr(comma + 1));
    } catch (const std::exception&) {
      throw ConfigError("weight interval must be 'lo,hi'");
    }
    c.validate();
    return c;
  }
};

struct Io {
  std::ostream& out;
  std::ostream& err;
};

namespace detail {

inline std::ifstream open_input(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open '" + path + "'");
  return in;
}

// Writes through `body` to the file at `path`, or to io.out when empty.
template <class Body>
void with_output(const std::string& path, Io& io, Body&& body) {
  if (path.empty() || path == "-") {
    body(io.out);
    return;
  }
  std::ofstream f(path);
  if (!f) throw DataError("cannot write '" + path + "'");
  body(f);
  if (!f) throw DataError("write to '" + path + "' failed");
}

inline std::vector<SeriesRecord> load_series(const std::string& path) {
  auto in = open_input(path);
  auto records = read_series_file(in);
  if (records.empty()) throw DataError("'" + path + "' holds no series");
  return records;
}

inline const SeriesRecord& pick(const std::vector<SeriesRecord>& records, const std::string& id) {
  if (id.empty()) {
    if (records.size() != 1) throw ConfigError("file holds several series; choose one with --id");
    return records.front();
  }
  for (const auto& r : records)
    if (r.id == id) return r;
  throw DataError("no series with id '" + id + "'");
}

// Largest fold count <= cap that divides n_days (at least 2 when possible).
inline std::size_t folds_for(std::size_t n_days, std::size_t cap) {
  for (std::size_t k = std::min(cap, n_days); k >= 2; --k)
    if (n_days % k == 0) return k;
  throw ConfigError("cannot split " + std::to_string(n_days) + " days into cross-validation folds");
}

inline std::string zero_padded(std::size_t i, std::size_t n) {
  const std::size_t width = std::max<std::size_t>(4, std::to_string(n).size());
  std::string s = std::to_string(i);
  return std::string(width - std::min(width, s.size()), '0') + s;
}

}  // namespace detail

// encode ---------------------------------------------------------------------

struct EncodeOptions {
  std::string input;
  std::string out;
  GeometryOptions geometry;
  std::optional<std::int64_t> t0;
  std::optional<std::size_t> n_days;
};

inline int cmd_encode(const EncodeOptions& o, Io io) {
  const DayWindow window = o.geometry.window();
  auto in = detail::open_input(o.input);
  const EventParseResult parsed = parse_events(in);
  for (const auto& w : parsed.warnings) io.err << "warning: " << w << '\n';
  std::int64_t first = std::numeric_limits<std::int64_t>::max(), last = std::numeric_limits<std::int64_t>::min();
  for (const auto& u : parsed.users) {
    if (u.timestamps.empty()) continue;
    first = std::min(first, u.timestamps.front());
    last = std::max(last, u.timestamps.back());
  }
  if (parsed.users.empty() || first > last) throw DataError("no valid users in '" + o.input + "'");
  const std::int64_t t0 = o.t0 ? *o.t0 : first - first % kSecondsPerDay;
  std::size_t n_days = 0;
  if (o.n_days) n_days = *o.n_days;
  else if (last >= t0) n_days = static_cast<std::size_t>((last - t0) / kSecondsPerDay + 1);
  if (n_days == 0) throw ConfigError("no days to encode after t0");

  std::vector<SeriesRecord> records;
  for (const auto& u : parsed.users) records.push_back({u.user_id, binarize(u, t0, n_days, window, o.geometry.dt)});
  detail::with_output(o.out, io, [&](std::ostream& os) { write_series_file(os, records); });
  char buf[64];
  for (const auto& r : records) {
    std::snprintf(buf, sizeof buf, "%.6f", tweet_rate(r.series));
    io.err << r.id << "\ttweet_rate=" << buf << '\n';
  }
  return kOk;
}

// evaluate -------------------------------------------------------------------

struct EvaluateOptions {
  std::string input;
  std::string out;
  std::size_t train_days = 45;
  ModelOptions model;
  std::size_t entropy_block_length = 4;
  std::uint64_t seed = 0;
  std::size_t jobs = 1;
};

inline int cmd_evaluate(const EvaluateOptions& o, Io io) {
  EvaluationConfig config;
  config.cssr = o.model.cssr();
  config.fixed_L = o.model.L;
  config.n_folds = o.model.folds;
  config.esn = o.model.esn();
  config.entropy_block_length = o.entropy_block_length;
  config.validate();
  const auto records = detail::load_series(o.input);
  const std::size_t n_days = records.front().series.n_days();
  if (o.train_days == 0 || o.train_days >= n_days)
    throw ConfigError("--train-days must lie in [1, " + std::to_string(n_days - 1) + "] for " +
                      std::to_string(n_days) + "-day series");
  if (!config.fixed_L && o.train_days % config.n_folds != 0)
    throw ConfigError(std::to_string(o.train_days) + " training days do not divide into " +
                      std::to_string(config.n_folds) + " folds");

  QuartileSummary summary;
  const auto rows = evaluate_batch(records, o.train_days, config, o.seed, o.jobs, &summary);
  detail::with_output(o.out, io, [&](std::ostream& os) { write_report_csv(os, rows); });
  for (const auto& r : rows)
    for (const auto& e : r.errors) io.err << "warning: " << r.series_id << ": " << e << '\n';
  if (rows.size() >= 4)
    for (std::size_t k = 0; k < 4; ++k)
      io.err << "quartile " << k + 1 << ": rows=" << summary.rows[k]
             << " mean(csm-esn)=" << pointpred::detail::format_value(summary.mean_difference[k]) << '\n';
  return kOk;
}

// bitflip --------------------------------------------------------------------

struct BitflipOptions {
  std::string input;
  std::string out;
  std::string q_grid = "0.1";
  ModelOptions model;
  std::uint64_t seed = 0;
  std::size_t jobs = 1;
};

inline int cmd_bitflip(const BitflipOptions& o, Io io) {
  const auto grid = parse_q_grid(o.q_grid);
  if (grid.empty()) throw ConfigError("q grid is empty");
  const CssrConfig base = o.model.cssr();
  const EsnConfig esn_base = o.model.esn();
  const auto records = detail::load_series(o.input);
  std::vector<std::vector<BitflipPoint>> tables(records.size());
  parallel_for(records.size(), o.jobs, [&](std::size_t i) {
    const auto& rec = records[i];
    const std::uint64_t series_seed = derive_seed(o.seed, hash_id(rec.id));
    CssrConfig c = base;
    if (!o.model.L) c.history_length = cross_validate_history(rec.series, detail::folds_for(rec.series.n_days(), o.model.folds), base);
    EsnConfig e = esn_base;
    e.seed = derive_seed(series_seed, 0);
    tables[i] = bitflip_experiment(rec.series, grid, c, e, derive_seed(series_seed, 1));
  });
  const auto summary = summarize_bitflip(tables);
  detail::with_output(o.out, io, [&](std::ostream& os) { write_bitflip_csv(os, summary); });
  return kOk;
}

// synth ----------------------------------------------------------------------

struct SynthOptions {
  std::string kind = "bursting";
  std::string out;
  std::string spec_out;
  std::size_t n_users = 1;
  std::size_t n_days = 49;
  GeometryOptions geometry;
  SpecParams params;
  std::uint64_t seed = 0;
};

inline int cmd_synth(const SynthOptions& o, Io io) {
  const DayWindow window = o.geometry.window();
  const auto bins_per_day = static_cast<std::size_t>(window.length() / o.geometry.dt);
  if (o.n_users == 0 || o.n_days == 0) throw ConfigError("--n-users and --n-days must be positive");
  const ProcessSpec spec = make_spec(o.kind, o.params);
  std::vector<SeriesRecord> records;
  for (std::size_t i = 1; i <= o.n_users; ++i) {
    const std::string id = "user" + detail::zero_padded(i, o.n_users);
    records.push_back({id, generate(spec, o.n_days, bins_per_day, derive_seed(o.seed, i), o.geometry.dt)});
  }
  detail::with_output(o.out, io, [&](std::ostream& os) { write_series_file(os, records); });
  if (!o.spec_out.empty())
    detail::with_output(o.spec_out, io, [&](std::ostream& os) { os << to_json(spec).dump(2) << '\n'; });
  char buf[160];
  std::snprintf(buf, sizeof buf, "oracle: complexity=%.6f entropy_rate=%.6f optimal_accuracy=%.6f\n",
                oracle_complexity(spec), oracle_entropy_rate(spec), oracle_optimal_accuracy(spec));
  io.err << buf;
  return kOk;
}

// raster ---------------------------------------------------------------------

struct RasterOptions {
  std::string input;
  std::string out;
  std::string id;
  std::string format = "txt";
};

inline int cmd_raster(const RasterOptions& o, Io io) {
  if (o.format != "txt" && o.format != "pgm") throw ConfigError("--format must be txt or pgm");
  const auto records = detail::load_series(o.input);
  std::vector<const SeriesRecord*> chosen;
  if (!o.id.empty() || o.format == "pgm") chosen.push_back(&detail::pick(records, o.id));
  else
    for (const auto& r : records) chosen.push_back(&r);
  detail::with_output(o.out, io, [&](std::ostream& os) {
    for (const auto* r : chosen) {
      if (o.format == "pgm") {
        write_rastergram_pgm(os, r->series);
        continue;
      }
      if (chosen.size() > 1) os << "# " << r->id << '\n';
      write_rastergram(os, r->series);
    }
  });
  return kOk;
}

// cv -------------------------------------------------------------------------

struct CvOptions {
  std::string input;
  std::string out;
  std::size_t train_days = 0;  // 0: use every day
  ModelOptions model;
  std::size_t jobs = 1;
};

inline int cmd_cv(const CvOptions& o, Io io) {
  const CssrConfig base = o.model.cssr();
  const auto records = detail::load_series(o.input);
  std::vector<CrossValidation> results(records.size());
  parallel_for(records.size(), o.jobs, [&](std::size_t i) {
    const auto& s = records[i].series;
    const BinarySeries train = o.train_days == 0 ? s : split_train_test(s, o.train_days).first;
    results[i] = cross_validate(train, o.model.folds, base);
  });
  detail::with_output(o.out, io, [&](std::ostream& os) {
    os << "series_id,L,mean_accuracy,selected\n";
    for (std::size_t i = 0; i < records.size(); ++i) {
      const auto& cv = results[i];
      for (std::size_t L = 0; L < cv.mean_accuracy.size(); ++L)
        os << records[i].id << ',' << L << ',' << pointpred::detail::format_value(cv.mean_accuracy[L]) << ','
           << (L == cv.selected_L ? 1 : 0) << '\n';
    }
  });
  return kOk;
}

// infer / entropy ------------------------------------------------------------

struct InferOptions {
  std::string input;
  std::string out;
  std::string id;
  ModelOptions model;
};

inline int cmd_infer(const InferOptions& o, Io io) {
  CssrConfig c = o.model.cssr();
  const auto records = detail::load_series(o.input);
  const auto& rec = detail::pick(records, o.id);
  if (!o.model.L) c.history_length = cross_validate_history(rec.series, detail::folds_for(rec.series.n_days(), o.model.folds), c);
  const CausalStateModel model = infer(rec.series, c);
  detail::with_output(o.out, io, [&](std::ostream& os) { save_model(os, model); });
  char buf[96];
  std::snprintf(buf, sizeof buf, "L=%zu states=%zu complexity=%.6f\n", model.history_length, model.states.size(),
                statistical_complexity(model));
  io.err << buf;
  return kOk;
}

struct EntropyOptions {
  std::string input;
  std::string out;
  std::string id;
  std::size_t L_max = 10;
};

inline int cmd_entropy(const EntropyOptions& o, Io io) {
  const auto records = detail::load_series(o.input);
  const auto& rec = detail::pick(records, o.id);
  const EntropyEstimate est = entropy_rate(rec.series, o.L_max);
  detail::with_output(o.out, io, [&](std::ostream& os) { write_block_entropy_csv(os, est); });
  if (est.undersampled) io.err << "warning: block length " << est.L_used << " is undersampled\n";
  if (!est.plateau) io.err << "warning: block entropies have not reached a plateau\n";
  return kOk;
}

// dispatch -------------------------------------------------------------------

namespace detail {

inline void add_geometry(CLI::App* app, GeometryOptions& g) {
  app->add_option("--dt", g.dt, "bin width in seconds")->capture_default_str();
  app->add_option("--window-start", g.window_start, "daily window start (HH:MM or seconds)")->capture_default_str();
  app->add_option("--window-end", g.window_end, "daily window end (HH:MM or seconds)")->capture_default_str();
}

inline void add_cssr(CLI::App* app, ModelOptions& m) {
  app->add_option("--alpha", m.alpha, "significance level of the splitting test")->capture_default_str();
  app->add_option("--test", m.test, "homogeneity test: chi-squared or ks")->capture_default_str();
  app->add_option("--L", m.L, "fixed history length (default: cross-validated)");
  app->add_option("--folds", m.folds, "cross-validation folds")->capture_default_str();
}

inline void add_esn(CLI::App* app, ModelOptions& m) {
  app->add_option("--reservoir-size", m.reservoir_size, "reservoir nodes")->capture_default_str();
  app->add_option("--inputs", m.inputs, "input window length")->capture_default_str();
  app->add_option("--spectral-radius", m.spectral_radius, "reservoir spectral radius")->capture_default_str();
  app->add_option("--washout", m.washout, "steps per day left out of the readout fit")->capture_default_str();
  app->add_option("--weight-interval", m.weight_interval, "reservoir weight interval lo,hi")->capture_default_str();
  app->add_option("--esn-feedback", m.esn_feedback, "prediction-time feedback: observed or free-running")
      ->capture_default_str();
}

inline int exit_for_exception(std::exception_ptr ep, std::ostream& err) {
  try {
    std::rethrow_exception(ep);
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << '\n';
    return kUsage;
  } catch (const std::invalid_argument& e) {
    err << "error: " << e.what() << '\n';
    return kUsage;
  } catch (const DataError& e) {
    err << "error: " << e.what() << '\n';
    return kData;
  } catch (const NumericalError& e) {
    err << "error: " << e.what() << '\n';
    return kNumerical;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kUsage;
  }
}

}  // namespace detail

inline int run_cli(const std::vector<std::string>& args, std::ostream& out = std::cout,
                   std::ostream& err = std::cerr) {
  CLI::App app{"Causal state and echo state prediction of binary point processes"};
  app.require_subcommand(1);

  EncodeOptions enc;
  auto* c_enc = app.add_subcommand("encode", "bin an events file into a series file");
  c_enc->add_option("events", enc.input, "events file (CSV user_id,timestamp or JSON lines)")->required();
  c_enc->add_option("--out", enc.out, "series file (default stdout)");
  detail::add_geometry(c_enc, enc.geometry);
  c_enc->add_option("--t0", enc.t0, "epoch second of day 0's midnight (default: first event's day)");
  c_enc->add_option("--n-days", enc.n_days, "days to encode (default: through the last event)");

  EvaluateOptions ev;
  auto* c_ev = app.add_subcommand("evaluate", "baseline, causal state model and ESN per series");
  c_ev->add_option("series", ev.input, "series file")->required();
  c_ev->add_option("--out", ev.out, "report CSV (default stdout)");
  c_ev->add_option("--train-days", ev.train_days, "leading days used for training")->capture_default_str();
  detail::add_cssr(c_ev, ev.model);
  detail::add_esn(c_ev, ev.model);
  c_ev->add_option("--entropy-L", ev.entropy_block_length, "block length for h_train/h_test")->capture_default_str();
  c_ev->add_option("--seed", ev.seed, "master seed")->capture_default_str();
  c_ev->add_option("--jobs", ev.jobs, "worker threads")->capture_default_str();

  BitflipOptions bf;
  auto* c_bf = app.add_subcommand("bitflip", "accuracy under bit-flip corruption");
  c_bf->add_option("series", bf.input, "series file")->required();
  c_bf->add_option("--out", bf.out, "bit-flip CSV (default stdout)");
  c_bf->add_option("--q-grid", bf.q_grid, "step size or comma-separated proportions")->capture_default_str();
  detail::add_cssr(c_bf, bf.model);
  detail::add_esn(c_bf, bf.model);
  c_bf->add_option("--seed", bf.seed, "master seed")->capture_default_str();
  c_bf->add_option("--jobs", bf.jobs, "worker threads")->capture_default_str();

  SynthOptions sy;
  auto* c_sy = app.add_subcommand("synth", "generate a synthetic series corpus");
  c_sy->add_option("--kind", sy.kind, "bernoulli, bursting, three-state, four-state or periodic")->capture_default_str();
  c_sy->add_option("--out", sy.out, "series file (default stdout)");
  c_sy->add_option("--spec-out", sy.spec_out, "write the generating machine as JSON");
  c_sy->add_option("--n-users", sy.n_users, "number of series")->capture_default_str();
  c_sy->add_option("--n-days", sy.n_days, "days per series")->capture_default_str();
  detail::add_geometry(c_sy, sy.geometry);
  c_sy->add_option("--p", sy.params.p, "Bernoulli rate")->capture_default_str();
  c_sy->add_option("--p-aa", sy.params.p_aa, "bursting: active stay probability")->capture_default_str();
  c_sy->add_option("--p-pp", sy.params.p_pp, "bursting: passive stay probability")->capture_default_str();
  c_sy->add_option("--pattern", sy.params.pattern, "periodic pattern")->capture_default_str();
  c_sy->add_option("--seed", sy.seed, "master seed")->capture_default_str();

  RasterOptions ra;
  auto* c_ra = app.add_subcommand("raster", "day-by-bin rastergram");
  c_ra->add_option("series", ra.input, "series file")->required();
  c_ra->add_option("--out", ra.out, "output (default stdout)");
  c_ra->add_option("--id", ra.id, "series id (default: all, or the only one for pgm)");
  c_ra->add_option("--format", ra.format, "txt or pgm")->capture_default_str();

  CvOptions cv;
  auto* c_cv = app.add_subcommand("cv", "cross-validated accuracy per history length");
  c_cv->add_option("series", cv.input, "series file")->required();
  c_cv->add_option("--out", cv.out, "CSV (default stdout)");
  c_cv->add_option("--train-days", cv.train_days, "leading days to use (0 = all)")->capture_default_str();
  detail::add_cssr(c_cv, cv.model);
  c_cv->add_option("--jobs", cv.jobs, "worker threads")->capture_default_str();

  InferOptions in;
  auto* c_in = app.add_subcommand("infer", "infer a causal state model and write it as JSON");
  c_in->add_option("series", in.input, "series file")->required();
  c_in->add_option("--out", in.out, "model JSON (default stdout)");
  c_in->add_option("--id", in.id, "series id");
  detail::add_cssr(c_in, in.model);

  EntropyOptions en;
  auto* c_en = app.add_subcommand("entropy", "block entropies H_L for L = 1..L_max");
  c_en->add_option("series", en.input, "series file")->required();
  c_en->add_option("--out", en.out, "CSV (default stdout)");
  c_en->add_option("--id", en.id, "series id");
  c_en->add_option("--L-max", en.L_max, "largest block length")->capture_default_str();

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) {
      out << app.help();
      return kOk;
    }
    err << "error: " << e.what() << '\n';
    return kUsage;
  }

  Io io{out, err};
  try {
    if (*c_enc) return cmd_encode(enc, io);
    if (*c_ev) return cmd_evaluate(ev, io);
    if (*c_bf) return cmd_bitflip(bf, io);
    if (*c_sy) return cmd_synth(sy, io);
    if (*c_ra) return cmd_raster(ra, io);
    if (*c_cv) return cmd_cv(cv, io);
    if (*c_in) return cmd_infer(in, io);
    if (*c_en) return cmd_entropy(en, io);
  } catch (...) {
    return detail::exit_for_exception(std::current_exception(), err);
  }
  return kUsage;
}

}  // namespace pointpred::cli
