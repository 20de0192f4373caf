#pragma once

// Text formats for the encoding module: event logs (CSV or JSON lines),
// series files and rastergram grids / graymaps.

#include <algorithm>
#include <cmath>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "pointpred/encoding.hpp"
#include "pointpred/errors.hpp"

namespace pointpred {

struct EventParseResult {
  std::vector<EventLog> users;  // sorted by user_id
  std::vector<std::string> warnings;
};

namespace detail {

inline std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

// Integer seconds; fractional inputs are truncated toward zero.
inline bool parse_timestamp(const std::string& text, std::int64_t& out) {
  try {
    std::size_t pos = 0;
    const double v = std::stod(text, &pos);
    if (pos != text.size() || !std::isfinite(v)) return false;
    out = static_cast<std::int64_t>(std::trunc(v));
    return true;
  } catch (const std::exception&) {
    return false;
  }
}

inline EventParseResult finish_events(std::map<std::string, EventLog>& by_user, std::vector<std::string>& warnings) {
  EventParseResult result;
  result.warnings = std::move(warnings);
  for (auto& [id, log] : by_user) {
    try {
      log.validate();
      result.users.push_back(std::move(log));
    } catch (const DataError& e) {
      result.warnings.push_back(std::string("rejected: ") + e.what());
    }
  }
  return result;
}

}  // namespace detail

/// `user_id,epoch_second` per line. Blank lines, '#' comments and a
/// `user_id,...` header are skipped. A user whose timestamps are not in
/// non-decreasing file order is rejected with a warning.
inline EventParseResult parse_events_csv(std::istream& in) {
  std::map<std::string, EventLog> by_user;
  std::vector<std::string> warnings;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const std::string t = detail::trim(line);
    if (t.empty() || t[0] == '#') continue;
    const auto comma = t.find(',');
    if (comma == std::string::npos) {
      warnings.push_back("line " + std::to_string(lineno) + ": expected 'user_id,epoch_second'");
      continue;
    }
    const std::string id = detail::trim(t.substr(0, comma));
    const std::string ts_text = detail::trim(t.substr(comma + 1));
    std::int64_t ts = 0;
    if (!detail::parse_timestamp(ts_text, ts)) {
      if (lineno == 1 && id == "user_id") continue;
      warnings.push_back("line " + std::to_string(lineno) + ": bad timestamp '" + ts_text + "'");
      continue;
    }
    if (id.empty()) {
      warnings.push_back("line " + std::to_string(lineno) + ": empty user id");
      continue;
    }
    auto& log = by_user[id];
    log.user_id = id;
    log.timestamps.push_back(ts);
  }
  return detail::finish_events(by_user, warnings);
}

/// One JSON object per line: {"user_id": "...", "timestamps": [...]}.
inline EventParseResult parse_events_jsonl(std::istream& in) {
  std::map<std::string, EventLog> by_user;
  std::vector<std::string> warnings;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const std::string t = detail::trim(line);
    if (t.empty()) continue;
    try {
      const auto j = nlohmann::json::parse(t);
      EventLog log;
      log.user_id = j.at("user_id").get<std::string>();
      for (const auto& v : j.at("timestamps")) {
        if (!v.is_number()) throw DataError("non-numeric timestamp");
        log.timestamps.push_back(static_cast<std::int64_t>(std::trunc(v.get<double>())));
      }
      if (by_user.count(log.user_id)) {
        warnings.push_back("line " + std::to_string(lineno) + ": duplicate user '" + log.user_id + "'");
        continue;
      }
      by_user.emplace(log.user_id, std::move(log));
    } catch (const std::exception& e) {
      warnings.push_back("line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  return detail::finish_events(by_user, warnings);
}

/// Dispatches on the first non-blank character: '{' means JSON lines.
inline EventParseResult parse_events(std::istream& in) {
  std::stringstream buffer;
  buffer << in.rdbuf();
  const std::string text = buffer.str();
  const auto first = text.find_first_not_of(" \t\r\n");
  std::istringstream again(text);
  if (first != std::string::npos && text[first] == '{') return parse_events_jsonl(again);
  return parse_events_csv(again);
}

struct SeriesRecord {
  std::string id;
  BinarySeries series;
};

/// Header lines `#bin_seconds=`, `#bins_per_day=`, `#n_days=`, then one
/// `user_id<TAB>bitstring` line per series. All records share the geometry.
inline void write_series_file(std::ostream& out, const std::vector<SeriesRecord>& records) {
  if (records.empty()) throw DataError("no series to write");
  const auto& g = records.front().series;
  out << "#bin_seconds=" << g.bin_seconds() << '\n'
      << "#bins_per_day=" << g.bins_per_day() << '\n'
      << "#n_days=" << g.n_days() << '\n';
  for (const auto& r : records) {
    if (r.series.bins_per_day() != g.bins_per_day() || r.series.n_days() != g.n_days() ||
        r.series.bin_seconds() != g.bin_seconds())
      throw DataError("series '" + r.id + "' has a different geometry");
    out << r.id << '\t' << r.series.to_string() << '\n';
  }
}

inline std::vector<SeriesRecord> read_series_file(std::istream& in) {
  long long bin_seconds = -1, bins_per_day = -1, n_days = -1;
  std::vector<SeriesRecord> records;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (line[0] == '#') {
      const auto eq = line.find('=');
      if (eq == std::string::npos) continue;
      const std::string key = line.substr(1, eq - 1);
      long long value = 0;
      try {
        value = std::stoll(line.substr(eq + 1));
      } catch (const std::exception&) {
        throw DataError("line " + std::to_string(lineno) + ": bad header value");
      }
      if (key == "bin_seconds") bin_seconds = value;
      else if (key == "bins_per_day") bins_per_day = value;
      else if (key == "n_days") n_days = value;
      continue;
    }
    if (bin_seconds < 1 || bins_per_day < 1 || n_days < 1)
      throw DataError("series file is missing #bin_seconds/#bins_per_day/#n_days headers");
    const auto tab = line.find('\t');
    if (tab == std::string::npos) throw DataError("line " + std::to_string(lineno) + ": expected id<TAB>bits");
    SeriesRecord r;
    r.id = line.substr(0, tab);
    auto s = BinarySeries::from_string(line.substr(tab + 1), static_cast<std::size_t>(bins_per_day), bin_seconds);
    if (s.n_days() != static_cast<std::size_t>(n_days))
      throw DataError("line " + std::to_string(lineno) + ": series length disagrees with #n_days");
    r.series = std::move(s);
    records.push_back(std::move(r));
  }
  return records;
}

inline void write_rastergram(std::ostream& out, const BinarySeries& series) {
  for (const auto& row : rastergram(series)) out << row << '\n';
}

/// Plain (P2) portable graymap: event bins black, empty bins white.
inline void write_rastergram_pgm(std::ostream& out, const BinarySeries& series) {
  out << "P2\n" << series.bins_per_day() << ' ' << series.n_days() << "\n255\n";
  for (const auto& row : rastergram(series)) {
    for (std::size_t i = 0; i < row.size(); ++i) out << (i ? " " : "") << (row[i] == '1' ? 0 : 255);
    out << '\n';
  }
}

}  // namespace pointpred
