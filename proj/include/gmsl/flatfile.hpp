#pragma once

#include <cmath>
#include <istream>
#include <map>
#include <ostream>
#include <string>
#include <string_view>
#include <vector>

#include "gmsl/csv.hpp"
#include "gmsl/errors.hpp"
#include "gmsl/numeric.hpp"
#include "gmsl/records.hpp"

namespace gmsl {

// Maps record field names to CSV header names. Identity by default.
struct ColumnMap {
  std::map<std::string, std::string> columns;

  static const std::vector<std::string>& field_names() {
    static const std::vector<std::string> names{
        "event_id", "station_id", "m_w", "r_jb", "v_s30",
        "fm",       "z_1_0",      "depth", "pga", "pgv"};
    return names;
  }

  static ColumnMap identity() {
    ColumnMap m;
    for (const auto& f : field_names()) m.columns[f] = f;
    return m;
  }

  const std::string& header_for(const std::string& field) const {
    auto it = columns.find(field);
    if (it == columns.end()) throw ConfigError("column map does not cover field: " + field);
    return it->second;
  }
};

struct ParseOptions {
  ColumnMap columns = ColumnMap::identity();
  // The empty cell is always missing; these strings (compared after trimming)
  // mark missing values too.
  std::vector<std::string> missing_sentinels{"NaN", "-999"};
  // Multiplicative unit factors applied to pga/pgv at ingest.
  double pga_scale = 1.0;
  double pgv_scale = 1.0;
};

struct ParseResult {
  std::vector<GroundMotionRecord> records;
  IngestReport report;
};

namespace detail {

inline bool is_missing_cell(std::string_view cell, const std::vector<std::string>& sentinels) {
  if (cell.empty()) return true;
  for (const auto& s : sentinels)
    if (cell == s) return true;
  return false;
}

// Parses one numeric cell. Returns the drop rule that fired, or empty.
inline std::string parse_numeric_cell(std::string_view raw, const std::string& field,
                                      const ParseOptions& opt, double& out) {
  const std::string_view cell = trim(raw);
  if (is_missing_cell(cell, opt.missing_sentinels)) return "missing:" + field;
  double v = 0.0;
  if (!try_parse_double(cell, v)) return "unparseable:" + field;
  if (!std::isfinite(v)) return "missing:" + field;
  out = v;
  return {};
}

} // namespace detail

// Reads a flatfile CSV (header row required). Rows with missing or
// unparseable fields are counted against the first rule that fires, never
// errors; surviving records carry raw, unfiltered values. A zero-byte source
// yields an empty dataset. Structural CSV damage raises ParseError; a header
// that does not contain every mapped column raises ConfigError.
inline ParseResult parse_flatfile(std::istream& source, const ParseOptions& options = {}) {
  ParseResult result;
  CsvReader reader(source);
  std::vector<std::string> row;
  if (!reader.next(row)) return result;

  std::map<std::string, std::size_t> header_index;
  for (std::size_t i = 0; i < row.size(); ++i) header_index[std::string(trim(row[i]))] = i;
  std::map<std::string, std::size_t> field_index;
  for (const auto& field : ColumnMap::field_names()) {
    const std::string& header = options.columns.header_for(field);
    auto it = header_index.find(header);
    if (it == header_index.end())
      throw ConfigError("flatfile header lacks column '" + header + "' mapped to field '" + field + "'");
    field_index[field] = it->second;
  }

  const std::size_t n_columns = row.size();
  while (reader.next(row)) {
    ++result.report.rows_read;
    if (row.size() != n_columns) {
      ++result.report.rows_dropped_by_rule["malformed:row"];
      continue;
    }
    GroundMotionRecord rec;
    std::string drop;
    for (const auto& field : ColumnMap::field_names()) {
      const std::string& raw = row[field_index[field]];
      if (field == "event_id" || field == "station_id") {
        const std::string_view cell = trim(raw);
        if (cell.empty()) {
          drop = "missing:" + field;
          break;
        }
        (field == "event_id" ? rec.event_id : rec.station_id) = std::string(cell);
        continue;
      }
      double value = 0.0;
      drop = detail::parse_numeric_cell(raw, field, options, value);
      if (!drop.empty()) break;
      if (field == "fm") {
        if (value != 1.0 && value != 2.0 && value != 3.0) {
          drop = "invalid:fm";
          break;
        }
        rec.fm = static_cast<int>(value);
      } else if (field == "m_w") rec.m_w = value;
      else if (field == "r_jb") rec.r_jb = value;
      else if (field == "v_s30") rec.v_s30 = value;
      else if (field == "z_1_0") rec.z_1_0 = value;
      else if (field == "depth") rec.depth = value;
      else if (field == "pga") rec.pga = value * options.pga_scale;
      else if (field == "pgv") rec.pgv = value * options.pgv_scale;
    }
    if (!drop.empty()) {
      ++result.report.rows_dropped_by_rule[drop];
      continue;
    }
    result.records.push_back(std::move(rec));
  }
  tally_records(result.records, result.report);
  return result;
}

// Applies selection rules. Range rules run per record first; the
// records-per-event minimum runs afterwards over the survivors, so an event
// thinned below the minimum is removed entirely. Record order is preserved
// and the operation is idempotent. Empty output is legal.
inline ParseResult filter_records(const std::vector<GroundMotionRecord>& records,
                                  const FilterCriteria& criteria) {
  ParseResult result;
  result.report.rows_read = records.size();

  std::vector<const GroundMotionRecord*> survivors;
  survivors.reserve(records.size());
  for (const auto& r : records) {
    std::string drop;
    for (const auto& field : criteria.require_fields) {
      if (!std::isfinite(field_value(r, field))) {
        drop = "missing:" + field;
        break;
      }
    }
    if (drop.empty()) {
      for (const char* field : {"m_w", "r_jb", "v_s30", "pga", "pgv"}) {
        const double v = field_value(r, field);
        if (!(v > 0.0) || !std::isfinite(v)) {
          drop = std::string("nonpositive:") + field;
          break;
        }
      }
    }
    if (drop.empty()) {
      const std::pair<const char*, const Bound*> ranges[] = {
          {"m_w", &criteria.m_w_range},
          {"r_jb", &criteria.r_jb_range},
          {"v_s30", &criteria.v_s30_range},
          {"depth", &criteria.depth_range},
      };
      for (const auto& [field, bound] : ranges) {
        const double v = field_value(r, field);
        if (!std::isfinite(v) || !bound->contains(v)) {
          drop = std::string("range:") + field;
          break;
        }
      }
    }
    if (!drop.empty()) ++result.report.rows_dropped_by_rule[drop];
    else survivors.push_back(&r);
  }

  std::map<std::string_view, int> event_counts;
  for (const auto* r : survivors) ++event_counts[r->event_id];
  for (const auto* r : survivors) {
    if (event_counts[r->event_id] < criteria.min_records_per_event)
      ++result.report.rows_dropped_by_rule["event_min_records"];
    else
      result.records.push_back(*r);
  }
  tally_records(result.records, result.report);
  return result;
}

// Counts and observed covariate ranges; never drops or errors.
inline IngestReport summarize(const std::vector<GroundMotionRecord>& records) {
  IngestReport report;
  report.rows_read = records.size();
  tally_records(records, report);
  return report;
}

// Writes records in the same schema parse_flatfile ingests. Any comment
// lines are emitted first, prefixed with '#'. Doubles use the shortest
// round-tripping form, so write -> parse is lossless.
inline void write_records_csv(std::ostream& out, const std::vector<GroundMotionRecord>& records,
                              const std::vector<std::string>& comments = {}) {
  for (const auto& c : comments) out << "# " << c << '\n';
  std::vector<std::string> row(ColumnMap::field_names());
  write_csv_row(out, row);
  for (const auto& r : records) {
    row.clear();
    row.push_back(r.event_id);
    row.push_back(r.station_id);
    for (const auto& f : numeric_field_names()) {
      if (f == "fm") row.push_back(std::to_string(r.fm));
      else row.push_back(format_double(field_value(r, f)));
    }
    write_csv_row(out, row);
  }
}

} // namespace gmsl
