#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "gmsl/errors.hpp"
#include "gmsl/numeric.hpp"

namespace gmsl {

inline constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

// One strong-motion record: a single station's recording of one earthquake.
// pga/pgv stay in whatever units the source file uses (optionally rescaled
// by a multiplicative factor at ingest).
struct GroundMotionRecord {
  std::string event_id;
  std::string station_id;
  double m_w = kNaN;    // moment magnitude
  double r_jb = kNaN;   // Joyner-Boore distance, km
  double v_s30 = kNaN;  // top-30 m time-averaged shear-wave velocity, m/s
  int fm = 0;           // fault mechanism: 1 strike-slip, 2 normal, 3 reverse
  double z_1_0 = kNaN;  // depth to the 1.0 km/s shear-wave horizon, as given
  double depth = kNaN;  // source depth, km
  double pga = kNaN;    // peak ground acceleration, as given
  double pgv = kNaN;    // peak ground velocity, as given
};

// Closed interval; infinite bounds mean unbounded.
struct Bound {
  double lo = -std::numeric_limits<double>::infinity();
  double hi = std::numeric_limits<double>::infinity();
  bool contains(double x) const { return x >= lo && x <= hi; }
};

// Record selection rules. Defaults: source depth within [1, 20] km, at least
// 5 records per event, magnitude/distance/velocity/basin-depth present;
// magnitude, distance and velocity ranges unbounded.
struct FilterCriteria {
  Bound m_w_range;
  Bound r_jb_range;
  Bound v_s30_range;
  Bound depth_range{1.0, 20.0};
  int min_records_per_event = 5;
  std::vector<std::string> require_fields{"m_w", "fm", "r_jb", "v_s30", "z_1_0"};
};

inline const std::vector<std::string>& numeric_field_names() {
  static const std::vector<std::string> names{
      "m_w", "r_jb", "v_s30", "fm", "z_1_0", "depth", "pga", "pgv"};
  return names;
}

// Numeric field lookup by canonical name; fm is returned as a double.
// Unknown names violate the caller's contract and throw ConfigError.
inline double field_value(const GroundMotionRecord& r, std::string_view name) {
  if (name == "m_w") return r.m_w;
  if (name == "r_jb") return r.r_jb;
  if (name == "v_s30") return r.v_s30;
  if (name == "fm") return static_cast<double>(r.fm);
  if (name == "z_1_0") return r.z_1_0;
  if (name == "depth") return r.depth;
  if (name == "pga") return r.pga;
  if (name == "pgv") return r.pgv;
  throw ConfigError("unknown record field: " + std::string(name));
}

// Which peak intensity column a model or design matrix targets.
enum class IntensityMeasure { PGA, PGV };

inline const char* im_name(IntensityMeasure im) {
  return im == IntensityMeasure::PGA ? "pga" : "pgv";
}

inline IntensityMeasure im_parse(std::string_view s) {
  if (s == "pga" || s == "PGA") return IntensityMeasure::PGA;
  if (s == "pgv" || s == "PGV") return IntensityMeasure::PGV;
  throw ConfigError("unknown intensity measure: '" + std::string(s) + "' (expected pga or pgv)");
}

inline double im_value(const GroundMotionRecord& r, IntensityMeasure im) {
  return im == IntensityMeasure::PGA ? r.pga : r.pgv;
}

struct ValueRange {
  double min = std::numeric_limits<double>::infinity();
  double max = -std::numeric_limits<double>::infinity();
  void add(double x) {
    if (x < min) min = x;
    if (x > max) max = x;
  }
  bool empty() const { return min > max; }
};

// Bookkeeping for parse/filter/summarize: row accounting plus the observed
// min/max of every numeric covariate over the surviving records.
struct IngestReport {
  std::size_t rows_read = 0;
  std::map<std::string, std::size_t> rows_dropped_by_rule;
  std::size_t n_records = 0;
  std::size_t n_events = 0;
  std::size_t n_stations = 0;
  std::map<std::string, ValueRange> covariate_ranges;

  std::size_t rows_dropped() const {
    std::size_t n = 0;
    for (const auto& [rule, count] : rows_dropped_by_rule) n += count;
    return n;
  }

  nlohmann::json to_json() const {
    nlohmann::json j;
    j["rows_read"] = rows_read;
    j["rows_dropped"] = rows_dropped();
    j["rows_dropped_by_rule"] = rows_dropped_by_rule;
    j["n_records"] = n_records;
    j["n_events"] = n_events;
    j["n_stations"] = n_stations;
    nlohmann::json ranges = nlohmann::json::object();
    for (const auto& [field, range] : covariate_ranges) {
      if (range.empty()) continue;
      ranges[field] = {{"min", range.min}, {"max", range.max}};
    }
    j["covariate_ranges"] = ranges;
    return j;
  }
};

// Fills counts and observed covariate ranges from a record list.
inline void tally_records(const std::vector<GroundMotionRecord>& records, IngestReport& report) {
  std::set<std::string_view> events, stations;
  for (const auto& r : records) {
    events.insert(r.event_id);
    stations.insert(r.station_id);
    for (const auto& f : numeric_field_names()) {
      const double v = field_value(r, f);
      if (std::isfinite(v)) report.covariate_ranges[f].add(v);
    }
  }
  report.n_records = records.size();
  report.n_events = events.size();
  report.n_stations = stations.size();
}

// Order-independent fingerprint of a dataset's contents.
inline std::uint64_t records_hash(const std::vector<GroundMotionRecord>& records) {
  std::uint64_t h = fnv1a64("records");
  for (const auto& r : records) {
    std::string row = r.event_id + "," + r.station_id;
    for (const auto& f : numeric_field_names()) row += "," + format_double(field_value(r, f));
    // Combine per-row hashes with a commutative fold so that record order
    // does not change the fingerprint of the same record multiset.
    h += fnv1a64(row) * 0x9e3779b97f4a7c15ull;
  }
  return h;
}

} // namespace gmsl
