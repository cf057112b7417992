#pragma once

#include <cmath>
#include <compare>
#include <string>
#include <string_view>
#include <vector>

#include "gmsl/errors.hpp"
#include "gmsl/numeric.hpp"
#include "gmsl/records.hpp"

namespace gmsl {

// Covariates a term may act on. SiteVelocityScaled is v = V_S30 divided by
// the library's reference velocity (1500 m/s by default), so velocity terms
// live on an O(1) scale.
enum class TermVar { MagnitudeW, DistanceJB, SiteVelocityScaled, FaultMechanism, BasinDepth };

inline const char* term_var_name(TermVar v) {
  switch (v) {
    case TermVar::MagnitudeW: return "M_w";
    case TermVar::DistanceJB: return "R_JB";
    case TermVar::SiteVelocityScaled: return "v";
    case TermVar::FaultMechanism: return "FM";
    case TermVar::BasinDepth: return "Z_1.0";
  }
  throw DomainError("unhandled term variable");
}

// One candidate function of the physical covariates.
struct TermSpec {
  enum class Kind {
    Constant,                    // 1
    Linear,                      // var
    Log,                         // ln(var), var > 0
    Square,                      // var^2
    LogShiftedDistance,          // ln(R_JB + shift)
    MwTimesLogShiftedDistance,   // M_w * ln(R_JB + shift)
  };

  Kind kind = Kind::Constant;
  TermVar var = TermVar::MagnitudeW;  // meaningful for Linear/Log/Square
  double shift = 0.0;                 // meaningful for the two distance kinds

  friend auto operator<=>(const TermSpec&, const TermSpec&) = default;

  static TermSpec constant() { return {Kind::Constant, TermVar::MagnitudeW, 0.0}; }
  static TermSpec linear(TermVar v) { return {Kind::Linear, v, 0.0}; }
  static TermSpec log(TermVar v) { return {Kind::Log, v, 0.0}; }
  static TermSpec square(TermVar v) { return {Kind::Square, v, 0.0}; }
  static TermSpec log_shifted_distance(double shift) {
    return {Kind::LogShiftedDistance, TermVar::DistanceJB, shift};
  }
  static TermSpec mw_times_log_shifted_distance(double shift) {
    return {Kind::MwTimesLogShiftedDistance, TermVar::DistanceJB, shift};
  }

  std::string to_string() const {
    switch (kind) {
      case Kind::Constant: return "1";
      case Kind::Linear: return term_var_name(var);
      case Kind::Log: return std::string("ln(") + term_var_name(var) + ")";
      case Kind::Square: return std::string(term_var_name(var)) + "^2";
      case Kind::LogShiftedDistance: return "ln(R_JB+" + format_double(shift) + ")";
      case Kind::MwTimesLogShiftedDistance:
        return "M_w*ln(R_JB+" + format_double(shift) + ")";
    }
    throw DomainError("unhandled term kind");
  }

  // Inverse of to_string. Unknown descriptors raise ConfigError.
  static TermSpec parse(std::string_view text) {
    const std::string_view s = trim(text);
    if (s == "1") return constant();
    for (TermVar v : {TermVar::MagnitudeW, TermVar::DistanceJB, TermVar::SiteVelocityScaled,
                      TermVar::FaultMechanism, TermVar::BasinDepth}) {
      const std::string name = term_var_name(v);
      if (s == name) return linear(v);
      if (s == "ln(" + name + ")") return log(v);
      if (s == name + "^2") return square(v);
    }
    for (const bool with_mw : {false, true}) {
      const std::string prefix = with_mw ? "M_w*ln(R_JB+" : "ln(R_JB+";
      if (s.size() > prefix.size() + 1 && s.substr(0, prefix.size()) == prefix && s.back() == ')') {
        double shift = 0.0;
        if (try_parse_double(s.substr(prefix.size(), s.size() - prefix.size() - 1), shift) &&
            shift > 0.0)
          return with_mw ? mw_times_log_shifted_distance(shift) : log_shifted_distance(shift);
      }
    }
    throw ConfigError("unknown term descriptor: '" + std::string(s) + "'");
  }
};

// Ordered candidate library; term order defines coefficient indexing.
struct TermLibrary {
  std::vector<TermSpec> terms;
  double v_s30_reference = 1500.0;  // m/s

  // Index of the first Constant term, or -1 when absent.
  int constant_index() const {
    for (std::size_t j = 0; j < terms.size(); ++j)
      if (terms[j].kind == TermSpec::Kind::Constant) return static_cast<int>(j);
    return -1;
  }

  void validate() const {
    for (std::size_t a = 0; a < terms.size(); ++a)
      for (std::size_t b = a + 1; b < terms.size(); ++b)
        if (terms[a] == terms[b])
          throw ConfigError("duplicate library term: " + terms[a].to_string());
    for (const auto& t : terms)
      if ((t.kind == TermSpec::Kind::LogShiftedDistance ||
           t.kind == TermSpec::Kind::MwTimesLogShiftedDistance) &&
          !(t.shift > 0.0))
        throw ConfigError("distance saturation shift must be positive");
    if (!(v_s30_reference > 0.0)) throw ConfigError("v_s30_reference must be positive");
  }
};

// The 12-term candidate library: constant, primary, logarithmic, square, and
// 10 km distance-saturation terms over magnitude, distance, scaled velocity,
// mechanism code, and basin depth.
inline TermLibrary default_library() {
  TermLibrary lib;
  lib.terms = {
      TermSpec::constant(),
      TermSpec::linear(TermVar::MagnitudeW),
      TermSpec::square(TermVar::MagnitudeW),
      TermSpec::log(TermVar::MagnitudeW),
      TermSpec::linear(TermVar::DistanceJB),
      TermSpec::linear(TermVar::SiteVelocityScaled),
      TermSpec::square(TermVar::SiteVelocityScaled),
      TermSpec::log(TermVar::SiteVelocityScaled),
      TermSpec::linear(TermVar::FaultMechanism),
      TermSpec::linear(TermVar::BasinDepth),
      TermSpec::log_shifted_distance(10.0),
      TermSpec::mw_times_log_shifted_distance(10.0),
  };
  return lib;
}

namespace detail {

inline double term_var_value(TermVar var, const GroundMotionRecord& r, double v_s30_reference) {
  switch (var) {
    case TermVar::MagnitudeW: return r.m_w;
    case TermVar::DistanceJB: return r.r_jb;
    case TermVar::SiteVelocityScaled: return r.v_s30 / v_s30_reference;
    case TermVar::FaultMechanism: return static_cast<double>(r.fm);
    case TermVar::BasinDepth: return r.z_1_0;
  }
  throw DomainError("unhandled term variable");
}

} // namespace detail

// Exact value of one term on the physical (pre-normalization) scale.
// Non-positive arguments to Log raise DomainError naming the record.
inline double evaluate_term(const TermSpec& term, const GroundMotionRecord& r,
                            double v_s30_reference = 1500.0) {
  switch (term.kind) {
    case TermSpec::Kind::Constant:
      return 1.0;
    case TermSpec::Kind::Linear:
      return detail::term_var_value(term.var, r, v_s30_reference);
    case TermSpec::Kind::Log: {
      const double x = detail::term_var_value(term.var, r, v_s30_reference);
      if (!(x > 0.0))
        throw DomainError("ln(" + std::string(term_var_name(term.var)) + ") needs a positive value; record " +
                          r.event_id + "/" + r.station_id + " has " + format_double(x));
      return std::log(x);
    }
    case TermSpec::Kind::Square: {
      const double x = detail::term_var_value(term.var, r, v_s30_reference);
      return x * x;
    }
    case TermSpec::Kind::LogShiftedDistance:
      return std::log(r.r_jb + term.shift);
    case TermSpec::Kind::MwTimesLogShiftedDistance:
      return r.m_w * std::log(r.r_jb + term.shift);
  }
  throw DomainError("unhandled term kind");
}

} // namespace gmsl
