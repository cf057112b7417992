#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "gmsl/design.hpp"
#include "gmsl/errors.hpp"
#include "gmsl/numeric.hpp"
#include "gmsl/records.hpp"
#include "gmsl/terms.hpp"
#include "gmsl/version.hpp"

namespace gmsl {

struct Provenance {
  std::string source = "fitted";  // "fitted" or "builtin"
  std::optional<double> lambda;
  std::optional<double> delta;
  std::string data_hash;  // hex fingerprint of the training data, if any
};

// A prediction equation on physical variables: ln(Y) = sum c_j * term_j + c0.
// Velocity terms act on v = V_S30 / v_s30_reference. Only nonzero
// coefficients are stored; the constant is always reported, even when zero.
struct PhysicalEquation {
  std::map<TermSpec, double> coefficients;
  double constant = 0.0;
  IntensityMeasure im = IntensityMeasure::PGA;
  double v_s30_reference = 1500.0;
  Provenance provenance;

  std::size_t n_terms() const { return coefficients.size(); }
};

// Documented evaluation domain: M_w > 0, R_JB >= 0, V_S30 > 0, fm in
// {1,2,3}, z_1_0 finite. Violations raise DomainError.
inline double predict(const PhysicalEquation& eq, double m_w, double r_jb, double v_s30,
                      int fm = 1, double z_1_0 = 100.0) {
  if (!(m_w > 0.0) || !std::isfinite(m_w)) throw DomainError("m_w must be positive, got " + format_double(m_w));
  if (!(r_jb >= 0.0) || !std::isfinite(r_jb)) throw DomainError("r_jb must be nonnegative, got " + format_double(r_jb));
  if (!(v_s30 > 0.0) || !std::isfinite(v_s30)) throw DomainError("v_s30 must be positive, got " + format_double(v_s30));
  if (fm != 1 && fm != 2 && fm != 3) throw DomainError("fm must be 1, 2, or 3, got " + std::to_string(fm));
  if (!std::isfinite(z_1_0)) throw DomainError("z_1_0 must be finite");
  GroundMotionRecord r;
  r.m_w = m_w;
  r.r_jb = r_jb;
  r.v_s30 = v_s30;
  r.fm = fm;
  r.z_1_0 = z_1_0;
  double sum = eq.constant;
  for (const auto& [term, c] : eq.coefficients) sum += c * evaluate_term(term, r, eq.v_s30_reference);
  return sum;
}

inline double predict(const PhysicalEquation& eq, const GroundMotionRecord& r) {
  return predict(eq, r.m_w, r.r_jb, r.v_s30, r.fm, r.z_1_0);
}

// Maps normalized-column coefficients back to physical scale:
// c_j = xi_j / s_j and the constant absorbs xi_const - sum xi_j * a_j / s_j,
// so physical and normalized predictions agree identically. Terms with a
// zero normalized coefficient stay absent.
inline PhysicalEquation denormalize_coefficients(const Eigen::VectorXd& xi_normalized,
                                                 const DesignMatrix& matrix) {
  const auto n = static_cast<std::size_t>(matrix.theta.cols());
  if (static_cast<std::size_t>(xi_normalized.size()) != n)
    throw DomainError("coefficient vector length does not match the design matrix");
  PhysicalEquation eq;
  eq.im = matrix.im;
  eq.v_s30_reference = matrix.library.v_s30_reference;
  for (std::size_t j = 0; j < n; ++j) {
    const double xi = xi_normalized(static_cast<Eigen::Index>(j));
    if (xi == 0.0) continue;
    const auto& term = matrix.library.terms[j];
    if (term.kind == TermSpec::Kind::Constant) {
      eq.constant += xi;
      continue;
    }
    const double s = matrix.norm.scale[j];
    const double a = matrix.norm.shift[j];
    eq.coefficients[term] += xi / s;
    eq.constant -= xi * a / s;
  }
  return eq;
}

// Display order mirrors the published equation style: linear terms first,
// then logarithmic, squares, and the distance-saturation pair; within a
// group M_w, R_JB, v, FM, Z_1.0.
inline std::vector<std::pair<TermSpec, double>> terms_in_display_order(const PhysicalEquation& eq) {
  auto group = [](const TermSpec& t) {
    switch (t.kind) {
      case TermSpec::Kind::Linear: return 0;
      case TermSpec::Kind::Log: return 1;
      case TermSpec::Kind::Square: return 2;
      case TermSpec::Kind::LogShiftedDistance: return 3;
      case TermSpec::Kind::MwTimesLogShiftedDistance: return 4;
      case TermSpec::Kind::Constant: return 5;
    }
    return 6;
  };
  std::vector<std::pair<TermSpec, double>> out(eq.coefficients.begin(), eq.coefficients.end());
  std::stable_sort(out.begin(), out.end(), [&](const auto& x, const auto& y) {
    if (group(x.first) != group(y.first)) return group(x.first) < group(y.first);
    if (x.first.var != y.first.var) return x.first.var < y.first.var;
    return x.first < y.first;
  });
  return out;
}

// One-line human-readable equation; the constant is printed explicitly even
// when zero.
inline std::string equation_text(const PhysicalEquation& eq) {
  std::string s = "ln(" + std::string(eq.im == IntensityMeasure::PGA ? "PGA" : "PGV") + ") =";
  bool first = true;
  for (const auto& [term, c] : terms_in_display_order(eq)) {
    const double mag = std::abs(c);
    s += (c < 0) ? (first ? " -" : " - ") : (first ? " " : " + ");
    s += format_double(mag) + "*" + term.to_string();
    first = false;
  }
  s += (eq.constant < 0) ? (first ? " -" : " - ") : (first ? " " : " + ");
  s += format_double(std::abs(eq.constant));
  return s;
}

inline nlohmann::json equation_to_json(const PhysicalEquation& eq) {
  nlohmann::json coeffs = nlohmann::json::object();
  for (const auto& [term, c] : eq.coefficients) coeffs[term.to_string()] = c;
  nlohmann::json prov;
  prov["source"] = eq.provenance.source;
  prov["lambda"] = eq.provenance.lambda ? nlohmann::json(*eq.provenance.lambda) : nlohmann::json();
  prov["delta"] = eq.provenance.delta ? nlohmann::json(*eq.provenance.delta) : nlohmann::json();
  prov["data_hash"] = eq.provenance.data_hash;
  return nlohmann::json{{"im", im_name(eq.im)},
                        {"constant", eq.constant},
                        {"v_s30_reference", eq.v_s30_reference},
                        {"coefficients", coeffs},
                        {"provenance", prov}};
}

inline PhysicalEquation equation_from_json(const nlohmann::json& j) {
  PhysicalEquation eq;
  try {
    eq.im = im_parse(j.at("im").get<std::string>());
    eq.constant = j.at("constant").get<double>();
    eq.v_s30_reference = j.value("v_s30_reference", 1500.0);
    for (const auto& [key, value] : j.at("coefficients").items())
      eq.coefficients[TermSpec::parse(key)] = value.get<double>();
    if (j.contains("provenance")) {
      const auto& p = j.at("provenance");
      eq.provenance.source = p.value("source", "fitted");
      if (p.contains("lambda") && p.at("lambda").is_number())
        eq.provenance.lambda = p.at("lambda").get<double>();
      if (p.contains("delta") && p.at("delta").is_number())
        eq.provenance.delta = p.at("delta").get<double>();
      eq.provenance.data_hash = p.value("data_hash", "");
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("malformed equation JSON: ") + e.what());
  }
  return eq;
}

// The two published coefficient sets shipped as builtin fixtures. The PGA
// model has 7 active terms, the PGV model 9; neither uses FM, Z_1.0, or a
// constant. Velocity symbols are interpreted on the scaled v = V_S30/1500.
struct BuiltinModels {
  PhysicalEquation pga;
  PhysicalEquation pgv;
};

inline BuiltinModels builtin_models() {
  BuiltinModels m;
  m.pga.im = IntensityMeasure::PGA;
  m.pga.provenance = {"builtin", std::nullopt, std::nullopt, ""};
  m.pga.coefficients = {
      {TermSpec::linear(TermVar::MagnitudeW), 16.101},
      {TermSpec::linear(TermVar::DistanceJB), -0.005},
      {TermSpec::log(TermVar::MagnitudeW), -31.611},
      {TermSpec::log(TermVar::SiteVelocityScaled), -0.543},
      {TermSpec::square(TermVar::MagnitudeW), -0.871},
      {TermSpec::log_shifted_distance(10.0), -2.335},
      {TermSpec::mw_times_log_shifted_distance(10.0), 0.185},
  };
  m.pgv.im = IntensityMeasure::PGV;
  m.pgv.provenance = {"builtin", std::nullopt, std::nullopt, ""};
  m.pgv.coefficients = {
      {TermSpec::linear(TermVar::MagnitudeW), 8.986},
      {TermSpec::linear(TermVar::DistanceJB), 0.002},
      {TermSpec::linear(TermVar::SiteVelocityScaled), -7.491},
      {TermSpec::log(TermVar::MagnitudeW), -14.612},
      {TermSpec::log(TermVar::SiteVelocityScaled), 0.618},
      {TermSpec::square(TermVar::MagnitudeW), -0.507},
      {TermSpec::square(TermVar::SiteVelocityScaled), 4.094},
      {TermSpec::log_shifted_distance(10.0), -2.914},
      {TermSpec::mw_times_log_shifted_distance(10.0), 0.245},
  };
  return m;
}

// Scenario set for attenuation curves: magnitudes 4-7, site classes 200/560/
// 760 m/s, distances log-spaced 1-400 km, strike-slip mechanism.
struct ScenarioGrid {
  std::vector<double> m_w{4.0, 5.0, 6.0, 7.0};
  std::vector<double> v_s30{200.0, 560.0, 760.0};
  std::vector<double> r_jb = log_spaced(1.0, 400.0, 60);
  int fm = 1;
  double z_1_0 = 100.0;

  void validate() const {
    if (m_w.empty() || v_s30.empty() || r_jb.empty()) throw ConfigError("scenario grid has an empty axis");
    for (double r : r_jb)
      if (!(r > 0.0)) throw ConfigError("scenario r_jb grid must be positive");
  }
};

struct CurvePoint {
  double m_w = 0.0;
  double v_s30 = 0.0;
  double r_jb = 0.0;
  double ln_y = 0.0;
};

// One row per grid point, m_w outer, v_s30 middle, r_jb inner. Prediction
// errors are rethrown with the grid coordinates attached.
inline std::vector<CurvePoint> attenuation_curves(const PhysicalEquation& eq,
                                                  const ScenarioGrid& grid) {
  grid.validate();
  std::vector<CurvePoint> out;
  out.reserve(grid.m_w.size() * grid.v_s30.size() * grid.r_jb.size());
  for (double m : grid.m_w)
    for (double v : grid.v_s30)
      for (double r : grid.r_jb) {
        try {
          out.push_back({m, v, r, predict(eq, m, r, v, grid.fm, grid.z_1_0)});
        } catch (const DomainError& e) {
          throw DomainError(std::string(e.what()) + " (at m_w=" + format_double(m) +
                            ", v_s30=" + format_double(v) + ", r_jb=" + format_double(r) + ")");
        }
      }
  return out;
}

namespace detail {

// Distance dependence split: c_r * R + sum over shifts of g_s(M) * ln(R+s).
struct DistanceTerms {
  double c_r = 0.0;
  std::vector<std::pair<double, double>> shifted;  // (shift, g_s with M folded in)
  bool analytic = true;
};

inline DistanceTerms distance_terms(const PhysicalEquation& eq, double m_w) {
  DistanceTerms d;
  std::map<double, double> by_shift;
  for (const auto& [term, c] : eq.coefficients) {
    switch (term.kind) {
      case TermSpec::Kind::Linear:
        if (term.var == TermVar::DistanceJB) d.c_r += c;
        break;
      case TermSpec::Kind::Log:
      case TermSpec::Kind::Square:
        if (term.var == TermVar::DistanceJB) d.analytic = false;
        break;
      case TermSpec::Kind::LogShiftedDistance:
        by_shift[term.shift] += c;
        break;
      case TermSpec::Kind::MwTimesLogShiftedDistance:
        by_shift[term.shift] += c * m_w;
        break;
      case TermSpec::Kind::Constant:
        break;
    }
  }
  d.shifted.assign(by_shift.begin(), by_shift.end());
  // With several distinct shifts the slope need not be monotone in R, so the
  // endpoint argument no longer applies; fall back to the scan.
  if (d.shifted.size() > 1) d.analytic = false;
  return d;
}

} // namespace detail

// Upper bound on |d lnY/dR| at R = 0 for saturation-style distance
// dependence: |c_R| + sum |g_s(M)| / s.
inline double saturation_bound(const PhysicalEquation& eq, double m_w) {
  const auto d = detail::distance_terms(eq, m_w);
  double b = std::abs(d.c_r);
  for (const auto& [shift, g] : d.shifted) b += std::abs(g) / shift;
  return b;
}

// Largest |d lnY/dR_JB| over R_JB in [r_lo, r_hi] (default [0, 5] km).
// When the distance dependence is {R, ln(R+s), M_w ln(R+s)} with a single
// shift, the derivative c_R + g/(R+s) is monotone in R and the endpoints
// suffice; anything else falls back to a central finite-difference scan with
// step 1e-4 km (second-order one-sided at the R = 0 edge).
inline double near_field_slope(const PhysicalEquation& eq, double m_w, double v_s30,
                               int fm = 1, double z_1_0 = 100.0, double r_lo = 0.0,
                               double r_hi = 5.0) {
  const auto d = detail::distance_terms(eq, m_w);
  if (d.analytic) {
    auto slope = [&](double r) {
      double f = d.c_r;
      for (const auto& [shift, g] : d.shifted) f += g / (r + shift);
      return std::abs(f);
    };
    return std::max(slope(r_lo), slope(r_hi));
  }
  const double h = 1e-4;
  auto f = [&](double r) { return predict(eq, m_w, r, v_s30, fm, z_1_0); };
  double worst = 0.0;
  for (double r : linear_spaced(r_lo, r_hi, 201)) {
    double g;
    if (r - h < 0.0) g = (-3.0 * f(r) + 4.0 * f(r + h) - f(r + 2.0 * h)) / (2.0 * h);
    else g = (f(r + h) - f(r - h)) / (2.0 * h);
    worst = std::max(worst, std::abs(g));
  }
  return worst;
}

} // namespace gmsl
