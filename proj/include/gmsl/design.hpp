#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "gmsl/errors.hpp"
#include "gmsl/numeric.hpp"
#include "gmsl/records.hpp"
#include "gmsl/terms.hpp"

namespace gmsl {

// Column scaling applied to the evaluated term matrix. MaxAbs divides by the
// column's largest magnitude (no shift), so a target with no constant part
// keeps a structurally zero constant coefficient; it is the default. MinMax
// maps to [0, 1]; ZScore centers and scales by the sample SD; None is the
// identity.
enum class NormMode { MaxAbs, MinMax, ZScore, None };

inline const char* norm_mode_name(NormMode m) {
  switch (m) {
    case NormMode::MaxAbs: return "maxabs";
    case NormMode::MinMax: return "minmax";
    case NormMode::ZScore: return "zscore";
    case NormMode::None: return "none";
  }
  throw DomainError("unhandled normalization mode");
}

inline NormMode norm_mode_parse(std::string_view s) {
  if (s == "maxabs") return NormMode::MaxAbs;
  if (s == "minmax") return NormMode::MinMax;
  if (s == "zscore") return NormMode::ZScore;
  if (s == "none") return NormMode::None;
  throw ConfigError("unknown normalization mode: '" + std::string(s) + "'");
}

// Per-column shift a_j and scale s_j: theta_normalized = (theta_raw - a) / s.
// Constant columns are never normalized (a = 0, s = 1).
struct NormalizationSpec {
  NormMode mode = NormMode::MaxAbs;
  std::vector<double> shift;
  std::vector<double> scale;
};

// Normalized term matrix plus the ln-intensity target and everything needed
// to map fitted coefficients back to physical scale. Rows align with the
// input records, columns with library order. Immutable after construction.
struct DesignMatrix {
  Eigen::MatrixXd theta;
  Eigen::VectorXd y;
  NormalizationSpec norm;
  TermLibrary library;
  IntensityMeasure im = IntensityMeasure::PGA;
  std::uint64_t data_hash = 0;
};

// Evaluates the library on every record (physical values first), then
// normalizes non-constant columns per mode. The target y = ln(intensity) is
// never normalized. Degenerate columns (constant-valued under MaxAbs/MinMax,
// zero variance under ZScore) raise DegenerateColumnError naming the term.
inline DesignMatrix build_design_matrix(const std::vector<GroundMotionRecord>& records,
                                        const TermLibrary& library, IntensityMeasure im,
                                        NormMode mode = NormMode::MaxAbs) {
  library.validate();
  if (library.terms.empty()) throw ConfigError("empty term library");
  if (records.empty()) throw DomainError("cannot build a design matrix from zero records");

  const auto m = static_cast<Eigen::Index>(records.size());
  const auto n = static_cast<Eigen::Index>(library.terms.size());
  DesignMatrix out;
  out.library = library;
  out.im = im;
  out.norm.mode = mode;
  out.theta.resize(m, n);
  out.y.resize(m);

  for (Eigen::Index i = 0; i < m; ++i) {
    const auto& rec = records[static_cast<std::size_t>(i)];
    const double target = im_value(rec, im);
    if (!(target > 0.0) || !std::isfinite(target))
      throw DomainError(std::string(im_name(im)) + " must be positive and finite; record " +
                        rec.event_id + "/" + rec.station_id + " has " + format_double(target));
    out.y(i) = std::log(target);
    for (Eigen::Index j = 0; j < n; ++j) {
      const auto& term = library.terms[static_cast<std::size_t>(j)];
      const double v = evaluate_term(term, rec, library.v_s30_reference);
      if (!std::isfinite(v))
        throw DomainError("non-finite value of term " + term.to_string() + " at record " +
                          rec.event_id + "/" + rec.station_id);
      out.theta(i, j) = v;
    }
  }

  out.norm.shift.assign(static_cast<std::size_t>(n), 0.0);
  out.norm.scale.assign(static_cast<std::size_t>(n), 1.0);
  for (Eigen::Index j = 0; j < n; ++j) {
    const auto& term = library.terms[static_cast<std::size_t>(j)];
    if (term.kind == TermSpec::Kind::Constant || mode == NormMode::None) continue;
    const auto col = out.theta.col(j);
    const double lo = col.minCoeff();
    const double hi = col.maxCoeff();
    double a = 0.0, s = 1.0;
    switch (mode) {
      case NormMode::MaxAbs:
        if (lo == hi) throw DegenerateColumnError(term.to_string());
        s = col.cwiseAbs().maxCoeff();
        break;
      case NormMode::MinMax:
        if (lo == hi) throw DegenerateColumnError(term.to_string());
        a = lo;
        s = hi - lo;
        break;
      case NormMode::ZScore: {
        a = col.mean();
        const double var = (col.array() - a).square().sum() /
                           std::max<double>(1.0, static_cast<double>(m - 1));
        s = std::sqrt(var);
        if (!(s > 0.0)) throw DegenerateColumnError(term.to_string());
        break;
      }
      case NormMode::None:
        break;
    }
    out.theta.col(j) = (col.array() - a) / s;
    out.norm.shift[static_cast<std::size_t>(j)] = a;
    out.norm.scale[static_cast<std::size_t>(j)] = s;
  }

  out.data_hash = fnv1a64(std::string(im_name(im)) + "|" + norm_mode_name(mode),
                          records_hash(records));
  return out;
}

} // namespace gmsl
