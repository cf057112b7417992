#pragma once

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <string>
#include <vector>

#include "gmsl/equation.hpp"
#include "gmsl/errors.hpp"
#include "gmsl/records.hpp"
#include "gmsl/rng.hpp"

namespace gmsl {

struct Uniform {
  double lo = 0.0;
  double hi = 1.0;
};

struct LogUniform {
  double lo = 1.0;
  double hi = 10.0;
};

// Covariate sampling model; defaults mirror the observed ranges of the
// strong-motion dataset the builtins were derived from, so synthetic design
// matrices are conditioned like real ones.
struct CovariateModel {
  Uniform m_w{3.0, 7.6};
  LogUniform r_jb{1.0, 400.0};      // km
  LogUniform v_s30{90.0, 1464.0};   // m/s
  LogUniform z_1_0{1.0, 3520.0};
  Uniform depth{1.0, 20.0};         // km
};

// Records per event, inclusive; lo == hi means a fixed count.
struct RecordCount {
  int lo = 20;
  int hi = 20;
};

struct SynthSpec {
  PhysicalEquation truth;
  int n_events = 250;
  RecordCount records_per_event{};
  double tau = 0.0;  // inter-event noise SD, ln units
  double phi = 0.0;  // intra-event noise SD, ln units
  CovariateModel covariates{};
  std::uint64_t seed = 0;

  void validate() const {
    if (n_events < 1) throw ConfigError("n_events must be positive");
    if (records_per_event.lo < 1 || records_per_event.hi < records_per_event.lo)
      throw ConfigError("records_per_event range is invalid");
    if (!(tau >= 0.0) || !(phi >= 0.0)) throw ConfigError("tau and phi must be nonnegative");
    auto check_u = [](const Uniform& u, const char* name) {
      if (!(u.lo <= u.hi)) throw ConfigError(std::string(name) + " range is inverted");
    };
    auto check_lu = [](const LogUniform& u, const char* name) {
      if (!(u.lo > 0.0) || !(u.lo <= u.hi))
        throw ConfigError(std::string(name) + " log-uniform range needs 0 < lo <= hi");
    };
    check_u(covariates.m_w, "m_w");
    check_lu(covariates.r_jb, "r_jb");
    check_lu(covariates.v_s30, "v_s30");
    check_lu(covariates.z_1_0, "z_1_0");
    check_u(covariates.depth, "depth");
  }
};

// Draws a synthetic flatfile from a known truth equation under the
// two-level noise model. Deterministic given the seed; one generator stream
// with a fixed draw order: per event, the record count (only when lo < hi),
// then m_w, then the event effect eta (one normal, two uniforms); per
// record, r_jb, v_s30, fm, z_1_0, depth, then eps (one normal). The truth's
// intensity column receives exp(ln Y); the other intensity column is filled
// with 1.0. Event ids run E00001..., station ids S0000001... sequentially.
inline std::vector<GroundMotionRecord> generate(const SynthSpec& spec) {
  spec.validate();
  PortableRng rng(spec.seed);
  std::vector<GroundMotionRecord> out;
  const bool variable_count = spec.records_per_event.lo < spec.records_per_event.hi;
  std::size_t station = 0;
  for (int e = 0; e < spec.n_events; ++e) {
    const int count = variable_count
                          ? rng.uniform_int(spec.records_per_event.lo, spec.records_per_event.hi)
                          : spec.records_per_event.lo;
    const double m_w = rng.uniform(spec.covariates.m_w.lo, spec.covariates.m_w.hi);
    const double eta = spec.tau * rng.normal01();
    char event_id[16];
    std::snprintf(event_id, sizeof event_id, "E%05d", e + 1);
    for (int k = 0; k < count; ++k) {
      GroundMotionRecord r;
      r.event_id = event_id;
      char station_id[16];
      std::snprintf(station_id, sizeof station_id, "S%07zu", ++station);
      r.station_id = station_id;
      r.m_w = m_w;
      r.r_jb = rng.log_uniform(spec.covariates.r_jb.lo, spec.covariates.r_jb.hi);
      r.v_s30 = rng.log_uniform(spec.covariates.v_s30.lo, spec.covariates.v_s30.hi);
      r.fm = rng.uniform_int(1, 3);
      r.z_1_0 = rng.log_uniform(spec.covariates.z_1_0.lo, spec.covariates.z_1_0.hi);
      r.depth = rng.uniform(spec.covariates.depth.lo, spec.covariates.depth.hi);
      const double eps = spec.phi * rng.normal01();
      const double ln_y = predict(spec.truth, r) + eta + eps;
      const double y = std::exp(ln_y);
      r.pga = spec.truth.im == IntensityMeasure::PGA ? y : 1.0;
      r.pgv = spec.truth.im == IntensityMeasure::PGV ? y : 1.0;
      out.push_back(std::move(r));
    }
  }
  return out;
}

} // namespace gmsl
