#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "gmsl/errors.hpp"
#include "gmsl/numeric.hpp"
#include "gmsl/records.hpp"

namespace gmsl {

// Raw residuals of one event's records, in input order. record_index points
// back into the source record list when the group was built from records.
struct EventGroup {
  std::string event_id;
  double m_w = 0.0;
  std::vector<double> residuals;
  std::vector<std::size_t> record_index;
};

// Groups per-record residuals by event id, sorted by id; within a group the
// input order is kept. The event magnitude is taken from the first record.
inline std::vector<EventGroup> group_residuals(const std::vector<GroundMotionRecord>& records,
                                               const std::vector<double>& residuals) {
  if (records.size() != residuals.size())
    throw DomainError("residual count does not match record count");
  std::map<std::string, EventGroup> by_event;
  for (std::size_t i = 0; i < records.size(); ++i) {
    auto& g = by_event[records[i].event_id];
    if (g.residuals.empty()) {
      g.event_id = records[i].event_id;
      g.m_w = records[i].m_w;
    }
    g.residuals.push_back(residuals[i]);
    g.record_index.push_back(i);
  }
  std::vector<EventGroup> out;
  out.reserve(by_event.size());
  for (auto& [id, g] : by_event) out.push_back(std::move(g));
  return out;
}

namespace detail {

// Per-event sufficient statistics (n, sum r, sum r^2). Sums run over sorted
// copies and events are ordered by id, so every downstream estimate is
// bit-identical under any record or event reordering. Empty groups are
// skipped; duplicate event ids are a keying failure.
struct EventStats {
  std::string event_id;
  double m_w = 0.0;
  double n = 0.0;
  double sum = 0.0;
  double sum_sq = 0.0;
};

inline std::vector<EventStats> canonical_stats(const std::vector<EventGroup>& groups) {
  std::vector<EventStats> stats;
  stats.reserve(groups.size());
  for (const auto& g : groups) {
    if (g.residuals.empty()) continue;
    EventStats s;
    s.event_id = g.event_id;
    s.m_w = g.m_w;
    s.n = static_cast<double>(g.residuals.size());
    std::vector<double> sorted = g.residuals;
    for (double r : sorted)
      if (!std::isfinite(r)) throw DomainError("non-finite residual in event " + g.event_id);
    std::sort(sorted.begin(), sorted.end());
    for (double r : sorted) {
      s.sum += r;
      s.sum_sq += r * r;
    }
    stats.push_back(std::move(s));
  }
  std::sort(stats.begin(), stats.end(),
            [](const EventStats& a, const EventStats& b) { return a.event_id < b.event_id; });
  for (std::size_t i = 1; i < stats.size(); ++i)
    if (stats[i].event_id == stats[i - 1].event_id)
      throw KeyingError("duplicate event group: " + stats[i].event_id);
  return stats;
}

inline constexpr double kLn2Pi = 1.8378770664093454835606594728112;

inline double mll_from_stats(const std::vector<EventStats>& stats, double tau, double phi) {
  const double t2 = tau * tau;
  const double p2 = phi * phi;
  double ll = 0.0;
  for (const auto& s : stats) {
    const double d = p2 + s.n * t2;
    ll += -0.5 * (s.n * kLn2Pi + (s.n - 1.0) * std::log(p2) + std::log(d) +
                  (s.sum_sq - t2 * s.sum * s.sum / d) / p2);
  }
  return ll;
}

} // namespace detail

// Exact Gaussian log-likelihood of residuals under the two-level model
// r_ij = eta_i + eps_ij, eta ~ N(0, tau^2), eps ~ N(0, phi^2): covariance
// phi^2 I + tau^2 11' per event, evaluated in closed form. Requires phi > 0,
// tau >= 0, finite residuals.
inline double marginal_log_likelihood(const std::vector<EventGroup>& groups, double tau,
                                      double phi) {
  if (!(phi > 0.0)) throw DomainError("phi must be positive");
  if (!(tau >= 0.0)) throw DomainError("tau must be nonnegative");
  return detail::mll_from_stats(detail::canonical_stats(groups), tau, phi);
}

struct VarianceEstimate {
  double tau = 0.0;
  double phi = 0.0;
  double log_likelihood = 0.0;
  bool degenerate = false;        // all residuals equal; nothing to estimate
  bool tau_at_boundary = false;   // maximum pinned at tau = 0
};

namespace detail {

// Nelder-Mead maximization of f over 2 dimensions inside a box, classic
// coefficients, deterministic. Returns the best vertex.
template <typename F>
inline std::pair<std::array<double, 2>, double> nelder_mead_max(
    F&& f, std::array<double, 2> start, const std::array<double, 2>& lo,
    const std::array<double, 2>& hi) {
  auto clamp = [&](std::array<double, 2> x) {
    for (int i = 0; i < 2; ++i) x[i] = std::min(std::max(x[i], lo[i]), hi[i]);
    return x;
  };
  struct Vertex {
    std::array<double, 2> x;
    double g;  // negated objective, minimized
  };
  auto eval = [&](std::array<double, 2> x) { return Vertex{x, -f(clamp(x))}; };

  std::array<Vertex, 3> v{eval(start), eval({start[0] + 0.7, start[1]}),
                          eval({start[0], start[1] + 0.7})};
  for (int iter = 0; iter < 400; ++iter) {
    std::sort(v.begin(), v.end(), [](const Vertex& a, const Vertex& b) { return a.g < b.g; });
    const double spread = std::abs(v[2].g - v[0].g);
    const double diam = std::max(std::abs(v[2].x[0] - v[0].x[0]) + std::abs(v[2].x[1] - v[0].x[1]),
                                 std::abs(v[1].x[0] - v[0].x[0]) + std::abs(v[1].x[1] - v[0].x[1]));
    if (spread < 1e-13 * (1.0 + std::abs(v[0].g)) && diam < 1e-9) break;
    const std::array<double, 2> centroid{(v[0].x[0] + v[1].x[0]) / 2.0,
                                         (v[0].x[1] + v[1].x[1]) / 2.0};
    auto at = [&](double t) {
      return std::array<double, 2>{centroid[0] + t * (centroid[0] - v[2].x[0]),
                                   centroid[1] + t * (centroid[1] - v[2].x[1])};
    };
    Vertex reflected = eval(at(1.0));
    if (reflected.g < v[0].g) {
      Vertex expanded = eval(at(2.0));
      v[2] = expanded.g < reflected.g ? expanded : reflected;
    } else if (reflected.g < v[1].g) {
      v[2] = reflected;
    } else {
      Vertex contracted = eval(at(reflected.g < v[2].g ? 0.5 : -0.5));
      if (contracted.g < std::min(reflected.g, v[2].g)) {
        v[2] = contracted;
      } else {
        for (int i = 1; i < 3; ++i)
          v[i] = eval({(v[i].x[0] + v[0].x[0]) / 2.0, (v[i].x[1] + v[0].x[1]) / 2.0});
      }
    }
  }
  std::sort(v.begin(), v.end(), [](const Vertex& a, const Vertex& b) { return a.g < b.g; });
  return {clamp(v[0].x), -v[0].g};
}

} // namespace detail

// Maximum-likelihood variance components by derivative-free 2-D maximization
// over (ln tau^2, ln phi^2) from several deterministic starts (moment
// estimates plus fixed dispersed points). Requires at least 2 events and one
// event with 2+ records. All-equal residuals are degenerate: tau = 0, phi at
// a small floor, flagged rather than raised. A maximum pinned at the tau = 0
// boundary is reported with tau_at_boundary.
inline VarianceEstimate estimate_variance_components(const std::vector<EventGroup>& groups) {
  const auto stats = detail::canonical_stats(groups);
  if (stats.size() < 2) throw EstimationError("variance estimation needs at least 2 events");
  double max_n = 0.0, total_n = 0.0;
  for (const auto& s : stats) {
    max_n = std::max(max_n, s.n);
    total_n += s.n;
  }
  if (max_n < 2.0) throw EstimationError("variance estimation needs at least one event with 2+ records");

  double lo = std::numeric_limits<double>::infinity(), hi = -lo;
  for (const auto& g : groups)
    for (double r : g.residuals) {
      lo = std::min(lo, r);
      hi = std::max(hi, r);
    }
  constexpr double kSigmaFloor = 1e-8;
  if (lo == hi) {
    VarianceEstimate est;
    est.tau = 0.0;
    est.phi = kSigmaFloor;
    est.degenerate = true;
    est.tau_at_boundary = true;
    est.log_likelihood = detail::mll_from_stats(stats, est.tau, est.phi);
    return est;
  }

  double msq = 0.0;
  for (const auto& s : stats) msq += s.sum_sq;
  msq /= total_n;

  // Moment starts from the one-way decomposition: within mean square and
  // between-event mean square corrected for the within contribution.
  double within_ss = 0.0, within_df = 0.0, between = 0.0, inv_n = 0.0;
  for (const auto& s : stats) {
    within_ss += s.sum_sq - s.sum * s.sum / s.n;
    within_df += s.n - 1.0;
    const double mean = s.sum / s.n;
    between += mean * mean;
    inv_n += 1.0 / s.n;
  }
  between /= static_cast<double>(stats.size());
  inv_n /= static_cast<double>(stats.size());
  const double phi2_start = within_df > 0.0 ? std::max(within_ss / within_df, msq * 1e-6) : msq / 2.0;
  const double tau2_start = std::max(between - phi2_start * inv_n, msq * 1e-4);

  const std::array<double, 2> box_lo{std::log(msq) - 46.0, std::log(msq) - 46.0};
  const std::array<double, 2> box_hi{std::log(msq) + 16.0, std::log(msq) + 16.0};
  auto objective = [&](const std::array<double, 2>& x) {
    return detail::mll_from_stats(stats, std::exp(x[0] / 2.0), std::exp(x[1] / 2.0));
  };
  const std::array<double, 2> starts[] = {
      {std::log(tau2_start), std::log(phi2_start)},
      {std::log(msq / 2.0), std::log(msq / 2.0)},
      {std::log(msq) - 7.0, std::log(msq)},
      {std::log(msq), std::log(msq) - 7.0},
      {std::log(tau2_start) + 2.3, std::log(phi2_start)},
      {std::log(tau2_start) - 2.3, std::log(phi2_start)},
  };
  std::array<double, 2> best_x{};
  double best_f = -std::numeric_limits<double>::infinity();
  for (auto start : starts) {
    for (int i = 0; i < 2; ++i) start[i] = std::min(std::max(start[i], box_lo[i]), box_hi[i]);
    auto [x, f] = detail::nelder_mead_max(objective, start, box_lo, box_hi);
    if (f > best_f) {
      best_f = f;
      best_x = x;
    }
  }

  VarianceEstimate est;
  est.tau = std::exp(best_x[0] / 2.0);
  est.phi = std::exp(best_x[1] / 2.0);
  if (best_x[0] <= box_lo[0] + 1e-6) {
    est.tau = 0.0;
    est.tau_at_boundary = true;
  }
  est.log_likelihood = detail::mll_from_stats(stats, est.tau, est.phi);
  return est;
}

// Inter-event and intra-event split of raw residuals at fixed (tau, phi).
struct ResidualDecomposition {
  std::map<std::string, double> eta;         // event id -> inter-event residual
  std::vector<std::vector<double>> epsilon;  // parallel to the input groups
  double tau = 0.0;
  double phi = 0.0;
  double log_likelihood = 0.0;

  double eta_for(const std::string& event_id) const {
    auto it = eta.find(event_id);
    if (it == eta.end()) throw KeyingError("unknown event id: " + event_id);
    return it->second;
  }
};

// Best linear unbiased predictor of the event effect,
// eta_i = tau^2 sum_j r_ij / (phi^2 + n_i tau^2), with eps_ij = r_ij - eta_i,
// so r = eta + eps holds exactly per record.
inline ResidualDecomposition decompose(const std::vector<EventGroup>& groups, double tau,
                                       double phi) {
  if (!(phi > 0.0)) throw DomainError("phi must be positive");
  if (!(tau >= 0.0)) throw DomainError("tau must be nonnegative");
  const auto stats = detail::canonical_stats(groups);
  ResidualDecomposition d;
  d.tau = tau;
  d.phi = phi;
  d.log_likelihood = detail::mll_from_stats(stats, tau, phi);
  const double t2 = tau * tau, p2 = phi * phi;
  for (const auto& s : stats) d.eta[s.event_id] = t2 * s.sum / (p2 + s.n * t2);
  d.epsilon.reserve(groups.size());
  for (const auto& g : groups) {
    std::vector<double> eps;
    eps.reserve(g.residuals.size());
    const double eta = g.residuals.empty() ? 0.0 : d.eta_for(g.event_id);
    for (double r : g.residuals) eps.push_back(r - eta);
    d.epsilon.push_back(std::move(eps));
  }
  return d;
}

// Magnitude-dependent standard deviations: plateau values below M 4.5 and
// above M 5.5, linear in between.
struct SigmaModel {
  double tau1 = 0.0;
  double tau2 = 0.0;
  double phi1 = 0.0;
  double phi2 = 0.0;
  static constexpr double kLowBreak = 4.5;
  static constexpr double kHighBreak = 5.5;

  nlohmann::json to_json() const {
    return {{"tau1", tau1}, {"tau2", tau2}, {"phi1", phi1}, {"phi2", phi2},
            {"breakpoints", {kLowBreak, kHighBreak}}};
  }
};

struct BuiltinSigmaModels {
  SigmaModel pga;
  SigmaModel pgv;
};

// Published magnitude-dependent sigma values for the two intensity measures.
inline BuiltinSigmaModels builtin_sigma_models() {
  return {{0.511, 0.392, 0.756, 0.576}, {0.374, 0.438, 0.670, 0.547}};
}

inline std::pair<double, double> sigma_at_magnitude(const SigmaModel& model, double m) {
  if (!std::isfinite(m)) throw DomainError("magnitude must be finite");
  auto interp = [&](double v1, double v2) {
    if (m <= SigmaModel::kLowBreak) return v1;
    if (m >= SigmaModel::kHighBreak) return v2;
    const double t = (m - SigmaModel::kLowBreak) / (SigmaModel::kHighBreak - SigmaModel::kLowBreak);
    return v1 + (v2 - v1) * t;
  };
  return {interp(model.tau1, model.tau2), interp(model.phi1, model.phi2)};
}

// Plateau estimates from a decomposition: tau bins are sample SDs of the
// event effects with M <= 4.5 / M >= 5.5; phi bins are sample SDs of the
// intra-event residuals of records whose event magnitude falls in the same
// ranges. Transition-zone events (4.5 < M < 5.5) are excluded. Each bin
// needs at least 2 values; EstimationError names the offending bin.
inline SigmaModel fit_sigma_model(const std::vector<EventGroup>& groups,
                                  const ResidualDecomposition& decomposition) {
  std::vector<double> eta_low, eta_high, eps_low, eps_high;
  for (std::size_t gi = 0; gi < groups.size(); ++gi) {
    const auto& g = groups[gi];
    if (g.residuals.empty()) continue;
    const bool low = g.m_w <= SigmaModel::kLowBreak;
    const bool high = g.m_w >= SigmaModel::kHighBreak;
    if (!low && !high) continue;
    const double eta = decomposition.eta_for(g.event_id);
    auto& eta_bin = low ? eta_low : eta_high;
    auto& eps_bin = low ? eps_low : eps_high;
    eta_bin.push_back(eta);
    if (gi >= decomposition.epsilon.size() ||
        decomposition.epsilon[gi].size() != g.residuals.size())
      throw KeyingError("decomposition does not align with the event groups");
    for (double e : decomposition.epsilon[gi]) eps_bin.push_back(e);
  }
  auto need = [](const std::vector<double>& v, const char* bin) {
    if (v.size() < 2)
      throw EstimationError(std::string("sigma bin ") + bin + " needs at least 2 values, has " +
                            std::to_string(v.size()));
  };
  need(eta_low, "tau1 (M <= 4.5)");
  need(eta_high, "tau2 (M >= 5.5)");
  need(eps_low, "phi1 (M <= 4.5)");
  need(eps_high, "phi2 (M >= 5.5)");
  return {sample_sd(eta_low), sample_sd(eta_high), sample_sd(eps_low), sample_sd(eps_high)};
}

enum class BinSpacing { Linear, Log };

struct BinStat {
  double center = 0.0;
  double mean = 0.0;
  double sd = 0.0;
  std::size_t count = 0;
};

// Per-bin arithmetic mean and sample SD of values, binned by a covariate
// over [edges[i], edges[i+1]) (last bin closed). Bin centers are geometric
// for Log spacing, arithmetic midpoints for Linear. Values whose covariate
// falls outside the edges are ignored; empty bins are emitted with count 0.
inline std::vector<BinStat> binned_residual_stats(const std::vector<double>& values,
                                                  const std::vector<double>& by,
                                                  const std::vector<double>& edges,
                                                  BinSpacing spacing = BinSpacing::Log) {
  if (values.size() != by.size()) throw DomainError("values and bin covariate differ in length");
  if (edges.size() < 2) throw ConfigError("binning needs at least 2 edges");
  for (std::size_t i = 1; i < edges.size(); ++i) {
    if (!(edges[i] > edges[i - 1])) throw ConfigError("bin edges must be strictly increasing");
    if (spacing == BinSpacing::Log && !(edges[i - 1] > 0.0))
      throw ConfigError("log-spaced bin edges must be positive");
  }
  const std::size_t n_bins = edges.size() - 1;
  std::vector<std::vector<double>> buckets(n_bins);
  for (std::size_t i = 0; i < values.size(); ++i) {
    const double x = by[i];
    if (!(x >= edges.front()) || !(x <= edges.back())) continue;
    std::size_t b = static_cast<std::size_t>(
        std::upper_bound(edges.begin(), edges.end(), x) - edges.begin());
    b = (b == 0) ? 0 : b - 1;
    if (b >= n_bins) b = n_bins - 1;
    buckets[b].push_back(values[i]);
  }
  std::vector<BinStat> out(n_bins);
  for (std::size_t b = 0; b < n_bins; ++b) {
    out[b].center = spacing == BinSpacing::Log ? std::sqrt(edges[b] * edges[b + 1])
                                               : 0.5 * (edges[b] + edges[b + 1]);
    out[b].count = buckets[b].size();
    out[b].mean = sample_mean(buckets[b]);
    out[b].sd = sample_sd(buckets[b]);
  }
  return out;
}

} // namespace gmsl
