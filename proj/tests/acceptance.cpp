// Acceptance gate: one line per criterion, tolerances pinned in code.
// Usage: acceptance <path-to-gmsl-cli> <path-to-data-dir>
// Exit status is the number of failed criteria.

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <iostream>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <sys/wait.h>
#include <unistd.h>

#include <Eigen/Dense>

#include "gmsl/pipeline.hpp"

using namespace gmsl;
namespace fs = std::filesystem;

namespace {

std::string g_cli;
fs::path g_data_dir;
fs::path g_work;

// State shared between criteria: the criterion-1 dataset is reused by 3 and 9.
fs::path g_synth_csv;
std::vector<GroundMotionRecord> g_records;

int run_cli(const std::string& args) {
  const int rc = std::system((g_cli + " " + args + " >/dev/null 2>&1").c_str());
  if (rc == -1) throw DomainError("failed to launch the CLI");
  return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw DomainError("cannot read " + p.string());
  std::ostringstream out;
  out << in.rdbuf();
  return out.str();
}

std::string fmt(double v, int precision = 3) {
  std::ostringstream out;
  out << std::setprecision(precision) << v;
  return out.str();
}

// The seven published PGA terms and coefficients, written out by hand so the
// check does not lean on the library's own builtin table.
const std::vector<std::pair<std::string, double>> kPgaTruth = {
    {"M_w", 16.101},  {"R_JB", -0.005},        {"ln(M_w)", -31.611},      {"ln(v)", -0.543},
    {"M_w^2", -0.871}, {"ln(R_JB+10)", -2.335}, {"M_w*ln(R_JB+10)", 0.185}};

bool coefficient_close(double truth, double fitted, double& err_out) {
  if (std::abs(truth) > 0.1) {
    err_out = std::abs(fitted - truth) / std::abs(truth);
    return err_out <= 0.05;
  }
  err_out = std::abs(fitted - truth);
  return err_out <= 0.005;
}

// ---------------------------------------------------------------------------
// 1. Sparse recovery through the CLI: tau=0, phi=0.1, 5000 records.

bool criterion_sparse_recovery(std::string& detail) {
  const fs::path dir = g_work / "c1";
  fs::create_directories(dir);
  if (run_cli("synth --out " + dir.string() +
              " --seed 20260816 --events 250 --records-per-event 20 --tau 0 --phi 0.1") != 0) {
    detail = "synth subcommand failed";
    return false;
  }
  g_synth_csv = dir / "synth.csv";

  const auto t0 = std::chrono::steady_clock::now();
  const int rc = run_cli("fit --in " + g_synth_csv.string() + " --out " + (dir / "fit").string());
  const double seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  if (rc != 0) {
    detail = "fit subcommand failed";
    return false;
  }

  const auto model = nlohmann::json::parse(slurp(dir / "fit" / "model.json"));
  if (model.at("n_records").get<int>() != 5000) {
    detail = "expected 5000 records, got " + model.at("n_records").dump();
    return false;
  }
  const auto coeffs = model.at("equation").at("coefficients");
  if (coeffs.size() != kPgaTruth.size()) {
    detail = "support has " + std::to_string(coeffs.size()) + " terms, expected 7";
    return false;
  }
  double worst = 0.0;
  for (const auto& [term, truth] : kPgaTruth) {
    if (!coeffs.contains(term)) {
      detail = "missing term " + term;
      return false;
    }
    double err = 0.0;
    if (!coefficient_close(truth, coeffs.at(term).get<double>(), err)) {
      detail = term + " off by " + fmt(err) + " (limit 5% rel / 0.005 abs)";
      return false;
    }
    worst = std::max(worst, err);
  }
  const double constant_err = std::abs(model.at("equation").at("constant").get<double>());
  if (constant_err > 0.005) {
    detail = "constant off by " + fmt(constant_err) + " (limit 0.005)";
    return false;
  }
  if (seconds >= 10.0) {
    detail = "fit took " + fmt(seconds) + " s (limit 10 s)";
    return false;
  }
  detail = "7-term support exact, worst coefficient error " + fmt(worst * 100.0) +
           "% (limit 5% rel / 0.005 abs), fit " + fmt(seconds) + " s (limit 10 s)";
  return true;
}

// ---------------------------------------------------------------------------
// 2. Noiseless exactness at every plateau threshold.

bool criterion_noiseless_exactness(std::string& detail) {
  SynthSpec spec;
  spec.truth = builtin_models().pga;
  spec.n_events = 250;
  spec.records_per_event = {20, 20};
  spec.tau = 0.0;
  spec.phi = 0.0;
  spec.seed = 91;
  const auto records = generate(spec);
  const auto matrix = build_design_matrix(records, default_library(), IntensityMeasure::PGA);
  const auto sweep = threshold_sweep(matrix, 1e-7, default_delta_grid());

  std::size_t plateau = 0;
  double worst = 0.0;
  for (const auto& p : sweep.points) {
    if (!p.model || p.model->physical.n_terms() != spec.truth.n_terms()) continue;
    for (const auto& [term, truth] : spec.truth.coefficients) {
      const auto it = p.model->physical.coefficients.find(term);
      if (it == p.model->physical.coefficients.end()) {
        detail = "plateau point at delta " + fmt(p.delta) + " misses a truth term";
        return false;
      }
      worst = std::max(worst, std::abs(it->second - truth));
    }
    worst = std::max(worst, std::abs(p.model->physical.constant - spec.truth.constant));
    ++plateau;
  }
  if (plateau == 0) {
    detail = "sweep never reached a 7-term model";
    return false;
  }
  if (worst > 1e-6) {
    detail = "worst coefficient error " + fmt(worst) + " (limit 1e-6)";
    return false;
  }
  detail = "7-term plateau spans " + std::to_string(plateau) +
           " thresholds, worst coefficient error " + fmt(worst) + " (limit 1e-6 absolute)";
  return true;
}

// ---------------------------------------------------------------------------
// 3. Threshold sweep shape on the criterion-1 dataset.

bool criterion_sweep_shape(std::string& detail) {
  if (g_records.empty()) {
    const auto ds = pipeline::load_dataset(g_synth_csv.string(), Config{});
    g_records = ds.records;
  }
  const auto matrix = build_design_matrix(g_records, default_library(), IntensityMeasure::PGA);
  const auto sweep = threshold_sweep(matrix, 1e-7, default_delta_grid());
  if (!sweep.monotonicity_violations.empty()) {
    detail = "n_terms increased at " + std::to_string(sweep.monotonicity_violations.size()) +
             " grid points";
    return false;
  }
  std::size_t first = sweep.points.size(), last = 0, count = 0;
  for (std::size_t i = 0; i < sweep.points.size(); ++i) {
    if (sweep.points[i].n_terms != 7) continue;
    first = std::min(first, i);
    last = i;
    ++count;
  }
  if (count < 3 || count != last - first + 1) {
    detail = "no consecutive 7-term plateau of length >= 3 (found " + std::to_string(count) + ")";
    return false;
  }
  const std::size_t sel = select_threshold_index(sweep);
  if (sel < first || sel > last) {
    detail = "selected index " + std::to_string(sel) + " outside plateau [" +
             std::to_string(first) + ", " + std::to_string(last) + "]";
    return false;
  }
  detail = "n_terms non-increasing, 7-term plateau spans " + std::to_string(count) +
           " grid points (needs >= 3), selection lands inside it";
  return true;
}

// ---------------------------------------------------------------------------
// 4. Ridge solutions against an augmented-system SVD solve.

bool criterion_ridge_oracle(std::string& detail) {
  PortableRng rng(777);
  const int m = 200, n = 12;
  const double lambdas[] = {0.0, 1e-7, 1e-3, 1.0};
  double worst = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    Eigen::MatrixXd theta(m, n);
    for (int i = 0; i < m; ++i)
      for (int j = 0; j < n; ++j) theta(i, j) = rng.normal01();
    Eigen::VectorXd xi_true(n);
    for (int j = 0; j < n; ++j) xi_true(j) = rng.normal01();
    Eigen::VectorXd y = theta * xi_true;
    for (int i = 0; i < m; ++i) y(i) += 0.01 * rng.normal01();
    const double lambda = lambdas[trial % 4];

    const Eigen::VectorXd xi = ridge_solve(theta, y, lambda);

    Eigen::MatrixXd aug = Eigen::MatrixXd::Zero(m + n, n);
    aug.topRows(m) = theta;
    aug.bottomRows(n) = std::sqrt(lambda) * Eigen::MatrixXd::Identity(n, n);
    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(m + n);
    rhs.head(m) = y;
    const Eigen::VectorXd oracle =
        aug.jacobiSvd(Eigen::ComputeThinU | Eigen::ComputeThinV).solve(rhs);

    const double rel = (xi - oracle).norm() / oracle.norm();
    worst = std::max(worst, rel);
    if (rel > 1e-6) {
      detail = "trial " + std::to_string(trial) + " (lambda " + fmt(lambda) +
               ") relative error " + fmt(rel) + " (limit 1e-6)";
      return false;
    }
  }
  detail = "100 systems (m=200, n=12), worst relative error " + fmt(worst) +
           " vs augmented-system SVD (limit 1e-6)";
  return true;
}

// ---------------------------------------------------------------------------
// 5. Mixed-effects likelihood and estimator on small instances.

double dense_mvn_ll(const std::vector<EventGroup>& groups, double tau, double phi) {
  constexpr double ln2pi = 1.8378770664093454835606594728112;
  double ll = 0.0;
  for (const auto& g : groups) {
    const auto k = static_cast<Eigen::Index>(g.residuals.size());
    if (k == 0) continue;
    Eigen::MatrixXd cov = Eigen::MatrixXd::Constant(k, k, tau * tau);
    cov.diagonal().array() += phi * phi;
    Eigen::VectorXd r(k);
    for (Eigen::Index i = 0; i < k; ++i) r(i) = g.residuals[static_cast<std::size_t>(i)];
    const Eigen::LLT<Eigen::MatrixXd> llt(cov);
    const double logdet = 2.0 * llt.matrixL().toDenseMatrix().diagonal().array().log().sum();
    const double quad = r.dot(llt.solve(r));
    ll += -0.5 * (static_cast<double>(k) * ln2pi + logdet + quad);
  }
  return ll;
}

std::vector<EventGroup> simulate_groups(int n_events, const std::vector<int>& counts, double tau,
                                        double phi, std::uint64_t seed) {
  PortableRng rng(seed);
  std::vector<EventGroup> groups;
  std::size_t rec = 0;
  for (int e = 0; e < n_events; ++e) {
    EventGroup g;
    g.event_id = "E" + std::to_string(e);
    g.m_w = 5.0;
    const double eta = tau * rng.normal01();
    const int k = counts[static_cast<std::size_t>(e) % counts.size()];
    for (int j = 0; j < k; ++j) {
      g.residuals.push_back(eta + phi * rng.normal01());
      g.record_index.push_back(rec++);
    }
    groups.push_back(std::move(g));
  }
  return groups;
}

bool criterion_mixedfx_oracle(std::string& detail) {
  struct Instance {
    int n_events;
    std::vector<int> counts;
    double tau, phi;
    std::uint64_t seed;
  };
  const std::vector<Instance> instances = {
      {2, {2, 3}, 0.3, 0.5, 1},  {3, {5, 5, 5}, 0.7, 0.3, 2}, {3, {1, 2, 5}, 0.1, 1.0, 3},
      {2, {5, 4}, 0.0, 0.6, 4},  {3, {3, 4, 5}, 1.5, 0.2, 5},
  };
  double worst_ll = 0.0, worst_param = 0.0;
  for (const auto& inst : instances) {
    const auto groups = simulate_groups(inst.n_events, inst.counts, inst.tau, inst.phi, inst.seed);

    for (double tau : {0.0, 0.2, 0.7, 1.3})
      for (double phi : {0.3, 0.8, 1.2}) {
        const double diff =
            std::abs(marginal_log_likelihood(groups, tau, phi) - dense_mvn_ll(groups, tau, phi));
        worst_ll = std::max(worst_ll, diff);
        if (diff > 1e-10) {
          detail = "marginal likelihood off by " + fmt(diff) + " at tau " + fmt(tau) + ", phi " +
                   fmt(phi) + " (limit 1e-10)";
          return false;
        }
      }

    // Grid-search argmax at 1e-3 resolution: coarse pass, then a fine pass
    // around the coarse winner.
    auto grid_best = [&](double t_lo, double t_hi, double p_lo, double p_hi, double step) {
      double best_ll = -std::numeric_limits<double>::infinity();
      std::pair<double, double> best{0.0, 0.0};
      for (double t = t_lo; t <= t_hi + step / 2; t += step)
        for (double p = std::max(p_lo, step); p <= p_hi + step / 2; p += step) {
          const double ll = marginal_log_likelihood(groups, t, p);
          if (ll > best_ll) {
            best_ll = ll;
            best = {t, p};
          }
        }
      return std::pair<std::pair<double, double>, double>{best, best_ll};
    };
    const auto [coarse, coarse_ll] = grid_best(0.0, 3.0, 0.01, 3.0, 0.01);
    const auto [argmax, grid_ll] =
        grid_best(std::max(0.0, coarse.first - 0.015), coarse.first + 0.015,
                  std::max(0.001, coarse.second - 0.015), coarse.second + 0.015, 0.001);

    const VarianceEstimate est = estimate_variance_components(groups);
    const double dt = std::abs(est.tau - argmax.first);
    const double dp = std::abs(est.phi - argmax.second);
    worst_param = std::max({worst_param, dt, dp});
    if (dt > 2e-3 || dp > 2e-3) {
      detail = "estimate (" + fmt(est.tau, 6) + ", " + fmt(est.phi, 6) + ") vs grid argmax (" +
               fmt(argmax.first, 6) + ", " + fmt(argmax.second, 6) + ") differs by more than 2e-3";
      return false;
    }
    if (est.log_likelihood < grid_ll - 1e-9) {
      detail = "estimator likelihood below the grid optimum by " +
               fmt(grid_ll - est.log_likelihood);
      return false;
    }
  }
  detail = "5 instances (<=3 events, <=5 records): likelihood matches dense MVN to " +
           fmt(worst_ll) + " (limit 1e-10), estimates within " + fmt(worst_param) +
           " of the 1e-3 grid argmax (limit 2e-3)";
  return true;
}

// ---------------------------------------------------------------------------
// 6. Variance recovery and the exact decomposition identity.

bool criterion_variance_recovery(std::string& detail) {
  const auto groups = simulate_groups(200, {20}, 0.4, 0.6, 60);
  const VarianceEstimate est = estimate_variance_components(groups);
  if (std::abs(est.tau - 0.4) > 0.05 || std::abs(est.phi - 0.6) > 0.05) {
    detail = "estimates (" + fmt(est.tau) + ", " + fmt(est.phi) +
             ") outside truth (0.4, 0.6) +/- 0.05";
    return false;
  }
  const auto dec = decompose(groups, est.tau, est.phi);
  double worst = 0.0;
  for (std::size_t g = 0; g < groups.size(); ++g) {
    const double eta = dec.eta_for(groups[g].event_id);
    for (std::size_t j = 0; j < groups[g].residuals.size(); ++j)
      worst = std::max(worst,
                       std::abs(groups[g].residuals[j] - (eta + dec.epsilon[g][j])));
  }
  if (worst > 1e-12) {
    detail = "identity r = eta + eps violated by " + fmt(worst) + " (limit 1e-12)";
    return false;
  }
  detail = "tau " + fmt(est.tau) + ", phi " + fmt(est.phi) +
           " within +/- 0.05 of (0.4, 0.6); identity residual " + fmt(worst) +
           " over 4000 records (limit 1e-12)";
  return true;
}

// ---------------------------------------------------------------------------
// 7. Magnitude-dependent sigma fixtures.

bool criterion_sigma_fixtures(std::string& detail) {
  const auto models = builtin_sigma_models();
  // Eight published plateau values, checked exactly on both sides of each
  // plateau (at the breakpoint and well past it).
  const struct {
    const SigmaModel& model;
    double m_edge, m_deep;
    std::pair<double, double> want;
  } plateau[] = {
      {models.pga, 4.5, 3.0, {0.511, 0.756}}, {models.pga, 5.5, 7.5, {0.392, 0.576}},
      {models.pgv, 4.5, 3.0, {0.374, 0.670}}, {models.pgv, 5.5, 7.5, {0.438, 0.547}},
  };
  for (const auto& row : plateau) {
    if (sigma_at_magnitude(row.model, row.m_edge) != row.want ||
        sigma_at_magnitude(row.model, row.m_deep) != row.want) {
      detail = "plateau value mismatch at M " + fmt(row.m_edge);
      return false;
    }
  }
  const auto mid = sigma_at_magnitude(models.pga, 5.0);
  if (std::abs(mid.first - 0.4515) > 1e-12 || std::abs(mid.second - 0.666) > 1e-12) {
    detail = "M 5.0 PGA midpoint (" + fmt(mid.first, 10) + ", " + fmt(mid.second, 10) +
             ") != (0.4515, 0.666) to 1e-12";
    return false;
  }
  double worst = 0.0;
  for (const SigmaModel* m : {&models.pga, &models.pgv})
    for (double brk : {4.5, 5.5}) {
      const auto a = sigma_at_magnitude(*m, brk - 1e-10);
      const auto b = sigma_at_magnitude(*m, brk + 1e-10);
      worst = std::max({worst, std::abs(a.first - b.first), std::abs(a.second - b.second)});
    }
  if (worst > 1e-9) {
    detail = "breakpoint discontinuity " + fmt(worst) + " (limit 1e-9)";
    return false;
  }
  detail = "8 plateau values exact, M 5.0 PGA midpoint (0.4515, 0.666) to 1e-12, breakpoint "
           "continuity " + fmt(worst) + " (limit 1e-9)";
  return true;
}

// ---------------------------------------------------------------------------
// 8. Builtin equations against independently coded arithmetic.

double pga_by_hand(double m, double r, double v) {
  const double nu = v / 1500.0;
  return 16.101 * m - 0.005 * r - 31.611 * std::log(m) - 0.543 * std::log(nu) -
         0.871 * m * m - 2.335 * std::log(r + 10.0) + 0.185 * m * std::log(r + 10.0);
}

double pgv_by_hand(double m, double r, double v) {
  const double nu = v / 1500.0;
  return 8.986 * m + 0.002 * r - 7.491 * nu - 14.612 * std::log(m) + 0.618 * std::log(nu) -
         0.507 * m * m + 4.094 * nu * nu - 2.914 * std::log(r + 10.0) +
         0.245 * m * std::log(r + 10.0);
}

bool criterion_builtin_evaluation(std::string& detail) {
  const auto models = builtin_models();
  double worst = 0.0;
  int points = 0;
  for (double m : {4.0, 5.0, 6.0, 7.0, 7.5})
    for (double r : {5.0, 120.0})
      for (double v : {255.0, 1130.0}) {
        worst = std::max(worst, std::abs(predict(models.pga, m, r, v) - pga_by_hand(m, r, v)));
        worst = std::max(worst, std::abs(predict(models.pgv, m, r, v) - pgv_by_hand(m, r, v)));
        ++points;
      }
  if (worst > 1e-9) {
    detail = "prediction differs from hand arithmetic by " + fmt(worst) + " (limit 1e-9)";
    return false;
  }
  const double pga_spot = predict(models.pga, 6.0, 10.0, 760.0);
  const double pgv_spot = predict(models.pgv, 6.0, 10.0, 760.0);
  if (std::abs(pga_spot - 5.262) > 0.005 || std::abs(pgv_spot - 2.012) > 0.005) {
    detail = "spot values (" + fmt(pga_spot, 6) + ", " + fmt(pgv_spot, 6) +
             ") not within 0.005 of (5.262, 2.012)";
    return false;
  }
  if (std::abs(pga_spot - 5.260106144047095) > 1e-9 ||
      std::abs(pgv_spot - 2.0123291140620623) > 1e-9) {
    detail = "spot values drifted from their frozen oracles";
    return false;
  }
  // The shipped fixture files must encode the same models.
  for (const auto& [name, model] :
       {std::pair{"builtin_pga.json", &models.pga}, std::pair{"builtin_pgv.json", &models.pgv}}) {
    const auto eq = equation_from_json(nlohmann::json::parse(slurp(g_data_dir / name)));
    if (eq.coefficients != model->coefficients || eq.constant != model->constant) {
      detail = std::string(name) + " does not match the builtin model";
      return false;
    }
  }
  detail = std::to_string(2 * points) + " scenario predictions within " + fmt(worst) +
           " of hand-coded arithmetic (limit 1e-9); spot values at (M 6, R 10, V 760) match";
  return true;
}

// ---------------------------------------------------------------------------
// 9. Far-field-trained model extrapolated into the near field.

bool criterion_extrapolation(std::string& detail) {
  if (g_records.empty()) {
    detail = "criterion 1 dataset unavailable";
    return false;
  }
  const PhysicalEquation truth = builtin_models().pga;
  std::vector<GroundMotionRecord> far;
  for (const auto& r : g_records)
    if (r.r_jb >= 30.0) far.push_back(r);

  auto fit_records = [&](const std::vector<GroundMotionRecord>& recs) {
    const auto matrix = build_design_matrix(recs, default_library(), IntensityMeasure::PGA);
    const auto sweep = threshold_sweep(matrix, 1e-7, default_delta_grid());
    return sweep.points[select_threshold_index(sweep)].model->physical;
  };
  const PhysicalEquation full = fit_records(g_records);
  const PhysicalEquation far_eq = fit_records(far);

  double worst = 0.0;
  for (double m : {4.0, 5.0, 6.0, 7.0})
    for (double r : linear_spaced(0.5, 29.5, 59))
      worst = std::max(worst, std::abs(predict(far_eq, m, r, 760.0) - predict(truth, m, r, 760.0)));
  if (worst > 0.2) {
    detail = "far-trained model misses truth by " + fmt(worst) + " ln units (limit 0.2)";
    return false;
  }
  for (double m : {4.0, 5.0, 6.0, 7.0}) {
    for (const auto& [label, eq] : {std::pair{"full", &full}, std::pair{"far", &far_eq}}) {
      const double slope = near_field_slope(*eq, m, 760.0);
      const double bound = saturation_bound(*eq, m);
      if (slope > bound + 1e-9) {
        detail = std::string(label) + " model slope " + fmt(slope) + " exceeds bound " +
                 fmt(bound) + " at M " + fmt(m);
        return false;
      }
    }
  }
  detail = "far-trained (R >= 30 km, " + std::to_string(far.size()) +
           " records) within " + fmt(worst) +
           " ln units of truth in the near field (limit 0.2); slopes within the analytic bound";
  return true;
}

// ---------------------------------------------------------------------------
// 10. Round trips.

bool criterion_round_trips(std::string& detail) {
  // (a) synth -> CSV -> ingest is lossless.
  SynthSpec spec;
  spec.truth = builtin_models().pga;
  spec.n_events = 50;
  spec.records_per_event = {8, 8};
  spec.tau = 0.3;
  spec.phi = 0.5;
  spec.seed = 3030;
  const auto records = generate(spec);
  std::ostringstream csv;
  write_records_csv(csv, records, {"round trip"});
  std::istringstream csv_in(csv.str());
  const auto parsed = parse_flatfile(csv_in);
  if (parsed.records.size() != records.size() ||
      records_hash(parsed.records) != records_hash(records)) {
    detail = "CSV round trip altered the records";
    return false;
  }

  // (b) normalized and denormalized predictions agree.
  double worst = 0.0;
  for (NormMode mode : {NormMode::MaxAbs, NormMode::MinMax, NormMode::ZScore, NormMode::None}) {
    const auto matrix = build_design_matrix(records, default_library(), IntensityMeasure::PGA, mode);
    const Eigen::VectorXd xi = ridge_solve(matrix.theta, matrix.y, 1e-7);
    const PhysicalEquation eq = denormalize_coefficients(xi, matrix);
    const Eigen::VectorXd normed = matrix.theta * xi;
    for (std::size_t i = 0; i < records.size(); ++i)
      worst = std::max(worst, std::abs(normed(static_cast<Eigen::Index>(i)) -
                                       predict(eq, records[i])));
  }
  if (worst > 1e-10) {
    detail = "normalize/denormalize predictions differ by " + fmt(worst) + " (limit 1e-10)";
    return false;
  }

  // (c) identical seeds give byte-identical CLI outputs.
  const fs::path a = g_work / "c10a", b = g_work / "c10b";
  for (const auto& dir : {a, b}) {
    fs::create_directories(dir);
    if (run_cli("synth --out " + dir.string() + " --seed 11 --events 40 --records-per-event 6 "
                "--tau 0.3 --phi 0.4") != 0 ||
        run_cli("fit --in " + (dir / "synth.csv").string() + " --out " + (dir / "fit").string()) !=
            0) {
      detail = "CLI replay run failed";
      return false;
    }
  }
  if (slurp(a / "synth.csv") != slurp(b / "synth.csv") ||
      slurp(a / "fit" / "model.json") != slurp(b / "fit" / "model.json") ||
      slurp(a / "fit" / "sweep.csv") != slurp(b / "fit" / "sweep.csv")) {
    detail = "identical seeds produced different bytes";
    return false;
  }
  detail = "CSV round trip lossless (400 records); normalized vs physical predictions agree to " +
           fmt(worst) + " (limit 1e-10) across 4 norm modes; same-seed CLI outputs byte-identical";
  return true;
}

// ---------------------------------------------------------------------------
// 11. Optional real-data check.

bool criterion_real_data(std::string& detail, bool& skipped) {
  const char* path = std::getenv("GMSL_REAL_FLATFILE");
  if (path == nullptr) {
    skipped = true;
    detail = "optional; set GMSL_REAL_FLATFILE to a real flatfile to enable";
    return true;
  }
  const auto ds = pipeline::load_dataset(path, Config{});
  const double n_rec = static_cast<double>(ds.records.size());
  std::set<std::string> events;
  for (const auto& r : ds.records) events.insert(r.event_id);
  const double n_ev = static_cast<double>(events.size());
  if (std::abs(n_rec - 15175.0) > 0.02 * 15175.0 || std::abs(n_ev - 282.0) > 0.02 * 282.0) {
    detail = "ingest kept " + std::to_string(ds.records.size()) + " records / " +
             std::to_string(events.size()) + " events (expected 15175 / 282 +/- 2%)";
    return false;
  }
  const auto matrix = build_design_matrix(ds.records, default_library(), IntensityMeasure::PGA);
  const auto sweep = threshold_sweep(matrix, 1e-7, default_delta_grid());
  const auto& sel = sweep.points[select_threshold_index(sweep)];
  if (sel.n_terms != 7) {
    detail = "PGA fit selected " + std::to_string(sel.n_terms) + " terms (expected 7)";
    return false;
  }
  detail = "ingest counts within 2% and the PGA fit plateaus at 7 terms";
  return true;
}

} // namespace

int main(int argc, char** argv) {
  if (argc < 3) {
    std::cerr << "usage: acceptance <gmsl-cli> <data-dir>\n";
    return 64;
  }
  g_cli = argv[1];
  g_data_dir = argv[2];
  g_work = fs::temp_directory_path() / ("gmsl_acceptance_" + std::to_string(::getpid()));
  fs::remove_all(g_work);
  fs::create_directories(g_work);

  struct Criterion {
    int id;
    const char* name;
    std::function<bool(std::string&, bool&)> run;
  };
  auto plain = [](bool (*f)(std::string&)) {
    return [f](std::string& d, bool&) { return f(d); };
  };
  const std::vector<Criterion> criteria = {
      {1, "sparse recovery", plain(criterion_sparse_recovery)},
      {2, "noiseless exactness", plain(criterion_noiseless_exactness)},
      {3, "threshold sweep shape", plain(criterion_sweep_shape)},
      {4, "ridge oracle", plain(criterion_ridge_oracle)},
      {5, "mixed-effects oracle", plain(criterion_mixedfx_oracle)},
      {6, "variance recovery", plain(criterion_variance_recovery)},
      {7, "sigma model fixtures", plain(criterion_sigma_fixtures)},
      {8, "builtin evaluation", plain(criterion_builtin_evaluation)},
      {9, "extrapolation property", plain(criterion_extrapolation)},
      {10, "round trips", plain(criterion_round_trips)},
      {11, "real-data check", criterion_real_data},
  };

  int failures = 0, skips = 0;
  for (const auto& c : criteria) {
    std::string detail;
    bool skipped = false;
    bool ok = false;
    try {
      ok = c.run(detail, skipped);
    } catch (const std::exception& e) {
      detail = std::string("exception: ") + e.what();
    }
    const char* verdict = skipped ? "SKIP" : ok ? "PASS" : "FAIL";
    if (!ok && !skipped) ++failures;
    if (skipped) ++skips;
    std::cout << "criterion " << std::setw(2) << c.id << " " << verdict << "  " << c.name << ": "
              << detail << "\n";
  }
  std::cout << "acceptance: " << (criteria.size() - failures - skips) << " passed, " << failures
            << " failed, " << skips << " skipped\n";
  fs::remove_all(g_work);
  return failures;
}
