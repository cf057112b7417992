#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "gmsl/design.hpp"
#include "gmsl/equation.hpp"
#include "gmsl/errors.hpp"
#include "gmsl/numeric.hpp"

namespace gmsl {

struct SolverConfig {
  double lambda = 1e-7;  // ridge regularization factor
  double delta = 0.0;    // coefficient threshold on normalized columns
  int max_iterations = 25;
  bool final_refit_unregularized = true;

  void validate() const {
    if (!(lambda >= 0.0)) throw ConfigError("lambda must be nonnegative");
    if (!(delta >= 0.0)) throw ConfigError("delta must be nonnegative");
    if (max_iterations < 1) throw ConfigError("max_iterations must be positive");
  }
};

struct FitStats {
  double rss = 0.0;
  double r_squared = 0.0;
  int n_terms = 0;
};

// Result of one sparse fit: normalized coefficients (exact zeros off the
// support), the denormalized physical equation, and the support trace of the
// thresholding iterations.
struct SparseModel {
  Eigen::VectorXd xi_normalized;
  std::vector<int> support;  // ascending active column indices
  PhysicalEquation physical;
  FitStats fit_stats;
  SolverConfig config;
  std::vector<std::vector<int>> iteration_supports;
};

namespace detail {

// Normal-equation system theta'theta, theta'y, built once and solved many
// times on column subsets.
class GramSystem {
 public:
  GramSystem(const Eigen::MatrixXd& theta, const Eigen::VectorXd& y)
      : theta_(theta), y_(y), gram_(theta.cols(), theta.cols()), rhs_(theta.cols()) {
    if (theta.rows() < 1 || theta.cols() < 1) throw DomainError("design matrix must be at least 1x1");
    if (y.size() != theta.rows()) throw DomainError("target length does not match the design matrix");
    if (!theta.allFinite() || !y.allFinite()) throw DomainError("design matrix entries must be finite");
    gram_.setZero();
    gram_.selfadjointView<Eigen::Lower>().rankUpdate(theta.transpose());
    gram_ = gram_.selfadjointView<Eigen::Lower>();
    rhs_.noalias() = theta.transpose() * y;
  }

  Eigen::Index n() const { return gram_.cols(); }

  // Solves (G_SS + lambda I) x = b_S by LDLT with one refinement step.
  // The normal-equation residual must come out below 1e-8 * ||b_S||;
  // otherwise the system is singular (lambda = 0) or hopelessly conditioned.
  Eigen::VectorXd solve_subset(const std::vector<int>& support, double lambda) const {
    const auto k = static_cast<Eigen::Index>(support.size());
    Eigen::MatrixXd a(k, k);
    Eigen::VectorXd b(k);
    for (Eigen::Index p = 0; p < k; ++p) {
      b(p) = rhs_(support[static_cast<std::size_t>(p)]);
      for (Eigen::Index q = 0; q < k; ++q)
        a(p, q) = gram_(support[static_cast<std::size_t>(p)], support[static_cast<std::size_t>(q)]);
      a(p, p) += lambda;
    }
    Eigen::LDLT<Eigen::MatrixXd> ldlt(a);
    // Eigen's LDLT clamps near-zero pivots instead of failing, so singularity
    // is read off the pivots: the Gram matrix is positive definite exactly
    // when every D entry is positive and none collapses relative to the
    // largest.
    const Eigen::VectorXd d = ldlt.vectorD();
    if (lambda == 0.0 &&
        (!(d.minCoeff() > 0.0) || d.minCoeff() < 1e-12 * d.maxCoeff()))
      throw RankDeficiencyError("normal equations are singular at lambda = 0; retry with lambda > 0");
    Eigen::VectorXd x = ldlt.solve(b);
    x += ldlt.solve(b - a * x);
    const double resid = (a * x - b).norm();
    const double tol = 1e-8 * b.norm();
    if (!(resid <= tol) && !(resid == 0.0)) {
      if (lambda == 0.0)
        throw RankDeficiencyError("normal equations are singular at lambda = 0; retry with lambda > 0");
      throw DomainError("normal equations too ill-conditioned at lambda = " + format_double(lambda));
    }
    return x;
  }

  Eigen::VectorXd solve_all(double lambda) const {
    std::vector<int> all(static_cast<std::size_t>(n()));
    for (std::size_t j = 0; j < all.size(); ++j) all[j] = static_cast<int>(j);
    return solve_subset(all, lambda);
  }

  // Residual sum of squares by an explicit residual pass. The quadratic-form
  // shortcut y'y - 2x'b + x'Gx cancels catastrophically when the fit is
  // near-exact, so it is never used.
  double rss(const Eigen::VectorXd& xi) const { return (y_ - theta_ * xi).squaredNorm(); }

  double total_sum_squares() const {
    const double mean = y_.mean();
    return (y_.array() - mean).square().sum();
  }

  double y_squared_norm() const { return y_.squaredNorm(); }

 private:
  const Eigen::MatrixXd& theta_;
  const Eigen::VectorXd& y_;
  Eigen::MatrixXd gram_;
  Eigen::VectorXd rhs_;
};

inline Eigen::VectorXd embed(const Eigen::VectorXd& dense, const std::vector<int>& support,
                             Eigen::Index n) {
  Eigen::VectorXd xi = Eigen::VectorXd::Zero(n);
  for (std::size_t p = 0; p < support.size(); ++p) xi(support[p]) = dense(static_cast<Eigen::Index>(p));
  return xi;
}

inline SparseModel stridge_fit_impl(const GramSystem& sys, const DesignMatrix& matrix,
                                    const SolverConfig& config) {
  config.validate();
  const Eigen::Index n = sys.n();

  std::vector<int> support(static_cast<std::size_t>(n));
  for (std::size_t j = 0; j < support.size(); ++j) support[j] = static_cast<int>(j);
  Eigen::VectorXd xi = sys.solve_all(config.lambda);

  SparseModel model;
  model.config = config;
  for (int iter = 0; iter < config.max_iterations; ++iter) {
    std::vector<int> next;
    for (Eigen::Index j = 0; j < n; ++j)
      if (std::abs(xi(j)) >= config.delta) next.push_back(static_cast<int>(j));
    if (next.empty()) throw EmptyModelError(config.delta);
    model.iteration_supports.push_back(next);
    if (next == support) break;
    support = std::move(next);
    xi = embed(sys.solve_subset(support, config.lambda), support, n);
  }
  if (config.final_refit_unregularized)
    xi = embed(sys.solve_subset(support, 0.0), support, n);

  model.xi_normalized = xi;
  model.support = support;
  model.fit_stats.n_terms = static_cast<int>(support.size());
  model.fit_stats.rss = sys.rss(xi);
  const double tss = sys.total_sum_squares();
  model.fit_stats.r_squared = tss > 0.0 ? 1.0 - model.fit_stats.rss / tss
                                        : (model.fit_stats.rss == 0.0 ? 1.0 : 0.0);
  model.physical = denormalize_coefficients(xi, matrix);
  model.physical.provenance.source = "fitted";
  model.physical.provenance.lambda = config.lambda;
  model.physical.provenance.delta = config.delta;
  model.physical.provenance.data_hash = to_hex16(matrix.data_hash);
  return model;
}

} // namespace detail

// Ridge estimate via the normal equations (theta'theta + lambda I) xi =
// theta'y with a symmetric factorization. Singular systems at lambda = 0
// raise RankDeficiencyError; callers may retry with lambda > 0.
inline Eigen::VectorXd ridge_solve(const Eigen::MatrixXd& theta, const Eigen::VectorXd& y,
                                   double lambda) {
  if (!(lambda >= 0.0)) throw ConfigError("lambda must be nonnegative");
  detail::GramSystem sys(theta, y);
  return sys.solve_all(lambda);
}

// Sequential-threshold ridge: solve ridge on all columns, then repeatedly
// keep the columns whose normalized coefficient magnitude reaches delta and
// re-solve on the survivors, stopping when the support stabilizes (at most
// max_iterations rounds). The constant column thresholds like any other
// term. With final_refit_unregularized the surviving support is re-solved at
// lambda = 0 to strip shrinkage bias. An empty support raises
// EmptyModelError carrying the delta that caused it.
inline SparseModel stridge_fit(const DesignMatrix& matrix, const SolverConfig& config) {
  detail::GramSystem sys(matrix.theta, matrix.y);
  return detail::stridge_fit_impl(sys, matrix, config);
}

struct SweepPoint {
  double delta = 0.0;
  int n_terms = 0;
  std::optional<SparseModel> model;  // absent when thresholding emptied the model
};

struct ThresholdSweep {
  std::vector<SweepPoint> points;
  double lambda = 0.0;
  double y_squared_norm = 0.0;  // scale reference for fit comparisons
  // Indices i where n_terms rose from point i-1 to i. The contract says the
  // curve is non-increasing; solver-induced violations are reported here
  // rather than hidden.
  std::vector<std::size_t> monotonicity_violations;
};

inline std::vector<double> default_delta_grid() { return log_spaced(1e-3, 10.0, 50); }

// One stridge_fit per grid point (ascending deltas required); empty-model
// outcomes become n_terms = 0 entries rather than errors.
inline ThresholdSweep threshold_sweep(const DesignMatrix& matrix, double lambda,
                                      const std::vector<double>& delta_grid,
                                      const SolverConfig& base = {}) {
  if (delta_grid.empty()) throw ConfigError("delta grid is empty");
  for (std::size_t i = 0; i < delta_grid.size(); ++i) {
    if (!(delta_grid[i] >= 0.0)) throw ConfigError("delta grid values must be nonnegative");
    if (i > 0 && !(delta_grid[i] > delta_grid[i - 1]))
      throw ConfigError("delta grid must be strictly increasing");
  }
  detail::GramSystem sys(matrix.theta, matrix.y);
  ThresholdSweep sweep;
  sweep.lambda = lambda;
  sweep.y_squared_norm = sys.y_squared_norm();
  for (double delta : delta_grid) {
    SolverConfig cfg = base;
    cfg.lambda = lambda;
    cfg.delta = delta;
    SweepPoint point;
    point.delta = delta;
    try {
      SparseModel model = detail::stridge_fit_impl(sys, matrix, cfg);
      point.n_terms = model.fit_stats.n_terms;
      point.model = std::move(model);
    } catch (const EmptyModelError&) {
      point.n_terms = 0;
    }
    sweep.points.push_back(std::move(point));
  }
  for (std::size_t i = 1; i < sweep.points.size(); ++i)
    if (sweep.points[i].n_terms > sweep.points[i - 1].n_terms)
      sweep.monotonicity_violations.push_back(i);
  return sweep;
}

// Knee selection: pick the largest threshold that still fits the data.
// Primary candidates are grid points i where n_terms dropped from point i-1,
// the model is nonempty, and its RSS stays within 2x the best RSS anywhere
// on the sweep (plus a 1e-12 * ||y||^2 floor for noiseless data); the last
// candidate wins. When no drop qualifies but the curve does drop somewhere
// (every drop underfits) and the very first point already fits, the sweep
// started inside the optimal plateau; the last point of that first plateau
// is the knee. A curve with no drop anywhere is flat and raises
// NoKneeError: the caller must pick delta manually.
inline std::size_t select_threshold_index(const ThresholdSweep& sweep) {
  if (sweep.points.size() < 2) throw DomainError("threshold selection needs a sweep with at least 2 points");
  double rss_floor = std::numeric_limits<double>::infinity();
  for (const auto& p : sweep.points)
    if (p.model) rss_floor = std::min(rss_floor, p.model->fit_stats.rss);
  const double rss_budget = 2.0 * rss_floor + 1e-12 * sweep.y_squared_norm;
  auto fits = [&](const SweepPoint& p) {
    return p.n_terms > 0 && p.model && p.model->fit_stats.rss <= rss_budget;
  };
  std::optional<std::size_t> knee;
  bool any_drop = false;
  for (std::size_t i = 1; i < sweep.points.size(); ++i) {
    const auto& p = sweep.points[i];
    if (p.n_terms < sweep.points[i - 1].n_terms) {
      any_drop = true;
      if (fits(p)) knee = i;
    }
  }
  if (!knee && any_drop && fits(sweep.points.front())) {
    std::size_t i = 0;
    while (i + 1 < sweep.points.size() &&
           sweep.points[i + 1].n_terms == sweep.points.front().n_terms &&
           fits(sweep.points[i + 1]))
      ++i;
    knee = i;
  }
  if (!knee)
    throw NoKneeError("threshold sweep has no knee: no drop in n_terms keeps the fit; pass an explicit delta");
  return *knee;
}

inline double select_threshold(const ThresholdSweep& sweep) {
  return sweep.points[select_threshold_index(sweep)].delta;
}

} // namespace gmsl
