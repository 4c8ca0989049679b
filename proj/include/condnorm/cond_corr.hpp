#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "condnorm/ar.hpp"
#include "condnorm/gam.hpp"
#include "condnorm/normalize.hpp"
#include "condnorm/timeseries.hpp"

namespace condnorm {

struct CondCorrOptions {
  // Rows a lag needs before its model is fitted.
  Eigen::Index min_rows = 50;
  // Largest AR order for the residual sieve.
  int residual_max_order = 10;
  int threads = 1;
  FitOptions fit;
};

/// Conditional correlation at one lag: a gaussian_corr_link smooth of the
/// cross-product response on z_t, with what the sieve bootstrap needs.
struct CondCorrModel {
  int lag = 1;
  SmoothModel model;
  std::vector<TermSpec> terms;
  // Grid positions t of the training rows, in time order.
  std::vector<Eigen::Index> index;
  Eigen::VectorXd response;
  CovariateRows training_rows;
  // response - fitted on the full grid, masked off the training rows.
  TimeSeries residuals;
  ArModel residual_ar;

  Eigen::Index n_used() const { return static_cast<Eigen::Index>(index.size()); }
  Eigen::VectorXd compact_residuals() const { return response - model.fitted; }
};

struct SkippedLag {
  int lag;
  std::string reason;
};

struct CondCorrSet {
  std::vector<CondCorrModel> models;
  std::vector<SkippedLag> skipped;
};

/// r_k(z) = E[y*_t y*_{t-k} | z_t] for k = 1..max_lag.
CondCorrSet conditional_acf(const NormalizedSeries& y_star, const CovariateSet& z, int max_lag,
                            const std::vector<TermSpec>& terms, const CondCorrOptions& options = {});

/// c_k(z) = E[y*_{t+k} x*_t | z_t] for k = 1..max_lag.
CondCorrSet conditional_ccf(const NormalizedSeries& x_star, const NormalizedSeries& y_star,
                            const CovariateSet& z, int max_lag, const std::vector<TermSpec>& terms,
                            const CondCorrOptions& options = {});

/// Bootstrap interval for one coverage level; 0 marks rows without a value.
struct LagInterval {
  double alpha = 0.05;
  std::vector<int> lower;
  std::vector<int> upper;
};

struct LagTimeEstimate {
  // Argmax lag per row; 0 where no lag model could be evaluated.
  std::vector<int> lag;
  Eigen::VectorXd max_correlation;
  // Per-row fitted correlation of every fitted lag; skipped lags have no column.
  Eigen::MatrixXd correlations;
  std::vector<int> lags;  // column labels of `correlations`
  std::vector<LagInterval> intervals;

  Eigen::Index rows() const { return static_cast<Eigen::Index>(lag.size()); }
  const LagInterval* interval(double alpha) const;
};

/// d_t = argmax_k c_k(z_t), ties to the smallest lag. Throws
/// EstimationError when `models` is empty.
LagTimeEstimate estimate_lag_time(const std::vector<CondCorrModel>& models,
                                  const CovariateRows& rows);

struct BootstrapOptions {
  int replicates = 1000;
  std::vector<double> alphas{0.20, 0.05};
  std::uint64_t seed = 1;
  int threads = 1;
  // Extra AR steps discarded before the residual recursion is used.
  int burn_in = 0;
  double max_drop_fraction = 0.05;
  FitOptions fit;
};

struct BootstrapResult {
  std::vector<LagInterval> intervals;  // one per alpha, same order
  int replicates = 0;
  int dropped = 0;
};

/// Sieve bootstrap of d_t at `rows`: resample the AR innovations of each
/// lag's residuals, rebuild residuals by the AR recursion, refit every lag
/// on fitted + resampled residuals, recompute d_t, and take the empirical
/// alpha/2 and 1 - alpha/2 quantiles. Replicate b draws from a stream
/// derived from (seed, b), so results do not depend on thread count.
BootstrapResult sieve_bootstrap_ci(const std::vector<CondCorrModel>& models,
                                   const CovariateRows& rows,
                                   const BootstrapOptions& options = {});

/// Attaches intervals to an estimate, widening each so it contains d_t.
void attach_intervals(LagTimeEstimate& estimate, const BootstrapResult& bootstrap);

struct LagTimeEvaluation {
  // Share of evaluated rows where the d_t-lead model exceeds every other
  // lag's fitted correlation.
  double fraction = 0.0;
  // Same, also requiring it to exceed the fit at lag d_t itself.
  double fraction_inclusive = 0.0;
  std::vector<Eigen::Index> index;    // grid positions evaluated
  Eigen::VectorXd lead_correlation;   // fitted E[y*_{t+d_t} x*_t | z_t]
  Eigen::MatrixXd lag_correlations;   // rows x lags, per-lag fits
  std::vector<int> lags;
  SmoothModel lead_model;
};

/// Fits the lead response y*_{t+d_t} x*_t on z_t and compares it with the
/// per-lag fits. `estimate` must cover every grid row of z.
LagTimeEvaluation evaluate_lag_time(const NormalizedSeries& x_star, const NormalizedSeries& y_star,
                                    const CovariateSet& z, const LagTimeEstimate& estimate,
                                    const std::vector<CondCorrModel>& models,
                                    const CondCorrOptions& options = {});

/// Covariate rows that vary one covariate over a grid of `points` values
/// spanning its observed range while holding the others at their medians.
CovariateRows median_profile(const CovariateSet& z, const std::string& covariate, int points);

}  // namespace condnorm
