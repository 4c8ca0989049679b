#pragma once

#include <vector>

#include <Eigen/Dense>

#include "condnorm/ar.hpp"
#include "condnorm/gam.hpp"
#include "condnorm/normalize.hpp"
#include "condnorm/timeseries.hpp"

namespace condnorm {

struct ImputeOptions {
  int max_order = 10;
  // Re-mask imputations below zero (physically non-negative variables).
  bool nonnegative = false;
  // Normal quantile for the approximate interval columns.
  double z_score = 1.959963984540054;
  FitOptions fit;
};

struct ImputationResult {
  // Missing entries filled; `series.imputed` marks them.
  TimeSeries series;
  // Approximate Gaussian interval; equal to the value at observed entries,
  // NaN where nothing was imputed.
  Eigen::VectorXd lower;
  Eigen::VectorXd upper;
  ConditionalNormalizer normalizer;
  ArModel ar;
  Eigen::Index rejected_negative = 0;
};

/// Fills missing y through the normalized series: normalize, fit an AR by
/// AICc, Kalman-smooth, and map smoothed values back to the original scale.
/// Covariates must be observed wherever y is missing.
ImputationResult impute_series(const TimeSeries& y, const CovariateSet& z,
                               const std::vector<TermSpec>& terms,
                               const ImputeOptions& options = {});

/// The same reconstruction with caller-supplied normalizer and AR model.
ImputationResult impute_with(const TimeSeries& y, const CovariateSet& z,
                             const ConditionalNormalizer& normalizer, const ArModel& ar,
                             const ImputeOptions& options = {});

}  // namespace condnorm
