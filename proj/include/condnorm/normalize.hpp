#pragma once

#include <memory>
#include <vector>

#include <Eigen/Dense>

#include "condnorm/gam.hpp"
#include "condnorm/timeseries.hpp"

namespace condnorm {

/// Mean model (gaussian_identity) and variance model (gamma_log on squared
/// residuals) sharing one set of covariate terms.
struct ConditionalNormalizer {
  SmoothModel mean_model;
  SmoothModel var_model;
  // Fitted variances are clamped below at this value.
  double var_floor = 0.0;

  static constexpr Eigen::Index kMinRows = 50;
  static constexpr double kRelativeVarFloor = 1e-8;

  /// m = 0, v = 1: normalization is the identity.
  static ConditionalNormalizer identity();

  Eigen::VectorXd mean(const CovariateRows& rows) const;
  Eigen::VectorXd variance(const CovariateRows& rows) const;
};

struct NormalizedSeries {
  TimeSeries y_star;
  // NaN where a covariate is missing.
  Eigen::VectorXd mean_hat;
  Eigen::VectorXd var_hat;
  std::shared_ptr<const ConditionalNormalizer> models;
};

/// Rows where y and every covariate used by `terms` are observed.
Mask usable_rows(const TimeSeries& y, const CovariateSet& z, const std::vector<TermSpec>& terms);

ConditionalNormalizer fit_conditional_normalizer(const TimeSeries& y, const CovariateSet& z,
                                                 const std::vector<TermSpec>& terms,
                                                 const FitOptions& options = {});

/// y* = (y - m(z)) / sqrt(v(z)); masked where y or a model covariate is.
NormalizedSeries normalize(const TimeSeries& y, const CovariateSet& z,
                           std::shared_ptr<const ConditionalNormalizer> models);

NormalizedSeries normalize(const TimeSeries& y, const CovariateSet& z,
                           const ConditionalNormalizer& models);

/// y = y* sqrt(v(z)) + m(z), the inverse of normalize.
Eigen::VectorXd unnormalize(const Eigen::VectorXd& y_star, const CovariateRows& rows,
                            const ConditionalNormalizer& models);

}  // namespace condnorm
