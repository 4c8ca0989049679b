#include "condnorm/impute.hpp"

#include <cmath>
#include <limits>

#include "condnorm/error.hpp"

namespace condnorm {

ImputationResult impute_with(const TimeSeries& y, const CovariateSet& z,
                             const ConditionalNormalizer& normalizer, const ArModel& ar,
                             const ImputeOptions& options) {
  ImputationResult out;
  out.normalizer = normalizer;
  out.ar = ar;
  out.series = y;
  const double nan = std::numeric_limits<double>::quiet_NaN();
  out.lower = Eigen::VectorXd::Constant(y.size(), nan);
  out.upper = out.lower;
  for (Eigen::Index i = 0; i < y.size(); ++i)
    if (!y.missing(i)) out.lower(i) = out.upper(i) = y.values(i);
  if (y.missing.count() == 0) return out;

  const NormalizedSeries ns = normalize(y, z, normalizer);
  for (Eigen::Index i = 0; i < y.size(); ++i)
    if (y.missing(i) && std::isnan(ns.mean_hat(i)))
      throw ContractError("impute: covariates are missing at position " + std::to_string(i) +
                          " where '" + y.name + "' must be imputed");

  const SmootherOutput<double> smooth = kalman_smooth(ns.y_star.values, ns.y_star.missing, ar);
  for (Eigen::Index i = 0; i < y.size(); ++i) {
    if (!y.missing(i)) continue;
    const double sd = std::sqrt(ns.var_hat(i));
    const double spread = options.z_score * std::sqrt(smooth.variance(i));
    const double value = smooth.mean(i) * sd + ns.mean_hat(i);
    if (options.nonnegative && value < 0.0) {
      ++out.rejected_negative;
      continue;
    }
    out.series.values(i) = value;
    out.series.missing(i) = false;
    out.series.imputed(i) = true;
    out.lower(i) = (smooth.mean(i) - spread) * sd + ns.mean_hat(i);
    out.upper(i) = (smooth.mean(i) + spread) * sd + ns.mean_hat(i);
  }
  return out;
}

ImputationResult impute_series(const TimeSeries& y, const CovariateSet& z,
                               const std::vector<TermSpec>& terms, const ImputeOptions& options) {
  if (y.missing.count() == 0) {
    ImputationResult out;
    out.series = y;
    out.lower = y.values;
    out.upper = y.values;
    return out;
  }
  const ConditionalNormalizer normalizer = fit_conditional_normalizer(y, z, terms, options.fit);
  const NormalizedSeries ns = normalize(y, z, normalizer);
  const ArModel ar = fit_ar(ns.y_star, options.max_order);
  return impute_with(y, z, normalizer, ar, options);
}

}  // namespace condnorm
