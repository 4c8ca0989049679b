#include "condnorm/normalize.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "condnorm/error.hpp"

namespace condnorm {

namespace {

std::vector<std::string> model_covariates(const ConditionalNormalizer& m) {
  std::vector<std::string> names;
  for (const auto* model : {&m.mean_model, &m.var_model})
    for (const auto& t : model->terms)
      if (std::find(names.begin(), names.end(), t.covariate) == names.end())
        names.push_back(t.covariate);
  return names;
}

}  // namespace

ConditionalNormalizer ConditionalNormalizer::identity() {
  ConditionalNormalizer m;
  m.mean_model = SmoothModel::constant(Family::gaussian_identity, 0.0);
  m.var_model = SmoothModel::constant(Family::gamma_log, 0.0);
  m.var_floor = std::numeric_limits<double>::min();
  return m;
}

Eigen::VectorXd ConditionalNormalizer::mean(const CovariateRows& rows) const {
  return predict(mean_model, rows).response;
}

Eigen::VectorXd ConditionalNormalizer::variance(const CovariateRows& rows) const {
  return predict(var_model, rows).response.cwiseMax(var_floor);
}

Mask usable_rows(const TimeSeries& y, const CovariateSet& z, const std::vector<TermSpec>& terms) {
  if (y.grid != z.grid) throw AlignmentError("series '" + y.name + "' and covariates differ in grid");
  Mask keep = !y.missing;
  for (const auto& t : terms) keep = keep && !z.missing.col(z.index_of(t.covariate));
  return keep;
}

ConditionalNormalizer fit_conditional_normalizer(const TimeSeries& y, const CovariateSet& z,
                                                 const std::vector<TermSpec>& terms,
                                                 const FitOptions& options) {
  const Mask keep = usable_rows(y, z, terms);
  const Eigen::Index n = keep.count();
  if (n < ConditionalNormalizer::kMinRows)
    throw FitError("conditional normalizer needs at least " +
                   std::to_string(ConditionalNormalizer::kMinRows) + " complete rows, have " +
                   std::to_string(n));
  const CovariateRows rows = CovariateRows::from(z, keep);
  Eigen::VectorXd response(n);
  for (Eigen::Index i = 0, r = 0; i < y.size(); ++i)
    if (keep(i)) response(r++) = y.values(i);

  ConditionalNormalizer out;
  out.mean_model = fit_gam(response, rows, terms, Family::gaussian_identity, std::nullopt, options);
  const Eigen::VectorXd squared = (response - out.mean_model.fitted).array().square();
  out.var_model = fit_gam(squared, rows, terms, Family::gamma_log, std::nullopt, options);

  const double sample_var = (response.array() - response.mean()).square().sum() /
                            std::max<double>(1.0, static_cast<double>(n - 1));
  out.var_floor = std::max(ConditionalNormalizer::kRelativeVarFloor * sample_var,
                           std::numeric_limits<double>::min());
  return out;
}

NormalizedSeries normalize(const TimeSeries& y, const CovariateSet& z,
                           std::shared_ptr<const ConditionalNormalizer> models) {
  if (!models) throw ContractError("normalize: no models");
  if (y.grid != z.grid) throw AlignmentError("series '" + y.name + "' and covariates differ in grid");
  const auto names = model_covariates(*models);
  Mask covariates_ok = Mask::Constant(z.rows(), true);
  for (const auto& name : names) covariates_ok = covariates_ok && !z.missing.col(z.index_of(name));

  const CovariateRows rows = CovariateRows::from(z, covariates_ok);
  const Eigen::VectorXd m = models->mean(rows);
  const Eigen::VectorXd v = models->variance(rows);

  NormalizedSeries out;
  out.models = std::move(models);
  out.mean_hat = Eigen::VectorXd::Constant(y.size(), std::numeric_limits<double>::quiet_NaN());
  out.var_hat = out.mean_hat;
  Eigen::VectorXd ystar = Eigen::VectorXd::Zero(y.size());
  Mask missing = Mask::Constant(y.size(), true);
  for (Eigen::Index i = 0, r = 0; i < y.size(); ++i) {
    if (!covariates_ok(i)) continue;
    out.mean_hat(i) = m(r);
    out.var_hat(i) = v(r);
    ++r;
    if (y.missing(i)) continue;
    ystar(i) = (y.values(i) - out.mean_hat(i)) / std::sqrt(out.var_hat(i));
    missing(i) = false;
  }
  out.y_star = TimeSeries(y.name + "_star", y.grid, std::move(ystar), std::move(missing));
  return out;
}

NormalizedSeries normalize(const TimeSeries& y, const CovariateSet& z,
                           const ConditionalNormalizer& models) {
  return normalize(y, z, std::make_shared<const ConditionalNormalizer>(models));
}

Eigen::VectorXd unnormalize(const Eigen::VectorXd& y_star, const CovariateRows& rows,
                            const ConditionalNormalizer& models) {
  if (y_star.size() != rows.rows()) throw ContractError("unnormalize: length mismatch");
  const Eigen::VectorXd m = models.mean(rows);
  const Eigen::VectorXd v = models.variance(rows);
  return (y_star.array() * v.array().sqrt() + m.array()).matrix();
}

}  // namespace condnorm
