#include <cmath>
#include <memory>

#include <gtest/gtest.h>

#include "condnorm/model_io.hpp"
#include "condnorm/normalize.hpp"
#include "condnorm/random.hpp"

using namespace condnorm;

namespace {

struct Data {
  TimeSeries y;
  CovariateSet z;
  Eigen::VectorXd mean;
  Eigen::VectorXd variance;
};

template <typename Mean, typename Var>
Data draw(int n, std::uint64_t seed, Mean mean, Var var) {
  Rng rng(seed);
  const TimeGrid grid{0, 60, n};
  Data d;
  d.mean.resize(n);
  d.variance.resize(n);
  Eigen::VectorXd z(n), y(n);
  for (int i = 0; i < n; ++i) {
    z(i) = rng.uniform(-1.0, 1.0);
    d.mean(i) = mean(z(i));
    d.variance(i) = var(z(i));
    y(i) = d.mean(i) + std::sqrt(d.variance(i)) * rng.normal();
  }
  d.y = TimeSeries("y", grid, y);
  d.z = align(std::vector<TimeSeries>{TimeSeries("z", grid, z)});
  return d;
}

std::vector<TermSpec> terms_for(const std::string& name = "z") {
  TermSpec t;
  t.covariate = name;
  return {t};
}

double rms(const Eigen::VectorXd& v) { return std::sqrt(v.squaredNorm() / static_cast<double>(v.size())); }

}  // namespace

TEST(Normalizer, RecoversSmoothMean) {
  const Data d = draw(2000, 1, [](double z) { return 2.0 * std::sin(3.0 * z); },
                      [](double) { return 1.0; });
  const auto models = fit_conditional_normalizer(d.y, d.z, terms_for());
  const NormalizedSeries out = normalize(d.y, d.z, models);
  EXPECT_LT(rms(out.mean_hat - d.mean), 0.1);
}

TEST(Normalizer, HomoskedasticVarianceIsFlat) {
  const Data d = draw(2000, 2, [](double z) { return z; }, [](double) { return 1.0; });
  const auto models = fit_conditional_normalizer(d.y, d.z, terms_for());
  const NormalizedSeries out = normalize(d.y, d.z, models);
  EXPECT_LT(out.var_hat.maxCoeff() / out.var_hat.minCoeff(), 2.0);
}

TEST(Normalizer, ExponentialVarianceSlope) {
  const Data d = draw(4000, 3, [](double) { return 0.0; },
                      [](double z) { return std::exp(1.5 * z); });
  const auto models = fit_conditional_normalizer(d.y, d.z, terms_for());
  const NormalizedSeries out = normalize(d.y, d.z, models);
  Eigen::MatrixXd design(d.y.size(), 2);
  design << Eigen::VectorXd::Ones(d.y.size()), d.z.values.col(0);
  const Eigen::VectorXd coef =
      design.colPivHouseholderQr().solve(out.var_hat.array().log().matrix());
  EXPECT_NEAR(coef(1), 1.5, 0.3);
  // Normalized series has unit scale.
  EXPECT_NEAR(rms(out.y_star.values), 1.0, 0.1);
}

TEST(Normalizer, IdentityLeavesSeriesUnchanged) {
  const Data d = draw(100, 4, [](double z) { return z; }, [](double) { return 1.0; });
  const NormalizedSeries out = normalize(d.y, d.z, ConditionalNormalizer::identity());
  EXPECT_TRUE((out.y_star.values.array() == d.y.values.array()).all());
}

TEST(Normalizer, UnnormalizeInvertsNormalize) {
  const Data d = draw(500, 5, [](double z) { return 3.0 + z; },
                      [](double z) { return 0.5 + z * z; });
  const auto models = fit_conditional_normalizer(d.y, d.z, terms_for());
  const NormalizedSeries out = normalize(d.y, d.z, models);
  const Eigen::VectorXd back = unnormalize(out.y_star.values, CovariateRows::from(d.z), models);
  EXPECT_LT((back - d.y.values).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Normalizer, ConstantModelsArithmetic) {
  ConditionalNormalizer models;
  models.mean_model = SmoothModel::constant(Family::gaussian_identity, 3.0);
  models.var_model = SmoothModel::constant(Family::gamma_log, std::log(4.0));
  CovariateRows rows;
  rows.values.resize(1, 0);
  EXPECT_NEAR(unnormalize(Eigen::VectorXd::Ones(1), rows, models)(0), 5.0, 1e-14);
}

TEST(Normalizer, MissingCovariateMasksOutput) {
  Data d = draw(200, 6, [](double z) { return z; }, [](double) { return 1.0; });
  d.z.missing(10, 0) = true;
  d.y.missing(20) = true;
  const auto models = fit_conditional_normalizer(d.y, d.z, terms_for());
  const NormalizedSeries out = normalize(d.y, d.z, models);
  EXPECT_TRUE(out.y_star.missing(10));
  EXPECT_TRUE(out.y_star.missing(20));
  EXPECT_TRUE(std::isnan(out.mean_hat(10)));
  EXPECT_FALSE(std::isnan(out.mean_hat(20)));
}

TEST(Normalizer, TooFewRowsIsFitError) {
  const Data d = draw(40, 7, [](double z) { return z; }, [](double) { return 1.0; });
  EXPECT_THROW(fit_conditional_normalizer(d.y, d.z, terms_for()), FitError);
}

TEST(Normalizer, GridMismatchIsAlignmentError) {
  Data d = draw(100, 8, [](double z) { return z; }, [](double) { return 1.0; });
  d.z.grid.start += 60;
  EXPECT_THROW(fit_conditional_normalizer(d.y, d.z, terms_for()), AlignmentError);
}

TEST(ModelIo, NormalizerReloadPredictsBitIdentically) {
  const Data d = draw(600, 9, [](double z) { return std::cos(2.0 * z); },
                      [](double z) { return std::exp(z); });
  const auto models = fit_conditional_normalizer(d.y, d.z, terms_for());
  const ConditionalNormalizer back = normalizer_from_json(to_json(models));
  const CovariateRows rows = CovariateRows::from(d.z);
  EXPECT_TRUE((back.mean(rows).array() == models.mean(rows).array()).all());
  EXPECT_TRUE((back.variance(rows).array() == models.variance(rows).array()).all());
  EXPECT_EQ(to_json(back), to_json(models));
}

TEST(ModelIo, ArModelRoundTrip) {
  Eigen::VectorXd phi(2);
  phi << 0.5, -0.25;
  ArModel ar = ArModel::from_coefficients(phi, 0.7, 1.25);
  const ArModel back = ar_model_from_json(to_json(ar));
  EXPECT_EQ(back.order, 2);
  EXPECT_TRUE((back.coefficients.array() == phi.array()).all());
  EXPECT_EQ(back.sigma2, 0.7);
  EXPECT_EQ(back.mean, ar.mean);
  EXPECT_EQ(back.intercept, ar.intercept);
}

TEST(ModelIo, MalformedJsonIsSchemaError) {
  EXPECT_THROW(smooth_model_from_json("{"), SchemaError);
  EXPECT_THROW(smooth_model_from_json("{\"family\": \"poisson\"}"), SchemaError);
  EXPECT_THROW(ar_model_from_json("[]"), SchemaError);
}
