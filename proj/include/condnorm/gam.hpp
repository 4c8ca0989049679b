#pragma once

#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "condnorm/basis.hpp"
#include "condnorm/timeseries.hpp"

namespace condnorm {

enum class Family {
  gaussian_identity,   // mean models
  gamma_log,           // variance models; response is a squared residual
  gaussian_corr_link,  // conditional correlations, eta = corr_link
};

const char* to_string(Family family);
Family parse_family(const std::string& text);

/// One additive term: a smooth of a named covariate.
struct TermSpec {
  std::string covariate;
  BasisSpec basis;
  // Fixed smoothing parameter; selected by GCV when unset.
  std::optional<double> lambda;
};

/// Smoothing-parameter search and PIRLS controls.
struct FitOptions {
  int grid_points = 30;
  double lambda_min = 1e-6;
  double lambda_max = 1e6;
  int sweeps = 2;
  int max_iterations = 200;
  double tolerance = 1e-8;
  // Squared-residual responses of gamma_log fits are floored here.
  double gamma_floor = 1e-10;
};

/// A fitted term. Its design row for covariate value x is
/// (basis.evaluate(x) - shift) * constraint.
struct SmoothTerm {
  std::string covariate;
  BasisSpec spec;
  SplineBasis basis;
  Eigen::RowVectorXd shift;
  Eigen::MatrixXd constraint;
  // Constrained penalty, already multiplied by penalty_scale.
  Eigen::MatrixXd penalty;
  double penalty_scale = 1.0;
  double lambda = 0.0;
  bool lambda_fixed = false;
  Eigen::Index offset = 0;  // first column in the model matrix
  Eigen::VectorXd coefficients;
  // Training range of the covariate.
  double lo = 0.0;
  double hi = 0.0;

  Eigen::Index width() const { return constraint.cols(); }
  Eigen::RowVectorXd design_row(double x) const;
};

struct SmoothModel {
  Family family = Family::gaussian_identity;
  double intercept = 0.0;
  std::vector<SmoothTerm> terms;
  // Covariates whose smooth was dropped because they were constant.
  std::vector<std::string> dropped;

  // Post-fit quantities.
  double dispersion = 1.0;  // Gaussian residual variance u^2, gamma 1/shape
  double shape = 1.0;       // gamma shape r
  double deviance = 0.0;
  double edf = 0.0;         // trace of the influence matrix
  double gcv = 0.0;
  Eigen::Index n = 0;
  int iterations = 0;
  Eigen::MatrixXd covariance;  // of (intercept, term coefficients...)
  std::vector<double> penalized_deviance_trace;
  std::vector<std::string> warnings;

  // Training rows, response and link scale.
  Eigen::VectorXd fitted;
  Eigen::VectorXd linear_predictor;

  Eigen::Index coefficient_count() const;
  Eigen::VectorXd coefficients() const;  // intercept first
  // Block-diagonal sum of lambda_j * S_j over the full coefficient vector.
  Eigen::MatrixXd penalty_matrix() const;

  /// Constant model, e.g. mean 0 or variance 1, with `link_value` intercept.
  static SmoothModel constant(Family family, double link_value);
};

struct Prediction {
  Eigen::VectorXd response;
  Eigen::VectorXd link;
  Eigen::VectorXd link_se;
};

double link_inverse(Family family, double eta);
double link(Family family, double mu);

/// Penalized IRLS fit of y on the covariates in `rows`, selecting each free
/// smoothing parameter by GCV. Throws FitError on non-convergence.
SmoothModel fit_gam(const Eigen::VectorXd& y, const CovariateRows& rows,
                    const std::vector<TermSpec>& terms, Family family,
                    const std::optional<Eigen::VectorXd>& weights = std::nullopt,
                    const FitOptions& options = {});

/// Model matrix with a leading intercept column.
Eigen::MatrixXd model_matrix(const SmoothModel& model, const CovariateRows& rows);

Prediction predict(const SmoothModel& model, const CovariateRows& rows);

/// Log-spaced smoothing-parameter grid used by GCV.
std::vector<double> lambda_grid(const FitOptions& options = {});

/// GCV score at every grid value of term `term`, others held at their
/// fitted values, evaluated on the working model at the fitted means.
std::vector<double> gcv_profile(const SmoothModel& model, const Eigen::VectorXd& y,
                                const CovariateRows& rows, std::size_t term,
                                const FitOptions& options = {});

}  // namespace condnorm
