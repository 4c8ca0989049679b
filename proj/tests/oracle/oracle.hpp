#pragma once

// Dense textbook oracles for verifying the library. Nothing here includes or
// calls library code.

#include <cmath>
#include <vector>

#include <Eigen/Dense>

namespace oracle {

/// (B'B + lambda S)^{-1} B'y by full-pivot LU.
Eigen::VectorXd ridge(const Eigen::MatrixXd& b, const Eigen::MatrixXd& s, double lambda,
                      const Eigen::VectorXd& y);

/// Conditional mean of a zero-mean Gaussian vector with covariance `cov`
/// given the entries at `observed` equal `values`.
Eigen::VectorXd gaussian_condition(const Eigen::MatrixXd& cov, const std::vector<int>& observed,
                                   const Eigen::VectorXd& values);

/// Conditional variances matching gaussian_condition.
Eigen::VectorXd gaussian_condition_variance(const Eigen::MatrixXd& cov,
                                            const std::vector<int>& observed);

/// corr(x_t, y_{t+k}) for k = 1..max_lag with the usual 1/n autocovariance
/// normalization.
std::vector<double> classical_ccf(const std::vector<double>& x, const std::vector<double>& y,
                                  int max_lag);

/// Autocovariances gamma(0..max_lag) of a causal AR process with intercept 0
/// from its MA(infinity) weights truncated at `terms`.
std::vector<double> ar_autocovariance(const std::vector<double>& phi, double sigma2,
                                      int max_lag, int terms = 4000);

/// Covariance matrix of n consecutive values of the AR process.
Eigen::MatrixXd ar_covariance_matrix(const std::vector<double>& phi, double sigma2, int n);

/// Golden-section minimizer of a unimodal function on [a, b].
template <typename F>
double golden_section(F&& f, double a, double b, double tol = 1e-12) {
  const double g = 0.5 * (std::sqrt(5.0) - 1.0);
  double c = b - g * (b - a);
  double d = a + g * (b - a);
  double fc = f(c);
  double fd = f(d);
  while (b - a > tol) {
    if (fc < fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - g * (b - a);
      fc = f(c);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + g * (b - a);
      fd = f(d);
    }
  }
  return 0.5 * (a + b);
}

}  // namespace oracle
