#pragma once

#include <algorithm>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "condnorm/error.hpp"
#include "condnorm/timeseries.hpp"

namespace condnorm {

// Innovation variance assigned to degenerate (constant) inputs.
inline constexpr double kArVarianceFloor = 1e-12;

/// x_t = intercept + sum_i coefficients(i-1) * x_{t-i} + e_t, e_t ~ N(0, sigma2).
struct ArModel {
  int order = 0;
  double intercept = 0.0;
  double mean = 0.0;  // intercept / (1 - sum of coefficients)
  Eigen::VectorXd coefficients;
  double sigma2 = 1.0;
  double aicc = 0.0;
  bool stationary = true;
  Eigen::Index n_used = 0;
  // AICc of every candidate order on the common estimation sample.
  std::vector<double> aicc_by_order;
  std::vector<std::string> warnings;

  static ArModel from_coefficients(Eigen::VectorXd coefficients, double sigma2, double mean = 0.0);
};

/// Largest modulus among the roots of the companion matrix.
double spectral_radius(const Eigen::VectorXd& coefficients);

/// Conditional least squares for each order 0..max_order on the rows where
/// the value and all max_order lags are observed; the AICc minimizer (ties
/// to the smaller order) is then re-estimated on all its complete rows.
ArModel fit_ar(const Eigen::VectorXd& x, const Mask& missing, int max_order);
ArModel fit_ar(const TimeSeries& x, int max_order);

/// Companion-form state space of a demeaned AR(p) observed without noise:
/// alpha_{t+1} = T alpha_t + R eta_t, x_t = mean + Z alpha_t.
template <typename Scalar = double>
struct StateSpace {
  using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
  using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

  Matrix transition;
  Vector selection;  // R; Z is the first unit row
  Scalar state_variance;
  Matrix initial_covariance;  // stationary covariance of alpha
  Scalar mean;

  Eigen::Index dimension() const { return transition.rows(); }
};

template <typename Scalar = double>
StateSpace<Scalar> make_state_space(const Eigen::Matrix<Scalar, Eigen::Dynamic, 1>& coefficients,
                                    Scalar sigma2, Scalar mean) {
  using Matrix = typename StateSpace<Scalar>::Matrix;
  const Eigen::Index r = std::max<Eigen::Index>(1, coefficients.size());
  StateSpace<Scalar> ss;
  ss.transition = Matrix::Zero(r, r);
  ss.transition.row(0).head(coefficients.size()) = coefficients.transpose();
  if (r > 1) ss.transition.block(1, 0, r - 1, r - 1).setIdentity();
  ss.selection = StateSpace<Scalar>::Vector::Zero(r);
  ss.selection(0) = Scalar(1);
  ss.state_variance = sigma2;
  ss.mean = mean;

  // vec(P) = (I - T (x) T)^{-1} vec(R Q R')
  const Eigen::Index rr = r * r;
  Matrix kron(rr, rr);
  for (Eigen::Index i = 0; i < r; ++i)
    for (Eigen::Index j = 0; j < r; ++j)
      kron.block(i * r, j * r, r, r) = ss.transition(i, j) * ss.transition;
  const Matrix q = ss.selection * ss.selection.transpose() * sigma2;
  const typename StateSpace<Scalar>::Vector vec_p =
      (Matrix::Identity(rr, rr) - kron)
          .fullPivLu()
          .solve(Eigen::Map<const typename StateSpace<Scalar>::Vector>(q.data(), rr));
  ss.initial_covariance = Eigen::Map<const Matrix>(vec_p.data(), r, r);
  ss.initial_covariance = (ss.initial_covariance + ss.initial_covariance.transpose()) / Scalar(2);
  return ss;
}

template <typename Scalar = double>
struct SmootherOutput {
  Eigen::Matrix<Scalar, Eigen::Dynamic, 1> mean;
  Eigen::Matrix<Scalar, Eigen::Dynamic, 1> variance;
  Eigen::Matrix<Scalar, Eigen::Dynamic, 1> filtered_variance;
};

/// Kalman filter plus fixed-interval disturbance smoother. Observed entries
/// are returned unchanged with zero variance.
template <typename Scalar = double>
SmootherOutput<Scalar> smooth_state_space(const StateSpace<Scalar>& ss,
                                          const Eigen::Matrix<Scalar, Eigen::Dynamic, 1>& x,
                                          const Mask& missing) {
  using Matrix = typename StateSpace<Scalar>::Matrix;
  using Vector = typename StateSpace<Scalar>::Vector;
  const Eigen::Index n = x.size();
  const Eigen::Index r = ss.dimension();
  const Matrix& t = ss.transition;
  const Matrix rqr = ss.selection * ss.selection.transpose() * ss.state_variance;

  std::vector<Vector> a(static_cast<std::size_t>(n));
  std::vector<Matrix> p(static_cast<std::size_t>(n));
  std::vector<Scalar> v(static_cast<std::size_t>(n), Scalar(0));
  std::vector<Scalar> f(static_cast<std::size_t>(n), Scalar(0));
  std::vector<Vector> gain(static_cast<std::size_t>(n));

  SmootherOutput<Scalar> out;
  out.mean = x;
  out.variance = Vector::Zero(n);
  out.filtered_variance = Vector::Zero(n);

  Vector at = Vector::Zero(r);
  Matrix pt = ss.initial_covariance;
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto ui = static_cast<std::size_t>(i);
    a[ui] = at;
    p[ui] = pt;
    if (!missing(i)) {
      v[ui] = x(i) - ss.mean - at(0);
      f[ui] = pt(0, 0);
      if (!(f[ui] > Scalar(0))) throw ContractError("kalman smoother: singular innovation variance");
      const Vector pz = pt.col(0);
      gain[ui] = t * pz / f[ui];
      const Vector filtered = at + pz * (v[ui] / f[ui]);
      const Matrix pf = pt - pz * pz.transpose() / f[ui];
      out.filtered_variance(i) = std::max(Scalar(0), pf(0, 0));
      at = t * filtered;
      pt = t * pf * t.transpose() + rqr;
    } else {
      out.filtered_variance(i) = pt(0, 0);
      at = t * at;
      pt = t * pt * t.transpose() + rqr;
    }
    pt = (pt + pt.transpose()) / Scalar(2);
  }

  Vector rt = Vector::Zero(r);
  Matrix nt = Matrix::Zero(r, r);
  for (Eigen::Index i = n - 1; i >= 0; --i) {
    const auto ui = static_cast<std::size_t>(i);
    if (!missing(i)) {
      Matrix l = t;
      l.col(0) -= gain[ui];
      Vector r_prev = l.transpose() * rt;
      r_prev(0) += v[ui] / f[ui];
      Matrix n_prev = l.transpose() * nt * l;
      n_prev(0, 0) += Scalar(1) / f[ui];
      rt = r_prev;
      nt = n_prev;
    } else {
      rt = t.transpose() * rt;
      nt = t.transpose() * nt * t;
      const Vector smoothed = a[ui] + p[ui] * rt;
      const Matrix var = p[ui] - p[ui] * nt * p[ui];
      out.mean(i) = ss.mean + smoothed(0);
      out.variance(i) = std::max(Scalar(0), var(0, 0));
    }
  }
  return out;
}

StateSpace<double> state_space(const ArModel& model);

/// Smoothed means and variances of x given its observed entries. Throws
/// ContractError for a non-stationary model.
SmootherOutput<double> kalman_smooth(const Eigen::VectorXd& x, const Mask& missing,
                                     const ArModel& model);

}  // namespace condnorm
