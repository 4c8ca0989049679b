#include "condnorm/ar.hpp"

#include <cmath>
#include <limits>

namespace condnorm {

namespace {

struct LsFit {
  Eigen::VectorXd beta;  // intercept, then lag coefficients
  double sigma2 = 0.0;
  Eigen::Index n = 0;
};

// Rows t >= order whose value and `order` lags are observed.
std::vector<Eigen::Index> complete_rows(const Mask& missing, int order) {
  std::vector<Eigen::Index> rows;
  for (Eigen::Index t = order; t < missing.size(); ++t) {
    bool ok = true;
    for (int i = 0; i <= order && ok; ++i) ok = !missing(t - i);
    if (ok) rows.push_back(t);
  }
  return rows;
}

LsFit least_squares(const Eigen::VectorXd& x, const std::vector<Eigen::Index>& rows, int order) {
  const auto n = static_cast<Eigen::Index>(rows.size());
  Eigen::MatrixXd design(n, order + 1);
  Eigen::VectorXd target(n);
  for (Eigen::Index r = 0; r < n; ++r) {
    const Eigen::Index t = rows[static_cast<std::size_t>(r)];
    design(r, 0) = 1.0;
    for (int i = 1; i <= order; ++i) design(r, i) = x(t - i);
    target(r) = x(t);
  }
  LsFit fit;
  fit.n = n;
  fit.beta = design.colPivHouseholderQr().solve(target);
  fit.sigma2 = (target - design * fit.beta).squaredNorm() / static_cast<double>(n);
  return fit;
}

double aicc(double sigma2, Eigen::Index n, int order) {
  const double m = order + 2.0;
  const double nn = static_cast<double>(n);
  if (nn - m - 1.0 <= 0.0 || !(sigma2 > 0.0)) return std::numeric_limits<double>::infinity();
  return nn * std::log(sigma2) + 2.0 * m + 2.0 * m * (m + 1.0) / (nn - m - 1.0);
}

}  // namespace

ArModel ArModel::from_coefficients(Eigen::VectorXd coefficients, double sigma2, double mean) {
  ArModel m;
  m.order = static_cast<int>(coefficients.size());
  m.coefficients = std::move(coefficients);
  m.sigma2 = sigma2;
  m.mean = mean;
  m.intercept = mean * (1.0 - m.coefficients.sum());
  m.stationary = spectral_radius(m.coefficients) < 1.0;
  return m;
}

double spectral_radius(const Eigen::VectorXd& coefficients) {
  const Eigen::Index p = coefficients.size();
  if (p == 0) return 0.0;
  Eigen::MatrixXd companion = Eigen::MatrixXd::Zero(p, p);
  companion.row(0) = coefficients.transpose();
  if (p > 1) companion.block(1, 0, p - 1, p - 1).setIdentity();
  return companion.eigenvalues().cwiseAbs().maxCoeff();
}

ArModel fit_ar(const Eigen::VectorXd& x, const Mask& missing, int max_order) {
  if (max_order < 0) throw ContractError("fit_ar: max_order must be >= 0");
  if (x.size() != missing.size()) throw ContractError("fit_ar: mask length mismatch");

  const std::vector<Eigen::Index> common = complete_rows(missing, max_order);
  const auto needed = std::max<std::size_t>(10 * static_cast<std::size_t>(max_order),
                                            static_cast<std::size_t>(max_order) + 4);
  if (common.size() < needed)
    throw EstimationError("fit_ar: " + std::to_string(common.size()) +
                          " complete lagged rows, need " + std::to_string(needed));

  ArModel model;
  double sum = 0.0, sumsq = 0.0;
  Eigen::Index count = 0;
  for (Eigen::Index t = 0; t < x.size(); ++t) {
    if (missing(t)) continue;
    sum += x(t);
    ++count;
  }
  const double mean = sum / static_cast<double>(count);
  for (Eigen::Index t = 0; t < x.size(); ++t)
    if (!missing(t)) sumsq += (x(t) - mean) * (x(t) - mean);
  if (!(sumsq > kArVarianceFloor * static_cast<double>(count) * std::max(1.0, mean * mean))) {
    model.order = 0;
    model.mean = model.intercept = mean;
    model.coefficients = Eigen::VectorXd::Zero(0);
    model.sigma2 = kArVarianceFloor;
    model.n_used = count;
    model.aicc = -std::numeric_limits<double>::infinity();
    model.warnings.push_back("constant series; AR(0) with floored innovation variance");
    return model;
  }

  int best = 0;
  double best_aicc = std::numeric_limits<double>::infinity();
  for (int p = 0; p <= max_order; ++p) {
    const LsFit fit = least_squares(x, common, p);
    const double score = aicc(fit.sigma2, fit.n, p);
    model.aicc_by_order.push_back(score);
    if (score < best_aicc) {
      best_aicc = score;
      best = p;
    }
  }

  const LsFit fit = least_squares(x, complete_rows(missing, best), best);
  model.order = best;
  model.aicc = best_aicc;
  model.intercept = fit.beta(0);
  model.coefficients = fit.beta.tail(best);
  model.sigma2 = std::max(fit.sigma2, kArVarianceFloor);
  model.n_used = fit.n;

  const double rho = spectral_radius(model.coefficients);
  if (rho >= 1.0) {
    // Scaling psi_i by s^i scales every companion root by s.
    const double s = 0.99 / rho;
    double factor = 1.0;
    for (Eigen::Index i = 0; i < model.coefficients.size(); ++i) {
      factor *= s;
      model.coefficients(i) *= factor;
    }
    model.warnings.push_back("non-stationary fit shrunk to spectral radius 0.99");
  }
  model.stationary = spectral_radius(model.coefficients) < 1.0;
  const double denom = 1.0 - model.coefficients.sum();
  model.mean = std::abs(denom) > 1e-12 ? model.intercept / denom : mean;
  return model;
}

ArModel fit_ar(const TimeSeries& x, int max_order) {
  return fit_ar(x.values, x.missing, max_order);
}

StateSpace<double> state_space(const ArModel& model) {
  return make_state_space<double>(model.coefficients, model.sigma2, model.mean);
}

SmootherOutput<double> kalman_smooth(const Eigen::VectorXd& x, const Mask& missing,
                                     const ArModel& model) {
  if (x.size() != missing.size()) throw ContractError("kalman_smooth: mask length mismatch");
  if (!model.stationary || spectral_radius(model.coefficients) >= 1.0)
    throw ContractError("kalman_smooth: AR model is not stationary");
  return smooth_state_space<double>(state_space(model), x, missing);
}

}  // namespace condnorm
