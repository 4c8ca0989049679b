#include "condnorm/gam.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "condnorm/error.hpp"
#include "condnorm/link.hpp"

namespace condnorm {

namespace {

double mu_eta(Family family, double eta) {
  switch (family) {
    case Family::gaussian_identity: return 1.0;
    case Family::gamma_log: return std::exp(eta);
    case Family::gaussian_corr_link: return corr_link_inv_derivative(eta);
  }
  return 1.0;
}

double variance_function(Family family, double mu) {
  return family == Family::gamma_log ? mu * mu : 1.0;
}

double deviance(Family family, const Eigen::VectorXd& y, const Eigen::VectorXd& mu,
                const Eigen::VectorXd& prior) {
  double dev = 0.0;
  for (Eigen::Index i = 0; i < y.size(); ++i) {
    if (family == Family::gamma_log)
      dev += prior(i) * 2.0 * ((y(i) - mu(i)) / mu(i) - std::log(y(i) / mu(i)));
    else
      dev += prior(i) * (y(i) - mu(i)) * (y(i) - mu(i));
  }
  return dev;
}

// Cross-products of the working linear model at one PIRLS step.
struct WorkingModel {
  Eigen::MatrixXd xtwx;
  Eigen::VectorXd xtwz;
  double ztwz = 0.0;
  double nobs = 0.0;
};

WorkingModel working_model(Family family, const Eigen::MatrixXd& x, const Eigen::VectorXd& y,
                           const Eigen::VectorXd& eta, const Eigen::VectorXd& prior) {
  const Eigen::Index n = y.size();
  Eigen::VectorXd w(n);
  Eigen::VectorXd z(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double mu = link_inverse(family, eta(i));
    const double d = mu_eta(family, eta(i));
    if (!(d > 0.0) || !std::isfinite(d)) {
      w(i) = 0.0;
      z(i) = eta(i);
      continue;
    }
    w(i) = prior(i) * d * d / variance_function(family, mu);
    z(i) = eta(i) + (y(i) - mu) / d;
    // Saturated link: the weight underflows while z overflows.
    if (!(w(i) > 0.0) || !std::isfinite(z(i)) || !std::isfinite(w(i))) {
      w(i) = 0.0;
      z(i) = eta(i);
    }
  }
  WorkingModel out;
  const Eigen::MatrixXd wx = w.asDiagonal() * x;
  out.xtwx.noalias() = x.transpose() * wx;
  out.xtwz.noalias() = wx.transpose() * z;
  out.ztwz = (w.array() * z.array().square()).sum();
  out.nobs = static_cast<double>((w.array() > 0.0).count());
  return out;
}

Eigen::MatrixXd penalty_for(const std::vector<SmoothTerm>& terms, const std::vector<double>& lambda,
                            Eigen::Index q) {
  Eigen::MatrixXd s = Eigen::MatrixXd::Zero(q, q);
  for (std::size_t j = 0; j < terms.size(); ++j) {
    const auto& t = terms[j];
    s.block(t.offset, t.offset, t.width(), t.width()) += lambda[j] * t.penalty;
  }
  return s;
}

struct GcvResult {
  double score = 0.0;
  double rss = 0.0;
  double edf = 0.0;
};

GcvResult gcv_score(const WorkingModel& wm, const Eigen::MatrixXd& penalty) {
  const Eigen::MatrixXd a = wm.xtwx + penalty;
  const Eigen::LDLT<Eigen::MatrixXd> ldlt(a);
  const Eigen::VectorXd beta = ldlt.solve(wm.xtwz);
  GcvResult out;
  out.rss = std::max(0.0, wm.ztwz - 2.0 * beta.dot(wm.xtwz) + beta.dot(wm.xtwx * beta));
  out.edf = ldlt.solve(wm.xtwx).trace();
  const double resid_df = wm.nobs - out.edf;
  out.score = resid_df > 0 ? wm.nobs * out.rss / (resid_df * resid_df)
                           : std::numeric_limits<double>::infinity();
  return out;
}

// Coordinate-wise GCV search over the grid for every free smoothing parameter.
void select_lambda(const WorkingModel& wm, const std::vector<SmoothTerm>& terms,
                   std::vector<double>& lambda, const std::vector<double>& grid,
                   const FitOptions& options, Eigen::Index q) {
  bool any_free = false;
  for (const auto& t : terms) any_free |= !t.lambda_fixed;
  if (!any_free) return;
  for (int sweep = 0; sweep < options.sweeps; ++sweep) {
    for (std::size_t j = 0; j < terms.size(); ++j) {
      if (terms[j].lambda_fixed) continue;
      double best = std::numeric_limits<double>::infinity();
      double best_lambda = lambda[j];
      for (double candidate : grid) {
        lambda[j] = candidate;
        const double score = gcv_score(wm, penalty_for(terms, lambda, q)).score;
        if (score < best) {
          best = score;
          best_lambda = candidate;
        }
      }
      lambda[j] = best_lambda;
    }
  }
}

Eigen::Index count_distinct(const Eigen::VectorXd& x) {
  std::vector<double> v(x.data(), x.data() + x.size());
  std::sort(v.begin(), v.end());
  return static_cast<Eigen::Index>(std::unique(v.begin(), v.end()) - v.begin());
}

Eigen::Index column_of(const CovariateRows& rows, const std::string& name) {
  auto it = std::find(rows.names.begin(), rows.names.end(), name);
  if (it == rows.names.end()) throw SchemaError("covariate '" + name + "' not present");
  return static_cast<Eigen::Index>(it - rows.names.begin());
}

}  // namespace

const char* to_string(Family family) {
  switch (family) {
    case Family::gaussian_identity: return "gaussian_identity";
    case Family::gamma_log: return "gamma_log";
    case Family::gaussian_corr_link: return "gaussian_corr_link";
  }
  return "gaussian_identity";
}

Family parse_family(const std::string& text) {
  if (text == "gaussian_identity") return Family::gaussian_identity;
  if (text == "gamma_log") return Family::gamma_log;
  if (text == "gaussian_corr_link") return Family::gaussian_corr_link;
  throw SchemaError("unknown family '" + text + "'");
}

double link_inverse(Family family, double eta) {
  switch (family) {
    case Family::gaussian_identity: return eta;
    case Family::gamma_log: return std::exp(eta);
    case Family::gaussian_corr_link: return corr_link_inv(eta);
  }
  return eta;
}

double link(Family family, double mu) {
  switch (family) {
    case Family::gaussian_identity: return mu;
    case Family::gamma_log: return std::log(mu);
    case Family::gaussian_corr_link: return corr_link(mu);
  }
  return mu;
}

Eigen::RowVectorXd SmoothTerm::design_row(double x) const {
  return (basis.evaluate(x) - shift) * constraint;
}

Eigen::Index SmoothModel::coefficient_count() const {
  Eigen::Index q = 1;
  for (const auto& t : terms) q += t.width();
  return q;
}

Eigen::VectorXd SmoothModel::coefficients() const {
  Eigen::VectorXd beta(coefficient_count());
  beta(0) = intercept;
  for (const auto& t : terms) beta.segment(t.offset, t.width()) = t.coefficients;
  return beta;
}

Eigen::MatrixXd SmoothModel::penalty_matrix() const {
  std::vector<double> lambda;
  for (const auto& t : terms) lambda.push_back(t.lambda);
  return penalty_for(terms, lambda, coefficient_count());
}

SmoothModel SmoothModel::constant(Family family, double link_value) {
  SmoothModel m;
  m.family = family;
  m.intercept = link_value;
  m.covariance = Eigen::MatrixXd::Zero(1, 1);
  return m;
}

std::vector<double> lambda_grid(const FitOptions& options) {
  std::vector<double> grid;
  const double lo = std::log10(options.lambda_min);
  const double hi = std::log10(options.lambda_max);
  for (int i = 0; i < options.grid_points; ++i) {
    const double frac = options.grid_points > 1 ? static_cast<double>(i) / (options.grid_points - 1) : 0.0;
    grid.push_back(std::pow(10.0, lo + frac * (hi - lo)));
  }
  return grid;
}

Eigen::MatrixXd model_matrix(const SmoothModel& model, const CovariateRows& rows) {
  const Eigen::Index n = rows.rows();
  Eigen::MatrixXd x(n, model.coefficient_count());
  x.col(0).setOnes();
  for (const auto& t : model.terms) {
    const Eigen::Index c = column_of(rows, t.covariate);
    for (Eigen::Index i = 0; i < n; ++i)
      x.block(i, t.offset, 1, t.width()) = t.design_row(rows.values(i, c));
  }
  return x;
}

Prediction predict(const SmoothModel& model, const CovariateRows& rows) {
  const Eigen::MatrixXd x = model_matrix(model, rows);
  Prediction out;
  out.link = x * model.coefficients();
  out.response = out.link.unaryExpr([&](double eta) { return link_inverse(model.family, eta); });
  if (model.covariance.rows() == x.cols())
    out.link_se = ((x * model.covariance).array() * x.array()).rowwise().sum().max(0.0).sqrt();
  else
    out.link_se = Eigen::VectorXd::Zero(x.rows());
  return out;
}

SmoothModel fit_gam(const Eigen::VectorXd& y_in, const CovariateRows& rows,
                    const std::vector<TermSpec>& specs, Family family,
                    const std::optional<Eigen::VectorXd>& weights, const FitOptions& options) {
  const Eigen::Index n = y_in.size();
  if (rows.rows() != n)
    throw ContractError("fit_gam: " + std::to_string(rows.rows()) + " covariate rows for " +
                        std::to_string(n) + " responses");
  if (n < 2 || n < 3 * static_cast<Eigen::Index>(specs.size()))
    throw FitError("fit_gam: " + std::to_string(n) + " rows is too few for " +
                   std::to_string(specs.size()) + " smooth terms");
  if (!y_in.allFinite()) throw ContractError("fit_gam: non-finite response");
  const Eigen::VectorXd prior = weights ? *weights : Eigen::VectorXd::Ones(n);
  if (prior.size() != n || (prior.array() < 0).any())
    throw ContractError("fit_gam: weights must be non-negative, one per row");

  Eigen::VectorXd y = y_in;
  if (family == Family::gamma_log) y = y.cwiseMax(options.gamma_floor);

  SmoothModel model;
  model.family = family;
  model.n = n;

  // Assemble term bases.
  std::vector<Eigen::MatrixXd> blocks;
  Eigen::Index q = 1;
  for (const auto& spec : specs) {
    const Eigen::Index c = column_of(rows, spec.covariate);
    const Eigen::VectorXd x = rows.values.col(c);
    if (!x.allFinite()) throw ContractError("fit_gam: non-finite covariate '" + spec.covariate + "'");
    BasisSpec bspec = spec.basis;
    const Eigen::Index distinct = count_distinct(x);
    const int min_dim = bspec.kind == BasisKind::cubic_bspline ? 4 : 3;
    if (distinct < 2) {
      model.dropped.push_back(spec.covariate);
      model.warnings.push_back("covariate '" + spec.covariate +
                               "' is constant; its smooth was dropped");
      continue;
    }
    if (bspec.kind != BasisKind::linear && distinct < bspec.dimension) {
      if (distinct < min_dim) {
        model.dropped.push_back(spec.covariate);
        model.warnings.push_back("covariate '" + spec.covariate + "' has only " +
                                 std::to_string(distinct) + " distinct values; smooth dropped");
        continue;
      }
      model.warnings.push_back("covariate '" + spec.covariate + "': basis dimension reduced to " +
                               std::to_string(distinct));
      bspec.dimension = static_cast<int>(distinct);
    }

    SmoothTerm term;
    term.covariate = spec.covariate;
    term.spec = bspec;
    const BasisMatrix bm = build_basis(bspec, x);
    term.basis = bm.basis;
    term.lo = x.minCoeff();
    term.hi = x.maxCoeff();
    if (bspec.kind == BasisKind::linear) {
      term.shift = Eigen::RowVectorXd::Constant(1, x.mean());
      term.constraint = Eigen::MatrixXd::Identity(1, 1);
    } else {
      term.shift = Eigen::RowVectorXd::Zero(bm.design.cols());
      term.constraint = sum_to_zero_constraint(bm.design);
    }
    Eigen::MatrixXd block = (bm.design.rowwise() - term.shift) * term.constraint;
    Eigen::MatrixXd s = term.constraint.transpose() * bm.penalty * term.constraint;
    s = 0.5 * (s + s.transpose());
    const double s_norm = s.norm();
    if (s_norm > 0.0) {
      term.penalty_scale = (block.transpose() * block).norm() / s_norm;
      if (!(term.penalty_scale > 0.0)) term.penalty_scale = 1.0;
    }
    term.penalty = s * term.penalty_scale;
    if (s_norm == 0.0) {
      term.lambda = 0.0;
      term.lambda_fixed = true;
    } else if (spec.lambda) {
      if (*spec.lambda < 0) throw ContractError("fit_gam: negative smoothing parameter");
      term.lambda = *spec.lambda;
      term.lambda_fixed = true;
    } else {
      term.lambda = 1.0;
    }
    term.offset = q;
    q += block.cols();
    blocks.push_back(std::move(block));
    model.terms.push_back(std::move(term));
  }

  Eigen::MatrixXd x(n, q);
  x.col(0).setOnes();
  for (std::size_t j = 0; j < blocks.size(); ++j)
    x.block(0, model.terms[j].offset, n, blocks[j].cols()) = blocks[j];

  // Starting values.
  Eigen::VectorXd mu = y;
  if (family == Family::gaussian_corr_link)
    mu = y.cwiseMax(-1.0 + kCorrClamp).cwiseMin(1.0 - kCorrClamp);
  Eigen::VectorXd eta = mu.unaryExpr([&](double m) { return link(family, m); });

  std::vector<double> lambda;
  for (const auto& t : model.terms) lambda.push_back(t.lambda);
  const std::vector<double> grid = lambda_grid(options);

  Eigen::VectorXd beta = Eigen::VectorXd::Zero(q);
  bool have_beta = false;
  double previous = std::numeric_limits<double>::infinity();
  std::vector<double> previous_lambda;
  constexpr int kFreezeLambdaAfter = 50;
  bool converged = false;
  double rel_change = std::numeric_limits<double>::infinity();
  int iter = 0;
  WorkingModel wm;

  for (iter = 1; iter <= options.max_iterations; ++iter) {
    wm = working_model(family, x, y, eta, prior);
    if (iter <= kFreezeLambdaAfter) select_lambda(wm, model.terms, lambda, grid, options, q);
    const Eigen::MatrixXd penalty = penalty_for(model.terms, lambda, q);
    Eigen::VectorXd beta_new = (wm.xtwx + penalty).ldlt().solve(wm.xtwz);

    auto evaluate = [&](const Eigen::VectorXd& b, Eigen::VectorXd& eta_out, Eigen::VectorXd& mu_out) {
      eta_out = x * b;
      mu_out = eta_out.unaryExpr([&](double e) { return link_inverse(family, e); });
      if (!mu_out.allFinite()) return std::numeric_limits<double>::infinity();
      return deviance(family, y, mu_out, prior) + b.dot(penalty * b);
    };

    Eigen::VectorXd eta_new, mu_new;
    double pdev = evaluate(beta_new, eta_new, mu_new);
    if (family != Family::gaussian_identity && have_beta) {
      Eigen::VectorXd eta_old, mu_old;
      const double pdev_old = evaluate(beta, eta_old, mu_old);
      for (int half = 0; half < 30 && !(pdev <= pdev_old); ++half) {
        beta_new = 0.5 * (beta_new + beta);
        pdev = evaluate(beta_new, eta_new, mu_new);
      }
    }
    if (!std::isfinite(pdev))
      throw FitError("fit_gam: penalized deviance is not finite", iter, pdev, rel_change);

    if (!model.penalized_deviance_trace.empty() && pdev > model.penalized_deviance_trace.back() &&
        lambda == previous_lambda) {
      model.warnings.push_back("penalized deviance increased at iteration " + std::to_string(iter));
    }
    model.penalized_deviance_trace.push_back(pdev);

    beta = beta_new;
    have_beta = true;
    eta = eta_new;
    mu = mu_new;
    rel_change = std::abs(pdev - previous) / (std::abs(pdev) + 1e-10);
    const bool lambda_stable = lambda == previous_lambda || iter > kFreezeLambdaAfter;
    previous = pdev;
    previous_lambda = lambda;
    if (rel_change < options.tolerance && lambda_stable) {
      converged = true;
      break;
    }
  }
  if (!converged)
    throw FitError("fit_gam: PIRLS did not converge in " + std::to_string(options.max_iterations) +
                       " iterations",
                   options.max_iterations, previous, rel_change);
  if (iter > kFreezeLambdaAfter)
    model.warnings.push_back("smoothing parameters frozen after oscillating");

  // Post-fit summaries at the converged weights.
  wm = working_model(family, x, y, eta, prior);
  const Eigen::MatrixXd penalty = penalty_for(model.terms, lambda, q);
  const GcvResult g = gcv_score(wm, penalty);
  const Eigen::MatrixXd a_inv =
      (wm.xtwx + penalty).ldlt().solve(Eigen::MatrixXd::Identity(q, q));

  model.iterations = iter;
  model.intercept = beta(0);
  for (std::size_t j = 0; j < model.terms.size(); ++j) {
    auto& t = model.terms[j];
    t.lambda = lambda[j];
    t.coefficients = beta.segment(t.offset, t.width());
  }
  model.fitted = mu;
  model.linear_predictor = eta;
  model.deviance = deviance(family, y, mu, prior);
  model.edf = g.edf;
  model.gcv = g.score;
  const double resid_df = std::max(1.0, static_cast<double>(n) - g.edf);
  if (family == Family::gamma_log) {
    double pearson = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
      const double r = (y(i) - mu(i)) / mu(i);
      pearson += prior(i) * r * r;
    }
    model.dispersion = pearson / resid_df;
    model.shape = model.dispersion > 0 ? 1.0 / model.dispersion
                                       : std::numeric_limits<double>::infinity();
  } else {
    model.dispersion = model.deviance / resid_df;
  }
  model.covariance = a_inv * model.dispersion;
  model.covariance = 0.5 * (model.covariance + model.covariance.transpose());
  return model;
}

std::vector<double> gcv_profile(const SmoothModel& model, const Eigen::VectorXd& y_in,
                                const CovariateRows& rows, std::size_t term,
                                const FitOptions& options) {
  if (term >= model.terms.size()) throw ContractError("gcv_profile: no such term");
  const Eigen::MatrixXd x = model_matrix(model, rows);
  Eigen::VectorXd y = y_in;
  if (model.family == Family::gamma_log) y = y.cwiseMax(options.gamma_floor);
  const Eigen::VectorXd eta = x * model.coefficients();
  const WorkingModel wm =
      working_model(model.family, x, y, eta, Eigen::VectorXd::Ones(y.size()));
  std::vector<double> lambda;
  for (const auto& t : model.terms) lambda.push_back(t.lambda);
  std::vector<double> scores;
  for (double candidate : lambda_grid(options)) {
    lambda[term] = candidate;
    scores.push_back(gcv_score(wm, penalty_for(model.terms, lambda, x.cols())).score);
  }
  return scores;
}

}  // namespace condnorm
