#include "condnorm/cond_corr.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "condnorm/error.hpp"
#include "condnorm/parallel.hpp"
#include "condnorm/random.hpp"

namespace condnorm {

namespace {

// Builds the cross-product response for one lag: rows t where `valid(t)`
// holds, with response value(t).
template <typename Valid, typename Value>
std::optional<CondCorrModel> fit_one_lag(int lag, const CovariateSet& z,
                                         const std::vector<TermSpec>& terms, Valid&& valid,
                                         Value&& value, const CondCorrOptions& options,
                                         std::string& reason) {
  Mask covariates_ok = Mask::Constant(z.rows(), true);
  for (const auto& t : terms) covariates_ok = covariates_ok && !z.missing.col(z.index_of(t.covariate));

  CondCorrModel out;
  out.lag = lag;
  out.terms = terms;
  Mask keep = Mask::Constant(z.rows(), false);
  for (Eigen::Index t = 0; t < z.rows(); ++t) {
    if (covariates_ok(t) && valid(t)) {
      keep(t) = true;
      out.index.push_back(t);
    }
  }
  if (out.n_used() < options.min_rows) {
    reason = std::to_string(out.n_used()) + " usable rows, need " + std::to_string(options.min_rows);
    return std::nullopt;
  }
  out.response.resize(out.n_used());
  for (Eigen::Index r = 0; r < out.n_used(); ++r) out.response(r) = value(out.index[static_cast<std::size_t>(r)]);
  out.training_rows = CovariateRows::from(z, keep);
  try {
    out.model = fit_gam(out.response, out.training_rows, terms, Family::gaussian_corr_link,
                        std::nullopt, options.fit);
  } catch (const FitError& e) {
    reason = e.what();
    return std::nullopt;
  }

  Eigen::VectorXd resid = Eigen::VectorXd::Zero(z.rows());
  Mask missing = Mask::Constant(z.rows(), true);
  const Eigen::VectorXd compact = out.compact_residuals();
  for (Eigen::Index r = 0; r < out.n_used(); ++r) {
    const Eigen::Index t = out.index[static_cast<std::size_t>(r)];
    resid(t) = compact(r);
    missing(t) = false;
  }
  out.residuals = TimeSeries("residual_lag_" + std::to_string(lag), z.grid, std::move(resid),
                             std::move(missing));
  for (int order = options.residual_max_order; order >= 0; --order) {
    try {
      out.residual_ar = fit_ar(out.residuals, order);
      break;
    } catch (const EstimationError&) {
      if (order == 0) throw;
    }
  }
  return out;
}

template <typename Builder>
CondCorrSet fit_lags(int max_lag, const CondCorrOptions& options, Builder&& build) {
  if (max_lag < 1) throw ContractError("conditional correlation needs max_lag >= 1");
  std::vector<std::optional<CondCorrModel>> fitted(static_cast<std::size_t>(max_lag));
  std::vector<std::string> reasons(static_cast<std::size_t>(max_lag));
  parallel_for(static_cast<std::size_t>(max_lag), options.threads, [&](std::size_t i) {
    fitted[i] = build(static_cast<int>(i) + 1, reasons[i]);
  });
  CondCorrSet out;
  for (std::size_t i = 0; i < fitted.size(); ++i) {
    if (fitted[i])
      out.models.push_back(std::move(*fitted[i]));
    else
      out.skipped.push_back({static_cast<int>(i) + 1, reasons[i]});
  }
  return out;
}

struct LagPredictions {
  Eigen::MatrixXd correlations;
  std::vector<int> lags;
};

LagPredictions predict_lags(const std::vector<SmoothModel>& models, const std::vector<int>& lags,
                            const CovariateRows& rows) {
  LagPredictions out;
  out.lags = lags;
  out.correlations.resize(rows.rows(), static_cast<Eigen::Index>(models.size()));
  for (std::size_t j = 0; j < models.size(); ++j)
    out.correlations.col(static_cast<Eigen::Index>(j)) = predict(models[j], rows).response;
  return out;
}

// Argmax over columns; columns are in increasing lag order so the first
// maximum is the smallest lag.
void argmax_rows(const Eigen::MatrixXd& c, const std::vector<int>& lags, std::vector<int>& lag,
                 Eigen::VectorXd* best_value) {
  const Eigen::Index n = c.rows();
  lag.assign(static_cast<std::size_t>(n), 0);
  if (best_value) best_value->setConstant(n, std::numeric_limits<double>::quiet_NaN());
  for (Eigen::Index i = 0; i < n; ++i) {
    double best = -std::numeric_limits<double>::infinity();
    for (Eigen::Index j = 0; j < c.cols(); ++j) {
      const double v = c(i, j);
      if (std::isnan(v)) continue;
      if (v > best) {
        best = v;
        lag[static_cast<std::size_t>(i)] = lags[static_cast<std::size_t>(j)];
      }
    }
    if (best_value && lag[static_cast<std::size_t>(i)] > 0) (*best_value)(i) = best;
  }
}

// Type-1 (inverse empirical CDF) quantile of a sorted sample.
int sample_quantile(const std::vector<std::uint16_t>& sorted, double p) {
  const double m = static_cast<double>(sorted.size());
  auto pos = static_cast<std::ptrdiff_t>(std::ceil(p * m - 1e-9)) - 1;
  pos = std::clamp<std::ptrdiff_t>(pos, 0, static_cast<std::ptrdiff_t>(sorted.size()) - 1);
  return sorted[static_cast<std::size_t>(pos)];
}

// Centered AR innovations of the residual series.
Eigen::VectorXd centered_innovations(const CondCorrModel& m) {
  const ArModel& ar = m.residual_ar;
  const TimeSeries& e = m.residuals;
  std::vector<double> zeta;
  for (Eigen::Index t = ar.order; t < e.size(); ++t) {
    bool ok = !e.missing(t);
    for (int i = 1; i <= ar.order && ok; ++i) ok = !e.missing(t - i);
    if (!ok) continue;
    double v = e.values(t) - ar.intercept;
    for (int i = 1; i <= ar.order; ++i) v -= ar.coefficients(i - 1) * e.values(t - i);
    zeta.push_back(v);
  }
  if (zeta.empty()) {
    const Eigen::VectorXd r = m.compact_residuals();
    zeta.assign(r.data(), r.data() + r.size());
  }
  Eigen::VectorXd out = Eigen::Map<Eigen::VectorXd>(zeta.data(), static_cast<Eigen::Index>(zeta.size()));
  return out.array() - out.mean();
}

}  // namespace

CondCorrSet conditional_acf(const NormalizedSeries& y_star, const CovariateSet& z, int max_lag,
                            const std::vector<TermSpec>& terms, const CondCorrOptions& options) {
  const TimeSeries& y = y_star.y_star;
  if (y.grid != z.grid) throw AlignmentError("conditional_acf: series and covariates differ in grid");
  return fit_lags(max_lag, options, [&](int k, std::string& reason) {
    return fit_one_lag(
        k, z, terms, [&](Eigen::Index t) { return t >= k && !y.missing(t) && !y.missing(t - k); },
        [&](Eigen::Index t) { return y.values(t) * y.values(t - k); }, options, reason);
  });
}

CondCorrSet conditional_ccf(const NormalizedSeries& x_star, const NormalizedSeries& y_star,
                            const CovariateSet& z, int max_lag, const std::vector<TermSpec>& terms,
                            const CondCorrOptions& options) {
  const TimeSeries& x = x_star.y_star;
  const TimeSeries& y = y_star.y_star;
  if (x.grid != z.grid || y.grid != z.grid)
    throw AlignmentError("conditional_ccf: series and covariates differ in grid");
  const Eigen::Index n = z.rows();
  return fit_lags(max_lag, options, [&](int k, std::string& reason) {
    return fit_one_lag(
        k, z, terms,
        [&](Eigen::Index t) { return t + k < n && !x.missing(t) && !y.missing(t + k); },
        [&](Eigen::Index t) { return y.values(t + k) * x.values(t); }, options, reason);
  });
}

const LagInterval* LagTimeEstimate::interval(double alpha) const {
  for (const auto& i : intervals)
    if (std::abs(i.alpha - alpha) < 1e-12) return &i;
  return nullptr;
}

LagTimeEstimate estimate_lag_time(const std::vector<CondCorrModel>& models,
                                  const CovariateRows& rows) {
  if (models.empty()) throw EstimationError("estimate_lag_time: every lag was skipped");
  std::vector<const CondCorrModel*> ordered;
  for (const auto& m : models) ordered.push_back(&m);
  std::sort(ordered.begin(), ordered.end(),
            [](const auto* a, const auto* b) { return a->lag < b->lag; });
  std::vector<SmoothModel> smooths;
  std::vector<int> lags;
  for (const auto* m : ordered) {
    smooths.push_back(m->model);
    lags.push_back(m->lag);
  }
  LagPredictions p = predict_lags(smooths, lags, rows);
  LagTimeEstimate out;
  out.correlations = std::move(p.correlations);
  out.lags = std::move(p.lags);
  argmax_rows(out.correlations, out.lags, out.lag, &out.max_correlation);
  return out;
}

BootstrapResult sieve_bootstrap_ci(const std::vector<CondCorrModel>& models,
                                   const CovariateRows& rows, const BootstrapOptions& options) {
  if (models.empty()) throw EstimationError("sieve bootstrap: no fitted lag models");
  if (options.replicates < 1) throw ContractError("sieve bootstrap: replicates must be >= 1");
  for (double a : options.alphas)
    if (!(a > 0.0 && a < 1.0)) throw ContractError("sieve bootstrap: alpha must lie in (0, 1)");

  std::vector<const CondCorrModel*> ordered;
  for (const auto& m : models) ordered.push_back(&m);
  std::sort(ordered.begin(), ordered.end(),
            [](const auto* a, const auto* b) { return a->lag < b->lag; });
  std::vector<int> lags;
  std::vector<Eigen::VectorXd> innovations;
  for (const auto* m : ordered) {
    lags.push_back(m->lag);
    innovations.push_back(centered_innovations(*m));
  }

  const auto m = static_cast<std::size_t>(options.replicates);
  const Eigen::Index n_rows = rows.rows();
  std::vector<std::vector<std::uint16_t>> draws(m);
  std::vector<char> ok(m, 0);

  parallel_for(m, options.threads, [&](std::size_t b) {
    Rng rng = Rng::derive(options.seed, b);
    std::vector<SmoothModel> refits;
    refits.reserve(ordered.size());
    for (std::size_t j = 0; j < ordered.size(); ++j) {
      const CondCorrModel& cm = *ordered[j];
      const ArModel& ar = cm.residual_ar;
      const Eigen::VectorXd& zeta = innovations[j];
      const Eigen::VectorXd observed = cm.compact_residuals();
      const Eigen::Index len = cm.n_used();
      const Eigen::Index total = len + options.burn_in;
      const Eigen::Index p = std::min<Eigen::Index>(ar.order, len);

      Eigen::VectorXd eps(total);
      for (Eigen::Index t = 0; t < total; ++t) {
        const double draw = zeta(static_cast<Eigen::Index>(rng.index(static_cast<std::uint64_t>(zeta.size()))));
        if (t < p) {
          eps(t) = observed(t);
          continue;
        }
        double v = ar.intercept + draw;
        for (int i = 1; i <= ar.order; ++i) v += ar.coefficients(i - 1) * eps(t - i);
        eps(t) = v;
      }
      const Eigen::VectorXd response = cm.model.fitted + eps.tail(len);
      try {
        refits.push_back(fit_gam(response, cm.training_rows, cm.terms, Family::gaussian_corr_link,
                                 std::nullopt, options.fit));
      } catch (const FitError&) {
        return;
      }
    }
    const LagPredictions pred = predict_lags(refits, lags, rows);
    std::vector<int> d;
    argmax_rows(pred.correlations, lags, d, nullptr);
    draws[b].assign(d.begin(), d.end());
    ok[b] = 1;
  });

  BootstrapResult out;
  std::vector<std::size_t> kept;
  for (std::size_t b = 0; b < m; ++b)
    if (ok[b]) kept.push_back(b);
  out.replicates = static_cast<int>(kept.size());
  out.dropped = static_cast<int>(m - kept.size());
  if (static_cast<double>(out.dropped) > options.max_drop_fraction * static_cast<double>(m) ||
      kept.empty())
    throw BootstrapError("sieve bootstrap: " + std::to_string(out.dropped) + " of " +
                         std::to_string(m) + " replicates failed to refit");

  for (double alpha : options.alphas) {
    LagInterval iv;
    iv.alpha = alpha;
    iv.lower.assign(static_cast<std::size_t>(n_rows), 0);
    iv.upper.assign(static_cast<std::size_t>(n_rows), 0);
    out.intervals.push_back(std::move(iv));
  }
  std::vector<std::uint16_t> sample;
  for (Eigen::Index i = 0; i < n_rows; ++i) {
    sample.clear();
    for (std::size_t b : kept) {
      const auto v = draws[b][static_cast<std::size_t>(i)];
      if (v > 0) sample.push_back(v);
    }
    if (sample.empty()) continue;
    std::sort(sample.begin(), sample.end());
    for (auto& iv : out.intervals) {
      iv.lower[static_cast<std::size_t>(i)] = sample_quantile(sample, iv.alpha / 2.0);
      iv.upper[static_cast<std::size_t>(i)] = sample_quantile(sample, 1.0 - iv.alpha / 2.0);
    }
  }
  return out;
}

void attach_intervals(LagTimeEstimate& estimate, const BootstrapResult& bootstrap) {
  estimate.intervals = bootstrap.intervals;
  for (auto& iv : estimate.intervals) {
    if (iv.lower.size() != estimate.lag.size())
      throw ContractError("attach_intervals: interval rows do not match the estimate");
    for (std::size_t i = 0; i < estimate.lag.size(); ++i) {
      const int d = estimate.lag[i];
      if (d == 0 || iv.lower[i] == 0) continue;
      iv.lower[i] = std::min(iv.lower[i], d);
      iv.upper[i] = std::max(iv.upper[i], d);
    }
  }
}

LagTimeEvaluation evaluate_lag_time(const NormalizedSeries& x_star, const NormalizedSeries& y_star,
                                    const CovariateSet& z, const LagTimeEstimate& estimate,
                                    const std::vector<CondCorrModel>& models,
                                    const CondCorrOptions& options) {
  if (models.empty()) throw EstimationError("evaluate_lag_time: no fitted lag models");
  if (estimate.rows() != z.rows())
    throw ContractError("evaluate_lag_time: estimate must cover every grid row");
  const TimeSeries& x = x_star.y_star;
  const TimeSeries& y = y_star.y_star;
  const Eigen::Index n = z.rows();
  const std::vector<TermSpec>& terms = models.front().terms;

  std::string reason;
  auto lead = fit_one_lag(
      0, z, terms,
      [&](Eigen::Index t) {
        const int d = estimate.lag[static_cast<std::size_t>(t)];
        return d > 0 && t + d < n && !x.missing(t) && !y.missing(t + d);
      },
      [&](Eigen::Index t) { return y.values(t + estimate.lag[static_cast<std::size_t>(t)]) * x.values(t); },
      options, reason);
  if (!lead) throw FitError("evaluate_lag_time: lead model could not be fitted: " + reason);

  LagTimeEvaluation out;
  out.index = lead->index;
  out.lead_model = lead->model;
  out.lead_correlation = lead->model.fitted;
  out.lags = estimate.lags;
  const auto rows = static_cast<Eigen::Index>(out.index.size());
  out.lag_correlations.resize(rows, estimate.correlations.cols());
  Eigen::Index wins = 0, wins_inclusive = 0;
  for (Eigen::Index r = 0; r < rows; ++r) {
    const Eigen::Index t = out.index[static_cast<std::size_t>(r)];
    out.lag_correlations.row(r) = estimate.correlations.row(t);
    const int d = estimate.lag[static_cast<std::size_t>(t)];
    bool beats_others = true, beats_all = true;
    for (Eigen::Index j = 0; j < estimate.correlations.cols(); ++j) {
      const double c = estimate.correlations(t, j);
      if (std::isnan(c)) continue;
      const bool greater = out.lead_correlation(r) > c;
      beats_all = beats_all && greater;
      if (estimate.lags[static_cast<std::size_t>(j)] != d) beats_others = beats_others && greater;
    }
    wins += beats_others;
    wins_inclusive += beats_all;
  }
  out.fraction = rows > 0 ? static_cast<double>(wins) / static_cast<double>(rows) : 0.0;
  out.fraction_inclusive = rows > 0 ? static_cast<double>(wins_inclusive) / static_cast<double>(rows) : 0.0;
  return out;
}

CovariateRows median_profile(const CovariateSet& z, const std::string& covariate, int points) {
  if (points < 2) throw ContractError("median_profile: need at least 2 points");
  const Eigen::Index target = z.index_of(covariate);
  CovariateRows out{z.names, Eigen::MatrixXd(points, z.cols())};
  for (Eigen::Index j = 0; j < z.cols(); ++j) {
    std::vector<double> v;
    for (Eigen::Index i = 0; i < z.rows(); ++i)
      if (!z.missing(i, j)) v.push_back(z.values(i, j));
    if (v.empty()) throw EstimationError("median_profile: covariate '" + z.names[static_cast<std::size_t>(j)] + "' has no observations");
    std::sort(v.begin(), v.end());
    if (j == target) {
      for (int r = 0; r < points; ++r)
        out.values(r, j) = v.front() + (v.back() - v.front()) * r / (points - 1);
    } else {
      const std::size_t h = v.size() / 2;
      const double med = v.size() % 2 ? v[h] : 0.5 * (v[h - 1] + v[h]);
      out.values.col(j).setConstant(med);
    }
  }
  return out;
}

}  // namespace condnorm
