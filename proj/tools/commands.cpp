#include "commands.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <limits>
#include <set>

#include "condnorm/cond_corr.hpp"
#include "condnorm/csv_io.hpp"
#include "condnorm/error.hpp"
#include "condnorm/impute.hpp"
#include "condnorm/model_io.hpp"
#include "condnorm/normalize.hpp"
#include "condnorm/simulate.hpp"
#include "condnorm/timeseries.hpp"

namespace condnorm::cli {

namespace fs = std::filesystem;

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

fs::path output(const RunConfig& c, const std::string& name) {
  fs::create_directories(c.out);
  return fs::path(c.out) / name;
}

std::ofstream open_out(const fs::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw SchemaError(path.string() + ": cannot write file");
  return out;
}

void write_text(const fs::path& path, const std::string& text) {
  auto out = open_out(path);
  out << text << '\n';
}

std::string num(double v) { return format_number(v); }

CovariateSet load(const RunConfig& c) {
  std::vector<CovariateSet> sets;
  for (const auto& path : c.inputs) sets.push_back(read_csv(path, c.spacing));
  if (sets.size() == 1) return std::move(sets.front());
  std::set<std::string> seen;
  for (const auto& s : sets)
    for (const auto& n : s.names)
      if (!seen.insert(n).second) throw SchemaError("column '" + n + "' appears in several inputs");
  return align(sets);
}

TimeSeries series(const CovariateSet& table, const std::string& name, const char* role) {
  if (name.empty()) throw SchemaError(std::string("config: ") + role + " is not set");
  if (!table.contains(name))
    throw SchemaError(std::string("config: ") + role + " '" + name + "' is not an input column");
  return table.column(name);
}

// Selected covariate columns plus Fourier terms of the grid position.
CovariateSet covariates(const RunConfig& c, const CovariateSet& table) {
  CovariateSet z;
  z.grid = table.grid;
  const Eigen::Index n = table.rows();
  const auto p = static_cast<Eigen::Index>(c.covariates.size()) + 2 * c.fourier_pairs;
  z.values.resize(n, p);
  z.missing.resize(n, p);
  Eigen::Index j = 0;
  for (const auto& name : c.covariates) {
    if (!table.contains(name)) throw SchemaError("config: covariate '" + name + "' is not an input column");
    const Eigen::Index src = table.index_of(name);
    z.names.push_back(name);
    z.values.col(j) = table.values.col(src);
    z.missing.col(j) = table.missing.col(src);
    ++j;
  }
  if (c.fourier_pairs > 0) {
    std::vector<std::int64_t> t(static_cast<std::size_t>(n));
    for (Eigen::Index i = 0; i < n; ++i) t[static_cast<std::size_t>(i)] = table.grid.at(i) / table.grid.spacing;
    const FourierTerms<double> f = fourier_terms<double>(t, c.fourier_period, c.fourier_pairs);
    for (int k = 1; k <= c.fourier_pairs; ++k) {
      z.names.push_back("sin_" + std::to_string(k));
      z.names.push_back("cos_" + std::to_string(k));
    }
    z.values.rightCols(f.values.cols()) = f.values;
    z.missing.rightCols(f.values.cols()).setConstant(false);
  }
  if (z.names.empty()) throw SchemaError("config: no covariates");
  return z;
}

bool is_fourier_column(const RunConfig& c, const std::string& name) {
  return std::find(c.covariates.begin(), c.covariates.end(), name) == c.covariates.end();
}

// Fourier columns enter linearly; covariates get the configured smooth.
std::vector<TermSpec> terms(const RunConfig& c, const CovariateSet& z) {
  std::vector<TermSpec> out;
  for (const auto& name : z.names) {
    TermSpec t{name, c.basis_for(name), std::nullopt};
    if (is_fourier_column(c, name)) t.basis.kind = BasisKind::linear;
    out.push_back(t);
  }
  return out;
}

std::string alpha_label(double alpha) {
  return std::to_string(static_cast<int>(std::lround(100.0 * (1.0 - alpha))));
}

Eigen::VectorXd nan_where(Eigen::VectorXd v, const Mask& missing) {
  for (Eigen::Index i = 0; i < v.size(); ++i)
    if (missing(i)) v(i) = kNaN;
  return v;
}

// Lag models for the configured pair (or the response alone).
struct LagFits {
  CovariateSet z;
  std::vector<TermSpec> terms;
  NormalizedSeries x_star;
  NormalizedSeries y_star;
  CondCorrSet set;
  Mask complete;
};

LagFits fit_lags(const RunConfig& c, const CovariateSet& table) {
  LagFits f;
  f.z = covariates(c, table);
  f.terms = terms(c, f.z);
  CondCorrOptions opt;
  opt.threads = c.threads;
  opt.residual_max_order = c.max_order;
  const bool acf = c.upstream.empty();
  const TimeSeries y = series(table, acf ? c.response : c.downstream, acf ? "response" : "downstream");
  f.y_star = normalize(y, f.z, fit_conditional_normalizer(y, f.z, f.terms));
  if (acf) {
    f.x_star = f.y_star;
    f.set = conditional_acf(f.y_star, f.z, c.max_lag, f.terms, opt);
  } else {
    const TimeSeries x = series(table, c.upstream, "upstream");
    f.x_star = normalize(x, f.z, fit_conditional_normalizer(x, f.z, f.terms));
    f.set = conditional_ccf(f.x_star, f.y_star, f.z, c.max_lag, f.terms, opt);
  }
  for (const auto& s : f.set.skipped)
    std::cerr << "condnorm: lag " << s.lag << " skipped: " << s.reason << '\n';
  f.complete = f.z.complete_rows();
  return f;
}

void write_lag_summary(const fs::path& path, const RunConfig& c, const CondCorrSet& set) {
  auto out = open_out(path);
  out << "lag,status,n_used,edf,dispersion,iterations,ar_order,reason\n";
  for (int k = 1; k <= c.max_lag; ++k) {
    auto m = std::find_if(set.models.begin(), set.models.end(), [k](const auto& x) { return x.lag == k; });
    if (m != set.models.end()) {
      out << k << ",fitted," << m->n_used() << ',' << num(m->model.edf) << ','
          << num(m->model.dispersion) << ',' << m->model.iterations << ',' << m->residual_ar.order
          << ",\n";
      continue;
    }
    auto s = std::find_if(set.skipped.begin(), set.skipped.end(), [k](const auto& x) { return x.lag == k; });
    std::string reason = s != set.skipped.end() ? s->reason : "";
    std::replace(reason.begin(), reason.end(), ',', ';');
    out << k << ",skipped,0,NA,NA,NA,NA," << reason << '\n';
  }
}

LagTimeEstimate expand(const LagTimeEstimate& est, const Mask& keep) {
  LagTimeEstimate out;
  const Eigen::Index n = keep.size();
  out.lags = est.lags;
  out.lag.assign(static_cast<std::size_t>(n), 0);
  out.max_correlation = Eigen::VectorXd::Constant(n, kNaN);
  out.correlations = Eigen::MatrixXd::Constant(n, est.correlations.cols(), kNaN);
  for (const auto& iv : est.intervals)
    out.intervals.push_back({iv.alpha, std::vector<int>(static_cast<std::size_t>(n), 0),
                             std::vector<int>(static_cast<std::size_t>(n), 0)});
  Eigen::Index r = 0;
  for (Eigen::Index i = 0; i < n; ++i) {
    if (!keep(i)) continue;
    const auto ri = static_cast<std::size_t>(r), ii = static_cast<std::size_t>(i);
    out.lag[ii] = est.lag[ri];
    out.max_correlation(i) = est.max_correlation(r);
    out.correlations.row(i) = est.correlations.row(r);
    for (std::size_t a = 0; a < est.intervals.size(); ++a) {
      out.intervals[a].lower[ii] = est.intervals[a].lower[ri];
      out.intervals[a].upper[ii] = est.intervals[a].upper[ri];
    }
    ++r;
  }
  return out;
}

BootstrapResult slice(const BootstrapResult& b, std::size_t first, std::size_t count) {
  BootstrapResult out;
  out.replicates = b.replicates;
  out.dropped = b.dropped;
  for (const auto& iv : b.intervals) {
    LagInterval s{iv.alpha, {}, {}};
    s.lower.assign(iv.lower.begin() + static_cast<std::ptrdiff_t>(first),
                   iv.lower.begin() + static_cast<std::ptrdiff_t>(first + count));
    s.upper.assign(iv.upper.begin() + static_cast<std::ptrdiff_t>(first),
                   iv.upper.begin() + static_cast<std::ptrdiff_t>(first + count));
    out.intervals.push_back(std::move(s));
  }
  return out;
}

CovariateRows stack(const std::vector<CovariateRows>& parts) {
  CovariateRows out;
  out.names = parts.front().names;
  Eigen::Index n = 0;
  for (const auto& p : parts) n += p.rows();
  out.values.resize(n, static_cast<Eigen::Index>(out.names.size()));
  Eigen::Index r = 0;
  for (const auto& p : parts) {
    out.values.middleRows(r, p.rows()) = p.values;
    r += p.rows();
  }
  return out;
}

void write_interval_cells(std::ostream& out, const LagTimeEstimate& est, std::size_t i) {
  for (const auto& iv : est.intervals) {
    if (est.lag[i] == 0 || iv.lower[i] == 0)
      out << ",NA,NA";
    else
      out << ',' << iv.lower[i] << ',' << iv.upper[i];
  }
}

}  // namespace

void cmd_clean(const RunConfig& c) {
  const CovariateSet table = load(c);
  std::map<std::string, std::vector<QualityFlag>> flags;
  if (!c.flags.empty()) flags = read_flags(c.flags, table.grid);
  for (const auto& v : c.wiper_variables)
    if (!table.contains(v)) throw SchemaError("config: wiper variable '" + v + "' is not an input column");
  for (const auto& v : c.interpolate)
    if (!table.contains(v)) throw SchemaError("config: interpolate column '" + v + "' is not an input column");

  auto report = open_out(output(c, "clean_report.csv"));
  report << "variable,rule,count\n";
  std::vector<TimeSeries> cleaned;
  const auto contains = [](const std::vector<std::string>& v, const std::string& s) {
    return std::find(v.begin(), v.end(), s) != v.end();
  };
  for (const auto& name : table.names) {
    TimeSeries s = table.column(name);
    Eigen::Index before = s.missing.count();
    if (auto f = flags.find(name); f != flags.end()) s = remove_range_flagged(s, f->second);
    report << name << ",range_flag," << s.missing.count() - before << '\n';

    before = s.missing.count();
    if (c.wiper_period >= 2 && contains(c.wiper_variables, name)) {
      int phase = 0;
      if (c.wiper_phase == "auto") {
        phase = detect_wiper_phase(s, c.wiper_period);
      } else {
        try {
          phase = std::stoi(c.wiper_phase);
        } catch (const std::exception&) {
          throw SchemaError("config: wiper_phase must be an integer or auto");
        }
      }
      s = remove_wiper_anomalies(s, c.wiper_period, phase);
      report << name << ",wiper_phase," << phase << '\n';
    }
    report << name << ",wiper," << s.missing.count() - before << '\n';

    before = s.missing.count();
    if (c.nonnegative)
      for (Eigen::Index i = 0; i < s.size(); ++i)
        if (!s.missing(i) && s.values(i) < 0.0) s.missing(i) = true;
    report << name << ",nonnegative," << s.missing.count() - before << '\n';

    if (c.aggregate > 0 && c.aggregate != s.grid.spacing)
      s = aggregate(s, c.aggregate, c.statistic == "median" ? BinStatistic::median : BinStatistic::mean);
    report << name << ",empty_bins," << (c.aggregate > 0 ? s.missing.count() : 0) << '\n';

    Eigen::Index filled = 0;
    if (contains(c.interpolate, name)) {
      s = linear_interpolate(s);
      filled = s.imputed.count();
    }
    report << name << ",interpolated," << filled << '\n';
    write_csv(output(c, "clean_" + name + ".csv").string(), s.grid, {to_column(s)});
    cleaned.push_back(std::move(s));
  }
  std::vector<CsvColumn> columns;
  for (const auto& s : cleaned) columns.push_back(to_column(s));
  write_csv(output(c, "cleaned.csv").string(), cleaned.front().grid, columns);
}

void cmd_normalize(const RunConfig& c) {
  const CovariateSet table = load(c);
  const TimeSeries y = series(table, c.response, "response");
  const CovariateSet z = covariates(c, table);
  const ConditionalNormalizer models = fit_conditional_normalizer(y, z, terms(c, z));
  const NormalizedSeries ns = normalize(y, z, models);
  write_csv(output(c, "normalized.csv").string(), y.grid,
            {to_column(y),
             {y.name + "_star", ns.y_star.values, ns.y_star.missing},
             {"mean_hat", ns.mean_hat, {}},
             {"var_hat", ns.var_hat, {}}});
  write_text(output(c, "normalizer_" + y.name + ".json"), to_json(models));
  for (const auto* m : {&models.mean_model, &models.var_model})
    for (const auto& w : m->warnings) std::cerr << "condnorm: " << w << '\n';
}

void cmd_impute(const RunConfig& c) {
  const CovariateSet table = load(c);
  const TimeSeries y = series(table, c.response, "response");
  const CovariateSet z = covariates(c, table);
  ImputeOptions opt;
  opt.max_order = c.max_order;
  opt.nonnegative = c.nonnegative;
  const ImputationResult r = impute_series(y, z, terms(c, z), opt);
  Eigen::VectorXd flag = r.series.imputed.cast<double>();
  write_csv(output(c, "imputed.csv").string(), y.grid,
            {{"value", r.series.values, r.series.missing},
             {"imputed_flag", flag, {}},
             {"lo95", nan_where(r.lower, r.series.missing), {}},
             {"hi95", nan_where(r.upper, r.series.missing), {}}});
  if (y.missing.count() > 0) {
    write_text(output(c, "normalizer_" + y.name + ".json"), to_json(r.normalizer));
    write_text(output(c, "ar_" + y.name + ".json"), to_json(r.ar));
  }
  if (r.rejected_negative > 0)
    std::cerr << "condnorm: " << r.rejected_negative << " negative imputations left missing\n";
}

void cmd_ccf(const RunConfig& c) {
  const CovariateSet table = load(c);
  const LagFits f = fit_lags(c, table);
  const CovariateRows rows = CovariateRows::from(f.z, f.complete);
  const Eigen::Index n = f.z.rows();

  std::vector<CsvColumn> columns;
  for (int k = 1; k <= c.max_lag; ++k) {
    CsvColumn col{"lag_" + std::to_string(k), Eigen::VectorXd::Constant(n, kNaN), {}};
    auto m = std::find_if(f.set.models.begin(), f.set.models.end(),
                          [k](const auto& x) { return x.lag == k; });
    if (m != f.set.models.end()) {
      const Eigen::VectorXd p = predict(m->model, rows).response;
      for (Eigen::Index i = 0, r = 0; i < n; ++i)
        if (f.complete(i)) col.values(i) = p(r++);
    }
    columns.push_back(std::move(col));
  }
  write_csv(output(c, "ccf.csv").string(), f.z.grid, columns);
  write_lag_summary(output(c, "ccf_lags.csv"), c, f.set);

  auto out = open_out(output(c, "ccf_terms.csv"));
  out << "lag,covariate,value,correlation,link,link_se\n";
  for (const auto& name : f.z.names) {
    if (is_fourier_column(c, name)) continue;
    const CovariateRows grid = median_profile(f.z, name, c.profile_points);
    const Eigen::Index j = f.z.index_of(name);
    for (const auto& m : f.set.models) {
      const Prediction p = predict(m.model, grid);
      for (Eigen::Index r = 0; r < grid.rows(); ++r)
        out << m.lag << ',' << name << ',' << num(grid.values(r, j)) << ',' << num(p.response(r))
            << ',' << num(p.link(r)) << ',' << num(p.link_se(r)) << '\n';
    }
  }
}

void cmd_lagtime(const RunConfig& c) {
  const CovariateSet table = load(c);
  const LagFits f = fit_lags(c, table);
  const CovariateRows rows = CovariateRows::from(f.z, f.complete);

  std::vector<CovariateRows> parts{rows};
  std::vector<std::string> profiled;
  if (c.profile == "median") {
    for (const auto& name : f.z.names) {
      if (is_fourier_column(c, name)) continue;
      parts.push_back(median_profile(f.z, name, c.profile_points));
      profiled.push_back(name);
    }
  }
  const CovariateRows all = stack(parts);

  BootstrapOptions bo;
  bo.replicates = c.replicates;
  bo.alphas = c.alphas;
  bo.seed = c.seed;
  bo.threads = c.threads;
  bo.burn_in = c.burn_in;
  const BootstrapResult boot = sieve_bootstrap_ci(f.set.models, all, bo);

  LagTimeEstimate est = estimate_lag_time(f.set.models, rows);
  attach_intervals(est, slice(boot, 0, static_cast<std::size_t>(rows.rows())));
  const LagTimeEstimate full = expand(est, f.complete);

  {
    auto out = open_out(output(c, "lagtime.csv"));
    out << "timestamp,d_t,c_max";
    for (double a : c.alphas) out << ",lo" << alpha_label(a) << ",hi" << alpha_label(a);
    out << '\n';
    for (Eigen::Index i = 0; i < full.rows(); ++i) {
      const auto ii = static_cast<std::size_t>(i);
      out << format_timestamp(f.z.grid.at(i)) << ','
          << (full.lag[ii] > 0 ? std::to_string(full.lag[ii]) : "NA") << ','
          << num(full.max_correlation(i));
      write_interval_cells(out, full, ii);
      out << '\n';
    }
  }

  const CondCorrOptions opt{.min_rows = 50, .residual_max_order = c.max_order, .threads = c.threads, .fit = {}};
  const LagTimeEvaluation ev = evaluate_lag_time(f.x_star, f.y_star, f.z, full, f.set.models, opt);
  {
    auto out = open_out(output(c, "lagtime_evaluation.csv"));
    out << "metric,value\n"
        << "fraction," << num(ev.fraction) << '\n'
        << "fraction_inclusive," << num(ev.fraction_inclusive) << '\n'
        << "rows_evaluated," << ev.index.size() << '\n'
        << "replicates," << boot.replicates << '\n'
        << "dropped," << boot.dropped << '\n'
        << "lags_fitted," << f.set.models.size() << '\n'
        << "lags_skipped," << f.set.skipped.size() << '\n';
  }
  write_lag_summary(output(c, "lagtime_lags.csv"), c, f.set);

  if (!profiled.empty()) {
    auto out = open_out(output(c, "lagtime_profile.csv"));
    out << "covariate,value,d,c_max";
    for (double a : c.alphas) out << ",lo" << alpha_label(a) << ",hi" << alpha_label(a);
    out << '\n';
    std::size_t first = static_cast<std::size_t>(rows.rows());
    for (std::size_t p = 0; p < profiled.size(); ++p) {
      const CovariateRows& grid = parts[p + 1];
      LagTimeEstimate pe = estimate_lag_time(f.set.models, grid);
      attach_intervals(pe, slice(boot, first, static_cast<std::size_t>(grid.rows())));
      first += static_cast<std::size_t>(grid.rows());
      const Eigen::Index j = f.z.index_of(profiled[p]);
      for (Eigen::Index r = 0; r < grid.rows(); ++r) {
        const auto rr = static_cast<std::size_t>(r);
        out << profiled[p] << ',' << num(grid.values(r, j)) << ',' << pe.lag[rr] << ','
            << num(pe.max_correlation(r));
        write_interval_cells(out, pe, rr);
        out << '\n';
      }
    }
  }
}

void cmd_synth(const RunConfig& c) {
  SimSpec spec = c.synth;
  spec.seed = c.seed;
  const SimData d = simulate(spec);
  write_csv(output(c, "synth.csv").string(), d.x.grid, {to_column(d.x), to_column(d.y), to_columns(d.z).front()});
  std::vector<double> lag(d.truth.lag.begin(), d.truth.lag.end());
  write_csv(output(c, "synth_truth.csv").string(), d.x.grid,
            {{"mean", d.truth.mean, {}},
             {"variance", d.truth.variance, {}},
             {"noise", d.truth.noise, {}},
             {"lag", Eigen::Map<const Eigen::VectorXd>(lag.data(), static_cast<Eigen::Index>(lag.size())), {}}});
}

}  // namespace condnorm::cli
