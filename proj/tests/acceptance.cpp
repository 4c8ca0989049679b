// Acceptance run: one PASS/FAIL line per criterion.
//
//   acceptance --cli PATH --golden DIR [--known-failures 5,...] [--only 3]
//
// Exits 0 when every criterion passes or fails only where listed in
// --known-failures; a listed criterion that passes is reported but not
// treated as an error.

#include <unistd.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdarg>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <iostream>
#include <limits>
#include <numbers>
#include <numeric>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "condnorm/ar.hpp"
#include "condnorm/cond_corr.hpp"
#include "condnorm/gam.hpp"
#include "condnorm/impute.hpp"
#include "condnorm/link.hpp"
#include "condnorm/normalize.hpp"
#include "condnorm/random.hpp"
#include "condnorm/simulate.hpp"
#include "condnorm/timeseries.hpp"
#include "oracle.hpp"

using namespace condnorm;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* format, ...) __attribute__((format(printf, 1, 2)));
std::string fmt(const char* format, ...) {
  char buf[512];
  va_list args;
  va_start(args, format);
  std::vsnprintf(buf, sizeof buf, format, args);
  va_end(args);
  return buf;
}

std::vector<TermSpec> smooth_of(const std::string& name, int k = 10) {
  TermSpec t;
  t.covariate = name;
  t.basis.dimension = k;
  return {t};
}

Eigen::VectorXd ar_path(const std::vector<double>& phi, int n, Rng& rng) {
  const int burn = 500;
  std::vector<double> x(static_cast<std::size_t>(n + burn), 0.0);
  for (std::size_t t = 0; t < x.size(); ++t) {
    double v = rng.normal();
    for (std::size_t j = 0; j < phi.size() && j < t; ++j) v += phi[j] * x[t - j - 1];
    x[t] = v;
  }
  Eigen::VectorXd out(n);
  for (int i = 0; i < n; ++i) out(i) = x[static_cast<std::size_t>(i + burn)];
  return out;
}

// Normalizer pairs fitted by the criteria below, for the round-trip check.
struct FittedPair {
  std::string label;
  TimeSeries y;
  CovariateSet z;
  ConditionalNormalizer models;
};
std::vector<FittedPair> g_fitted;

void record(const std::string& label, const TimeSeries& y, const CovariateSet& z,
            const ConditionalNormalizer& models) {
  g_fitted.push_back({label, y, z, models});
}

// ---------------------------------------------------------------------------

Outcome gam_oracle() {
  double worst = 0.0;
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    Rng rng(seed);
    const int n = 50;
    Eigen::VectorXd x(n), y(n);
    for (int i = 0; i < n; ++i) {
      x(i) = rng.uniform();
      y(i) = std::sin(2.0 * std::numbers::pi * x(i)) + 0.3 * rng.normal();
    }
    const double lambda = std::pow(10.0, rng.uniform(-3.0, 1.0));
    TermSpec term = smooth_of("z", 8)[0];
    term.lambda = lambda;
    const CovariateRows rows{{"z"}, x};
    const SmoothModel m = fit_gam(y, rows, {term}, Family::gaussian_identity);
    const Eigen::MatrixXd b = model_matrix(m, rows);
    const Eigen::VectorXd beta = oracle::ridge(b, m.penalty_matrix(), 1.0, y);
    worst = std::max(worst, (m.coefficients() - beta).cwiseAbs().maxCoeff());
    worst = std::max(worst, (m.fitted - b * beta).cwiseAbs().maxCoeff());
  }
  return {worst <= 1e-8, fmt("max |beta - closed form| = %.3g over 10 seeds (tol 1e-8)", worst)};
}

Outcome link_roundtrip() {
  double round = 0.0, odd = 0.0;
  for (int i = -999; i <= 999; ++i) {
    const double c = i / 1000.0;
    const double u = corr_link(c);
    round = std::max(round, std::abs(corr_link_inv(u) - c));
    odd = std::max(odd, std::abs(corr_link_inv(-u) + corr_link_inv(u)));
  }
  return {round < 1e-12 && odd <= 1e-14,
          fmt("roundtrip %.3g (tol 1e-12), odd symmetry %.3g (tol 1e-14), 1999 points", round, odd)};
}

Outcome kalman_oracle() {
  double worst = 0.0;
  const std::vector<std::vector<double>> cases{{0.7}, {0.5, -0.3}};
  for (const auto& phi : cases) {
    for (std::uint64_t seed = 1; seed <= 10; ++seed) {
      Rng rng(seed);
      const int n = 30;
      const Eigen::VectorXd x = ar_path(phi, n, rng);
      std::vector<int> order(n);
      std::iota(order.begin(), order.end(), 0);
      for (int i = n - 1; i > 0; --i) std::swap(order[i], order[rng.index(i + 1)]);
      Mask missing = Mask::Constant(n, false);
      for (int i = 0; i < 6; ++i) missing(order[i]) = true;  // 20%

      Eigen::VectorXd coef(static_cast<Eigen::Index>(phi.size()));
      for (std::size_t j = 0; j < phi.size(); ++j) coef(static_cast<Eigen::Index>(j)) = phi[j];
      const auto out = kalman_smooth(x, missing, ArModel::from_coefficients(coef, 1.0));

      std::vector<int> observed;
      std::vector<double> values;
      for (int i = 0; i < n; ++i)
        if (!missing(i)) {
          observed.push_back(i);
          values.push_back(x(i));
        }
      const Eigen::VectorXd cm = oracle::gaussian_condition(
          oracle::ar_covariance_matrix(phi, 1.0, n), observed,
          Eigen::Map<const Eigen::VectorXd>(values.data(), static_cast<Eigen::Index>(values.size())));
      for (int i = 0; i < n; ++i)
        if (missing(i)) worst = std::max(worst, std::abs(out.mean(i) - cm(i)));
    }
  }
  const double psi = 0.8;
  Eigen::VectorXd x(5);
  x << 0.4, -1.2, 0.0, 0.9, 0.1;
  Mask missing = Mask::Constant(5, false);
  missing(2) = true;
  Eigen::VectorXd coef(1);
  coef << psi;
  const auto out = kalman_smooth(x, missing, ArModel::from_coefficients(coef, 1.0));
  const double closed = std::abs(out.mean(2) - psi * (x(1) + x(3)) / (1.0 + psi * psi));
  return {worst <= 1e-6 && closed <= 1e-8,
          fmt("dense conditioning %.3g (tol 1e-6) on AR(1)/AR(2) x 10 seeds; closed form %.3g "
              "(tol 1e-8)",
              worst, closed)};
}

Outcome normalization_roundtrip() {
  double worst = 0.0;
  for (const auto& f : g_fitted) {
    const NormalizedSeries ns = normalize(f.y, f.z, f.models);
    const CovariateRows rows = CovariateRows::from(f.z);
    const Eigen::VectorXd back = unnormalize(ns.y_star.values, rows, f.models);
    for (Eigen::Index i = 0; i < f.y.size(); ++i)
      if (!ns.y_star.missing(i)) worst = std::max(worst, std::abs(back(i) - f.y.values(i)));
  }
  return {!g_fitted.empty() && worst <= 1e-10,
          fmt("max |unnormalize(normalize(y)) - y| = %.3g over %zu fitted pairs (tol 1e-10)", worst,
              g_fitted.size())};
}

Outcome order_selection() {
  int ar1 = 0, white = 0;
  for (std::uint64_t seed = 1; seed <= 100; ++seed) {
    Rng rng(Rng::derive(5000, seed));
    const Eigen::VectorXd a = ar_path({0.8}, 2000, rng);
    ar1 += fit_ar(a, Mask::Constant(2000, false), 10).order == 1;
    const Eigen::VectorXd w = ar_path({}, 2000, rng);
    white += fit_ar(w, Mask::Constant(2000, false), 10).order == 0;
  }
  return {ar1 >= 80 && white >= 80,
          fmt("AR(1) psi=0.8 order 1 in %d/100, white noise order 0 in %d/100 (need >= 80 each, "
              "max_order 10)",
              ar1, white)};
}

// Threshold planted-lag fixture shared by criteria 6-8.
struct LagFixture {
  SimData data;
  NormalizedSeries x_star;
  NormalizedSeries y_star;
  CondCorrSet set;
  LagTimeEstimate estimate;
  LagTimeEvaluation evaluation;
};

const LagFixture& lag_fixture() {
  static const LagFixture f = [] {
    LagFixture out;
    SimSpec spec;
    spec.n = 10000;
    spec.seed = 42;
    spec.variance = VariancePreset::exp;
    spec.ar = {0.5};
    spec.lag_rule = LagRule::threshold;
    spec.lag_below = 3;
    spec.lag_above = 7;
    spec.threshold = 0.0;
    out.data = simulate(spec);
    const auto terms = smooth_of("z");
    const auto mx = fit_conditional_normalizer(out.data.x, out.data.z, terms);
    const auto my = fit_conditional_normalizer(out.data.y, out.data.z, terms);
    record("planted x", out.data.x, out.data.z, mx);
    record("planted y", out.data.y, out.data.z, my);
    out.x_star = normalize(out.data.x, out.data.z, mx);
    out.y_star = normalize(out.data.y, out.data.z, my);
    CondCorrOptions options;
    options.threads = 4;
    out.set = conditional_ccf(out.x_star, out.y_star, out.data.z, 12, terms, options);
    out.estimate = estimate_lag_time(out.set.models, CovariateRows::from(out.data.z));
    out.evaluation =
        evaluate_lag_time(out.x_star, out.y_star, out.data.z, out.estimate, out.set.models, options);
    return out;
  }();
  return f;
}

Outcome planted_lag() {
  const LagFixture& f = lag_fixture();
  std::size_t correct = 0;
  for (Eigen::Index t : f.evaluation.index)
    correct += f.estimate.lag[static_cast<std::size_t>(t)] ==
               f.data.truth.lag[static_cast<std::size_t>(t)];
  const double share = static_cast<double>(correct) / static_cast<double>(f.evaluation.index.size());
  return {share >= 0.85, fmt("d_t correct at %.4f of %zu evaluation rows (need >= 0.85), K=12, "
                             "%zu lags fitted",
                             share, f.evaluation.index.size(), f.set.models.size())};
}

Outcome sieve_bootstrap() {
  const LagFixture& f = lag_fixture();
  const CovariateRows rows = CovariateRows::from(f.data.z);
  BootstrapOptions options;
  options.replicates = 200;
  options.seed = 2024;
  options.threads = 4;
  const BootstrapResult first = sieve_bootstrap_ci(f.set.models, rows, options);
  options.threads = 1;
  const BootstrapResult second = sieve_bootstrap_ci(f.set.models, rows, options);

  bool identical = first.dropped == second.dropped;
  for (std::size_t j = 0; j < first.intervals.size(); ++j)
    identical = identical && first.intervals[j].lower == second.intervals[j].lower &&
                first.intervals[j].upper == second.intervals[j].upper;

  LagTimeEstimate est = f.estimate;
  attach_intervals(est, first);
  const LagInterval* wide = est.interval(0.05);
  const LagInterval* narrow = est.interval(0.20);
  bool ordered = wide && narrow;
  bool nested = ordered;
  std::size_t covered = 0;
  const auto& idx = f.evaluation.index;
  for (Eigen::Index t = 0; ordered && t < est.rows(); ++t) {
    const auto u = static_cast<std::size_t>(t);
    ordered = ordered && 1 <= wide->lower[u] && wide->lower[u] <= est.lag[u] &&
              est.lag[u] <= wide->upper[u] && wide->upper[u] <= 12;
    nested = nested && wide->lower[u] <= narrow->lower[u] && narrow->upper[u] <= wide->upper[u];
  }
  for (Eigen::Index t : idx) {
    const auto u = static_cast<std::size_t>(t);
    const int truth = f.data.truth.lag[u];
    covered += wide->lower[u] <= truth && truth <= wide->upper[u];
  }
  const double coverage = static_cast<double>(covered) / static_cast<double>(idx.size());
  return {coverage >= 0.85 && ordered && nested && identical,
          fmt("95%% coverage %.4f (need >= 0.85); integer-valued, ordered %s, nested %s, identical "
              "across reruns %s; m=200, dropped %d",
              coverage, ordered ? "yes" : "NO", nested ? "yes" : "NO", identical ? "yes" : "NO",
              first.dropped)};
}

Outcome evaluation_metric() {
  const LagTimeEvaluation& e = lag_fixture().evaluation;
  return {e.fraction >= 0.85,
          fmt("d_t-model exceeds every other lag at %.4f of rows (need >= 0.85; inclusive of k = "
              "d_t: %.4f)",
              e.fraction, e.fraction_inclusive)};
}

Outcome unconditional_reduction() {
  const int n = 5000;
  Rng rng(77);
  const Eigen::VectorXd x = ar_path({0.6}, n, rng);
  const Eigen::VectorXd noise = ar_path({0.3}, n, rng);
  Eigen::VectorXd y(n);
  for (int t = 0; t < n; ++t) y(t) = (t >= 2 ? 0.8 * x(t - 2) : 0.0) + noise(t);
  const TimeGrid grid{0, 300, n};
  Eigen::VectorXd zv(n);
  for (int t = 0; t < n; ++t) zv(t) = rng.uniform();
  const CovariateSet z = align(std::vector<TimeSeries>{TimeSeries("z", grid, zv)});
  const TimeSeries xs("x", grid, x), ys("y", grid, y);
  const auto mx = fit_conditional_normalizer(xs, z, {});
  const auto my = fit_conditional_normalizer(ys, z, {});
  record("intercept-only x", xs, z, mx);
  record("intercept-only y", ys, z, my);
  const CondCorrSet set = conditional_ccf(normalize(xs, z, mx), normalize(ys, z, my), z, 10, {});
  const std::vector<double> xv(x.data(), x.data() + n), yv(y.data(), y.data() + n);
  const auto classical = oracle::classical_ccf(xv, yv, 10);
  double worst = 0.0;
  for (const auto& m : set.models)
    worst = std::max(worst, std::abs(m.model.fitted(0) - classical[static_cast<std::size_t>(m.lag - 1)]));
  return {set.models.size() == 10 && worst <= 0.05,
          fmt("max |intercept-only c_k - sample ccf| = %.4f over k=1..10 (tol 0.05), peak "
              "classical %.3f at k=2",
              worst, classical[1])};
}

Outcome imputation_quality() {
  SimSpec spec;
  spec.n = 1000;
  spec.seed = 99;
  spec.mean = MeanPreset::sine;
  spec.level = 5.0;
  spec.slope = 2.0;
  spec.variance = VariancePreset::exp;
  spec.variance_rate = 1.0;
  spec.ar = {0.7};
  spec.walk_step = 0.1;
  const SimData d = simulate(spec);

  // Mask 10% in runs of 1..8.
  Rng rng(100);
  TimeSeries y = d.y;
  Eigen::Index masked = 0;
  while (masked < spec.n / 10) {
    const auto start = static_cast<Eigen::Index>(10 + rng.index(static_cast<std::uint64_t>(spec.n - 30)));
    const auto len = static_cast<Eigen::Index>(1 + rng.index(8));
    for (Eigen::Index i = start; i < start + len && masked < spec.n / 10; ++i)
      if (!y.missing(i)) {
        y.missing(i) = true;
        ++masked;
      }
  }
  Eigen::VectorXd scrambled = y.values;
  for (Eigen::Index i = 0; i < y.size(); ++i)
    if (y.missing(i)) scrambled(i) = 0.0;
  y.values = scrambled;

  const auto terms = smooth_of("z");
  const ImputationResult r = impute_series(y, d.z, terms);
  record("imputation fixture", y, d.z, r.normalizer);

  // Oracle: true m, v and AR, dense Gaussian conditioning.
  std::vector<int> observed;
  std::vector<double> values;
  for (int i = 0; i < spec.n; ++i)
    if (!y.missing(i)) {
      observed.push_back(i);
      values.push_back((y.values(i) - d.truth.mean(i)) / std::sqrt(d.truth.variance(i)));
    }
  const Eigen::VectorXd cm = oracle::gaussian_condition(
      oracle::ar_covariance_matrix(spec.ar, 1.0, static_cast<int>(spec.n)), observed,
      Eigen::Map<const Eigen::VectorXd>(values.data(), static_cast<Eigen::Index>(values.size())));

  double se_pipeline = 0.0, se_oracle = 0.0;
  bool identical = true;
  for (Eigen::Index i = 0; i < spec.n; ++i) {
    if (y.missing(i)) {
      const double oracle_value = d.truth.mean(i) + std::sqrt(d.truth.variance(i)) * cm(i);
      se_pipeline += std::pow(r.series.values(i) - d.y.values(i), 2);
      se_oracle += std::pow(oracle_value - d.y.values(i), 2);
    } else {
      identical = identical && std::memcmp(&r.series.values(i), &y.values(i), sizeof(double)) == 0;
    }
  }
  const double rp = std::sqrt(se_pipeline / static_cast<double>(masked));
  const double ro = std::sqrt(se_oracle / static_cast<double>(masked));
  return {rp <= 1.1 * ro && identical && r.series.missing.count() == 0,
          fmt("RMSE pipeline %.4f vs true-parameter oracle %.4f, ratio %.3f (need <= 1.1); %ld "
              "masked; observed values byte-identical %s; AR order %d",
              rp, ro, rp / ro, static_cast<long>(masked), identical ? "yes" : "NO", r.ar.order)};
}

Outcome cleaning_fixtures() {
  // Wiper: period 12, spikes at residue 5 on a slow sine with noise.
  Rng rng(11);
  const int n = 360;
  Eigen::VectorXd v(n);
  for (int i = 0; i < n; ++i) v(i) = 10.0 + 3.0 * std::sin(i / 40.0) + 0.5 * rng.normal() + (i % 12 == 5 ? 40.0 : 0.0);
  const TimeSeries raw("turbidity", TimeGrid{1577836800, 60, n}, v);
  const int phase = detect_wiper_phase(raw, 12);
  const TimeSeries wiped = remove_wiper_anomalies(raw, 12);
  const auto removed = wiped.missing.count();

  // Aggregation: one-minute values starting 2 minutes into a 5-minute bin.
  //   bin 00:00  minutes 2,3,4      -> 1, 2, 3       mean 2
  //   bin 00:05  minutes 5..9       -> 4, NA, 6, 7, 8 mean 6.25
  //   bin 00:10  minutes 10..14     -> all NA         empty
  //   bin 00:15  minutes 15,16      -> 14, 15         mean 14.5
  const double na = std::numeric_limits<double>::quiet_NaN();
  const std::vector<double> minute{1, 2, 3, 4, na, 6, 7, 8, na, na, na, na, na, 14, 15};
  Eigen::VectorXd mv(15);
  Mask mm(15);
  for (int i = 0; i < 15; ++i) {
    mm(i) = std::isnan(minute[static_cast<std::size_t>(i)]);
    mv(i) = mm(i) ? 0.0 : minute[static_cast<std::size_t>(i)];
  }
  const TimeSeries one_minute("q", TimeGrid{1577836800 + 120, 60, 15}, mv, mm);
  const TimeSeries five = aggregate(one_minute, 300);
  const bool bins = five.grid.start == 1577836800 && five.size() == 4 && five.values(0) == 2.0 &&
                    five.values(1) == 6.25 && five.missing(2) && five.values(3) == 14.5 &&
                    five.missing.count() == 1;
  return {phase == 5 && removed == 30 && bins,
          fmt("wiper phase %d (expect 5), removed %ld (expect 30); 5-minute bins %s", phase,
              static_cast<long>(removed), bins ? "exact" : "WRONG")};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

Outcome cli_golden(const std::string& cli, const fs::path& golden) {
  const std::vector<std::string> commands{"synth", "clean", "normalize", "impute", "ccf", "lagtime"};
  std::vector<std::string> problems;
  std::size_t files = 0;
  const fs::path work = fs::temp_directory_path() / ("condnorm_acceptance_" + std::to_string(::getpid()));
  for (const auto& cmd : commands) {
    const fs::path fixture = golden / cmd;
    const fs::path out = work / cmd;
    fs::remove_all(out);
    fs::create_directories(out);
    const std::string line = "\"" + cli + "\" " + cmd + " --config \"" +
                             (fixture / "config.toml").string() + "\" --seed 7 --out \"" +
                             out.string() + "\" > /dev/null 2>&1";
    if (std::system(line.c_str()) != 0) {
      problems.push_back(cmd + ": non-zero exit");
      continue;
    }
    std::set<std::string> expected, produced;
    for (const auto& e : fs::directory_iterator(fixture / "expected")) expected.insert(e.path().filename());
    for (const auto& e : fs::directory_iterator(out)) produced.insert(e.path().filename());
    if (expected != produced) problems.push_back(cmd + ": file set differs");
    for (const auto& name : expected) {
      ++files;
      if (slurp(fixture / "expected" / name) != slurp(out / name)) problems.push_back(cmd + "/" + name);
    }
  }
  fs::remove_all(work);
  std::string detail = fmt("%zu output files across %zu subcommands", files, commands.size());
  if (problems.empty()) return {true, detail + " byte-identical"};
  detail += "; mismatched:";
  for (const auto& p : problems) detail += " " + p;
  return {false, detail};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Acceptance criteria"};
  std::string cli;
  std::string golden;
  std::vector<int> known;
  std::vector<int> only;
  app.add_option("--cli", cli, "condnorm executable")->required();
  app.add_option("--golden", golden, "Golden fixture directory")->required();
  app.add_option("--known-failures", known, "Criteria expected to fail")->delimiter(',');
  app.add_option("--only", only, "Run only these criteria")->delimiter(',');
  CLI11_PARSE(app, argc, argv);

  struct Criterion {
    int id;
    const char* name;
    double limit_seconds;  // 0 means no runtime bound
    std::function<Outcome()> run;
  };
  // Criterion 4 runs last: it checks every normalizer fitted by the others.
  const std::vector<Criterion> criteria{
      {1, "GAM oracle equivalence", 1.0, gam_oracle},
      {2, "Link correctness", 0.1, link_roundtrip},
      {3, "Kalman oracle equivalence", 1.0, kalman_oracle},
      {5, "Order selection", 30.0, order_selection},
      {6, "Planted-lag recovery", 120.0, planted_lag},
      {7, "Sieve bootstrap", 600.0, sieve_bootstrap},
      {8, "Evaluation metric", 0.0, evaluation_metric},
      {9, "Unconditional reduction", 0.0, unconditional_reduction},
      {10, "Imputation quality", 0.0, imputation_quality},
      {11, "Cleaning fixtures", 0.0, cleaning_fixtures},
      {12, "CLI golden files", 0.0, [&] { return cli_golden(cli, golden); }},
      {4, "Normalization roundtrip", 0.0, normalization_roundtrip},
  };

  int unexpected = 0;
  for (const auto& c : criteria) {
    if (!only.empty() && std::find(only.begin(), only.end(), c.id) == only.end()) continue;
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("threw: ") + e.what()};
    }
    const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    // Criterion 6 includes the shared fixture fit; 7 and 8 reuse it.
    bool in_time = c.limit_seconds <= 0.0 || seconds < c.limit_seconds;
    const bool pass = o.pass && in_time;
    std::string timing = fmt("%.2fs", seconds);
    if (c.limit_seconds > 0.0) timing += fmt(" (limit %gs)", c.limit_seconds);
    const bool listed = std::find(known.begin(), known.end(), c.id) != known.end();
    std::cout << (pass ? "PASS" : "FAIL") << "  " << std::setw(2) << c.id << "  " << c.name << ": "
              << o.detail << "; " << timing;
    if (!pass && listed) std::cout << " [known failure]";
    if (pass && listed) std::cout << " [listed as known failure but passed]";
    std::cout << std::endl;
    if (!pass && !listed) ++unexpected;
  }
  return unexpected == 0 ? 0 : 1;
}
