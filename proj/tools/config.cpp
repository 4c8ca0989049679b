#include "config.hpp"

#include <filesystem>

#include "condnorm/error.hpp"

namespace condnorm::cli {

namespace {

template <typename E, typename Parse>
CLI::Option* enum_option(CLI::App& app, const std::string& name, E& target, Parse parse,
                         const std::string& help) {
  return app
      .add_option_function<std::string>(
          name, [&target, parse](const std::string& v) { target = parse(v); }, help)
      ->check([parse](const std::string& v) {
        try {
          parse(v);
          return std::string();
        } catch (const Error& e) {
          return std::string(e.what());
        }
      });
}

}  // namespace

BasisSpec RunConfig::basis_for(const std::string& covariate) const {
  BasisSpec spec;
  spec.kind = parse_basis_kind(basis);
  spec.knots = parse_knot_placement(knots);
  spec.dimension = k;
  for (const auto& entry : basis_k) {
    const auto colon = entry.rfind(':');
    if (colon == std::string::npos) throw SchemaError("basis_k entry '" + entry + "' is not name:k");
    if (entry.substr(0, colon) != covariate) continue;
    try {
      spec.dimension = std::stoi(entry.substr(colon + 1));
    } catch (const std::exception&) {
      throw SchemaError("basis_k entry '" + entry + "' has a non-integer k");
    }
  }
  return spec;
}

void RunConfig::validate() const {
  if (command != "synth" && inputs.empty()) throw SchemaError("config: no input files");
  if (max_lag < 1) throw SchemaError("config: max_lag must be >= 1");
  if (replicates < 1) throw SchemaError("config: replicates must be >= 1");
  if (max_order < 0) throw SchemaError("config: max_order must be >= 0");
  if (threads < 1) throw SchemaError("config: threads must be >= 1");
  if (wiper_period == 1 || wiper_period < 0) throw SchemaError("config: wiper_period must be >= 2");
  if (aggregate < 0) throw SchemaError("config: aggregate must be >= 0");
  if (statistic != "mean" && statistic != "median")
    throw SchemaError("config: statistic must be mean or median");
  for (double a : alphas)
    if (!(a > 0.0 && a < 1.0)) throw SchemaError("config: alpha values must lie in (0, 1)");
  if (!profile.empty() && profile != "median") throw SchemaError("config: profile must be median");
  if (profile_points < 2) throw SchemaError("config: profile_points must be >= 2");
  if (fourier_pairs < 0) throw SchemaError("config: fourier_pairs must be >= 0");
  parse_basis_kind(basis);
  parse_knot_placement(knots);
}

void register_options(CLI::App& app, RunConfig& c) {
  app.require_subcommand(1, 1);
  app.set_config("--config", "", "Run configuration file (TOML/INI key = value)")->required();
  app.allow_config_extras(CLI::config_extras_mode::error);
  app.add_option("--out", c.out, "Output directory")->envname("CONDNORM_OUT");
  app.add_option("--seed", c.seed, "Random seed");
  app.add_option("--threads", c.threads, "Worker threads for per-lag fits and bootstrap");

  app.add_option("--input", c.inputs, "Input CSV files")->delimiter(',');
  app.add_option("--spacing", c.spacing, "Grid spacing in seconds (default: inferred)");
  app.add_option("--response", c.response, "Response variable");
  app.add_option("--upstream", c.upstream, "Upstream variable");
  app.add_option("--downstream", c.downstream, "Downstream variable");
  app.add_option("--covariates", c.covariates, "Covariate columns")->delimiter(',');

  app.add_option("--flags", c.flags, "Quality-flag CSV (timestamp,variable,flag)");
  app.add_option("--wiper-period,--wiper_period", c.wiper_period, "Wiper period (0 = off)");
  app.add_option("--wiper-phase,--wiper_phase", c.wiper_phase, "Wiper phase or auto");
  app.add_option("--wiper-variables,--wiper_variables", c.wiper_variables)->delimiter(',');
  app.add_option("--aggregate", c.aggregate, "Target spacing in seconds (0 = off)");
  app.add_option("--statistic", c.statistic, "Bin statistic: mean or median");
  app.add_option("--interpolate", c.interpolate, "Columns to linearly interpolate")->delimiter(',');
  app.add_option("--nonnegative", c.nonnegative, "Mask negative values / imputations");

  app.add_option("--basis", c.basis, "natural_cubic, cubic_bspline or linear");
  app.add_option("--k", c.k, "Basis dimension");
  app.add_option("--knots", c.knots, "quantile or uniform");
  app.add_option("--basis-k,--basis_k", c.basis_k, "Per-covariate name:k")->delimiter(',');
  app.add_option("--fourier-period,--fourier_period", c.fourier_period);
  app.add_option("--fourier-pairs,--fourier_pairs", c.fourier_pairs);

  app.add_option("--max-lag,--max_lag", c.max_lag, "Largest lag K");
  app.add_option("--max-order,--max_order", c.max_order, "Largest AR order");
  app.add_option("--replicates", c.replicates, "Bootstrap replicates m");
  app.add_option("--alpha", c.alphas, "Interval levels")->delimiter(',');
  app.add_option("--burn-in,--burn_in", c.burn_in, "Bootstrap AR burn-in steps");
  app.add_option("--profile", c.profile, "median: per-covariate profiles");
  app.add_option("--profile-points,--profile_points", c.profile_points);

  SimSpec& s = c.synth;
  app.add_option("--n", s.n, "synth: series length");
  enum_option(app, "--mean", s.mean, parse_mean_preset, "synth: constant, linear or sine");
  app.add_option("--level", s.level);
  app.add_option("--slope", s.slope);
  enum_option(app, "--variance", s.variance, parse_variance_preset, "synth: constant or exp");
  app.add_option("--variance-level,--variance_level", s.variance_level);
  app.add_option("--variance-rate,--variance_rate", s.variance_rate);
  app.add_option("--ar", s.ar, "synth: AR noise coefficients")->delimiter(',');
  enum_option(app, "--lag-rule,--lag_rule", s.lag_rule, parse_lag_rule,
              "synth: none, constant or threshold");
  app.add_option("--lag", s.lag);
  app.add_option("--lag-below,--lag_below", s.lag_below);
  app.add_option("--lag-above,--lag_above", s.lag_above);
  app.add_option("--threshold", s.threshold);
  app.add_option("--transport-sd,--transport_sd", s.transport_sd);
  enum_option(app, "--covariate", s.covariate, parse_covariate_process,
              "synth: uniform_walk or seasonal");
  app.add_option("--walk-step,--walk_step", s.walk_step);
  app.add_option("--season-period,--season_period", s.season_period);
  app.add_option("--covariate-noise,--covariate_noise", s.covariate_noise);
  app.add_option("--start", s.start, "synth: first timestamp, epoch seconds");
  app.add_option("--synth-spacing,--synth_spacing", s.spacing);

  const std::pair<const char*, const char*> commands[] = {
      {"clean", "Range flags, wiper removal, aggregation and interpolation"},
      {"normalize", "Fit mean/variance models and write the normalized series"},
      {"impute", "Fill missing values through the normalized AR state space"},
      {"ccf", "Conditional cross-correlation (or autocorrelation) per lag"},
      {"lagtime", "Covariate-dependent lag time with bootstrap intervals"},
      {"synth", "Write a seeded synthetic dataset"},
  };
  for (const auto& [name, help] : commands) {
    app.add_subcommand(name, help)->fallthrough()->callback([&c, n = std::string(name)] {
      c.command = n;
    });
  }
}

void resolve_paths(RunConfig& c) {
  namespace fs = std::filesystem;
  const fs::path base = fs::path(c.config_path).parent_path();
  auto fix = [&](std::string& p) {
    if (!p.empty() && fs::path(p).is_relative()) p = (base / p).lexically_normal().string();
  };
  for (auto& p : c.inputs) fix(p);
  fix(c.flags);
}

}  // namespace condnorm::cli
