#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "condnorm/basis.hpp"
#include "condnorm/simulate.hpp"

namespace condnorm::cli {

/// Everything a run needs. Populated from the config file, then from flags
/// (flags win). Relative paths in the config file are resolved against the
/// file's directory.
struct RunConfig {
  std::string command;
  std::string config_path;
  std::string out = ".";

  // Inputs and roles.
  std::vector<std::string> inputs;
  std::optional<std::int64_t> spacing;
  std::string response;
  std::string upstream;
  std::string downstream;
  std::vector<std::string> covariates;

  // Cleaning.
  std::string flags;
  int wiper_period = 0;
  std::string wiper_phase = "auto";
  std::vector<std::string> wiper_variables;
  std::int64_t aggregate = 0;
  std::string statistic = "mean";
  std::vector<std::string> interpolate;
  bool nonnegative = false;

  // Smooths.
  std::string basis = "natural_cubic";
  int k = 10;
  std::string knots = "quantile";
  std::vector<std::string> basis_k;  // "covariate:k" overrides
  double fourier_period = 0.0;
  int fourier_pairs = 0;

  // Correlation and lag time.
  int max_lag = 24;
  int max_order = 10;
  int replicates = 1000;
  std::uint64_t seed = 1;
  std::vector<double> alphas{0.20, 0.05};
  int threads = 1;
  int burn_in = 0;
  std::string profile;
  int profile_points = 50;

  SimSpec synth;

  BasisSpec basis_for(const std::string& covariate) const;
  void validate() const;
};

/// Registers subcommands and options on `app`, writing into `config`.
void register_options(CLI::App& app, RunConfig& config);

/// Resolves relative paths against the config file directory.
void resolve_paths(RunConfig& config);

}  // namespace condnorm::cli
