#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "condnorm/timeseries.hpp"

namespace condnorm {

enum class MeanPreset { constant, linear, sine };
enum class VariancePreset { constant, exp };
enum class LagRule { none, constant, threshold };
enum class CovariateProcess { uniform_walk, seasonal };

const char* to_string(MeanPreset v);
const char* to_string(VariancePreset v);
const char* to_string(LagRule v);
const char* to_string(CovariateProcess v);
MeanPreset parse_mean_preset(const std::string& text);
VariancePreset parse_variance_preset(const std::string& text);
LagRule parse_lag_rule(const std::string& text);
CovariateProcess parse_covariate_process(const std::string& text);

/// Synthetic dataset recipe. The single covariate column is named "z".
///
/// mean:     constant  m = level
///           linear    m = level + slope * z
///           sine      m = level + slope * sin(pi * z)
/// variance: constant  v = variance_level
///           exp       v = variance_level * exp(variance_rate * z)
/// noise:    AR(p) with unit-variance innovations; empty `ar` is white noise.
/// lag:      none      x and y independent draws of the recipe
///           constant  y_s = x_{s-lag} + transport noise
///           threshold y_s = x_{s-d(z_s)}, d = lag_below if z_s < threshold
///                     else lag_above
/// covariate uniform_walk: reflecting walk on [-1, 1], steps U(-step, step)
///           seasonal: sin(2 pi t / period) + N(0, covariate_noise^2)
struct SimSpec {
  Eigen::Index n = 1000;
  std::uint64_t seed = 0;
  MeanPreset mean = MeanPreset::linear;
  double level = 0.0;
  double slope = 1.0;
  VariancePreset variance = VariancePreset::constant;
  double variance_level = 1.0;
  double variance_rate = 1.0;
  std::vector<double> ar;
  LagRule lag_rule = LagRule::none;
  int lag = 3;
  int lag_below = 3;
  int lag_above = 7;
  double threshold = 0.0;
  double transport_sd = 0.1;
  CovariateProcess covariate = CovariateProcess::uniform_walk;
  double walk_step = 0.05;
  double season_period = 288.0;
  double covariate_noise = 0.05;
  std::int64_t start = 1577836800;  // 2020-01-01T00:00:00Z
  std::int64_t spacing = 300;

  // Throws ContractError on non-finite parameters or an invalid recipe.
  void validate() const;
};

/// Every generating quantity, indexed by grid position.
struct SimTruth {
  Eigen::VectorXd mean;      // m(z_t)
  Eigen::VectorXd variance;  // v(z_t)
  Eigen::VectorXd noise;     // e_t of x (of y when lag_rule is none)
  std::vector<int> lag;      // d(z_t); 0 when lag_rule is none
};

struct SimData {
  TimeSeries x;  // upstream
  TimeSeries y;  // downstream / response
  CovariateSet z;
  SimTruth truth;
};

SimData simulate(const SimSpec& spec);

}  // namespace condnorm
