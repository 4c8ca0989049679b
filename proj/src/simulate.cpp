#include "condnorm/simulate.hpp"

#include <cmath>
#include <numbers>

#include "condnorm/error.hpp"
#include "condnorm/random.hpp"

namespace condnorm {

namespace {

constexpr int kArBurnIn = 500;

template <typename E>
E parse_enum(const std::string& text, std::initializer_list<std::pair<const char*, E>> table,
             const char* what) {
  for (const auto& [name, value] : table)
    if (text == name) return value;
  throw SchemaError(std::string("unknown ") + what + " '" + text + "'");
}

Eigen::VectorXd covariate_path(const SimSpec& spec, Rng& rng) {
  Eigen::VectorXd z(spec.n);
  if (spec.covariate == CovariateProcess::uniform_walk) {
    double v = rng.uniform(-1.0, 1.0);
    for (Eigen::Index t = 0; t < spec.n; ++t) {
      z(t) = v;
      v += rng.uniform(-spec.walk_step, spec.walk_step);
      if (v > 1.0) v = 2.0 - v;
      if (v < -1.0) v = -2.0 - v;
    }
  } else {
    for (Eigen::Index t = 0; t < spec.n; ++t)
      z(t) = std::sin(2.0 * std::numbers::pi * static_cast<double>(t) / spec.season_period) +
             spec.covariate_noise * rng.normal();
  }
  return z;
}

Eigen::VectorXd ar_noise(const SimSpec& spec, Rng& rng) {
  const auto p = spec.ar.size();
  const Eigen::Index burn = p == 0 ? 0 : kArBurnIn;
  Eigen::VectorXd e = Eigen::VectorXd::Zero(spec.n + burn);
  for (Eigen::Index t = 0; t < e.size(); ++t) {
    double v = rng.normal();
    for (std::size_t i = 1; i <= p; ++i)
      if (t >= static_cast<Eigen::Index>(i)) v += spec.ar[i - 1] * e(t - static_cast<Eigen::Index>(i));
    e(t) = v;
  }
  return e.tail(spec.n);
}

}  // namespace

const char* to_string(MeanPreset v) {
  switch (v) {
    case MeanPreset::constant: return "constant";
    case MeanPreset::linear: return "linear";
    case MeanPreset::sine: return "sine";
  }
  return "?";
}

const char* to_string(VariancePreset v) {
  return v == VariancePreset::constant ? "constant" : "exp";
}

const char* to_string(LagRule v) {
  switch (v) {
    case LagRule::none: return "none";
    case LagRule::constant: return "constant";
    case LagRule::threshold: return "threshold";
  }
  return "?";
}

const char* to_string(CovariateProcess v) {
  return v == CovariateProcess::uniform_walk ? "uniform_walk" : "seasonal";
}

MeanPreset parse_mean_preset(const std::string& text) {
  return parse_enum<MeanPreset>(text,
                                {{"constant", MeanPreset::constant},
                                 {"linear", MeanPreset::linear},
                                 {"sine", MeanPreset::sine}},
                                "mean preset");
}

VariancePreset parse_variance_preset(const std::string& text) {
  return parse_enum<VariancePreset>(
      text, {{"constant", VariancePreset::constant}, {"exp", VariancePreset::exp}},
      "variance preset");
}

LagRule parse_lag_rule(const std::string& text) {
  return parse_enum<LagRule>(
      text,
      {{"none", LagRule::none}, {"constant", LagRule::constant}, {"threshold", LagRule::threshold}},
      "lag rule");
}

CovariateProcess parse_covariate_process(const std::string& text) {
  return parse_enum<CovariateProcess>(
      text,
      {{"uniform_walk", CovariateProcess::uniform_walk}, {"seasonal", CovariateProcess::seasonal}},
      "covariate process");
}

void SimSpec::validate() const {
  if (n < 1) throw ContractError("simulate: n must be >= 1");
  if (spacing < 1) throw ContractError("simulate: spacing must be >= 1");
  const double finite[] = {level,     slope,          variance_level, variance_rate,
                           threshold, transport_sd,   walk_step,      season_period,
                           covariate_noise};
  for (double v : finite)
    if (!std::isfinite(v)) throw ContractError("simulate: parameters must be finite");
  for (double v : ar)
    if (!std::isfinite(v)) throw ContractError("simulate: AR coefficients must be finite");
  if (!(variance_level > 0.0)) throw ContractError("simulate: variance_level must be positive");
  if (transport_sd < 0.0 || covariate_noise < 0.0 || walk_step < 0.0)
    throw ContractError("simulate: noise scales must be non-negative");
  if (!(season_period > 0.0)) throw ContractError("simulate: season_period must be positive");
  if (lag_rule == LagRule::constant && lag < 0) throw ContractError("simulate: lag must be >= 0");
  if (lag_rule == LagRule::threshold && (lag_below < 0 || lag_above < 0))
    throw ContractError("simulate: lags must be >= 0");
}

SimData simulate(const SimSpec& spec) {
  spec.validate();
  Rng rng(spec.seed);
  const TimeGrid grid{spec.start, spec.spacing, spec.n};
  const Eigen::VectorXd z = covariate_path(spec, rng);

  SimTruth truth;
  truth.mean.resize(spec.n);
  truth.variance.resize(spec.n);
  truth.lag.assign(static_cast<std::size_t>(spec.n), 0);
  for (Eigen::Index t = 0; t < spec.n; ++t) {
    switch (spec.mean) {
      case MeanPreset::constant: truth.mean(t) = spec.level; break;
      case MeanPreset::linear: truth.mean(t) = spec.level + spec.slope * z(t); break;
      case MeanPreset::sine:
        truth.mean(t) = spec.level + spec.slope * std::sin(std::numbers::pi * z(t));
        break;
    }
    truth.variance(t) = spec.variance == VariancePreset::constant
                            ? spec.variance_level
                            : spec.variance_level * std::exp(spec.variance_rate * z(t));
    if (spec.lag_rule == LagRule::constant) truth.lag[static_cast<std::size_t>(t)] = spec.lag;
    if (spec.lag_rule == LagRule::threshold)
      truth.lag[static_cast<std::size_t>(t)] = z(t) < spec.threshold ? spec.lag_below : spec.lag_above;
  }

  auto draw = [&](const Eigen::VectorXd& e) {
    return Eigen::VectorXd(truth.mean.array() + truth.variance.array().sqrt() * e.array());
  };
  const Eigen::VectorXd e_x = ar_noise(spec, rng);
  const Eigen::VectorXd x = draw(e_x);

  SimData out;
  out.x = TimeSeries("x", grid, x);
  if (spec.lag_rule == LagRule::none) {
    truth.noise = ar_noise(spec, rng);
    out.y = TimeSeries("y", grid, draw(truth.noise));
  } else {
    truth.noise = e_x;
    Eigen::VectorXd y = Eigen::VectorXd::Zero(spec.n);
    Mask missing = Mask::Constant(spec.n, false);
    for (Eigen::Index s = 0; s < spec.n; ++s) {
      const double transport = spec.transport_sd * rng.normal();
      const Eigen::Index src = s - truth.lag[static_cast<std::size_t>(s)];
      if (src < 0) {
        missing(s) = true;
        continue;
      }
      y(s) = x(src) + transport;
    }
    out.y = TimeSeries("y", grid, std::move(y), std::move(missing));
  }

  out.z.grid = grid;
  out.z.names = {"z"};
  out.z.values = z;
  out.z.missing = MaskMatrix::Constant(spec.n, 1, false);
  out.truth = std::move(truth);
  return out;
}

}  // namespace condnorm
