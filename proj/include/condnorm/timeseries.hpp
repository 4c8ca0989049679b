#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace condnorm {

using Mask = Eigen::Array<bool, Eigen::Dynamic, 1>;
using MaskMatrix = Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic>;

/// Regular time grid: timestamps are `start + i * spacing` epoch seconds.
struct TimeGrid {
  std::int64_t start = 0;
  std::int64_t spacing = 1;
  Eigen::Index size = 0;

  std::int64_t at(Eigen::Index i) const { return start + i * spacing; }
  std::int64_t last() const { return at(size - 1); }
  bool operator==(const TimeGrid&) const = default;
};

/// Univariate series on a regular grid. Missing observations stay on the
/// grid with `missing` set; their entries in `values` are never read.
struct TimeSeries {
  std::string name;
  TimeGrid grid;
  Eigen::VectorXd values;
  Mask missing;
  // Positions whose value was filled in by an imputation step.
  Mask imputed;

  TimeSeries() = default;
  TimeSeries(std::string name, TimeGrid grid, Eigen::VectorXd values);
  TimeSeries(std::string name, TimeGrid grid, Eigen::VectorXd values,
             Mask missing);

  Eigen::Index size() const { return values.size(); }
  Eigen::Index observed_count() const { return size() - missing.count(); }
  bool observed(Eigen::Index i) const { return !missing(i); }

  // Throws ContractError if the grid/mask/value shapes disagree.
  void validate() const;
};

/// Aligned covariates: one column per variable on a shared grid.
struct CovariateSet {
  TimeGrid grid;
  std::vector<std::string> names;
  Eigen::MatrixXd values;  // rows = time, cols = variables
  MaskMatrix missing;

  Eigen::Index rows() const { return values.rows(); }
  Eigen::Index cols() const { return values.cols(); }

  // Column index of `name`; throws SchemaError if absent.
  Eigen::Index index_of(const std::string& name) const;
  bool contains(const std::string& name) const;

  TimeSeries column(const std::string& name) const;
  // True where every column is observed.
  Mask complete_rows() const;

  void validate() const;
};

/// Named covariate values without time information, used for prediction.
struct CovariateRows {
  std::vector<std::string> names;
  Eigen::MatrixXd values;

  Eigen::Index rows() const { return values.rows(); }
  static CovariateRows from(const CovariateSet& set);
  static CovariateRows from(const CovariateSet& set, const Mask& keep);
};

enum class QualityFlag { clean, range_flag, wiper, manual };

QualityFlag parse_quality_flag(const std::string& text);
const char* to_string(QualityFlag flag);

/// Intersection grid of all inputs; each column keeps its own mask.
CovariateSet align(const std::vector<TimeSeries>& series);
CovariateSet align(const std::vector<CovariateSet>& sets);

TimeSeries remove_range_flagged(const TimeSeries& series,
                                const std::vector<QualityFlag>& flags);

/// Masks every position p with p % period == phase. Without an explicit
/// phase the residue class with the largest mean absolute deviation from a
/// centered rolling median (window = period) is used.
TimeSeries remove_wiper_anomalies(const TimeSeries& series, int period,
                                  std::optional<int> phase = std::nullopt);

/// Residue detected by the automatic wiper-phase rule.
int detect_wiper_phase(const TimeSeries& series, int period);

enum class BinStatistic { mean, median };

/// Bin statistic over left-closed, left-labeled bins aligned to multiples
/// of `target_spacing` epoch seconds. Empty bins are masked.
TimeSeries aggregate(const TimeSeries& series, std::int64_t target_spacing,
                     BinStatistic statistic = BinStatistic::mean);

/// Fills interior missing runs by straight lines between flanking
/// observations. Leading and trailing runs stay missing.
TimeSeries linear_interpolate(const TimeSeries& series);

}  // namespace condnorm
