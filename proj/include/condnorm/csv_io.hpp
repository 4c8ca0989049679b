#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "condnorm/timeseries.hpp"

namespace condnorm {

/// Parses "YYYY-MM-DDTHH:MM:SS" with an optional "Z" or "+00:00" suffix
/// (a space may replace the "T") into epoch seconds. Throws SchemaError.
std::int64_t parse_timestamp(const std::string& text);

/// "YYYY-MM-DDTHH:MM:SSZ".
std::string format_timestamp(std::int64_t epoch_seconds);

/// Shortest decimal that reads back to the same double; "NA" for NaN.
std::string format_number(double value);

/// Reads a wide CSV: header with `timestamp` first, numeric columns after,
/// empty or NA cells missing. Rows absent from the regular grid are added
/// as missing. The spacing is `spacing` when given, otherwise the smallest
/// gap between consecutive timestamps.
CovariateSet read_csv(const std::string& path, std::optional<std::int64_t> spacing = std::nullopt);
CovariateSet read_csv(std::istream& in, const std::string& source,
                      std::optional<std::int64_t> spacing = std::nullopt);

struct CsvColumn {
  std::string name;
  Eigen::VectorXd values;
  Mask missing;  // empty means nothing missing
};

void write_csv(std::ostream& out, const TimeGrid& grid, const std::vector<CsvColumn>& columns);
void write_csv(const std::string& path, const TimeGrid& grid,
               const std::vector<CsvColumn>& columns);

CsvColumn to_column(const TimeSeries& series);
std::vector<CsvColumn> to_columns(const CovariateSet& set);

/// Reads `timestamp,variable,flag` rows into one flag vector per variable
/// on `grid` (default clean). Timestamps outside the grid are ignored;
/// timestamps between grid points are a SchemaError.
std::map<std::string, std::vector<QualityFlag>> read_flags(const std::string& path,
                                                           const TimeGrid& grid);
std::map<std::string, std::vector<QualityFlag>> read_flags(std::istream& in,
                                                           const std::string& source,
                                                           const TimeGrid& grid);

}  // namespace condnorm
