#include "condnorm/timeseries.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "condnorm/error.hpp"

namespace condnorm {

namespace {

std::int64_t floor_div(std::int64_t a, std::int64_t b) {
  std::int64_t q = a / b;
  if ((a % b != 0) && ((a < 0) != (b < 0))) --q;
  return q;
}

double median_of(std::vector<double>& v) {
  const auto mid = v.begin() + static_cast<std::ptrdiff_t>(v.size() / 2);
  std::nth_element(v.begin(), mid, v.end());
  double hi = *mid;
  if (v.size() % 2 == 1) return hi;
  double lo = *std::max_element(v.begin(), mid);
  return 0.5 * (lo + hi);
}

TimeGrid intersect(const std::vector<TimeGrid>& grids) {
  if (grids.empty()) throw AlignmentError("align: no inputs");
  const std::int64_t spacing = grids.front().spacing;
  std::int64_t lo = std::numeric_limits<std::int64_t>::min();
  std::int64_t hi = std::numeric_limits<std::int64_t>::max();
  for (const auto& g : grids) {
    if (g.spacing != spacing)
      throw AlignmentError("align: mismatched spacing " +
                           std::to_string(g.spacing) + "s vs " +
                           std::to_string(spacing) + "s");
    if ((g.start - grids.front().start) % spacing != 0)
      throw AlignmentError("align: grids are offset by a fraction of the spacing");
    if (g.size == 0) throw RangeError("align: empty input series");
    lo = std::max(lo, g.start);
    hi = std::min(hi, g.last());
  }
  if (lo > hi) throw RangeError("align: time ranges do not overlap");
  return TimeGrid{lo, spacing, (hi - lo) / spacing + 1};
}

}  // namespace

TimeSeries::TimeSeries(std::string name, TimeGrid grid, Eigen::VectorXd values)
    : TimeSeries(std::move(name), grid, std::move(values),
                 Mask::Constant(grid.size, false)) {}

TimeSeries::TimeSeries(std::string name, TimeGrid grid, Eigen::VectorXd values,
                       Mask missing)
    : name(std::move(name)),
      grid(grid),
      values(std::move(values)),
      missing(std::move(missing)),
      imputed(Mask::Constant(grid.size, false)) {
  validate();
}

void TimeSeries::validate() const {
  if (grid.size < 1) throw ContractError("TimeSeries '" + name + "' is empty");
  if (grid.spacing <= 0)
    throw ContractError("TimeSeries '" + name + "' has non-positive spacing");
  if (values.size() != grid.size || missing.size() != grid.size ||
      imputed.size() != grid.size)
    throw ContractError("TimeSeries '" + name + "' has inconsistent lengths");
}

Eigen::Index CovariateSet::index_of(const std::string& name) const {
  auto it = std::find(names.begin(), names.end(), name);
  if (it == names.end()) throw SchemaError("unknown covariate '" + name + "'");
  return static_cast<Eigen::Index>(it - names.begin());
}

bool CovariateSet::contains(const std::string& name) const {
  return std::find(names.begin(), names.end(), name) != names.end();
}

TimeSeries CovariateSet::column(const std::string& name) const {
  const Eigen::Index j = index_of(name);
  return TimeSeries(name, grid, values.col(j), missing.col(j));
}

Mask CovariateSet::complete_rows() const {
  Mask out = Mask::Constant(rows(), true);
  for (Eigen::Index j = 0; j < cols(); ++j) out = out && !missing.col(j);
  return out;
}

void CovariateSet::validate() const {
  if (names.empty()) throw ContractError("CovariateSet has no columns");
  if (static_cast<Eigen::Index>(names.size()) != values.cols() ||
      values.rows() != grid.size || missing.rows() != values.rows() ||
      missing.cols() != values.cols())
    throw ContractError("CovariateSet has inconsistent shapes");
  auto sorted = names;
  std::sort(sorted.begin(), sorted.end());
  if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end())
    throw ContractError("CovariateSet has duplicate column names");
}

CovariateRows CovariateRows::from(const CovariateSet& set) {
  return CovariateRows{set.names, set.values};
}

CovariateRows CovariateRows::from(const CovariateSet& set, const Mask& keep) {
  CovariateRows out{set.names, Eigen::MatrixXd(keep.count(), set.cols())};
  Eigen::Index r = 0;
  for (Eigen::Index i = 0; i < set.rows(); ++i)
    if (keep(i)) out.values.row(r++) = set.values.row(i);
  return out;
}

QualityFlag parse_quality_flag(const std::string& text) {
  if (text == "clean") return QualityFlag::clean;
  if (text == "range_flag") return QualityFlag::range_flag;
  if (text == "wiper") return QualityFlag::wiper;
  if (text == "manual") return QualityFlag::manual;
  throw SchemaError("unknown quality flag '" + text + "'");
}

const char* to_string(QualityFlag flag) {
  switch (flag) {
    case QualityFlag::clean: return "clean";
    case QualityFlag::range_flag: return "range_flag";
    case QualityFlag::wiper: return "wiper";
    case QualityFlag::manual: return "manual";
  }
  return "clean";
}

CovariateSet align(const std::vector<TimeSeries>& series) {
  std::vector<TimeGrid> grids;
  for (const auto& s : series) grids.push_back(s.grid);
  const TimeGrid grid = intersect(grids);

  CovariateSet out;
  out.grid = grid;
  out.values.resize(grid.size, static_cast<Eigen::Index>(series.size()));
  out.missing.resize(grid.size, static_cast<Eigen::Index>(series.size()));
  for (std::size_t j = 0; j < series.size(); ++j) {
    const auto& s = series[j];
    const Eigen::Index offset = (grid.start - s.grid.start) / grid.spacing;
    const auto col = static_cast<Eigen::Index>(j);
    out.names.push_back(s.name);
    out.values.col(col) = s.values.segment(offset, grid.size);
    out.missing.col(col) = s.missing.segment(offset, grid.size);
  }
  out.validate();
  return out;
}

CovariateSet align(const std::vector<CovariateSet>& sets) {
  std::vector<TimeSeries> columns;
  for (const auto& set : sets)
    for (const auto& name : set.names) columns.push_back(set.column(name));
  return align(columns);
}

TimeSeries remove_range_flagged(const TimeSeries& series,
                                const std::vector<QualityFlag>& flags) {
  if (static_cast<Eigen::Index>(flags.size()) != series.size())
    throw AlignmentError("remove_range_flagged: " + std::to_string(flags.size()) +
                         " flags for " + std::to_string(series.size()) +
                         " observations");
  TimeSeries out = series;
  for (Eigen::Index i = 0; i < out.size(); ++i)
    if (flags[static_cast<std::size_t>(i)] == QualityFlag::range_flag)
      out.missing(i) = true;
  return out;
}

int detect_wiper_phase(const TimeSeries& series, int period) {
  if (period < 2) throw ContractError("wiper period must be >= 2");
  if (series.observed_count() < 2 * period)
    throw EstimationError("wiper phase detection needs at least " +
                          std::to_string(2 * period) + " observations");
  const Eigen::Index n = series.size();
  const int before = period / 2;
  const int after = period - 1 - before;

  std::vector<double> deviation(static_cast<std::size_t>(period), 0.0);
  std::vector<Eigen::Index> count(static_cast<std::size_t>(period), 0);
  std::vector<double> window;
  for (Eigen::Index i = 0; i < n; ++i) {
    if (series.missing(i)) continue;
    window.clear();
    for (Eigen::Index j = std::max<Eigen::Index>(0, i - before);
         j <= std::min<Eigen::Index>(n - 1, i + after); ++j)
      if (!series.missing(j)) window.push_back(series.values(j));
    const double med = median_of(window);
    const auto r = static_cast<std::size_t>(i % period);
    deviation[r] += std::abs(series.values(i) - med);
    ++count[r];
  }
  for (std::size_t r = 0; r < deviation.size(); ++r)
    deviation[r] = count[r] > 0 ? deviation[r] / static_cast<double>(count[r]) : 0.0;

  // max_element keeps the first maximum, so ties go to the smallest residue.
  const auto hi = std::max_element(deviation.begin(), deviation.end());
  const auto lo = std::min_element(deviation.begin(), deviation.end());
  if (*hi <= *lo)
    throw EstimationError("wiper phase detection is ambiguous: all residues tie");
  return static_cast<int>(hi - deviation.begin());
}

TimeSeries remove_wiper_anomalies(const TimeSeries& series, int period,
                                  std::optional<int> phase) {
  if (period < 2) throw ContractError("wiper period must be >= 2");
  const int residue = phase ? *phase : detect_wiper_phase(series, period);
  if (residue < 0 || residue >= period)
    throw ContractError("wiper phase must lie in [0, period)");
  TimeSeries out = series;
  for (Eigen::Index i = residue; i < out.size(); i += period) out.missing(i) = true;
  return out;
}

TimeSeries aggregate(const TimeSeries& series, std::int64_t target_spacing,
                     BinStatistic statistic) {
  const std::int64_t spacing = series.grid.spacing;
  if (target_spacing <= 0 || target_spacing % spacing != 0)
    throw AlignmentError("aggregate: target spacing " +
                         std::to_string(target_spacing) +
                         "s is not a multiple of " + std::to_string(spacing) + "s");
  if (target_spacing == spacing) return series;

  const std::int64_t first = floor_div(series.grid.start, target_spacing);
  const std::int64_t last = floor_div(series.grid.last(), target_spacing);
  const Eigen::Index bins = last - first + 1;

  std::vector<std::vector<double>> members(static_cast<std::size_t>(bins));
  for (Eigen::Index i = 0; i < series.size(); ++i) {
    if (series.missing(i)) continue;
    const auto b = floor_div(series.grid.at(i), target_spacing) - first;
    members[static_cast<std::size_t>(b)].push_back(series.values(i));
  }

  Eigen::VectorXd values = Eigen::VectorXd::Zero(bins);
  Mask missing = Mask::Constant(bins, false);
  for (Eigen::Index b = 0; b < bins; ++b) {
    auto& m = members[static_cast<std::size_t>(b)];
    if (m.empty()) {
      missing(b) = true;
    } else if (statistic == BinStatistic::mean) {
      values(b) = std::accumulate(m.begin(), m.end(), 0.0) / static_cast<double>(m.size());
    } else {
      values(b) = median_of(m);
    }
  }
  return TimeSeries(series.name, TimeGrid{first * target_spacing, target_spacing, bins},
                    std::move(values), std::move(missing));
}

TimeSeries linear_interpolate(const TimeSeries& series) {
  if (series.observed_count() < 2)
    throw EstimationError("linear_interpolate needs at least 2 observations in '" +
                          series.name + "'");
  TimeSeries out = series;
  Eigen::Index prev = -1;
  for (Eigen::Index i = 0; i < series.size(); ++i) {
    if (series.missing(i)) continue;
    if (prev >= 0 && i - prev > 1) {
      const double a = series.values(prev);
      const double b = series.values(i);
      const double span = static_cast<double>(i - prev);
      for (Eigen::Index j = prev + 1; j < i; ++j) {
        out.values(j) = a + (b - a) * static_cast<double>(j - prev) / span;
        out.missing(j) = false;
        out.imputed(j) = true;
      }
    }
    prev = i;
  }
  return out;
}

}  // namespace condnorm
