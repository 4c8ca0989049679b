#include "condnorm/csv_io.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>

#include "condnorm/error.hpp"

namespace condnorm {

namespace {

std::string trim(std::string s) {
  const auto not_space = [](unsigned char c) { return !std::isspace(c); };
  s.erase(s.begin(), std::find_if(s.begin(), s.end(), not_space));
  s.erase(std::find_if(s.rbegin(), s.rend(), not_space).base(), s.end());
  if (s.size() >= 2 && s.front() == '"' && s.back() == '"') s = s.substr(1, s.size() - 2);
  return s;
}

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream in(line);
  while (std::getline(in, cell, ',')) out.push_back(trim(cell));
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

int parse_digits(const std::string& s, std::size_t pos, std::size_t len) {
  int v = 0;
  const auto* first = s.data() + pos;
  const auto r = std::from_chars(first, first + len, v);
  if (r.ec != std::errc() || r.ptr != first + len) throw SchemaError("bad timestamp '" + s + "'");
  return v;
}

std::string located(const std::string& source, std::size_t line, const std::string& what) {
  return source + ": row " + std::to_string(line) + ": " + what;
}

std::ifstream open(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw SchemaError(path + ": cannot open file");
  return in;
}

}  // namespace

std::int64_t parse_timestamp(const std::string& raw) {
  std::string s = trim(raw);
  if (!s.empty() && s.back() == 'Z') s.pop_back();
  else if (s.size() > 6 && (s.compare(s.size() - 6, 6, "+00:00") == 0)) s.resize(s.size() - 6);
  if (s.size() != 19 || s[4] != '-' || s[7] != '-' || (s[10] != 'T' && s[10] != ' ') ||
      s[13] != ':' || s[16] != ':')
    throw SchemaError("bad timestamp '" + raw + "', expected YYYY-MM-DDTHH:MM:SSZ");
  using namespace std::chrono;
  const year_month_day date{year{parse_digits(s, 0, 4)},
                            month{static_cast<unsigned>(parse_digits(s, 5, 2))},
                            day{static_cast<unsigned>(parse_digits(s, 8, 2))}};
  const int hh = parse_digits(s, 11, 2), mm = parse_digits(s, 14, 2), ss = parse_digits(s, 17, 2);
  if (!date.ok() || hh > 23 || mm > 59 || ss > 59)
    throw SchemaError("bad timestamp '" + raw + "': field out of range");
  const auto days = sys_days(date).time_since_epoch().count();
  return static_cast<std::int64_t>(days) * 86400 + hh * 3600 + mm * 60 + ss;
}

std::string format_timestamp(std::int64_t t) {
  using namespace std::chrono;
  std::int64_t days = t / 86400;
  std::int64_t rem = t % 86400;
  if (rem < 0) {
    rem += 86400;
    --days;
  }
  const year_month_day date{sys_days{std::chrono::days{days}}};
  char buf[32];
  std::snprintf(buf, sizeof buf, "%04d-%02u-%02uT%02d:%02d:%02dZ", static_cast<int>(date.year()),
                static_cast<unsigned>(date.month()), static_cast<unsigned>(date.day()),
                static_cast<int>(rem / 3600), static_cast<int>(rem / 60 % 60),
                static_cast<int>(rem % 60));
  return buf;
}

std::string format_number(double value) {
  if (std::isnan(value)) return "NA";
  char buf[64];
  const auto r = std::to_chars(buf, buf + sizeof buf, value);
  return std::string(buf, r.ptr);
}

CovariateSet read_csv(const std::string& path, std::optional<std::int64_t> spacing) {
  auto in = open(path);
  return read_csv(in, path, spacing);
}

CovariateSet read_csv(std::istream& in, const std::string& source,
                      std::optional<std::int64_t> spacing) {
  std::string line;
  if (!std::getline(in, line)) throw SchemaError(source + ": empty file");
  const std::vector<std::string> header = split(line);
  if (header.empty() || header.front() != "timestamp")
    throw SchemaError(source + ": missing timestamp column (must be first)");
  if (header.size() < 2) throw SchemaError(source + ": no data columns");
  std::vector<std::string> names(header.begin() + 1, header.end());
  std::set<std::string> seen;
  for (const auto& n : names) {
    if (n.empty()) throw SchemaError(source + ": empty column name");
    if (!seen.insert(n).second) throw SchemaError(source + ": duplicate column '" + n + "'");
  }

  std::vector<std::int64_t> stamps;
  std::vector<std::vector<double>> rows;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const std::vector<std::string> cells = split(line);
    if (cells.size() != header.size())
      throw SchemaError(located(source, line_no,
                                "expected " + std::to_string(header.size()) + " fields, found " +
                                    std::to_string(cells.size())));
    std::int64_t t = 0;
    try {
      t = parse_timestamp(cells[0]);
    } catch (const SchemaError& e) {
      throw SchemaError(located(source, line_no, e.what()));
    }
    if (!stamps.empty() && t <= stamps.back())
      throw SchemaError(located(source, line_no, "timestamps must be strictly increasing"));
    std::vector<double> row(names.size());
    for (std::size_t j = 0; j < names.size(); ++j) {
      const std::string& c = cells[j + 1];
      if (c.empty() || c == "NA") {
        row[j] = std::numeric_limits<double>::quiet_NaN();
        continue;
      }
      double v = 0.0;
      const auto r = std::from_chars(c.data(), c.data() + c.size(), v);
      if (r.ec != std::errc() || r.ptr != c.data() + c.size() || !std::isfinite(v))
        throw SchemaError(located(source, line_no,
                                  "column '" + names[j] + "': not a number '" + c + "'"));
      row[j] = v;
    }
    stamps.push_back(t);
    rows.push_back(std::move(row));
  }
  if (stamps.empty()) throw SchemaError(source + ": no data rows");

  std::int64_t step = spacing.value_or(0);
  if (!spacing) {
    step = stamps.size() > 1 ? std::numeric_limits<std::int64_t>::max() : 1;
    for (std::size_t i = 1; i < stamps.size(); ++i) step = std::min(step, stamps[i] - stamps[i - 1]);
  }
  if (step < 1) throw SchemaError(source + ": spacing must be positive");
  for (std::size_t i = 1; i < stamps.size(); ++i)
    if ((stamps[i] - stamps[0]) % step != 0)
      throw SchemaError(located(source, i + 2,
                                "timestamp is off the " + std::to_string(step) + " s grid"));

  CovariateSet out;
  out.grid = TimeGrid{stamps.front(), step, (stamps.back() - stamps.front()) / step + 1};
  out.names = std::move(names);
  const auto p = static_cast<Eigen::Index>(out.names.size());
  out.values = Eigen::MatrixXd::Zero(out.grid.size, p);
  out.missing = MaskMatrix::Constant(out.grid.size, p, true);
  for (std::size_t i = 0; i < stamps.size(); ++i) {
    const Eigen::Index r = (stamps[i] - stamps.front()) / step;
    for (Eigen::Index j = 0; j < p; ++j) {
      const double v = rows[i][static_cast<std::size_t>(j)];
      if (std::isnan(v)) continue;
      out.values(r, j) = v;
      out.missing(r, j) = false;
    }
  }
  return out;
}

void write_csv(std::ostream& out, const TimeGrid& grid, const std::vector<CsvColumn>& columns) {
  for (const auto& c : columns)
    if (c.values.size() != grid.size || (c.missing.size() != 0 && c.missing.size() != grid.size))
      throw ContractError("write_csv: column '" + c.name + "' does not match the grid");
  out << "timestamp";
  for (const auto& c : columns) out << ',' << c.name;
  out << '\n';
  for (Eigen::Index i = 0; i < grid.size; ++i) {
    out << format_timestamp(grid.at(i));
    for (const auto& c : columns) {
      const bool miss = c.missing.size() != 0 && c.missing(i);
      out << ',' << (miss ? std::string("NA") : format_number(c.values(i)));
    }
    out << '\n';
  }
}

void write_csv(const std::string& path, const TimeGrid& grid,
               const std::vector<CsvColumn>& columns) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw SchemaError(path + ": cannot write file");
  write_csv(out, grid, columns);
}

CsvColumn to_column(const TimeSeries& series) {
  return {series.name, series.values, series.missing};
}

std::vector<CsvColumn> to_columns(const CovariateSet& set) {
  std::vector<CsvColumn> out;
  for (Eigen::Index j = 0; j < set.cols(); ++j)
    out.push_back({set.names[static_cast<std::size_t>(j)], set.values.col(j), set.missing.col(j)});
  return out;
}

std::map<std::string, std::vector<QualityFlag>> read_flags(const std::string& path,
                                                           const TimeGrid& grid) {
  auto in = open(path);
  return read_flags(in, path, grid);
}

std::map<std::string, std::vector<QualityFlag>> read_flags(std::istream& in,
                                                           const std::string& source,
                                                           const TimeGrid& grid) {
  std::string line;
  if (!std::getline(in, line)) throw SchemaError(source + ": empty file");
  const std::vector<std::string> header = split(line);
  if (header != std::vector<std::string>{"timestamp", "variable", "flag"})
    throw SchemaError(source + ": header must be timestamp,variable,flag");
  std::map<std::string, std::vector<QualityFlag>> out;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const std::vector<std::string> cells = split(line);
    if (cells.size() != 3) throw SchemaError(located(source, line_no, "expected 3 fields"));
    std::int64_t t = 0;
    QualityFlag flag{};
    try {
      t = parse_timestamp(cells[0]);
      flag = parse_quality_flag(cells[2]);
    } catch (const SchemaError& e) {
      throw SchemaError(located(source, line_no, e.what()));
    }
    if ((t - grid.start) % grid.spacing != 0)
      throw SchemaError(located(source, line_no, "timestamp is off the series grid"));
    const std::int64_t r = (t - grid.start) / grid.spacing;
    auto& flags = out[cells[1]];
    if (flags.empty()) flags.assign(static_cast<std::size_t>(grid.size), QualityFlag::clean);
    if (r < 0 || r >= grid.size) continue;
    flags[static_cast<std::size_t>(r)] = flag;
  }
  return out;
}

}  // namespace condnorm
