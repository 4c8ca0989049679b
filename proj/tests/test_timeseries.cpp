#include <cmath>
#include <vector>

#include <gtest/gtest.h>

#include "condnorm/error.hpp"
#include "condnorm/random.hpp"
#include "condnorm/timeseries.hpp"

using namespace condnorm;

namespace {

TimeSeries make(std::vector<double> v, std::int64_t start = 0, std::int64_t spacing = 60) {
  const auto n = static_cast<Eigen::Index>(v.size());
  Eigen::VectorXd values(n);
  Mask missing(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    missing(i) = std::isnan(v[static_cast<std::size_t>(i)]);
    values(i) = missing(i) ? 0.0 : v[static_cast<std::size_t>(i)];
  }
  return TimeSeries("s", TimeGrid{start, spacing, n}, values, missing);
}

constexpr double NA = std::numeric_limits<double>::quiet_NaN();

}  // namespace

TEST(Align, IdenticalGridsKeepMasks) {
  TimeSeries a = make({1, NA, 3});
  a.name = "a";
  TimeSeries b = make({NA, 5, 6});
  b.name = "b";
  const CovariateSet z = align({a, b});
  EXPECT_EQ(z.grid, a.grid);
  ASSERT_EQ(z.names, (std::vector<std::string>{"a", "b"}));
  EXPECT_TRUE(z.missing(1, 0));
  EXPECT_TRUE(z.missing(0, 1));
  EXPECT_FALSE(z.missing(2, 0));
  EXPECT_EQ(z.values(2, 1), 6.0);
}

TEST(Align, IntersectsOverlap) {
  std::vector<double> ones(10, 1.0);
  TimeSeries a = make(ones, 60, 60);  // t = 1..10 in spacing units
  a.name = "a";
  TimeSeries b = make(ones, 6 * 60, 60);  // t = 6..15
  b.name = "b";
  const CovariateSet z = align({a, b});
  EXPECT_EQ(z.grid.start, 6 * 60);
  EXPECT_EQ(z.grid.last(), 10 * 60);
  EXPECT_EQ(z.rows(), 5);
}

TEST(Align, MismatchedSpacingThrows) {
  TimeSeries a = make({1, 2}, 0, 300);
  TimeSeries b = make({1, 2}, 0, 60);
  b.name = "b";
  EXPECT_THROW(align({a, b}), AlignmentError);
}

TEST(Align, DisjointRangesThrow) {
  TimeSeries a = make({1, 2}, 0, 60);
  TimeSeries b = make({1, 2}, 600, 60);
  b.name = "b";
  EXPECT_THROW(align({a, b}), RangeError);
}

TEST(RangeFlags, NoFlagsIsIdentity) {
  const TimeSeries s = make({1, 2, 3, 4});
  const TimeSeries out = remove_range_flagged(s, std::vector<QualityFlag>(4, QualityFlag::clean));
  EXPECT_TRUE((out.values.array() == s.values.array()).all());
  EXPECT_TRUE((out.missing == s.missing).all());
}

TEST(RangeFlags, FlaggedPositionsMasked) {
  const TimeSeries s = make(std::vector<double>(10, 1.0));
  std::vector<QualityFlag> flags(10, QualityFlag::clean);
  flags[3] = flags[7] = QualityFlag::range_flag;
  flags[5] = QualityFlag::manual;
  const TimeSeries out = remove_range_flagged(s, flags);
  for (Eigen::Index i = 0; i < 10; ++i) EXPECT_EQ(out.missing(i), i == 3 || i == 7) << i;
  EXPECT_EQ(out.grid, s.grid);
}

TEST(RangeFlags, AllFlaggedGivesFullyMaskedSeries) {
  const TimeSeries s = make({1, 2, 3});
  const TimeSeries out = remove_range_flagged(s, std::vector<QualityFlag>(3, QualityFlag::range_flag));
  EXPECT_EQ(out.observed_count(), 0);
  EXPECT_THROW(linear_interpolate(out), EstimationError);
}

TEST(RangeFlags, LengthMismatchThrows) {
  EXPECT_THROW(remove_range_flagged(make({1, 2}), {QualityFlag::clean}), AlignmentError);
}

TEST(RangeFlags, Idempotent) {
  const TimeSeries s = make({1, 2, 3, 4});
  std::vector<QualityFlag> flags{QualityFlag::clean, QualityFlag::range_flag, QualityFlag::clean,
                                 QualityFlag::range_flag};
  const TimeSeries once = remove_range_flagged(s, flags);
  const TimeSeries twice = remove_range_flagged(once, flags);
  EXPECT_TRUE((once.missing == twice.missing).all());
}

TEST(QualityFlagText, RoundTrips) {
  for (auto f : {QualityFlag::clean, QualityFlag::range_flag, QualityFlag::wiper, QualityFlag::manual})
    EXPECT_EQ(parse_quality_flag(to_string(f)), f);
  EXPECT_THROW(parse_quality_flag("bogus"), SchemaError);
}

TEST(Wiper, ExplicitPhaseMasksResidue) {
  const TimeSeries out = remove_wiper_anomalies(make(std::vector<double>(10, 1.0)), 5, 0);
  for (Eigen::Index i = 0; i < 10; ++i) EXPECT_EQ(out.missing(i), i == 0 || i == 5) << i;
}

TEST(Wiper, ConstantSeriesIsAmbiguous) {
  EXPECT_THROW(remove_wiper_anomalies(make(std::vector<double>(20, 4.0)), 5), EstimationError);
}

TEST(Wiper, DetectsInjectedSpikes) {
  Rng rng(3);
  std::vector<double> v(200);
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = 10.0 + rng.normal() + (i % 5 == 3 ? 100.0 : 0.0);
  const TimeSeries s = make(v);
  EXPECT_EQ(detect_wiper_phase(s, 5), 3);
  const TimeSeries out = remove_wiper_anomalies(s, 5);
  EXPECT_EQ(out.missing.count(), 40);
  for (Eigen::Index i = 0; i < out.size(); ++i) EXPECT_EQ(out.missing(i), i % 5 == 3);
}

TEST(Wiper, TooFewObservationsThrows) {
  EXPECT_THROW(detect_wiper_phase(make({1, 2, 3, 4, 5, 6, 7, 8, 9}), 5), EstimationError);
}

TEST(Wiper, PartialTieGoesToSmallestResidue) {
  std::vector<double> v(60, 0.0);
  for (std::size_t i = 0; i < v.size(); ++i)
    if (i % 6 == 1 || i % 6 == 4) v[i] = 50.0;
  // Residues 1 and 4 carry identical spikes.
  EXPECT_EQ(detect_wiper_phase(make(v), 6), 1);
}

TEST(Wiper, Idempotent) {
  const TimeSeries s = make(std::vector<double>(12, 1.0));
  const TimeSeries once = remove_wiper_anomalies(s, 3, 1);
  const TimeSeries twice = remove_wiper_anomalies(once, 3, 1);
  EXPECT_TRUE((once.missing == twice.missing).all());
}

TEST(Aggregate, SameSpacingIsIdentity) {
  const TimeSeries s = make({1, 2, NA, 4});
  const TimeSeries out = aggregate(s, 60);
  EXPECT_EQ(out.grid, s.grid);
  EXPECT_TRUE((out.missing == s.missing).all());
}

TEST(Aggregate, FiveMinuteBins) {
  const TimeSeries s = make({1, 2, 3, 4, 5, NA}, 0, 60);
  const TimeSeries out = aggregate(s, 300);
  ASSERT_EQ(out.size(), 2);
  EXPECT_EQ(out.grid.spacing, 300);
  EXPECT_EQ(out.values(0), 3.0);
  EXPECT_FALSE(out.missing(0));
  EXPECT_TRUE(out.missing(1));
}

TEST(Aggregate, EmptyBinAmongCleanBins) {
  const TimeSeries s = make({1, 3, NA, NA, 5, 7}, 0, 60);
  const TimeSeries out = aggregate(s, 120);
  ASSERT_EQ(out.size(), 3);
  EXPECT_EQ(out.values(0), 2.0);
  EXPECT_TRUE(out.missing(1));
  EXPECT_EQ(out.values(2), 6.0);
  EXPECT_EQ(out.missing.count(), 1);
}

TEST(Aggregate, BinsAreEpochAlignedAndLeftLabeled) {
  // Starts 2 minutes into a 5-minute bin.
  const TimeSeries s = make({10, 20, 30, 40, 50, 60}, 120, 60);
  const TimeSeries out = aggregate(s, 300);
  EXPECT_EQ(out.grid.start, 0);
  ASSERT_EQ(out.size(), 2);
  EXPECT_EQ(out.values(0), 20.0);  // 10, 20, 30
  EXPECT_EQ(out.values(1), 50.0);  // 40, 50, 60
}

TEST(Aggregate, MedianStatistic) {
  const TimeSeries out = aggregate(make({1, 2, 100, 4, 5}, 0, 60), 300, BinStatistic::median);
  EXPECT_EQ(out.values(0), 4.0);
}

TEST(Aggregate, NonMultipleThrows) {
  EXPECT_THROW(aggregate(make({1, 2}, 0, 60), 90), AlignmentError);
}

TEST(Aggregate, ComposesMultiplicatively) {
  Rng rng(9);
  std::vector<double> v(120);
  for (auto& x : v) x = static_cast<double>(rng.index(1000));  // integers keep sums exact
  const TimeSeries s = make(v, 0, 60);
  const TimeSeries two_step = aggregate(aggregate(s, 120), 360);
  const TimeSeries one_step = aggregate(s, 360);
  ASSERT_EQ(two_step.size(), one_step.size());
  for (Eigen::Index i = 0; i < one_step.size(); ++i)
    EXPECT_NEAR(two_step.values(i), one_step.values(i), 1e-12);
}

TEST(Interpolate, Midpoint) {
  const TimeSeries out = linear_interpolate(make({1, NA, 3}));
  EXPECT_EQ(out.values(1), 2.0);
  EXPECT_FALSE(out.missing(1));
  EXPECT_TRUE(out.imputed(1));
  EXPECT_FALSE(out.imputed(0));
}

TEST(Interpolate, BoundaryRunsStayMasked) {
  const TimeSeries out = linear_interpolate(make({NA, 5, 5, NA}));
  EXPECT_TRUE(out.missing(0));
  EXPECT_TRUE(out.missing(3));
  EXPECT_EQ(out.imputed.count(), 0);
}

TEST(Interpolate, LinearArithmetic) {
  const TimeSeries out = linear_interpolate(make({0, NA, NA, 9}));
  EXPECT_EQ(out.values(1), 3.0);
  EXPECT_EQ(out.values(2), 6.0);
}

TEST(Interpolate, ObservedValuesBitIdentical) {
  Rng rng(1);
  std::vector<double> v(50);
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = (i % 7 == 3 && i > 0 && i < 49) ? NA : rng.normal();
  const TimeSeries s = make(v);
  const TimeSeries out = linear_interpolate(s);
  for (Eigen::Index i = 0; i < s.size(); ++i)
    if (!s.missing(i)) {
      EXPECT_EQ(out.values(i), s.values(i));
    }
}

TEST(Interpolate, NeedsTwoObservations) {
  EXPECT_THROW(linear_interpolate(make({NA, 1, NA})), EstimationError);
}

TEST(CovariateSet, ValidateRejectsDuplicates) {
  CovariateSet z;
  z.grid = TimeGrid{0, 1, 2};
  z.names = {"a", "a"};
  z.values = Eigen::MatrixXd::Zero(2, 2);
  z.missing = MaskMatrix::Constant(2, 2, false);
  EXPECT_THROW(z.validate(), ContractError);
  EXPECT_THROW(z.index_of("b"), SchemaError);
}
