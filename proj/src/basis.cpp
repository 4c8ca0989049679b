#include "condnorm/basis.hpp"

#include <algorithm>
#include <cmath>

namespace condnorm {

namespace {

// Interpolated quantile of sorted values.
double quantile_sorted(const std::vector<double>& sorted, double p) {
  const double pos = p * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, sorted.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return sorted[lo] + frac * (sorted[hi] - sorted[lo]);
}

// Cox-de Boor recursion: r-th derivative of every degree-p B-spline on the
// knot vector t at x, where x lies in knot span [t[span], t[span+1]].
Eigen::VectorXd bspline_values(const std::vector<double>& t, int p, double x, int r,
                               std::size_t span) {
  const auto m = static_cast<Eigen::Index>(t.size()) - p - 1;
  Eigen::VectorXd out = Eigen::VectorXd::Zero(m);
  if (p == 0) {
    if (r == 0) out(static_cast<Eigen::Index>(span)) = 1.0;
    return out;
  }
  const Eigen::VectorXd lower = bspline_values(t, p - 1, x, std::max(r - 1, 0), span);
  for (Eigen::Index i = 0; i < m; ++i) {
    const auto ui = static_cast<std::size_t>(i);
    const double d1 = t[ui + p] - t[ui];
    const double d2 = t[ui + p + 1] - t[ui + 1];
    if (r == 0) {
      if (d1 > 0) out(i) += (x - t[ui]) / d1 * lower(i);
      if (d2 > 0) out(i) += (t[ui + p + 1] - x) / d2 * lower(i + 1);
    } else {
      if (d1 > 0) out(i) += p * lower(i) / d1;
      if (d2 > 0) out(i) -= p * lower(i + 1) / d2;
    }
  }
  return out;
}

std::size_t find_span(const std::vector<double>& t, double x) {
  // Last non-empty span whose left end is <= x.
  std::size_t span = 0;
  for (std::size_t i = 0; i + 1 < t.size(); ++i)
    if (t[i] < t[i + 1] && t[i] <= x) span = i;
  return span;
}

}  // namespace

const char* to_string(BasisKind kind) {
  switch (kind) {
    case BasisKind::natural_cubic: return "natural_cubic";
    case BasisKind::cubic_bspline: return "cubic_bspline";
    case BasisKind::linear: return "linear";
  }
  return "natural_cubic";
}

BasisKind parse_basis_kind(const std::string& text) {
  if (text == "natural_cubic") return BasisKind::natural_cubic;
  if (text == "cubic_bspline") return BasisKind::cubic_bspline;
  if (text == "linear") return BasisKind::linear;
  throw SchemaError("unknown basis kind '" + text + "'");
}

const char* to_string(KnotPlacement placement) {
  return placement == KnotPlacement::quantile ? "quantile" : "uniform";
}

KnotPlacement parse_knot_placement(const std::string& text) {
  if (text == "quantile") return KnotPlacement::quantile;
  if (text == "uniform") return KnotPlacement::uniform;
  throw SchemaError("unknown knot placement '" + text + "'");
}

SplineBasis::SplineBasis(BasisKind kind, std::vector<double> knots, double lo, double hi)
    : kind_(kind), knots_(std::move(knots)), lo_(lo), hi_(hi) {
  if (!(lo_ < hi_)) throw BasisError("basis range must satisfy lo < hi");
  if (kind_ == BasisKind::natural_cubic) {
    const auto k = static_cast<Eigen::Index>(knots_.size());
    if (k < 3) throw BasisError("natural cubic basis needs at least 3 knots");
    Eigen::VectorXd h(k - 1);
    for (Eigen::Index j = 0; j + 1 < k; ++j) {
      h(j) = knots_[static_cast<std::size_t>(j + 1)] - knots_[static_cast<std::size_t>(j)];
      if (!(h(j) > 0)) throw BasisError("natural cubic knots must be strictly increasing");
    }
    Eigen::MatrixXd d = Eigen::MatrixXd::Zero(k - 2, k);
    Eigen::MatrixXd band = Eigen::MatrixXd::Zero(k - 2, k - 2);
    for (Eigen::Index i = 0; i < k - 2; ++i) {
      d(i, i) = 1.0 / h(i);
      d(i, i + 1) = -1.0 / h(i) - 1.0 / h(i + 1);
      d(i, i + 2) = 1.0 / h(i + 1);
      band(i, i) = (h(i) + h(i + 1)) / 3.0;
      if (i + 1 < k - 2) band(i, i + 1) = band(i + 1, i) = h(i + 1) / 6.0;
    }
    second_at_knots_ = Eigen::MatrixXd::Zero(k, k);
    second_at_knots_.middleRows(1, k - 2) = band.ldlt().solve(d);
  } else if (kind_ == BasisKind::cubic_bspline) {
    if (knots_.size() < 8) throw BasisError("cubic B-spline basis needs dimension >= 4");
  }
}

Eigen::Index SplineBasis::dimension() const {
  switch (kind_) {
    case BasisKind::natural_cubic: return static_cast<Eigen::Index>(knots_.size());
    case BasisKind::cubic_bspline: return static_cast<Eigen::Index>(knots_.size()) - 4;
    case BasisKind::linear: return 1;
  }
  return 0;
}

Eigen::RowVectorXd SplineBasis::natural_row(double x) const {
  const auto k = static_cast<Eigen::Index>(knots_.size());
  const auto& kn = knots_;
  Eigen::RowVectorXd row = Eigen::RowVectorXd::Zero(k);
  if (x < kn.front()) {
    const double h = kn[1] - kn[0];
    // value and slope at the first knot (second derivative is zero there)
    row(0) = 1.0;
    Eigen::RowVectorXd slope = Eigen::RowVectorXd::Zero(k);
    slope(0) = -1.0 / h;
    slope(1) = 1.0 / h;
    slope -= h / 3.0 * second_at_knots_.row(0) + h / 6.0 * second_at_knots_.row(1);
    return row + (x - kn.front()) * slope;
  }
  if (x > kn.back()) {
    const double h = kn[k - 1] - kn[k - 2];
    row(k - 1) = 1.0;
    Eigen::RowVectorXd slope = Eigen::RowVectorXd::Zero(k);
    slope(k - 2) = -1.0 / h;
    slope(k - 1) = 1.0 / h;
    slope += h / 6.0 * second_at_knots_.row(k - 2) + h / 3.0 * second_at_knots_.row(k - 1);
    return row + (x - kn.back()) * slope;
  }
  auto it = std::upper_bound(kn.begin(), kn.end(), x);
  auto j = static_cast<Eigen::Index>(it - kn.begin()) - 1;
  j = std::clamp<Eigen::Index>(j, 0, k - 2);
  const double xl = kn[static_cast<std::size_t>(j)];
  const double xr = kn[static_cast<std::size_t>(j + 1)];
  const double h = xr - xl;
  const double left = xr - x;
  const double right = x - xl;
  row(j) += left / h;
  row(j + 1) += right / h;
  row += (left * left * left / h - h * left) / 6.0 * second_at_knots_.row(j);
  row += (right * right * right / h - h * right) / 6.0 * second_at_knots_.row(j + 1);
  return row;
}

Eigen::RowVectorXd SplineBasis::natural_second(double x) const {
  const auto k = static_cast<Eigen::Index>(knots_.size());
  const auto& kn = knots_;
  if (x < kn.front() || x > kn.back()) return Eigen::RowVectorXd::Zero(k);
  auto it = std::upper_bound(kn.begin(), kn.end(), x);
  auto j = static_cast<Eigen::Index>(it - kn.begin()) - 1;
  j = std::clamp<Eigen::Index>(j, 0, k - 2);
  const double xl = kn[static_cast<std::size_t>(j)];
  const double xr = kn[static_cast<std::size_t>(j + 1)];
  const double h = xr - xl;
  return (xr - x) / h * second_at_knots_.row(j) + (x - xl) / h * second_at_knots_.row(j + 1);
}

Eigen::RowVectorXd SplineBasis::bspline_row(double x, int derivative) const {
  const double xc = std::clamp(x, lo_, hi_);
  return bspline_values(knots_, 3, xc, derivative, find_span(knots_, xc)).transpose();
}

Eigen::RowVectorXd SplineBasis::evaluate(double x) const {
  switch (kind_) {
    case BasisKind::natural_cubic:
      return natural_row(x);
    case BasisKind::cubic_bspline: {
      if (x < lo_) return bspline_row(lo_, 0) + (x - lo_) * bspline_row(lo_, 1);
      if (x > hi_) return bspline_row(hi_, 0) + (x - hi_) * bspline_row(hi_, 1);
      return bspline_row(x, 0);
    }
    case BasisKind::linear:
      return Eigen::RowVectorXd::Constant(1, x);
  }
  return {};
}

Eigen::MatrixXd SplineBasis::evaluate(std::span<const double> x) const {
  Eigen::MatrixXd out(static_cast<Eigen::Index>(x.size()), dimension());
  for (std::size_t i = 0; i < x.size(); ++i)
    out.row(static_cast<Eigen::Index>(i)) = evaluate(x[i]);
  return out;
}

Eigen::RowVectorXd SplineBasis::second_derivative(double x) const {
  switch (kind_) {
    case BasisKind::natural_cubic:
      return natural_second(x);
    case BasisKind::cubic_bspline:
      if (x < lo_ || x > hi_) return Eigen::RowVectorXd::Zero(dimension());
      return bspline_row(x, 2);
    case BasisKind::linear:
      return Eigen::RowVectorXd::Zero(1);
  }
  return {};
}

Eigen::MatrixXd SplineBasis::penalty() const {
  switch (kind_) {
    case BasisKind::natural_cubic: {
      // D' B^{-1} D, written via the knot second-derivative map F = [0; B^{-1} D; 0].
      const auto k = static_cast<Eigen::Index>(knots_.size());
      Eigen::VectorXd h(k - 1);
      for (Eigen::Index j = 0; j + 1 < k; ++j)
        h(j) = knots_[static_cast<std::size_t>(j + 1)] - knots_[static_cast<std::size_t>(j)];
      Eigen::MatrixXd d = Eigen::MatrixXd::Zero(k - 2, k);
      for (Eigen::Index i = 0; i < k - 2; ++i) {
        d(i, i) = 1.0 / h(i);
        d(i, i + 1) = -1.0 / h(i) - 1.0 / h(i + 1);
        d(i, i + 2) = 1.0 / h(i + 1);
      }
      Eigen::MatrixXd s = d.transpose() * second_at_knots_.middleRows(1, k - 2);
      return 0.5 * (s + s.transpose());
    }
    case BasisKind::cubic_bspline: {
      // Second derivatives are linear on each knot span, so two-point
      // Gauss-Legendre integrates the products exactly.
      const Eigen::Index k = dimension();
      Eigen::MatrixXd s = Eigen::MatrixXd::Zero(k, k);
      const double offset = 1.0 / std::sqrt(3.0);
      for (std::size_t j = 0; j + 1 < knots_.size(); ++j) {
        const double a = knots_[j];
        const double b = knots_[j + 1];
        if (!(b > a)) continue;
        const double mid = 0.5 * (a + b);
        const double half = 0.5 * (b - a);
        for (double sign : {-1.0, 1.0}) {
          const double x = mid + sign * half * offset;
          const Eigen::VectorXd d2 = bspline_values(knots_, 3, x, 2, j);
          s.noalias() += half * d2 * d2.transpose();
        }
      }
      return s;
    }
    case BasisKind::linear:
      return Eigen::MatrixXd::Zero(1, 1);
  }
  return {};
}

BasisMatrix build_basis(const BasisSpec& spec, std::span<const double> x) {
  if (x.empty()) throw BasisError("build_basis: no covariate values");
  for (double v : x)
    if (!std::isfinite(v)) throw BasisError("build_basis: non-finite covariate value");

  const auto [min_it, max_it] = std::minmax_element(x.begin(), x.end());
  const double lo = spec.lo.value_or(*min_it);
  const double hi = spec.hi.value_or(*max_it);
  if (!(lo < hi)) throw BasisError("build_basis: covariate range is degenerate (lo >= hi)");

  std::vector<double> unique;
  for (double v : x)
    if (v >= lo && v <= hi) unique.push_back(v);
  std::sort(unique.begin(), unique.end());
  unique.erase(std::unique(unique.begin(), unique.end()), unique.end());

  const int k = spec.dimension;
  std::vector<double> knots;
  switch (spec.kind) {
    case BasisKind::linear:
      break;
    case BasisKind::natural_cubic: {
      if (k < 3) throw BasisError("natural cubic basis needs dimension >= 3");
      if (static_cast<int>(unique.size()) < k)
        throw BasisError("build_basis: " + std::to_string(unique.size()) +
                         " distinct covariate values for dimension " + std::to_string(k));
      for (int i = 0; i < k; ++i) {
        const double p = static_cast<double>(i) / (k - 1);
        knots.push_back(spec.knots == KnotPlacement::quantile ? quantile_sorted(unique, p)
                                                              : lo + p * (hi - lo));
      }
      knots.front() = lo;
      knots.back() = hi;
      break;
    }
    case BasisKind::cubic_bspline: {
      if (k < 4) throw BasisError("cubic B-spline basis needs dimension >= 4");
      if (static_cast<int>(unique.size()) < k)
        throw BasisError("build_basis: " + std::to_string(unique.size()) +
                         " distinct covariate values for dimension " + std::to_string(k));
      knots.assign(4, lo);
      const int interior = k - 4;
      for (int i = 1; i <= interior; ++i) {
        const double p = static_cast<double>(i) / (interior + 1);
        knots.push_back(spec.knots == KnotPlacement::quantile ? quantile_sorted(unique, p)
                                                              : lo + p * (hi - lo));
      }
      knots.insert(knots.end(), 4, hi);
      break;
    }
  }

  BasisMatrix out{SplineBasis(spec.kind, std::move(knots), lo, hi), {}, {}};
  out.design = out.basis.evaluate(x);
  out.penalty = out.basis.penalty();
  return out;
}

Eigen::MatrixXd sum_to_zero_constraint(const Eigen::MatrixXd& design) {
  const Eigen::VectorXd means = design.colwise().mean().transpose();
  const Eigen::Index k = means.size();
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(means);
  const Eigen::MatrixXd q = qr.householderQ() * Eigen::MatrixXd::Identity(k, k);
  return q.rightCols(k - 1);
}

}  // namespace condnorm
