#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "condnorm/error.hpp"

namespace condnorm {

enum class BasisKind {
  natural_cubic,
  cubic_bspline,
  linear,  // single unpenalized column, e.g. for Fourier covariates
};

enum class KnotPlacement { quantile, uniform };

const char* to_string(BasisKind kind);
BasisKind parse_basis_kind(const std::string& text);
const char* to_string(KnotPlacement placement);
KnotPlacement parse_knot_placement(const std::string& text);

struct BasisSpec {
  BasisKind kind = BasisKind::natural_cubic;
  int dimension = 10;
  KnotPlacement knots = KnotPlacement::quantile;
  // Covariate range; taken from the data when unset.
  std::optional<double> lo;
  std::optional<double> hi;
};

/// A constructed univariate basis: knots plus evaluation rules. Outside
/// [lo, hi] every kind extrapolates linearly from the boundary.
class SplineBasis {
 public:
  SplineBasis() = default;
  SplineBasis(BasisKind kind, std::vector<double> knots, double lo, double hi);

  BasisKind kind() const { return kind_; }
  const std::vector<double>& knots() const { return knots_; }
  double lo() const { return lo_; }
  double hi() const { return hi_; }
  Eigen::Index dimension() const;

  /// n x k evaluation matrix.
  Eigen::MatrixXd evaluate(std::span<const double> x) const;
  Eigen::RowVectorXd evaluate(double x) const;
  /// Second derivatives of each basis function at x (zero outside [lo, hi]).
  Eigen::RowVectorXd second_derivative(double x) const;
  /// k x k matrix of integrated products of second derivatives over [lo, hi].
  Eigen::MatrixXd penalty() const;

 private:
  Eigen::RowVectorXd natural_row(double x) const;
  Eigen::RowVectorXd natural_second(double x) const;
  Eigen::RowVectorXd bspline_row(double x, int derivative) const;

  BasisKind kind_ = BasisKind::natural_cubic;
  // natural_cubic: the k interpolation knots; cubic_bspline: the full
  // clamped knot vector (boundary knots repeated four times).
  std::vector<double> knots_;
  double lo_ = 0.0;
  double hi_ = 1.0;
  // natural_cubic only: maps knot values to knot second derivatives.
  Eigen::MatrixXd second_at_knots_;
};

struct BasisMatrix {
  SplineBasis basis;
  Eigen::MatrixXd design;   // n x k
  Eigen::MatrixXd penalty;  // k x k, symmetric PSD
};

/// Places knots from `x` according to `spec` and evaluates the basis at x.
/// Throws BasisError when x has fewer distinct values than the dimension.
BasisMatrix build_basis(const BasisSpec& spec, std::span<const double> x);

inline BasisMatrix build_basis(const BasisSpec& spec, const Eigen::VectorXd& x) {
  return build_basis(spec, std::span<const double>(x.data(), static_cast<std::size_t>(x.size())));
}

/// k x (k-1) orthonormal basis of the null space of the column means of
/// `design`; `design * Z` has columns summing to zero over its rows.
Eigen::MatrixXd sum_to_zero_constraint(const Eigen::MatrixXd& design);

template <typename Scalar = double>
struct FourierTerms {
  // Columns ordered sin_1, cos_1, sin_2, cos_2, ...
  Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> values;
  Scalar period;
  int pairs;
};

/// sin(2*pi*t*k/m), cos(2*pi*t*k/m) for k = 1..pairs. The angle is reduced
/// modulo the period before scaling so large t keeps full precision.
template <typename Scalar = double>
FourierTerms<Scalar> fourier_terms(std::span<const std::int64_t> t, Scalar period,
                                   int pairs) {
  if (!(period > Scalar(0))) throw ContractError("fourier_terms: period must be positive");
  if (pairs < 1 || Scalar(2 * pairs) >= period)
    throw ContractError("fourier_terms: need 1 <= pairs and 2*pairs < period");
  const auto n = static_cast<Eigen::Index>(t.size());
  FourierTerms<Scalar> out{decltype(FourierTerms<Scalar>::values)(n, 2 * pairs), period,
                           pairs};
  const Scalar two_pi = Scalar(2) * std::numbers::pi_v<Scalar>;
  for (Eigen::Index i = 0; i < n; ++i) {
    for (int k = 1; k <= pairs; ++k) {
      const Scalar turns =
          std::fmod(static_cast<Scalar>(t[static_cast<std::size_t>(i)]) * Scalar(k), period);
      const Scalar angle = two_pi * turns / period;
      out.values(i, 2 * (k - 1)) = std::sin(angle);
      out.values(i, 2 * (k - 1) + 1) = std::cos(angle);
    }
  }
  return out;
}

}  // namespace condnorm
