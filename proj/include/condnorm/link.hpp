#pragma once

#include <algorithm>
#include <cmath>

namespace condnorm {

// Inputs to the correlation link are clamped to +-(1 - kCorrClamp).
inline constexpr double kCorrClamp = 1e-8;

/// eta(c) = log((1 + c) / (1 - c)); maps (-1, 1) onto the real line.
template <typename Scalar>
Scalar corr_link(Scalar c) {
  const Scalar bound = Scalar(1) - Scalar(kCorrClamp);
  c = std::clamp(c, -bound, bound);
  return Scalar(2) * std::atanh(c);
}

/// eta^{-1}(u) = (e^u - 1) / (e^u + 1) = tanh(u / 2), stable for any |u|.
template <typename Scalar>
Scalar corr_link_inv(Scalar u) {
  return std::tanh(u / Scalar(2));
}

/// d eta^{-1} / du = (1 - mu^2) / 2 = 1 / (2 cosh^2(u / 2)).
template <typename Scalar>
Scalar corr_link_inv_derivative(Scalar u) {
  const Scalar c = std::cosh(u / Scalar(2));
  return Scalar(1) / (Scalar(2) * c * c);
}

}  // namespace condnorm
