#include "tbs/transform.hpp"

#include <cmath>
#include <string>

#include "tbs/errors.hpp"

namespace tbs {

Eta::Eta(double value) : value_(value) {
  if (!valid(value)) {
    throw DomainError("eta must lie in (0, 2) with guard 1e-6, got " +
                      std::to_string(value));
  }
}

bool Eta::valid(double value) noexcept {
  return std::isfinite(value) && value >= kMin && value <= kMax;
}

double gpow(double y, Eta eta) {
  if (!std::isfinite(y)) throw DomainError("gpow: non-finite argument");
  const double e = eta.value();
  if (y > 0.0) return std::expm1(e * std::log(y)) / e;
  return (-std::pow(-y, e) - 1.0) / e;
}

double gpow_inv(double t, Eta eta) {
  if (!std::isfinite(t)) throw DomainError("gpow_inv: non-finite argument");
  const double e = eta.value();
  const double s = e * t + 1.0;
  if (s > 0.0) return std::exp(std::log1p(e * t) / e);
  return std::copysign(std::pow(std::abs(s), 1.0 / e), s);
}

double gpow_deriv(double y, Eta eta) {
  if (!std::isfinite(y)) throw DomainError("gpow_deriv: non-finite argument");
  return std::pow(std::abs(y), eta.value() - 1.0);
}

double log_jacobian(std::span<const double> y, Eta eta) {
  double sum = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    if (y[i] == 0.0) {
      throw IndexedDomainError("log_jacobian: zero response", i);
    }
    if (!std::isfinite(y[i])) {
      throw IndexedDomainError("log_jacobian: non-finite response", i);
    }
    sum += std::log(std::abs(y[i]));
  }
  return (eta.value() - 1.0) * sum;
}

}  // namespace tbs
