#ifndef TBS_TRANSFORM_HPP
#define TBS_TRANSFORM_HPP

#include <span>

namespace tbs {

/// Shape parameter of the signed power transform. Valid values lie in the
/// open interval (0, 2), enforced with a guard of kGuard at both ends so that
/// |y|^(eta - 1) stays representable.
class Eta {
 public:
  static constexpr double kGuard = 1e-6;
  static constexpr double kMin = kGuard;
  static constexpr double kMax = 2.0 - kGuard;

  explicit Eta(double value);

  double value() const noexcept { return value_; }
  static bool valid(double value) noexcept;

 private:
  double value_;
};

/// Signed Box-Cox power transform (sign(y)|y|^eta - 1) / eta.
/// Strictly increasing on the whole real line; gpow(0) = -1/eta.
double gpow(double y, Eta eta);

/// Inverse of gpow: sign(eta t + 1)|eta t + 1|^(1/eta).
double gpow_inv(double t, Eta eta);

/// |y|^(eta - 1). Returns +inf at y = 0 when eta < 1.
double gpow_deriv(double y, Eta eta);

/// (eta - 1) * sum log|y_i|. Throws IndexedDomainError on a zero entry.
double log_jacobian(std::span<const double> y, Eta eta);

}  // namespace tbs

#endif  // TBS_TRANSFORM_HPP
