#include "dpfair/normal.hpp"

#include <cmath>
#include <numbers>

namespace dpfair::normal {

double pdf(double z) noexcept {
  return std::exp(-0.5 * z * z) * (std::numbers::inv_sqrtpi / std::numbers::sqrt2);
}

double cdf(double z) noexcept {
  return 0.5 * std::erfc(-z / std::numbers::sqrt2);
}

double expected_negative_part(double mean, double sd) noexcept {
  const double z = mean / sd;
  return sd * pdf(z) - mean * cdf(-z);
}

double cdf_antiderivative(double t, double a) noexcept {
  return t * cdf(a * t) + pdf(a * t) / a;
}

}  // namespace dpfair::normal
