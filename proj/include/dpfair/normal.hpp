#pragma once

namespace dpfair::normal {

/// Standard normal density.
double pdf(double z) noexcept;

/// Standard normal CDF, 0.5 * erfc(-z / sqrt 2).
double cdf(double z) noexcept;

/// E[max(-nu, 0)] for nu ~ N(mean, sd^2): sd * pdf(mean/sd) - mean * cdf(-mean/sd).
double expected_negative_part(double mean, double sd) noexcept;

/// Antiderivative of t -> cdf(a t): t * cdf(a t) + pdf(a t) / a. Requires a > 0.
double cdf_antiderivative(double t, double a) noexcept;

}  // namespace dpfair::normal
