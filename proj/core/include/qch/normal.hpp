#pragma once

namespace qch::normal {

inline constexpr double kLogSqrt2Pi = 0.91893853320467274178;

double pdf(double x) noexcept;
double log_pdf(double x) noexcept;
double cdf(double x) noexcept;
// 1 - cdf(x), accurate in the upper tail.
double upper_tail(double x) noexcept;
// Inverse of cdf for p in (0,1).
double quantile(double p);

} // namespace qch::normal
