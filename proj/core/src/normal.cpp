#include "qch/normal.hpp"

#include "qch/error.hpp"

#include <boost/math/special_functions/erf.hpp>

#include <cmath>
#include <numbers>

namespace qch::normal {

double pdf(double x) noexcept { return std::exp(log_pdf(x)); }

double log_pdf(double x) noexcept { return -0.5 * x * x - kLogSqrt2Pi; }

double cdf(double x) noexcept { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }

double upper_tail(double x) noexcept { return 0.5 * std::erfc(x / std::numbers::sqrt2); }

double quantile(double p) {
    if (!(p > 0.0 && p < 1.0)) throw InvalidArgument("normal quantile needs p in (0,1)");
    // erfc_inv keeps full relative accuracy in both tails.
    return -std::numbers::sqrt2 * boost::math::erfc_inv(2.0 * p);
}

} // namespace qch::normal
