#include "randmon/normal.hpp"

#include <array>
#include <cmath>
#include <numbers>

#include <fmt/format.h>

#include "randmon/errors.hpp"

namespace randmon {

double std_normal_cdf(double z) noexcept {
    return 0.5 * std::erfc(-z / std::numbers::sqrt2);
}

double std_normal_sf(double z) noexcept {
    return 0.5 * std::erfc(z / std::numbers::sqrt2);
}

double two_sided_p(double z) noexcept {
    return std::erfc(std::abs(z) / std::numbers::sqrt2);
}

namespace {

// Coefficients from P. J. Acklam's inverse-normal approximation.
constexpr std::array<double, 6> kA{-3.969683028665376e+01, 2.209460984245205e+02,
                                   -2.759285104469687e+02, 1.383577518672690e+02,
                                   -3.066479806614716e+01, 2.506628277459239e+00};
constexpr std::array<double, 5> kB{-5.447609879822406e+01, 1.615858368580409e+02,
                                   -1.556989798598866e+02, 6.680131188771972e+01,
                                   -1.328068155288572e+01};
constexpr std::array<double, 6> kC{-7.784894002430293e-03, -3.223964580411365e-01,
                                   -2.400758277161838e+00, -2.549732539343734e+00,
                                   4.374664141464968e+00,  2.938163982698783e+00};
constexpr std::array<double, 4> kD{7.784695709041462e-03, 3.224671290700398e-01,
                                   2.445134137142996e+00, 3.754408661907416e+00};

constexpr double kLow = 0.02425;

double acklam(double p) {
    if (p < kLow) {
        const double q = std::sqrt(-2.0 * std::log(p));
        return (((((kC[0] * q + kC[1]) * q + kC[2]) * q + kC[3]) * q + kC[4]) * q + kC[5]) /
               ((((kD[0] * q + kD[1]) * q + kD[2]) * q + kD[3]) * q + 1.0);
    }
    if (p > 1.0 - kLow) {
        const double q = std::sqrt(-2.0 * std::log1p(-p));
        return -(((((kC[0] * q + kC[1]) * q + kC[2]) * q + kC[3]) * q + kC[4]) * q + kC[5]) /
               ((((kD[0] * q + kD[1]) * q + kD[2]) * q + kD[3]) * q + 1.0);
    }
    const double q = p - 0.5;
    const double r = q * q;
    return (((((kA[0] * r + kA[1]) * r + kA[2]) * r + kA[3]) * r + kA[4]) * r + kA[5]) * q /
           (((((kB[0] * r + kB[1]) * r + kB[2]) * r + kB[3]) * r + kB[4]) * r + 1.0);
}

}  // namespace

double std_normal_quantile(double p) {
    if (!(p > 0.0 && p < 1.0)) {
        throw DomainError(fmt::format("normal quantile requires p in (0,1), got {}", p));
    }
    double x = acklam(p);
    // Newton on the tail that holds p, so the residual keeps relative precision.
    const double density = std::exp(-0.5 * x * x) / std::sqrt(2.0 * std::numbers::pi);
    const double residual = p < 0.5 ? std_normal_cdf(x) - p : (1.0 - p) - std_normal_sf(x);
    x -= residual / density;
    return x;
}

double erf_inv(double x) {
    if (!(x > -1.0 && x < 1.0)) {
        throw DomainError(fmt::format("erf_inv requires x in (-1,1), got {}", x));
    }
    if (x == 0.0) {
        return 0.0;
    }
    return std_normal_quantile(0.5 * (x + 1.0)) / std::numbers::sqrt2;
}

}  // namespace randmon
