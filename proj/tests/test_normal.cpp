#include <cmath>
#include <limits>
#include <random>

#include <boost/math/distributions/normal.hpp>
#include <boost/math/special_functions/erf.hpp>
#include <doctest.h>

#include "randmon/errors.hpp"
#include "randmon/normal.hpp"

using namespace randmon;

namespace {
const boost::math::normal_distribution<double> kStd;
}

TEST_CASE("cdf at the origin and table quantile") {
    CHECK(std_normal_cdf(0.0) == 0.5);
    CHECK(std::abs(std_normal_quantile(0.975) - 1.959964) < 1e-5);
    CHECK(std::abs(std_normal_quantile(0.025) + 1.959964) < 1e-5);
}

TEST_CASE("cdf matches an independent implementation to 1e-12") {
    for (double z = -12.0; z <= 12.0; z += 0.01) {
        CHECK(std::abs(std_normal_cdf(z) - boost::math::cdf(kStd, z)) < 1e-12);
        CHECK(std::abs(std_normal_sf(z) - boost::math::cdf(boost::math::complement(kStd, z))) < 1e-12);
    }
}

TEST_CASE("upper tail keeps relative precision") {
    const double ref = boost::math::cdf(boost::math::complement(kStd, 20.0));
    CHECK(std::abs(std_normal_sf(20.0) / ref - 1.0) < 1e-12);
    CHECK(std::abs(two_sided_p(-20.0) / (2 * ref) - 1.0) < 1e-12);
}

TEST_CASE("quantile matches an independent implementation to 1e-9") {
    for (double p : {1e-300, 1e-15, 1e-10, 1e-6, 1e-3, 0.02425, 0.1, 0.3, 0.5, 0.7, 0.97575, 0.999, 1 - 1e-10}) {
        CAPTURE(p);
        CHECK(std::abs(std_normal_quantile(p) - boost::math::quantile(kStd, p)) < 1e-9);
    }
    for (int i = 1; i < 1000; ++i) {
        const double p = i / 1000.0;
        CHECK(std::abs(std_normal_quantile(p) - boost::math::quantile(kStd, p)) < 1e-9);
    }
}

TEST_CASE("quantile inverts the cdf on [-6, 6]") {
    for (double z = -6.0; z <= 6.0; z += 0.001) {
        CHECK(std::abs(std_normal_quantile(std_normal_cdf(z)) - z) < 1e-7);
    }
}

TEST_CASE("cdf symmetry on random points") {
    std::mt19937_64 gen(42);
    std::uniform_real_distribution<double> u(-8.0, 8.0);
    for (int i = 0; i < 1000; ++i) {
        const double z = u(gen);
        CHECK(std::abs(std_normal_cdf(-z) + std_normal_cdf(z) - 1.0) < 1e-15);
    }
}

TEST_CASE("quantile domain") {
    CHECK_THROWS_AS((void)std_normal_quantile(0.0), DomainError);
    CHECK_THROWS_AS((void)std_normal_quantile(1.0), DomainError);
    CHECK_THROWS_AS((void)std_normal_quantile(-0.1), DomainError);
    CHECK_THROWS_AS((void)std_normal_quantile(std::numeric_limits<double>::quiet_NaN()), DomainError);
}

TEST_CASE("erf_inv against an independent implementation") {
    for (double x = -0.999; x < 0.999; x += 0.001) {
        CHECK(std::abs(erf_inv(x) - boost::math::erf_inv(x)) < 1e-9);
    }
    CHECK(erf_inv(0.0) == doctest::Approx(0.0));
    CHECK_THROWS_AS((void)erf_inv(1.0), DomainError);
}
