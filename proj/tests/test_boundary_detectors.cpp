#include <cmath>
#include <numbers>
#include <random>

#include <boost/math/distributions/normal.hpp>
#include <doctest.h>

#include "randmon/boundary_detectors.hpp"
#include "randmon/errors.hpp"

using namespace randmon;

TEST_CASE("BDD threshold") {
    const double q = boost::math::quantile(boost::math::normal_distribution<double>(), 0.975);
    CHECK(std::abs(tune_bdd(1.0, 0.05) - q) < 1e-9);
    CHECK(std::abs(tune_bdd(1.0, 0.05) - 1.959964) < 1e-5);
    CHECK(tune_bdd(2.5, 0.05) == doctest::Approx(2.5 * q).epsilon(1e-12));
    CHECK(tune_bdd(1.0, 1.0 - 1e-12) < 1e-11);
    CHECK_THROWS_AS((void)tune_bdd(1.0, 0.0), DomainError);
    CHECK_THROWS_AS((void)tune_bdd(1.0, 1.0), DomainError);
    CHECK_THROWS_AS((void)tune_bdd(0.0, 0.05), DomainError);
}

TEST_CASE("BDD Monte Carlo false-alarm rate") {
    const double sigma = 0.7;
    for (double alpha : {0.05, 0.2}) {
        const BadDataDetector det = BadDataDetector::tuned({sigma}, alpha);
        std::mt19937_64 gen(alpha == 0.05 ? 1 : 2);
        std::normal_distribution<double> normal(0.0, sigma);
        int alarms = 0;
        const int N = 1'000'000;
        for (int i = 0; i < N; ++i) {
            alarms += bdd_step(det, 0, normal(gen));
        }
        CHECK(std::abs(alarms / double(N) - alpha) < 0.002);
    }
}

TEST_CASE("BDD step is a strict magnitude test") {
    const BadDataDetector det = BadDataDetector::tuned({1.0, 2.0}, 0.05);
    const double tau = det.tau[0];
    CHECK(!bdd_step(det, 0, 0.0));
    CHECK(!bdd_step(det, 0, tau));
    CHECK(!bdd_step(det, 0, -tau));
    CHECK(bdd_step(det, 0, -(tau + 1e-9)));
    CHECK(bdd_step(det, 0, std::nextafter(tau, 10.0)));
    CHECK(det.tau[1] == doctest::Approx(2 * tau));
}

TEST_CASE("CUSUM step") {
    SUBCASE("clamps at zero") {
        const CusumStep s = cusum_step(0.0, 1.0, 1.5, 0.4);
        CHECK(!s.alarm);
        CHECK(s.s_next == 0.0);
    }
    SUBCASE("reset precedes accumulation") {
        const CusumStep s = cusum_step(1.1, 1.0, 1.5, 100.0);
        CHECK(s.alarm);
        CHECK(s.s_next == 0.0);
        CHECK(!cusum_step(1.0, 1.0, 1.5, 0.0).alarm);
    }
    SUBCASE("linear ramp") {
        CusumChannel ch{10.0, 1.5, 0.0};
        for (int k = 1; k <= 40; ++k) {
            const CusumStep s = ch.step(k % 2 == 0 ? 1.75 : -1.75);
            CHECK(!s.alarm);
            CHECK(ch.s == doctest::Approx(0.25 * k));
        }
        CHECK(!ch.step(1.75).alarm);  // S_prev = 10 is not above τ
        CHECK(ch.step(1.75).alarm);
        CHECK(ch.s == 0.0);
    }
    SUBCASE("statistic stays nonnegative") {
        std::mt19937_64 gen(3);
        std::normal_distribution<double> normal;
        CusumChannel ch{2.0, 1.0, 0.0};
        for (int i = 0; i < 10000; ++i) {
            const double prev = ch.s;
            const CusumStep s = ch.step(normal(gen));
            CHECK(ch.s >= 0.0);
            CHECK(s.alarm == (prev > ch.tau));
        }
    }
}

TEST_CASE("CUSUM tuning reproduces the target on a fresh stream") {
    const MonteCarloConfig mc{1'000'000, 77};
    const CusumTuning t = tune_cusum(1.0, 1.5, 0.05, mc);
    CHECK(t.attainable);
    CHECK(t.tau > 0.0);
    CHECK(std::abs(t.achieved_rate / 0.05 - 1.0) <= 0.05);
    const double held_out = cusum_alarm_rate(1.0, 1.5, t.tau, MonteCarloConfig{1'000'000, 12345});
    CHECK(std::abs(held_out - 0.05) < 0.005);
    // The threshold scales with σ.
    const CusumTuning scaled = tune_cusum(3.0, 4.5, 0.05, mc);
    CHECK(scaled.tau == doctest::Approx(3 * t.tau).epsilon(1e-6));
}

TEST_CASE("CUSUM alarm rate is monotone in the threshold") {
    const MonteCarloConfig mc{200'000, 9};
    double last = 1.0;
    for (double tau = 0.0; tau <= 3.0; tau += 0.1) {
        const double rate = cusum_alarm_rate(1.0, 1.2, tau, mc);
        CHECK(rate <= last);
        last = rate;
    }
}

TEST_CASE("CUSUM tuning edge cases") {
    CHECK_THROWS_AS((void)tune_cusum(1.0, 0.5, 0.05), InvalidBias);
    CHECK_THROWS_AS((void)tune_cusum(1.0, std::sqrt(2 / std::numbers::pi), 0.05), InvalidBias);
    const CusumTuning large = tune_cusum(1.0, 10.0, 0.05, MonteCarloConfig{100'000, 1});
    CHECK(!large.attainable);
    CHECK(large.tau == 0.0);
    CHECK(large.achieved_rate < 0.05);
}

TEST_CASE("half-normal moments of residual magnitudes") {
    std::mt19937_64 gen(8);
    const double sigma = 0.3;
    std::normal_distribution<double> normal(0.0, sigma);
    double sum = 0.0, sq = 0.0;
    const int N = 1'000'000;
    for (int i = 0; i < N; ++i) {
        const double a = std::abs(normal(gen));
        sum += a;
        sq += a * a;
    }
    const double mean = sum / N;
    const double var = sq / N - mean * mean;
    CHECK(std::abs(mean / (std::sqrt(2 / std::numbers::pi) * sigma) - 1.0) < 0.01);
    CHECK(std::abs(var / (sigma * sigma * (1 - 2 / std::numbers::pi)) - 1.0) < 0.02);
}
