#include "randmon/boundary_detectors.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

#include <fmt/format.h>

#include "randmon/errors.hpp"
#include "randmon/lti_core.hpp"
#include "randmon/normal.hpp"

namespace randmon {

double tune_bdd(double sigma, double alpha_des) {
    if (!(sigma > 0.0) || !std::isfinite(sigma)) {
        throw DomainError(fmt::format("tune_bdd: sigma must be positive, got {}", sigma));
    }
    if (!(alpha_des > 0.0 && alpha_des < 1.0)) {
        throw DomainError(fmt::format("tune_bdd: alpha_des must be in (0,1), got {}", alpha_des));
    }
    return std::numbers::sqrt2 * sigma * erf_inv(1.0 - alpha_des);
}

BadDataDetector BadDataDetector::tuned(const std::vector<double>& sigma, double alpha_des) {
    BadDataDetector det;
    det.alpha_des = alpha_des;
    det.tau.reserve(sigma.size());
    for (double s : sigma) {
        det.tau.push_back(tune_bdd(s, alpha_des));
    }
    return det;
}

bool bdd_step(const BadDataDetector& det, std::size_t sensor, double residual) {
    return std::abs(residual) > det.tau.at(sensor);
}

CusumStep cusum_step(double s_prev, double tau, double bias, double residual) noexcept {
    if (s_prev > tau) {
        return {true, 0.0};
    }
    return {false, std::max(0.0, s_prev + std::abs(residual) - bias)};
}

CusumStep cusum_step(CusumDetector& det, std::size_t sensor, double residual) {
    return det.channels.at(sensor).step(residual);
}

namespace {

std::vector<double> half_normal_draws(const MonteCarloConfig& mc) {
    CounterRng rng(mc.seed, 0xC05u);
    std::normal_distribution<double> normal;
    std::vector<double> draws(mc.samples);
    for (double& d : draws) {
        d = std::abs(normal(rng));
    }
    return draws;
}

// Rate on unit-variance draws with bias and threshold in σ units.
double unit_rate(const std::vector<double>& draws, double bias, double tau) {
    double s = 0.0;
    std::size_t alarms = 0;
    for (double d : draws) {
        const CusumStep out = cusum_step(s, tau, bias, d);
        alarms += out.alarm ? 1 : 0;
        s = out.s_next;
    }
    return static_cast<double>(alarms) / static_cast<double>(draws.size());
}

constexpr int kMaxBisections = 60;
constexpr double kRelativeRateTolerance = 0.05;

}  // namespace

double cusum_alarm_rate(double sigma, double bias, double tau, const MonteCarloConfig& mc) {
    if (!(sigma > 0.0)) {
        throw DomainError("cusum_alarm_rate: sigma must be positive");
    }
    return unit_rate(half_normal_draws(mc), bias / sigma, tau / sigma);
}

CusumTuning tune_cusum(double sigma, double bias, double alpha_des, const MonteCarloConfig& mc) {
    if (!(sigma > 0.0) || !std::isfinite(sigma)) {
        throw DomainError(fmt::format("tune_cusum: sigma must be positive, got {}", sigma));
    }
    if (!(alpha_des > 0.0 && alpha_des < 1.0)) {
        throw DomainError(fmt::format("tune_cusum: alpha_des must be in (0,1), got {}", alpha_des));
    }
    if (!(bias > std::sqrt(2.0 / std::numbers::pi) * sigma)) {
        throw InvalidBias(fmt::format("CUSUM bias {} must exceed E|r| = {}", bias,
                                      std::sqrt(2.0 / std::numbers::pi) * sigma));
    }
    if (mc.samples == 0) {
        throw DomainError("tune_cusum: sample count must be positive");
    }
    const std::vector<double> draws = half_normal_draws(mc);
    const double b = bias / sigma;

    CusumTuning out;
    const double rate_at_zero = unit_rate(draws, b, 0.0);
    if (rate_at_zero < alpha_des) {
        out.tau = 0.0;
        out.achieved_rate = rate_at_zero;
        out.attainable = false;
        return out;
    }

    double lo = 0.0;
    double lo_rate = rate_at_zero;
    double hi = std::max(1.0, b);
    double hi_rate = unit_rate(draws, b, hi);
    while (hi_rate >= alpha_des) {
        lo = hi;
        lo_rate = hi_rate;
        hi *= 2.0;
        hi_rate = unit_rate(draws, b, hi);
        if (hi > 1e6) {
            throw NonConvergence("tune_cusum: could not bracket the alarm rate");
        }
    }
    int it = 0;
    for (; it < kMaxBisections && hi - lo > 1e-12 * std::max(1.0, hi); ++it) {
        const double mid = 0.5 * (lo + hi);
        const double rate = unit_rate(draws, b, mid);
        if (rate >= alpha_des) {
            lo = mid;
            lo_rate = rate;
        } else {
            hi = mid;
            hi_rate = rate;
        }
    }
    const bool take_lo = std::abs(lo_rate - alpha_des) <= std::abs(hi_rate - alpha_des);
    out.tau = (take_lo ? lo : hi) * sigma;
    out.achieved_rate = take_lo ? lo_rate : hi_rate;
    out.iterations = it;
    if (std::abs(out.achieved_rate - alpha_des) > kRelativeRateTolerance * alpha_des) {
        throw NonConvergence(fmt::format("tune_cusum: best rate {} misses target {}", out.achieved_rate,
                                         alpha_des));
    }
    return out;
}

}  // namespace randmon
