#pragma once

#include <cstdint>
#include <vector>

namespace randmon {

/// τ^B = √2·σ·erf⁻¹(1 − α), so that P(|r| > τ^B) = α for r ~ N(0, σ²).
/// Throws DomainError unless σ > 0 and 0 < α < 1.
[[nodiscard]] double tune_bdd(double sigma, double alpha_des);

/// Stateless magnitude test alarm ⇔ |r| > τ^B, one threshold per sensor.
struct BadDataDetector {
    std::vector<double> tau;
    double alpha_des = 0.0;

    [[nodiscard]] static BadDataDetector tuned(const std::vector<double>& sigma, double alpha_des);
};

[[nodiscard]] bool bdd_step(const BadDataDetector& det, std::size_t sensor, double residual);

struct CusumStep {
    bool alarm = false;
    double s_next = 0.0;
};

/// One CUSUM update: S_prev > τ resets to 0 and alarms, otherwise
/// S_next = max(0, S_prev + |r| − b).
[[nodiscard]] CusumStep cusum_step(double s_prev, double tau, double bias, double residual) noexcept;

/// One sensor's CUSUM with its accumulated statistic.
struct CusumChannel {
    double tau = 0.0;
    double bias = 0.0;
    double s = 0.0;

    CusumStep step(double residual) noexcept {
        const CusumStep out = cusum_step(s, tau, bias, residual);
        s = out.s_next;
        return out;
    }
};

struct CusumDetector {
    std::vector<CusumChannel> channels;
    double alpha_des = 0.0;
};

[[nodiscard]] CusumStep cusum_step(CusumDetector& det, std::size_t sensor, double residual);

struct MonteCarloConfig {
    std::size_t samples = 1'000'000;
    std::uint64_t seed = 0x5EEDC05Eu;
};

struct CusumTuning {
    double tau = 0.0;
    double achieved_rate = 0.0;
    /// False when even τ = 0 alarms less often than α; τ is then 0.
    bool attainable = true;
    int iterations = 0;
};

/// Empirical CUSUM alarm rate on |N(0, σ²)| inputs from the given stream.
[[nodiscard]] double cusum_alarm_rate(double sigma, double bias, double tau, const MonteCarloConfig& mc);

/// Monte Carlo tuning of τ^C: bisection on τ over a fixed stream of
/// |N(0, σ²)| draws until the alarm rate matches α.
///
/// Throws InvalidBias unless b > sqrt(2/π)·σ, and NonConvergence when the
/// final rate misses α by more than 5% relative.
[[nodiscard]] CusumTuning tune_cusum(double sigma, double bias, double alpha_des, const MonteCarloConfig& mc = {});

}  // namespace randmon
