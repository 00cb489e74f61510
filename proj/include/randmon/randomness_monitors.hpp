#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace randmon {

/// Fixed-capacity sliding window of one sensor's residuals, oldest first.
class WindowBuffer {
public:
    explicit WindowBuffer(std::size_t capacity, std::size_t sensor_id = 0);

    /// Appends a residual, evicting the oldest one when full.
    void push(double value);

    [[nodiscard]] bool full() const noexcept { return size_ == data_.size(); }
    [[nodiscard]] std::size_t size() const noexcept { return size_; }
    [[nodiscard]] std::size_t capacity() const noexcept { return data_.size(); }
    [[nodiscard]] std::size_t sensor_id() const noexcept { return sensor_id_; }

    /// Contents in arrival order.
    [[nodiscard]] std::vector<double> values() const;
    void copy_to(std::vector<double>& out) const;

private:
    std::vector<double> data_;
    std::size_t head_ = 0;  // slot of the oldest entry
    std::size_t size_ = 0;
    std::size_t sensor_id_;
};

struct SignedRanks {
    /// Rank of |v| for each nonzero input, in input order (zeros dropped).
    std::vector<double> ranks;
    /// Sign of each ranked value, aligned with `ranks`.
    std::vector<int> signs;
    std::size_t ell_eff = 0;
};

/// Ranks absolute values ascending from 1 after removing exact zeros.
/// Exactly tied magnitudes share the mean of the ranks they span.
/// Throws EmptyAfterZeroRemoval when every value is zero.
[[nodiscard]] SignedRanks signed_ranks(std::span<const double> values);

struct WsrOutcome {
    double w_plus = 0.0;
    double w_minus = 0.0;
    std::size_t ell_eff = 0;
    double z = 0.0;
    double p = 1.0;
    bool alarm = false;
    /// ell_eff below 20, where the normal approximation is coarse.
    bool low_sample_warning = false;
};

/// Mean and variance of W± under symmetry: (ℓ²+ℓ)/4 and (ℓ²+ℓ)(2ℓ+1)/24.
[[nodiscard]] double wsr_mean(std::size_t ell) noexcept;
[[nodiscard]] double wsr_variance(std::size_t ell) noexcept;

/// Wilcoxon signed-rank symmetry test on one window, two-sided at alpha_des.
[[nodiscard]] WsrOutcome wsr_test(std::span<const double> window, double alpha_des);
[[nodiscard]] WsrOutcome wsr_test(const WindowBuffer& window, double alpha_des);

struct Bounds {
    double omega_minus = 0.0;
    double omega_plus = 0.0;
};

/// Ω^W_± = ±|Φ⁻¹(α/2)|·sqrt((ℓ²+ℓ)(2ℓ+1)/24) + (ℓ²+ℓ)/4. α = 1 collapses both to the mean.
[[nodiscard]] Bounds wsr_bounds(std::size_t ell, double alpha_des);

struct SirOutcome {
    std::size_t n_runs = 0;
    /// Nonzero residual differences that entered the run count.
    std::size_t ell_prime_eff = 0;
    double z = 0.0;
    double p = 1.0;
    bool alarm = false;
    /// At least one zero difference was dropped (two equal consecutive residuals).
    bool tie_alarm = false;
    /// ell_prime_eff below 25.
    bool low_sample_warning = false;
};

/// Null moments of the run count for a sequence of `observations` values:
/// (2n−1)/3 and (16n−29)/90.
[[nodiscard]] double sir_mean(std::size_t observations) noexcept;
[[nodiscard]] double sir_variance(std::size_t observations) noexcept;

/// Serial independence runs test over the differences of the window.
///
/// Zero differences are dropped and set tie_alarm. The run-count moments are
/// evaluated for the ell_prime_eff + 1 residuals spanned by the retained
/// differences. Throws DegenerateWindow when fewer than two nonzero
/// differences remain.
[[nodiscard]] SirOutcome sir_test(std::span<const double> window, double alpha_des);
[[nodiscard]] SirOutcome sir_test(const WindowBuffer& window, double alpha_des);

/// Ω^S_± = ±|Φ⁻¹(α/2)|·sqrt((16n−29)/90) + (2n−1)/3 for n observations (n ≥ 2).
[[nodiscard]] Bounds sir_bounds(std::size_t observations, double alpha_des);

/// Sliding alarm-rate estimate α_i over the last ℓ^α verdicts.
class AlarmRateTracker {
public:
    /// `threshold` is α^τ; a full ring with rate above it flags the sensor.
    AlarmRateTracker(std::size_t window, double threshold, double alpha_des);

    void push(bool alarm);

    [[nodiscard]] bool full() const noexcept { return filled_ == ring_.size(); }
    /// count/ℓ^α once full, count/filled while warming up (0 when empty).
    [[nodiscard]] double rate() const noexcept;
    [[nodiscard]] bool compromised() const noexcept { return full() && rate() > threshold_; }

    [[nodiscard]] std::size_t window() const noexcept { return ring_.size(); }
    [[nodiscard]] double threshold() const noexcept { return threshold_; }
    [[nodiscard]] double alpha_des() const noexcept { return alpha_des_; }
    [[nodiscard]] std::size_t count() const noexcept { return count_; }

private:
    std::vector<bool> ring_;
    std::size_t next_ = 0;
    std::size_t filled_ = 0;
    std::size_t count_ = 0;
    double threshold_;
    double alpha_des_;
};

/// Value-style wrapper: returns the tracker after pushing `alarm`.
[[nodiscard]] AlarmRateTracker update_alarm_rate(AlarmRateTracker tracker, bool alarm);

}  // namespace randmon
