#include "randmon/randomness_monitors.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <fmt/format.h>

#include "randmon/errors.hpp"
#include "randmon/normal.hpp"

namespace randmon {

namespace {

constexpr std::size_t kWsrMinSamples = 20;
constexpr std::size_t kSirMinDifferences = 25;

void check_alpha(double alpha_des) {
    if (!(alpha_des > 0.0 && alpha_des <= 1.0)) {
        throw DomainError(fmt::format("alpha_des must be in (0, 1], got {}", alpha_des));
    }
}

double critical_z(double alpha_des) {
    return std::abs(std_normal_quantile(alpha_des / 2.0));
}

}  // namespace

WindowBuffer::WindowBuffer(std::size_t capacity, std::size_t sensor_id)
    : data_(capacity), sensor_id_(sensor_id) {
    if (capacity == 0) {
        throw InvalidParameter("window capacity must be positive");
    }
}

void WindowBuffer::push(double value) {
    if (size_ < data_.size()) {
        data_[(head_ + size_) % data_.size()] = value;
        ++size_;
        return;
    }
    data_[head_] = value;
    head_ = (head_ + 1) % data_.size();
}

std::vector<double> WindowBuffer::values() const {
    std::vector<double> out;
    copy_to(out);
    return out;
}

void WindowBuffer::copy_to(std::vector<double>& out) const {
    out.resize(size_);
    for (std::size_t i = 0; i < size_; ++i) {
        out[i] = data_[(head_ + i) % data_.size()];
    }
}

SignedRanks signed_ranks(std::span<const double> values) {
    std::vector<double> magnitude;
    SignedRanks out;
    magnitude.reserve(values.size());
    out.signs.reserve(values.size());
    for (double v : values) {
        if (!std::isfinite(v)) {
            throw DomainError("signed_ranks: non-finite residual");
        }
        if (v == 0.0) {
            continue;
        }
        magnitude.push_back(std::abs(v));
        out.signs.push_back(v > 0.0 ? 1 : -1);
    }
    if (magnitude.empty()) {
        throw EmptyAfterZeroRemoval("every residual in the window is zero");
    }
    const std::size_t n = magnitude.size();
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return magnitude[a] < magnitude[b]; });

    out.ranks.assign(n, 0.0);
    std::size_t i = 0;
    while (i < n) {
        std::size_t j = i + 1;
        while (j < n && magnitude[order[j]] == magnitude[order[i]]) {
            ++j;
        }
        // positions i..j-1 hold ranks i+1..j
        const double shared = 0.5 * static_cast<double>(i + 1 + j);
        for (std::size_t t = i; t < j; ++t) {
            out.ranks[order[t]] = shared;
        }
        i = j;
    }
    out.ell_eff = n;
    return out;
}

double wsr_mean(std::size_t ell) noexcept {
    const double l = static_cast<double>(ell);
    return (l * l + l) / 4.0;
}

double wsr_variance(std::size_t ell) noexcept {
    const double l = static_cast<double>(ell);
    return (l * l + l) * (2.0 * l + 1.0) / 24.0;
}

WsrOutcome wsr_test(std::span<const double> window, double alpha_des) {
    check_alpha(alpha_des);
    const SignedRanks sr = signed_ranks(window);
    WsrOutcome out;
    for (std::size_t i = 0; i < sr.ranks.size(); ++i) {
        (sr.signs[i] > 0 ? out.w_plus : out.w_minus) += sr.ranks[i];
    }
    out.ell_eff = sr.ell_eff;
    out.low_sample_warning = sr.ell_eff < kWsrMinSamples;
    const double w_min = std::min(out.w_plus, out.w_minus);
    out.z = (w_min - wsr_mean(out.ell_eff)) / std::sqrt(wsr_variance(out.ell_eff));
    out.p = two_sided_p(out.z);
    out.alarm = out.p < alpha_des;
    return out;
}

WsrOutcome wsr_test(const WindowBuffer& window, double alpha_des) {
    if (!window.full()) {
        throw DomainError("wsr_test needs a full window");
    }
    const std::vector<double> values = window.values();
    return wsr_test(std::span<const double>(values), alpha_des);
}

Bounds wsr_bounds(std::size_t ell, double alpha_des) {
    if (ell == 0) {
        throw DomainError("wsr_bounds requires ell >= 1");
    }
    check_alpha(alpha_des);
    const double half = critical_z(alpha_des) * std::sqrt(wsr_variance(ell));
    const double center = wsr_mean(ell);
    return {center - half, center + half};
}

double sir_mean(std::size_t observations) noexcept {
    return (2.0 * static_cast<double>(observations) - 1.0) / 3.0;
}

double sir_variance(std::size_t observations) noexcept {
    return (16.0 * static_cast<double>(observations) - 29.0) / 90.0;
}

SirOutcome sir_test(std::span<const double> window, double alpha_des) {
    check_alpha(alpha_des);
    SirOutcome out;
    int previous_sign = 0;
    for (std::size_t k = 1; k < window.size(); ++k) {
        const double diff = window[k] - window[k - 1];
        if (!std::isfinite(diff)) {
            throw DomainError("sir_test: non-finite residual");
        }
        if (diff == 0.0) {
            out.tie_alarm = true;
            continue;
        }
        const int sign = diff > 0.0 ? 1 : -1;
        if (previous_sign == 0) {
            out.n_runs = 1;
        } else if (sign != previous_sign) {
            ++out.n_runs;
        }
        previous_sign = sign;
        ++out.ell_prime_eff;
    }
    if (out.ell_prime_eff < 2) {
        throw DegenerateWindow(
            fmt::format("only {} nonzero residual differences in the window", out.ell_prime_eff));
    }
    out.low_sample_warning = out.ell_prime_eff < kSirMinDifferences;
    const std::size_t observations = out.ell_prime_eff + 1;
    out.z = (static_cast<double>(out.n_runs) - sir_mean(observations)) / std::sqrt(sir_variance(observations));
    out.p = two_sided_p(out.z);
    out.alarm = out.p < alpha_des || out.tie_alarm;
    return out;
}

SirOutcome sir_test(const WindowBuffer& window, double alpha_des) {
    if (!window.full()) {
        throw DomainError("sir_test needs a full window");
    }
    const std::vector<double> values = window.values();
    return sir_test(std::span<const double>(values), alpha_des);
}

Bounds sir_bounds(std::size_t observations, double alpha_des) {
    if (observations < 2) {
        throw DomainError("sir_bounds requires at least 2 observations");
    }
    check_alpha(alpha_des);
    const double half = critical_z(alpha_des) * std::sqrt(sir_variance(observations));
    const double center = sir_mean(observations);
    return {center - half, center + half};
}

AlarmRateTracker::AlarmRateTracker(std::size_t window, double threshold, double alpha_des)
    : ring_(window, false), threshold_(threshold), alpha_des_(alpha_des) {
    if (window == 0) {
        throw InvalidParameter("alarm-rate window must be positive");
    }
}

void AlarmRateTracker::push(bool alarm) {
    if (full()) {
        if (ring_[next_]) {
            --count_;
        }
    } else {
        ++filled_;
    }
    ring_[next_] = alarm;
    if (alarm) {
        ++count_;
    }
    next_ = (next_ + 1) % ring_.size();
}

double AlarmRateTracker::rate() const noexcept {
    if (filled_ == 0) {
        return 0.0;
    }
    return static_cast<double>(count_) / static_cast<double>(filled_);
}

AlarmRateTracker update_alarm_rate(AlarmRateTracker tracker, bool alarm) {
    tracker.push(alarm);
    return tracker;
}

}  // namespace randmon
