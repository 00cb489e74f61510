#pragma once

#include <array>
#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "randmon/attack_engine.hpp"
#include "randmon/boundary_detectors.hpp"
#include "randmon/config.hpp"
#include "randmon/lti_core.hpp"

namespace randmon {

/// Plant, filter, controller and tuned detectors for one configuration.
struct BuiltSystem {
    LtiPlant plant;
    KalmanSteadyState kss;
    ControllerGains gains;
    std::vector<double> sigma;
    std::optional<BadDataDetector> bdd;
    std::optional<CusumDetector> cusum;
    std::vector<CusumTuning> cusum_tuning;
};

[[nodiscard]] BuiltSystem build_system(const ScenarioConfig& cfg);

enum class TestKind { wsr, sir, bdd, cusum };
inline constexpr std::array<TestKind, 4> kAllTests{TestKind::wsr, TestKind::sir, TestKind::bdd, TestKind::cusum};
[[nodiscard]] std::string_view to_string(TestKind test) noexcept;

/// Verdicts for one sensor at one step. Empty fields mean the test gave no verdict.
struct SensorStep {
    std::optional<double> wsr_p;
    std::optional<bool> wsr_alarm;
    std::optional<double> sir_p;
    std::optional<bool> sir_alarm;
    std::optional<bool> bdd_alarm;
    std::optional<double> cusum_s;
    std::optional<bool> cusum_alarm;
    std::array<std::optional<double>, 4> rate;  // sliding ℓ^α rate, indexed by TestKind

    [[nodiscard]] std::optional<bool> alarm(TestKind test) const noexcept;
};

struct TestSummary {
    TestKind test = TestKind::wsr;
    std::size_t sensor = 0;
    double alpha_des = 0.0;
    double threshold = 0.0;  // α^τ
    std::size_t verdicts = 0;
    std::size_t alarms = 0;
    double alarm_rate = 0.0;  // alarms / verdicts over the run
    std::optional<double> final_window_rate;
    double max_window_rate = 0.0;
    std::size_t compromised_steps = 0;  // steps with a full ring above α^τ
    bool compromised_final = false;
};

struct DeviationSummary {
    bool available = false;
    std::string note;
    AttackKind kind = AttackKind::none;
    std::int64_t from = 0;  // averaging interval [from, to)
    std::int64_t to = 0;
    Vector expected_residual_formula;
    Vector expected_residual_measured;
    Vector delta_formula;
    Vector delta_from_measured;
    Vector measured;  // mean of x_k − x_eq(k) over the interval
};

struct RunSummary {
    std::vector<TestSummary> tests;
    std::vector<double> sigma;
    std::vector<double> tau_bdd;
    std::vector<double> tau_cusum;
    std::vector<double> cusum_bias;
    bool cusum_attainable = true;
    std::optional<SaturationBudget> budget;
    DeviationSummary deviation;
};

struct RunArtifacts {
    ScenarioConfig config;
    std::string config_hash;
    std::vector<StepRecord> steps;                  // one per step k = 0 … horizon − 1
    std::vector<std::vector<SensorStep>> monitors;  // [k][sensor]
    RunSummary summary;

    [[nodiscard]] std::size_t states() const noexcept;
    [[nodiscard]] std::size_t sensors() const noexcept;
};

/// Tests that produce verdicts under this configuration, in kAllTests order.
[[nodiscard]] std::vector<TestKind> enabled_tests(const ScenarioConfig& cfg);
[[nodiscard]] double test_alpha(const ScenarioConfig& cfg, TestKind test);

/// Runs the closed loop with every configured monitor in lockstep. Monitoring
/// starts at k = 1; the k = 0 record is the initial condition.
[[nodiscard]] RunArtifacts run_scenario(const ScenarioConfig& cfg);
[[nodiscard]] RunArtifacts run_scenario(const ScenarioConfig& cfg, const BuiltSystem& system);

/// Recomputes the per-test summaries from per-step verdicts.
[[nodiscard]] std::vector<TestSummary> summarize_tests(const ScenarioConfig& cfg,
                                                       const std::vector<std::vector<SensorStep>>& monitors);

}  // namespace randmon
