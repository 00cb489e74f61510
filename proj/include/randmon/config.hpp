#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "randmon/attack_engine.hpp"
#include "randmon/lti_core.hpp"

namespace randmon {

inline constexpr int kSchemaVersion = 1;

struct PlantSpec {
    enum class Type { ugv, matrices };
    Type type = Type::ugv;
    UgvParams ugv;
    double ts = 0.05;
    // Explicit model; for the UGV preset A and B are derived and C, Q, R default.
    Matrix A, B, C, Q, R;

    bool operator==(const PlantSpec&) const;
};

struct ControllerSpec {
    std::optional<Matrix> K;  // explicit gain, otherwise LQR
    Matrix state_weight;      // LQR weights
    Matrix input_weight;
    std::optional<Matrix> kr;                   // explicit reference gain
    std::vector<std::size_t> tracked_states;    // selector rows when kr is derived
    std::vector<Waypoint> reference;

    bool operator==(const ControllerSpec&) const;
};

struct MonitorSpec {
    bool enabled = true;
    std::size_t window = 100;       // ℓ
    std::size_t rate_window = 100;  // ℓ^α
    std::optional<double> alpha_wsr;
    std::optional<double> alpha_sir;
    std::optional<double> alpha_threshold;  // α^τ, default 3·α of each test

    bool operator==(const MonitorSpec&) const = default;
};

struct DetectorSpec {
    bool bdd = true;
    std::optional<double> alpha_bdd;
    bool cusum = false;
    std::optional<double> alpha_cusum;
    double bias_scale = 1.5;  // b_i / σ_i
    std::size_t mc_samples = 1'000'000;

    bool operator==(const DetectorSpec&) const = default;
};

enum class OutputFormat { csv, jsonl };

struct OutputSpec {
    std::string dir = "out";
    std::string stem = "run";
    OutputFormat format = OutputFormat::csv;

    bool operator==(const OutputSpec&) const = default;
};

struct ScenarioConfig {
    std::string name = "scenario";
    double alpha_des = 0.05;
    PlantSpec plant;
    ControllerSpec controller;
    MonitorSpec monitors;
    DetectorSpec detectors;
    std::vector<AttackPlan> attacks;
    bool omniscient_attacker = true;
    std::int64_t horizon = 10'000;
    std::uint64_t seed = 1;
    OutputSpec output;

    [[nodiscard]] double wsr_alpha() const { return monitors.alpha_wsr.value_or(alpha_des); }
    [[nodiscard]] double sir_alpha() const { return monitors.alpha_sir.value_or(alpha_des); }
    [[nodiscard]] double bdd_alpha() const { return detectors.alpha_bdd.value_or(alpha_des); }
    [[nodiscard]] double cusum_alpha() const { return detectors.alpha_cusum.value_or(alpha_des); }
    /// α^τ for a test tuned at `test_alpha`.
    [[nodiscard]] double threshold_for(double test_alpha) const {
        return monitors.alpha_threshold.value_or(3.0 * test_alpha);
    }

    bool operator==(const ScenarioConfig&) const = default;
};

/// Parses and validates a JSON document. Unknown keys are rejected.
/// Throws ParseError (with line and column) for malformed text and
/// ValidationError listing every violated field.
[[nodiscard]] ScenarioConfig parse_config(const std::string& text);
[[nodiscard]] ScenarioConfig load_config(const std::filesystem::path& path);

/// Throws ValidationError listing every violated invariant.
void validate_config(const ScenarioConfig& cfg);

/// Canonical JSON (sorted keys, defaults filled). parse_config(serialize_config(c)) == c.
[[nodiscard]] std::string serialize_config(const ScenarioConfig& cfg, int indent = 2);

/// FNV-1a 64 over the canonical form without `seed` and `output`, as 16 hex digits.
[[nodiscard]] std::string config_hash(const ScenarioConfig& cfg);

[[nodiscard]] std::string_view to_string(OutputFormat format) noexcept;
/// Throws ValidationError for anything but "csv" or "jsonl".
[[nodiscard]] OutputFormat parse_output_format(std::string_view name);

/// Cartesian sweep over α^des and attack kind on one base scenario.
struct SweepConfig {
    ScenarioConfig base;
    std::vector<double> alphas;
    std::vector<AttackKind> attacks;
    std::vector<std::size_t> target_sensors{0};
    std::int64_t attack_start = 0;  // attacks run from here to the horizon
    AttackParams params;
    std::size_t workers = 0;  // 0 = hardware concurrency
};

[[nodiscard]] SweepConfig parse_sweep_config(const std::string& text);
[[nodiscard]] SweepConfig load_sweep_config(const std::filesystem::path& path);

namespace detail {
[[nodiscard]] std::string read_text_file(const std::filesystem::path& path);
}

}  // namespace randmon
