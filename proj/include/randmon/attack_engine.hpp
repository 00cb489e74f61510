#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <random>
#include <string_view>
#include <vector>

#include "randmon/lti_core.hpp"

namespace randmon {

enum class AttackKind {
    none,
    bias_concentrate,    // Attack #1: non-zero mean, smaller variance
    pattern_runs,        // Attack #2: {+,+,+,−} differences
    boundary_violation,  // random-sign bias: random-looking but beyond the boundary detectors
    worst_case_bdd,
    worst_case_cusum,
    worst_case_bdd_randaware,
    worst_case_cusum_randaware,
};

[[nodiscard]] std::string_view to_string(AttackKind kind) noexcept;
/// Throws InvalidParams for unknown names.
[[nodiscard]] AttackKind parse_attack_kind(std::string_view name);

enum class ConcentrateMode { sign_flip, gaussian };
enum class PatternMode { sorted_groups, sawtooth };
/// Residual left on non-saturating steps of the randomness-aware CUSUM attack.
enum class NonSaturating { zero, bias };

[[nodiscard]] std::string_view to_string(ConcentrateMode mode) noexcept;
[[nodiscard]] std::string_view to_string(PatternMode mode) noexcept;
[[nodiscard]] std::string_view to_string(NonSaturating mode) noexcept;
[[nodiscard]] ConcentrateMode parse_concentrate_mode(std::string_view name);
[[nodiscard]] PatternMode parse_pattern_mode(std::string_view name);
[[nodiscard]] NonSaturating parse_nonsaturating(std::string_view name);

struct AttackParams {
    // bias_concentrate
    ConcentrateMode concentrate_mode = ConcentrateMode::sign_flip;
    double sign_bias = 0.8;   // sign_flip: r = ±|N(0, σ_i²)| with P(+) = sign_bias
    double mean_scale = 0.4;  // μ_a / τ^B in gaussian mode
    double std_scale = 0.2;   // σ_a / σ_i in gaussian mode
    // pattern_runs
    PatternMode pattern_mode = PatternMode::sorted_groups;
    double pattern_amplitude = 0.3;  // sawtooth peak / σ_i
    // boundary_violation
    double violation_scale = 2.0;  // bias magnitude / σ_i
    // randomness-aware worst case
    double epsilon_scale = 1e-6;  // ε / σ_i for δ ~ U(0, ε)
    NonSaturating cusum_nonsaturating = NonSaturating::zero;

    bool operator==(const AttackParams&) const = default;
};

/// One attack active on [start, stop) for each target sensor.
struct AttackPlan {
    AttackKind kind = AttackKind::none;
    std::vector<std::size_t> target_sensors;
    std::int64_t start = 0;
    std::int64_t stop = 0;
    AttackParams params;

    [[nodiscard]] bool active(std::int64_t k) const noexcept { return k >= start && k < stop; }
    bool operator==(const AttackPlan&) const = default;
};

struct SaturationBudget {
    std::size_t ell = 0;
    std::size_t gamma = 0;  // minimum non-saturating steps per window
    std::size_t beta = 0;   // maximum saturating steps per window
    double ratio = 0.0;     // beta / ell
};

/// γ = smallest j ≤ ℓ with j(j+1)/2 > Ω^W_−(ℓ, α), β = ℓ − γ.
/// Throws DomainError for ℓ < 20 and InfeasibleBudget if no j qualifies.
[[nodiscard]] SaturationBudget saturation_budget(std::size_t ell, double alpha_des);

/// Idealized (δ = 0) residual levels one period of a schedule produces, read cyclically.
using ResidualTemplate = std::function<std::vector<double>(const std::vector<bool>&)>;

/// Saturating steps at 1, the rest at 0.
[[nodiscard]] std::vector<double> boundary_template(const std::vector<bool>& schedule);

/// Expected number of sign changes per period of successive differences of the
/// template, with exact ties broken as fair coins. Equals 2ℓ/3 for i.i.d. data.
[[nodiscard]] double expected_turning_points(const std::vector<double>& levels);

/// One period of ℓ flags with exactly β saturating entries; the attack repeats
/// it, so every sliding window of ℓ steps holds exactly β.
///
/// Candidate placements are shuffled from `rng` and the one whose turning-point
/// count is closest to the i.i.d. value 2ℓ/3 is kept, so the runs test sees a
/// typical run count. Strictly alternating placements are avoided on purpose:
/// they inflate the run count.
[[nodiscard]] std::vector<bool> schedule_saturation(const SaturationBudget& budget, CounterRng& rng,
                                                    const ResidualTemplate& levels = boundary_template);

/// Omniscient attacker snapshot at step k, taken before ξ_k is chosen.
struct AttackerView {
    std::int64_t k = 0;
    Vector e;                  // x_k − x̂_k
    Vector eta;                // η_k
    Vector natural_residual;   // C·e_k + η_k, the residual without attack
    std::vector<double> cusum_s_prev;  // S_{k−1} per sensor, empty without a CUSUM
};

/// Thresholds and statistics the attacker knows about the deployed detectors.
struct DetectorKnowledge {
    std::vector<double> sigma;
    std::vector<double> tau_bdd;     // empty when no BDD is deployed
    std::vector<double> tau_cusum;   // empty when no CUSUM is deployed
    std::vector<double> cusum_bias;
    std::size_t window = 100;        // WSR/SIR window ℓ
    double wsr_alpha = 0.05;
};

/// BDD-only worst case: residual pinned just inside τ^B.
[[nodiscard]] double attack_worst_case_bdd(double natural_residual, double tau_bdd) noexcept;

/// Randomness-aware BDD attack: residual τ^B − δ when saturating, −δ otherwise.
[[nodiscard]] double attack_worst_case_bdd_randaware(double natural_residual, double tau_bdd, bool saturating,
                                                     double delta) noexcept;

/// CUSUM-only worst case: drives S to τ^C on the first step and holds it there.
[[nodiscard]] double attack_worst_case_cusum(double natural_residual, double s_prev, double tau_cusum,
                                             double bias) noexcept;

/// Randomness-aware CUSUM attack. Saturating: r = b + τ^C − S_{k−1} − δ.
/// Non-saturating: r = −δ (NonSaturating::zero) or b − δ (NonSaturating::bias).
[[nodiscard]] double attack_worst_case_cusum_randaware(double natural_residual, double s_prev,
                                                       double tau_cusum, double bias, bool saturating,
                                                       double delta, NonSaturating mode) noexcept;

/// Throws InvalidParams when the plan is inconsistent with the sensors or detectors.
void validate_plan(const AttackPlan& plan, const DetectorKnowledge& knowledge);

/// Stateful executor for a list of plans. Plans must not overlap on a sensor.
class Attacker {
public:
    Attacker(std::vector<AttackPlan> plans, DetectorKnowledge knowledge, std::uint64_t seed);

    /// ξ_k for every sensor; zero where no plan is active.
    [[nodiscard]] Vector attack(const AttackerView& view);

    [[nodiscard]] const std::vector<AttackPlan>& plans() const noexcept { return plans_; }
    /// Budget used by the randomness-aware plans, when any exists.
    [[nodiscard]] const std::optional<SaturationBudget>& budget() const noexcept { return budget_; }

private:
    struct Channel {
        std::size_t plan = 0;
        std::size_t sensor = 0;
        CounterRng rng{0};
        std::normal_distribution<double> normal;
        std::vector<double> group;    // pattern_runs targets for the current group
        std::vector<bool> schedule;   // saturation schedule, one period
        std::size_t cursor = 0;
    };

    [[nodiscard]] double channel_attack(Channel& ch, const AttackerView& view);

    std::vector<AttackPlan> plans_;
    DetectorKnowledge knowledge_;
    std::optional<SaturationBudget> budget_;
    std::vector<Channel> channels_;
};

}  // namespace randmon
