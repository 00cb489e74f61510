#pragma once

#include <cstddef>
#include <vector>

#include "randmon/attack_engine.hpp"
#include "randmon/lti_core.hpp"

namespace randmon {

enum class BoundaryKind { bdd, cusum };

struct DeviationPrediction {
    Vector delta;              // limit of E[x_k] relative to the attack-free loop; empty when unstable
    Vector error_limit;        // limit of E[e_k]
    Vector expected_residual;  // E[r] that drives the prediction
    bool stable = false;       // ρ[A] < 1 and ρ[A + B·K] < 1
    double cond_open_loop = 0.0;    // cond(I − A)
    double cond_closed_loop = 0.0;  // cond(I − A − B·K)
    bool ill_conditioned = false;   // either condition number above 1e10
};

/// Per-sensor τ·β/ℓ on attacked sensors and 0 elsewhere. The same map serves
/// the BDD (τ^B) and CUSUM (τ^C) variants; `kind` only labels the threshold.
[[nodiscard]] Vector expected_residual(BoundaryKind kind, const std::vector<double>& tau,
                                       const std::vector<std::size_t>& attacked, const SaturationBudget& budget);

/// E[e_∞] from (I − A)·e = L·E[r], then Δ from (I − A − B·K)·Δ = B·K·e.
///
/// An unstable plant or loop returns stable = false and no delta. Condition
/// numbers above 1e10 set ill_conditioned but the solution is still returned.
[[nodiscard]] DeviationPrediction deviation_limit(const LtiPlant& plant, const KalmanSteadyState& kss,
                                                  const ControllerGains& gains, const Vector& e_r);

/// 5 / −ln ρ, with ρ the slower of the open and closed loop; at least one step.
[[nodiscard]] std::size_t burn_in_steps(const LtiPlant& plant, const ControllerGains& gains);

struct ValidationReport {
    Vector measured;        // ensemble-and-time mean of x_attacked − x_baseline
    Vector standard_error;  // across runs
    Vector predicted;
    Vector relative_error;  // |measured − predicted| / |predicted|, +inf when predicted is 0
    std::vector<bool> within;  // |measured − predicted| ≤ max(rel_tol·|predicted|, 4·stderr)
    std::size_t runs = 0;
    bool all_within = false;
};

/// One trajectory of true states x_0 … x_{T−1}, one state per column.
using Trajectory = Matrix;

/// Compares the time average over [burn_in, horizon) of the attacked runs minus
/// their common-seed baseline runs with the prediction. An empty baseline
/// compares the attacked runs directly. Throws InsufficientEnsemble below 10
/// runs and DimensionMismatch for ragged ensembles.
[[nodiscard]] ValidationReport validate_against_simulation(const DeviationPrediction& prediction,
                                                           const std::vector<Trajectory>& attacked,
                                                           const std::vector<Trajectory>& baseline,
                                                           std::size_t burn_in, std::size_t horizon,
                                                           double rel_tol = 0.10);

}  // namespace randmon
