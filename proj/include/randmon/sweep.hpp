#pragma once

#include <cstddef>
#include <iosfwd>
#include <string>
#include <vector>

#include "randmon/attack_engine.hpp"
#include "randmon/config.hpp"
#include "randmon/scenario.hpp"

namespace randmon {

/// 1 − √2/2, the large-window limit of β/ℓ.
inline constexpr double kBudgetAsymptote = 0.29289321881345254;

struct BudgetRow {
    std::size_t ell = 0;
    double alpha = 0.0;
    std::size_t gamma = 0;
    std::size_t beta = 0;
    double ratio = 0.0;
};

/// saturation_budget over the grid, α-major.
[[nodiscard]] std::vector<BudgetRow> budget_curve(const std::vector<double>& alphas, const std::vector<std::size_t>& ells);

/// Columns ell,alpha,gamma,beta,ratio,asymptote.
void write_budget_csv(const std::vector<BudgetRow>& rows, std::ostream& out);

struct SweepCell {
    double alpha = 0.0;
    AttackKind attack = AttackKind::none;
    std::string config_hash;
    std::vector<TestSummary> tests;
};

/// The scenario one sweep cell runs: the base config with every test tuned
/// to `alpha` (per-test overrides and α^τ dropped) and one attack plan on the
/// target sensors from attack_start to the horizon.
[[nodiscard]] ScenarioConfig sweep_scenario(const SweepConfig& sweep, double alpha, AttackKind attack);

/// Runs every (α, attack) cell, one scenario per worker thread. Results are
/// in grid order regardless of completion order.
[[nodiscard]] std::vector<SweepCell> run_sweep(const SweepConfig& sweep);

/// Long-format table: alpha,attack,test,sensor,alarm_rate,verdicts,alarms,config_hash.
void write_sweep_csv(const std::vector<SweepCell>& cells, std::ostream& out);

}  // namespace randmon
