#include "randmon/sweep.hpp"

#include <algorithm>
#include <atomic>
#include <exception>
#include <ostream>
#include <thread>

#include <fmt/format.h>
#include <fmt/ostream.h>

namespace randmon {

std::vector<BudgetRow> budget_curve(const std::vector<double>& alphas, const std::vector<std::size_t>& ells) {
    std::vector<BudgetRow> rows;
    rows.reserve(alphas.size() * ells.size());
    for (double alpha : alphas) {
        for (std::size_t ell : ells) {
            const SaturationBudget b = saturation_budget(ell, alpha);
            rows.push_back({ell, alpha, b.gamma, b.beta, b.ratio});
        }
    }
    return rows;
}

void write_budget_csv(const std::vector<BudgetRow>& rows, std::ostream& out) {
    out << "ell,alpha,gamma,beta,ratio,asymptote\n";
    for (const BudgetRow& r : rows) {
        fmt::print(out, "{},{:.17g},{},{},{:.17g},{:.17g}\n", r.ell, r.alpha, r.gamma, r.beta, r.ratio,
                   kBudgetAsymptote);
    }
}

ScenarioConfig sweep_scenario(const SweepConfig& sweep, double alpha, AttackKind attack) {
    ScenarioConfig cfg = sweep.base;
    cfg.alpha_des = alpha;
    cfg.monitors.alpha_wsr.reset();
    cfg.monitors.alpha_sir.reset();
    cfg.monitors.alpha_threshold.reset();
    cfg.detectors.alpha_bdd.reset();
    cfg.detectors.alpha_cusum.reset();
    cfg.attacks.clear();
    if (attack != AttackKind::none) {
        AttackPlan plan;
        plan.kind = attack;
        plan.target_sensors = sweep.target_sensors;
        plan.start = sweep.attack_start;
        plan.stop = cfg.horizon;
        plan.params = sweep.params;
        cfg.attacks.push_back(std::move(plan));
    }
    cfg.name = fmt::format("{}-alpha{:g}-{}", sweep.base.name, alpha, to_string(attack));
    return cfg;
}

std::vector<SweepCell> run_sweep(const SweepConfig& sweep) {
    std::vector<std::pair<double, AttackKind>> grid;
    for (double alpha : sweep.alphas) {
        for (AttackKind kind : sweep.attacks) {
            grid.emplace_back(alpha, kind);
        }
    }
    std::vector<SweepCell> cells(grid.size());
    std::vector<std::exception_ptr> errors(grid.size());
    std::atomic<std::size_t> next{0};

    const auto worker = [&] {
        for (std::size_t idx = next++; idx < grid.size(); idx = next++) {
            try {
                const ScenarioConfig cfg = sweep_scenario(sweep, grid[idx].first, grid[idx].second);
                RunArtifacts art = run_scenario(cfg);
                cells[idx] = {grid[idx].first, grid[idx].second, art.config_hash, std::move(art.summary.tests)};
            } catch (...) {
                errors[idx] = std::current_exception();
            }
        }
    };

    std::size_t workers = sweep.workers != 0 ? sweep.workers : std::max(1u, std::thread::hardware_concurrency());
    workers = std::min(workers, std::max<std::size_t>(grid.size(), 1));
    std::vector<std::thread> pool;
    for (std::size_t w = 1; w < workers; ++w) {
        pool.emplace_back(worker);
    }
    worker();
    for (std::thread& t : pool) {
        t.join();
    }
    for (const std::exception_ptr& e : errors) {
        if (e) {
            std::rethrow_exception(e);
        }
    }
    return cells;
}

void write_sweep_csv(const std::vector<SweepCell>& cells, std::ostream& out) {
    out << "alpha,attack,test,sensor,alarm_rate,verdicts,alarms,config_hash\n";
    for (const SweepCell& cell : cells) {
        for (const TestSummary& t : cell.tests) {
            fmt::print(out, "{:.17g},{},{},{},{:.17g},{},{},{}\n", cell.alpha, to_string(cell.attack),
                       to_string(t.test), t.sensor, t.alarm_rate, t.verdicts, t.alarms, cell.config_hash);
        }
    }
}

}  // namespace randmon
