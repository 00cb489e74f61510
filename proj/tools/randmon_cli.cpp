// randmon: run, tune and sweep randomness-monitor scenarios.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <fmt/ostream.h>

#include "randmon/attack_engine.hpp"
#include "randmon/config.hpp"
#include "randmon/errors.hpp"
#include "randmon/output.hpp"
#include "randmon/scenario.hpp"
#include "randmon/sweep.hpp"

namespace fs = std::filesystem;
using namespace randmon;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitRuntime = 1;
constexpr int kExitConfig = 2;
constexpr int kExitNumerical = 3;

struct Common {
    std::string config;
    std::optional<std::uint64_t> seed;
    std::string out;
    std::string format;
    bool quiet = false;
};

void add_common(CLI::App* cmd, Common& c, bool needs_config) {
    auto* opt = cmd->add_option("config_file", c.config, "scenario config (JSON)");
    cmd->add_option("--config", c.config, "scenario config (JSON)");
    if (needs_config) {
        opt->check(CLI::ExistingFile);
    }
    cmd->add_option("--seed", c.seed, "override the config seed");
    cmd->add_option("--out", c.out, "output directory (overrides the config)");
    cmd->add_option("--format", c.format, "csv or jsonl")->check(CLI::IsMember({"csv", "jsonl"}));
    cmd->add_flag("--quiet", c.quiet, "suppress the console summary");
}

ScenarioConfig load_with_overrides(const Common& c) {
    if (c.config.empty()) {
        throw ConfigError("no config given (positional argument or --config)");
    }
    ScenarioConfig cfg = load_config(c.config);
    if (c.seed) {
        cfg.seed = *c.seed;
    }
    if (!c.out.empty()) {
        cfg.output.dir = c.out;
    }
    if (!c.format.empty()) {
        cfg.output.format = parse_output_format(c.format);
    }
    return cfg;
}

fs::path prepare_dir(const std::string& dir) {
    const fs::path path(dir);
    std::error_code ec;
    fs::create_directories(path, ec);
    if (ec) {
        throw IoError(fmt::format("cannot create {}: {}", path.string(), ec.message()));
    }
    return path;
}

void write_text(const fs::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    out << text;
    if (!out) {
        throw IoError(fmt::format("failed to write {}", path.string()));
    }
}

void print_summary(const RunArtifacts& art) {
    fmt::print("{} (config {} seed {}), {} steps\n", art.config.name, art.config_hash, art.config.seed,
               art.steps.size());
    fmt::print("{:<6} {:>6} {:>8} {:>10} {:>10} {:>10} {:>12}\n", "test", "sensor", "alpha", "rate", "final_win",
               "max_win", "compromised");
    for (const TestSummary& t : art.summary.tests) {
        fmt::print("{:<6} {:>6} {:>8.3f} {:>10.4f} {:>10} {:>10.3f} {:>12}\n", to_string(t.test), t.sensor,
                   t.alpha_des, t.alarm_rate,
                   t.final_window_rate ? fmt::format("{:.3f}", *t.final_window_rate) : std::string("-"),
                   t.max_window_rate, t.compromised_final ? "yes" : "no");
    }
    const DeviationSummary& d = art.summary.deviation;
    if (d.available) {
        fmt::print("deviation over [{}, {}): measured {}  predicted {}\n", d.from, d.to,
                   fmt::join(std::vector<double>(d.measured.data(), d.measured.data() + d.measured.size()), " "),
                   fmt::join(std::vector<double>(d.delta_formula.data(), d.delta_formula.data() + d.delta_formula.size()),
                             " "));
    } else if (d.kind != AttackKind::none) {
        fmt::print("deviation: {}\n", d.note);
    }
}

int cmd_run(const Common& c) {
    const ScenarioConfig cfg = load_with_overrides(c);
    const RunArtifacts art = run_scenario(cfg);
    const fs::path dir = prepare_dir(cfg.output.dir);
    const fs::path data = dir / fmt::format("{}.{}", cfg.output.stem, to_string(cfg.output.format));
    emit_outputs(art, cfg.output.format, data);
    write_text(dir / fmt::format("{}.summary.json", cfg.output.stem), summary_json(art) + "\n");
    if (!c.quiet) {
        print_summary(art);
        fmt::print("wrote {}\n", data.string());
    }
    return kExitOk;
}

int cmd_tune(const Common& c) {
    const ScenarioConfig cfg = load_with_overrides(c);
    const BuiltSystem sys = build_system(cfg);
    fmt::print("rho[A] = {:.6g}, rho[A+BK] = {:.6g}, DARE iterations = {}\n", spectral_radius(sys.plant.A()),
               sys.gains.closed_loop_radius(), sys.kss.iterations);
    fmt::print("{:>6} {:>14} {:>14} {:>14} {:>14} {:>10}\n", "sensor", "sigma", "tau_bdd", "tau_cusum", "bias",
               "cusum_rate");
    for (std::size_t i = 0; i < sys.sigma.size(); ++i) {
        const std::string tau_b = sys.bdd ? fmt::format("{:.6g}", sys.bdd->tau[i]) : "-";
        std::string tau_c = "-";
        std::string bias = "-";
        std::string rate = "-";
        if (sys.cusum) {
            const CusumTuning& t = sys.cusum_tuning[i];
            tau_c = t.attainable ? fmt::format("{:.6g}", t.tau) : std::string("unattainable");
            bias = fmt::format("{:.6g}", sys.cusum->channels[i].bias);
            rate = fmt::format("{:.4f}", t.achieved_rate);
        }
        fmt::print("{:>6} {:>14.6g} {:>14} {:>14} {:>14} {:>10}\n", i, sys.sigma[i], tau_b, tau_c, bias, rate);
    }
    if (cfg.monitors.window >= 20) {
        const SaturationBudget b = saturation_budget(cfg.monitors.window, cfg.wsr_alpha());
        fmt::print("saturation budget at ell = {}, alpha = {}: gamma = {}, beta = {}, beta/ell = {:.4f}\n", b.ell,
                   cfg.wsr_alpha(), b.gamma, b.beta, b.ratio);
    }
    return kExitOk;
}

std::vector<std::size_t> parse_ells(const std::vector<std::string>& specs) {
    std::vector<std::size_t> out;
    for (const std::string& spec : specs) {
        const auto first = spec.find(':');
        try {
            if (first == std::string::npos) {
                out.push_back(std::stoul(spec));
                continue;
            }
            const auto second = spec.find(':', first + 1);
            const std::size_t lo = std::stoul(spec.substr(0, first));
            const std::size_t hi = std::stoul(spec.substr(first + 1, second - first - 1));
            const std::size_t stepsz = second == std::string::npos ? 1 : std::stoul(spec.substr(second + 1));
            if (stepsz == 0 || hi < lo) {
                throw std::invalid_argument(spec);
            }
            for (std::size_t ell = lo; ell <= hi; ell += stepsz) {
                out.push_back(ell);
            }
        } catch (const std::logic_error&) {
            throw ConfigError(fmt::format("bad window spec '{}' (use N or LO:HI[:STEP])", spec));
        }
    }
    return out;
}

int cmd_budget(const std::vector<double>& alphas, const std::vector<std::string>& ell_specs, const std::string& out,
               bool quiet) {
    const std::vector<std::size_t> ells = parse_ells(ell_specs);
    for (std::size_t ell : ells) {
        if (ell < 20) {
            throw ConfigError(fmt::format("window {} is below the minimum of 20", ell));
        }
    }
    for (double a : alphas) {
        if (!(a > 0.0 && a < 1.0)) {
            throw ConfigError(fmt::format("alpha {} outside (0, 1)", a));
        }
    }
    const std::vector<BudgetRow> rows = budget_curve(alphas, ells);
    if (out.empty()) {
        write_budget_csv(rows, std::cout);
        return kExitOk;
    }
    const fs::path dir = prepare_dir(out);
    std::ofstream file(dir / "budget.csv", std::ios::binary | std::ios::trunc);
    write_budget_csv(rows, file);
    if (!file) {
        throw IoError("failed to write budget.csv");
    }
    if (!quiet) {
        fmt::print("wrote {} rows to {}\n", rows.size(), (dir / "budget.csv").string());
    }
    return kExitOk;
}

int cmd_sweep(const Common& c) {
    if (c.config.empty()) {
        throw ConfigError("no sweep config given");
    }
    SweepConfig sweep = load_sweep_config(c.config);
    if (c.seed) {
        sweep.base.seed = *c.seed;
    }
    const std::string dir_name = c.out.empty() ? sweep.base.output.dir : c.out;
    const std::vector<SweepCell> cells = run_sweep(sweep);
    const fs::path dir = prepare_dir(dir_name);
    const fs::path path = dir / fmt::format("{}_sweep.csv", sweep.base.output.stem);
    std::ofstream file(path, std::ios::binary | std::ios::trunc);
    write_sweep_csv(cells, file);
    if (!file) {
        throw IoError(fmt::format("failed to write {}", path.string()));
    }
    if (!c.quiet) {
        fmt::print("{:>6} {:<18} {:<6} {:>6} {:>10}\n", "alpha", "attack", "test", "sensor", "rate");
        for (const SweepCell& cell : cells) {
            for (const TestSummary& t : cell.tests) {
                if (std::find(sweep.target_sensors.begin(), sweep.target_sensors.end(), t.sensor) ==
                    sweep.target_sensors.end()) {
                    continue;
                }
                fmt::print("{:>6.2f} {:<18} {:<6} {:>6} {:>10.4f}\n", cell.alpha, to_string(cell.attack),
                           to_string(t.test), t.sensor, t.alarm_rate);
            }
        }
        fmt::print("wrote {}\n", path.string());
    }
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Randomness monitors for residual-based attack detection"};
    app.require_subcommand(1);

    Common run_opts;
    Common tune_opts;
    Common sweep_opts;
    add_common(app.add_subcommand("run", "simulate a scenario and write per-step results"), run_opts, true);
    add_common(app.add_subcommand("tune", "print tuned detector thresholds"), tune_opts, true);
    add_common(app.add_subcommand("sweep", "alarm-rate table over alpha x attack kind"), sweep_opts, true);

    std::vector<double> alphas{0.01, 0.05, 0.1, 0.2};
    std::vector<std::string> ells{"20:200:10", "500", "1000", "5000", "10000"};
    std::string budget_out;
    bool budget_quiet = false;
    CLI::App* budget = app.add_subcommand("budget", "saturation budget beta/ell over windows and alphas");
    budget->add_option("--alpha", alphas, "desired false alarm rates")->delimiter(',');
    budget->add_option("--ell", ells, "window lengths: N or LO:HI[:STEP]")->delimiter(',');
    budget->add_option("--out", budget_out, "directory for budget.csv (stdout when omitted)");
    budget->add_flag("--quiet", budget_quiet, "no console message");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kExitOk : kExitConfig;
    }

    try {
        if (app.got_subcommand("run")) {
            return cmd_run(run_opts);
        }
        if (app.got_subcommand("tune")) {
            return cmd_tune(tune_opts);
        }
        if (app.got_subcommand("sweep")) {
            return cmd_sweep(sweep_opts);
        }
        return cmd_budget(alphas, ells, budget_out, budget_quiet);
    } catch (const ConfigError& e) {
        fmt::print(stderr, "config error: {}\n", e.what());
        return kExitConfig;
    } catch (const NumericalError& e) {
        fmt::print(stderr, "numerical error: {}\n", e.what());
        return kExitNumerical;
    } catch (const std::exception& e) {
        fmt::print(stderr, "error: {}\n", e.what());
        return kExitRuntime;
    }
}
