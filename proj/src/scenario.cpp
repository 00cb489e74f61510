#include "randmon/scenario.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include <fmt/format.h>

#include "randmon/deviation_analysis.hpp"
#include "randmon/errors.hpp"
#include "randmon/randomness_monitors.hpp"

namespace randmon {

namespace {

constexpr std::uint64_t kNoiseStream = 1;
constexpr std::uint64_t kInitStream = 2;

std::size_t index_of(TestKind test) noexcept { return static_cast<std::size_t>(test); }

LtiPlant make_plant(const ScenarioConfig& cfg) {
    const PlantSpec& p = cfg.plant;
    return LtiPlant(p.A, p.B, p.C, p.Q, p.R, p.type == PlantSpec::Type::ugv ? p.ts : 0.0);
}

ControllerGains make_gains(const ScenarioConfig& cfg, const LtiPlant& plant) {
    const ControllerSpec& c = cfg.controller;
    const Matrix K = c.K ? *c.K : lqr_gain(plant.A(), plant.B(), c.state_weight, c.input_weight);
    Matrix kr;
    if (c.kr) {
        kr = *c.kr;
    } else {
        Matrix selector = Matrix::Zero(plant.inputs(), plant.states());
        for (std::size_t row = 0; row < c.tracked_states.size(); ++row) {
            selector(static_cast<Eigen::Index>(row), static_cast<Eigen::Index>(c.tracked_states[row])) = 1.0;
        }
        kr = reference_gain(plant, K, selector);
    }
    return ControllerGains(plant, K, kr, waypoint_reference(c.reference));
}

// Rethrows with the step index while keeping the exit-code category.
[[noreturn]] void rethrow_at(std::int64_t k) {
    try {
        throw;
    } catch (const NumericalError& e) {
        throw NumericalError(fmt::format("step {}: {}", k, e.what()));
    } catch (const ConfigError&) {
        throw;
    } catch (const Error& e) {
        throw Error(fmt::format("step {}: {}", k, e.what()));
    }
}

struct TestState {
    TestKind test;
    double alpha;
    std::vector<AlarmRateTracker> trackers;
};

DeviationSummary summarize_deviation(const ScenarioConfig& cfg, const BuiltSystem& sys, const RunSummary& summary,
                                     const std::vector<StepRecord>& steps) {
    DeviationSummary out;
    const auto plan_it = std::find_if(cfg.attacks.begin(), cfg.attacks.end(), [](const AttackPlan& p) {
        return p.kind == AttackKind::worst_case_bdd || p.kind == AttackKind::worst_case_cusum ||
               p.kind == AttackKind::worst_case_bdd_randaware || p.kind == AttackKind::worst_case_cusum_randaware;
    });
    if (plan_it == cfg.attacks.end()) {
        out.note = "no worst-case attack configured";
        return out;
    }
    const AttackPlan& plan = *plan_it;
    out.kind = plan.kind;
    const Eigen::Index s = sys.plant.sensors();
    const std::vector<std::size_t>& attacked = plan.target_sensors;
    switch (plan.kind) {
        case AttackKind::worst_case_bdd:
            out.expected_residual_formula = expected_residual(BoundaryKind::bdd, summary.tau_bdd, attacked,
                                                              SaturationBudget{1, 0, 1, 1.0});
            break;
        case AttackKind::worst_case_cusum:
            // Holding S at τ^C leaves r = b on every step after the first.
            out.expected_residual_formula = expected_residual(BoundaryKind::cusum, summary.cusum_bias, attacked,
                                                              SaturationBudget{1, 0, 1, 1.0});
            break;
        case AttackKind::worst_case_bdd_randaware:
            out.expected_residual_formula =
                expected_residual(BoundaryKind::bdd, summary.tau_bdd, attacked, *summary.budget);
            break;
        default:
            out.expected_residual_formula =
                expected_residual(BoundaryKind::cusum, summary.tau_cusum, attacked, *summary.budget);
            break;
    }
    const DeviationPrediction formula = deviation_limit(sys.plant, sys.kss, sys.gains, out.expected_residual_formula);
    if (!formula.stable) {
        out.note = fmt::format("no finite limit: rho[A] = {:.6g}, rho[A+BK] = {:.6g}", spectral_radius(sys.plant.A()),
                               sys.gains.closed_loop_radius());
        return out;
    }
    const std::size_t burn_in = burn_in_steps(sys.plant, sys.gains);
    const std::int64_t stop = std::min<std::int64_t>(plan.stop, static_cast<std::int64_t>(steps.size()));
    out.from = plan.start + static_cast<std::int64_t>(burn_in);
    out.to = stop;
    if (out.from >= out.to) {
        out.note = fmt::format("attack window shorter than the burn-in of {} steps", burn_in);
        return out;
    }
    Vector residual_sum = Vector::Zero(s);
    Vector deviation_sum = Vector::Zero(sys.plant.states());
    for (std::int64_t k = out.from; k < out.to; ++k) {
        const StepRecord& rec = steps[static_cast<std::size_t>(k)];
        residual_sum += rec.r;
        deviation_sum += rec.x - closed_loop_equilibrium(sys.plant, sys.gains, sys.gains.reference(k));
    }
    const double count = static_cast<double>(out.to - out.from);
    // Every sensor: the attack biases e, which leaks into the unattacked residuals.
    out.expected_residual_measured = residual_sum / count;
    out.delta_formula = formula.delta;
    out.delta_from_measured = deviation_limit(sys.plant, sys.kss, sys.gains, out.expected_residual_measured).delta;
    out.measured = deviation_sum / count;
    out.available = true;
    return out;
}

}  // namespace

std::string_view to_string(TestKind test) noexcept {
    switch (test) {
        case TestKind::wsr: return "wsr";
        case TestKind::sir: return "sir";
        case TestKind::bdd: return "bdd";
        case TestKind::cusum: return "cusum";
    }
    return "?";
}

std::optional<bool> SensorStep::alarm(TestKind test) const noexcept {
    switch (test) {
        case TestKind::wsr: return wsr_alarm;
        case TestKind::sir: return sir_alarm;
        case TestKind::bdd: return bdd_alarm;
        case TestKind::cusum: return cusum_alarm;
    }
    return std::nullopt;
}

std::size_t RunArtifacts::states() const noexcept {
    return steps.empty() ? 0 : static_cast<std::size_t>(steps.front().x.size());
}

std::size_t RunArtifacts::sensors() const noexcept {
    return steps.empty() ? 0 : static_cast<std::size_t>(steps.front().r.size());
}

std::vector<TestKind> enabled_tests(const ScenarioConfig& cfg) {
    std::vector<TestKind> out;
    if (cfg.monitors.enabled) {
        out.push_back(TestKind::wsr);
        out.push_back(TestKind::sir);
    }
    if (cfg.detectors.bdd) {
        out.push_back(TestKind::bdd);
    }
    if (cfg.detectors.cusum) {
        out.push_back(TestKind::cusum);
    }
    return out;
}

double test_alpha(const ScenarioConfig& cfg, TestKind test) {
    switch (test) {
        case TestKind::wsr: return cfg.wsr_alpha();
        case TestKind::sir: return cfg.sir_alpha();
        case TestKind::bdd: return cfg.bdd_alpha();
        case TestKind::cusum: return cfg.cusum_alpha();
    }
    return cfg.alpha_des;
}

BuiltSystem build_system(const ScenarioConfig& cfg) {
    validate_config(cfg);
    LtiPlant plant = make_plant(cfg);
    KalmanSteadyState kss = solve_dare(plant);
    ControllerGains gains = make_gains(cfg, plant);
    std::vector<double> sigma(kss.sigma.data(), kss.sigma.data() + kss.sigma.size());
    BuiltSystem sys{std::move(plant), std::move(kss), std::move(gains), sigma, std::nullopt, std::nullopt, {}};
    if (cfg.detectors.bdd) {
        sys.bdd = BadDataDetector::tuned(sigma, cfg.bdd_alpha());
    }
    if (cfg.detectors.cusum) {
        CusumDetector det;
        det.alpha_des = cfg.cusum_alpha();
        MonteCarloConfig mc;
        mc.samples = cfg.detectors.mc_samples;
        for (double sd : sigma) {
            const double bias = cfg.detectors.bias_scale * sd;
            const CusumTuning tuning = tune_cusum(sd, bias, cfg.cusum_alpha(), mc);
            det.channels.push_back({tuning.tau, bias, 0.0});
            sys.cusum_tuning.push_back(tuning);
        }
        sys.cusum = std::move(det);
    }
    return sys;
}

std::vector<TestSummary> summarize_tests(const ScenarioConfig& cfg, const std::vector<std::vector<SensorStep>>& monitors) {
    std::vector<TestSummary> out;
    const std::size_t sensors = monitors.empty() ? 0 : monitors.front().size();
    for (TestKind test : enabled_tests(cfg)) {
        for (std::size_t i = 0; i < sensors; ++i) {
            TestSummary ts;
            ts.test = test;
            ts.sensor = i;
            ts.alpha_des = test_alpha(cfg, test);
            ts.threshold = cfg.threshold_for(ts.alpha_des);
            for (const std::vector<SensorStep>& row : monitors) {
                const SensorStep& cell = row[i];
                if (const auto alarm = cell.alarm(test)) {
                    ++ts.verdicts;
                    ts.alarms += *alarm ? 1 : 0;
                }
                if (const auto rate = cell.rate[index_of(test)]) {
                    ts.final_window_rate = *rate;
                    ts.max_window_rate = std::max(ts.max_window_rate, *rate);
                    ts.compromised_steps += *rate > ts.threshold ? 1 : 0;
                }
            }
            ts.alarm_rate = ts.verdicts == 0 ? 0.0 : static_cast<double>(ts.alarms) / static_cast<double>(ts.verdicts);
            ts.compromised_final = ts.final_window_rate && *ts.final_window_rate > ts.threshold;
            out.push_back(ts);
        }
    }
    return out;
}

RunArtifacts run_scenario(const ScenarioConfig& cfg) { return run_scenario(cfg, build_system(cfg)); }

RunArtifacts run_scenario(const ScenarioConfig& cfg, const BuiltSystem& sys) {
    validate_config(cfg);
    const LtiPlant& plant = sys.plant;
    const auto s = static_cast<std::size_t>(plant.sensors());

    DetectorKnowledge knowledge;
    knowledge.sigma = sys.sigma;
    knowledge.window = cfg.monitors.window;
    knowledge.wsr_alpha = cfg.wsr_alpha();
    if (sys.bdd) {
        knowledge.tau_bdd = sys.bdd->tau;
    }
    std::optional<CusumDetector> cusum = sys.cusum;
    if (cusum) {
        for (const CusumChannel& ch : cusum->channels) {
            knowledge.tau_cusum.push_back(ch.tau);
            knowledge.cusum_bias.push_back(ch.bias);
        }
    }
    Attacker attacker = [&] {
        try {
            return Attacker(cfg.attacks, knowledge, cfg.seed);
        } catch (const InvalidParams& e) {
            throw ValidationError(fmt::format("attacks: {}", e.what()));
        }
    }();

    RunArtifacts art;
    art.config = cfg;
    art.config_hash = config_hash(cfg);
    art.steps.reserve(static_cast<std::size_t>(cfg.horizon));
    art.monitors.assign(static_cast<std::size_t>(cfg.horizon), std::vector<SensorStep>(s));

    std::vector<TestState> tests;
    for (TestKind test : enabled_tests(cfg)) {
        const double alpha = test_alpha(cfg, test);
        tests.push_back({test, alpha,
                         std::vector<AlarmRateTracker>(
                             s, AlarmRateTracker(cfg.monitors.rate_window, cfg.threshold_for(alpha), alpha))});
    }
    std::vector<WindowBuffer> windows;
    for (std::size_t i = 0; i < s; ++i) {
        windows.emplace_back(cfg.monitors.window, i);
    }
    std::vector<double> scratch;

    NoiseSource noise(plant, cfg.seed, kNoiseStream);
    SimState state;
    state.k = 0;
    state.x = closed_loop_equilibrium(plant, sys.gains, sys.gains.reference(0));
    {
        CounterRng init_rng(cfg.seed, kInitStream);
        std::normal_distribution<double> normal;
        Vector z(plant.states());
        for (Eigen::Index j = 0; j < z.size(); ++j) {
            z(j) = normal(init_rng);
        }
        state.xhat = state.x - psd_sqrt(sys.kss.P) * z;
    }

    AttackerView view;
    for (std::int64_t k = 0; k < cfg.horizon; ++k) {
        try {
            const NoiseDraw draw = noise.draw();
            view.k = k;
            view.e = state.x - state.xhat;
            view.eta = draw.measurement;
            view.natural_residual = plant.C() * view.e + draw.measurement;
            if (cusum) {
                view.cusum_s_prev.resize(s);
                for (std::size_t i = 0; i < s; ++i) {
                    view.cusum_s_prev[i] = cusum->channels[i].s;
                }
            }
            const Vector xi = attacker.attack(view);
            StepResult result = step(plant, sys.kss, sys.gains, state, xi, draw);

            if (k >= 1) {
                std::vector<SensorStep>& row = art.monitors[static_cast<std::size_t>(k)];
                for (std::size_t i = 0; i < s; ++i) {
                    const double r = result.record.r(static_cast<Eigen::Index>(i));
                    SensorStep& cell = row[i];
                    if (cfg.monitors.enabled) {
                        windows[i].push(r);
                        if (windows[i].full()) {
                            windows[i].copy_to(scratch);
                            try {
                                const WsrOutcome w = wsr_test(std::span<const double>(scratch), cfg.wsr_alpha());
                                cell.wsr_p = w.p;
                                cell.wsr_alarm = w.alarm;
                            } catch (const EmptyAfterZeroRemoval&) {
                                cell.wsr_p = 0.0;
                                cell.wsr_alarm = true;
                            }
                            try {
                                const SirOutcome sr = sir_test(std::span<const double>(scratch), cfg.sir_alpha());
                                cell.sir_p = sr.p;
                                cell.sir_alarm = sr.alarm;
                            } catch (const DegenerateWindow&) {
                                cell.sir_p = 0.0;
                                cell.sir_alarm = true;
                            }
                        }
                    }
                    if (sys.bdd) {
                        cell.bdd_alarm = bdd_step(*sys.bdd, i, r);
                    }
                    if (cusum) {
                        cell.cusum_alarm = cusum_step(*cusum, i, r).alarm;
                        cell.cusum_s = cusum->channels[i].s;
                    }
                    for (TestState& t : tests) {
                        if (const auto alarm = cell.alarm(t.test)) {
                            AlarmRateTracker& tracker = t.trackers[i];
                            tracker.push(*alarm);
                            if (tracker.full()) {
                                cell.rate[index_of(t.test)] = tracker.rate();
                            }
                        }
                    }
                }
            }
            art.steps.push_back(std::move(result.record));
            state = std::move(result.next);
        } catch (const Error&) {
            rethrow_at(k);
        }
    }

    RunSummary& sum = art.summary;
    sum.tests = summarize_tests(cfg, art.monitors);
    sum.sigma = sys.sigma;
    sum.tau_bdd = knowledge.tau_bdd;
    sum.tau_cusum = knowledge.tau_cusum;
    sum.cusum_bias = knowledge.cusum_bias;
    sum.cusum_attainable = std::all_of(sys.cusum_tuning.begin(), sys.cusum_tuning.end(),
                                       [](const CusumTuning& t) { return t.attainable; });
    sum.budget = attacker.budget();
    sum.deviation = summarize_deviation(cfg, sys, sum, art.steps);
    return art;
}

}  // namespace randmon
