#include <cmath>
#include <string>
#include <vector>

#include <doctest.h>

#include "randmon/config.hpp"
#include "randmon/deviation_analysis.hpp"
#include "randmon/errors.hpp"
#include "randmon/scenario.hpp"

using namespace randmon;

namespace {

Matrix scalar(double v) { return Matrix::Constant(1, 1, v); }

struct ScalarLoop {
    LtiPlant plant{scalar(0.5), scalar(1.0), scalar(1.0), scalar(0.1), scalar(0.1)};
    KalmanSteadyState kss;
    ControllerGains gains{plant, scalar(-0.3), scalar(0.0), constant_reference(Vector::Zero(1))};

    ScalarLoop() {
        kss = solve_dare(plant);
        kss.L = scalar(0.4);
    }
};

std::string coupled_plant(const std::string& attack, unsigned seed) {
    return R"({
        "plant": {"type": "matrices",
                  "A": [[0.9, 0.2], [0.0, 0.7]], "B": [[0.0], [1.0]], "C": [[1.0, 0.0], [0.0, 1.0]],
                  "Q": [[0.01, 0.0], [0.0, 0.01]], "R": [[0.04, 0.0], [0.0, 0.04]]},
        "controller": {"state_weight": [[1.0, 0.0], [0.0, 1.0]], "input_weight": [[0.5]]},
        "monitors": {"enabled": false},
        "detectors": {"bdd": true},
        "attacks": [)" +
           attack + R"(], "horizon": 3000, "seed": )" + std::to_string(seed) + "}";
}

Trajectory states_of(const RunArtifacts& art) {
    Trajectory t(static_cast<Eigen::Index>(art.states()), static_cast<Eigen::Index>(art.steps.size()));
    for (std::size_t k = 0; k < art.steps.size(); ++k) {
        t.col(static_cast<Eigen::Index>(k)) = art.steps[k].x;
    }
    return t;
}

}  // namespace

TEST_CASE("expected residual") {
    const SaturationBudget b{100, 71, 29, 0.29};
    const Vector none = expected_residual(BoundaryKind::bdd, {2.0, 3.0}, {}, b);
    CHECK(none.isZero());
    const Vector one = expected_residual(BoundaryKind::bdd, {2.0, 3.0}, {0}, b);
    CHECK(one(0) == doctest::Approx(0.58));
    CHECK(one(1) == 0.0);
    const SaturationBudget big = saturation_budget(10'000, 0.05);
    CHECK(std::abs(expected_residual(BoundaryKind::cusum, {2.0}, {0}, big)(0) - 2.0 * 0.29289) < 0.02);
}

TEST_CASE("scalar deviation limit") {
    const ScalarLoop loop;
    const DeviationPrediction p = deviation_limit(loop.plant, loop.kss, loop.gains, Vector::Constant(1, 1.0));
    REQUIRE(p.stable);
    CHECK(p.error_limit(0) == doctest::Approx(0.8).epsilon(1e-12));
    CHECK(p.delta(0) == doctest::Approx(-0.3).epsilon(1e-12));
    CHECK(!p.ill_conditioned);
    CHECK(deviation_limit(loop.plant, loop.kss, loop.gains, Vector::Zero(1)).delta.isZero());
}

TEST_CASE("deviation limit is linear and a fixed point") {
    const ScenarioConfig cfg = parse_config(coupled_plant("", 1));
    const BuiltSystem sys = build_system(cfg);
    Vector er(2);
    er << 0.3, -0.1;
    const DeviationPrediction p = deviation_limit(sys.plant, sys.kss, sys.gains, er);
    const DeviationPrediction p2 = deviation_limit(sys.plant, sys.kss, sys.gains, 2 * er);
    REQUIRE(p.stable);
    CHECK((p2.delta - 2 * p.delta).cwiseAbs().maxCoeff() < 1e-12);
    // Mean recursions: e = A·e + L·E[r], Δ = (A + B·K)·Δ + B·K·e.
    const Matrix& A = sys.plant.A();
    const Matrix BK = sys.plant.B() * sys.gains.K();
    CHECK((A * p.error_limit + sys.kss.L * er - p.error_limit).cwiseAbs().maxCoeff() < 1e-10);
    CHECK(((A + BK) * p.delta + BK * p.error_limit - p.delta).cwiseAbs().maxCoeff() < 1e-10);
    CHECK(std::isfinite(p.cond_open_loop));
    CHECK(p.cond_closed_loop >= 1.0);
}

TEST_CASE("unstable open loop refuses a finite limit") {
    const LtiPlant plant(scalar(1.0), scalar(1.0), scalar(1.0), scalar(0.1), scalar(0.1));
    const KalmanSteadyState kss = solve_dare(plant);
    const ControllerGains gains(plant, scalar(-0.5), scalar(0.0), constant_reference(Vector::Zero(1)));
    const DeviationPrediction p = deviation_limit(plant, kss, gains, Vector::Constant(1, 1.0));
    CHECK(!p.stable);
    CHECK(p.delta.size() == 0);
}

TEST_CASE("burn-in follows the slower loop") {
    const ScalarLoop loop;
    // ρ[A] = 0.5, ρ[A + B·K] = 0.2
    CHECK(burn_in_steps(loop.plant, loop.gains) == static_cast<std::size_t>(std::ceil(5 / std::log(2.0))));
}

TEST_CASE("ensemble validation") {
    const ScenarioConfig first = parse_config(coupled_plant("", 1));
    const BuiltSystem sys = build_system(first);
    const std::size_t burn = burn_in_steps(sys.plant, sys.gains);

    SUBCASE("no attack averages to zero") {
        std::vector<Trajectory> runs;
        for (unsigned seed = 1; seed <= 30; ++seed) {
            runs.push_back(states_of(run_scenario(parse_config(coupled_plant("", seed)), sys)));
        }
        DeviationPrediction zero;
        zero.stable = true;
        zero.delta = Vector::Zero(2);
        const ValidationReport rep = validate_against_simulation(zero, runs, {}, burn, 3000);
        for (Eigen::Index j = 0; j < 2; ++j) {
            CHECK(std::abs(rep.measured(j)) < 4 * rep.standard_error(j));
        }
        CHECK(rep.all_within);
    }
    SUBCASE("randomness-aware BDD attack tracks the reduced mean residual") {
        const std::string attack = R"({"kind": "worst_case_bdd_randaware", "sensors": [0], "start": 0})";
        std::vector<Trajectory> attacked, baseline;
        for (unsigned seed = 1; seed <= 30; ++seed) {
            attacked.push_back(states_of(run_scenario(parse_config(coupled_plant(attack, seed)), sys)));
            baseline.push_back(states_of(run_scenario(parse_config(coupled_plant("", seed)), sys)));
        }
        const SaturationBudget b = saturation_budget(100, 0.05);
        const Vector er = expected_residual(BoundaryKind::bdd, sys.bdd->tau, {0}, b);
        const DeviationPrediction pred = deviation_limit(sys.plant, sys.kss, sys.gains, er);
        const ValidationReport rep = validate_against_simulation(pred, attacked, baseline, burn, 3000, 0.15);
        CAPTURE(rep.measured.transpose());
        CAPTURE(rep.predicted.transpose());
        CHECK(rep.all_within);
    }
    SUBCASE("too few runs") {
        std::vector<Trajectory> runs(5, Trajectory::Zero(2, 100));
        DeviationPrediction zero;
        zero.stable = true;
        zero.delta = Vector::Zero(2);
        CHECK_THROWS_AS((void)validate_against_simulation(zero, runs, {}, 0, 100), InsufficientEnsemble);
    }
}
