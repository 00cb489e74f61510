#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <doctest.h>
#include <json.hpp>

#include "randmon/config.hpp"
#include "randmon/errors.hpp"
#include "randmon/output.hpp"
#include "randmon/scenario.hpp"
#include "randmon/sweep.hpp"

using namespace randmon;

namespace {

ScenarioConfig ugv(const std::string& extra, long horizon = 3000, unsigned seed = 5) {
    return parse_config(R"({"plant": {"type": "ugv"}, "detectors": {"bdd": true, "cusum": true, "mc_samples": 100000},
                           "horizon": )" +
                        std::to_string(horizon) + R"(, "seed": )" + std::to_string(seed) + extra + "}");
}

std::string csv_of(const RunArtifacts& art) {
    std::ostringstream os;
    write_csv(art, os);
    return os.str();
}

}  // namespace

TEST_CASE("identical config and seed give identical bytes") {
    const ScenarioConfig cfg =
        ugv(R"(, "attacks": [{"kind": "bias_concentrate", "sensors": [0], "start": 300}])");
    const std::string a = csv_of(run_scenario(cfg));
    const std::string b = csv_of(run_scenario(cfg));
    CHECK(a == b);
    ScenarioConfig other = cfg;
    other.seed = 6;
    CHECK(csv_of(run_scenario(other)) != a);
}

TEST_CASE("minimum horizon yields one full rate sample") {
    const ScenarioConfig cfg = ugv("", 200);
    const RunArtifacts art = run_scenario(cfg);
    CHECK(art.steps.size() == 200);
    int samples = 0;
    for (const auto& row : art.monitors) {
        samples += row[0].rate[static_cast<std::size_t>(TestKind::wsr)].has_value();
    }
    CHECK(samples == 1);
    CHECK(!art.monitors[0][0].bdd_alarm);  // k = 0 is the initial condition
    CHECK(art.monitors[1][0].bdd_alarm.has_value());
    CHECK(!art.monitors[99][0].wsr_alarm);
    CHECK(art.monitors[100][0].wsr_alarm.has_value());
}

TEST_CASE("summary rates agree with per-step records and the CSV") {
    const ScenarioConfig cfg =
        ugv(R"(, "attacks": [{"kind": "pattern_runs", "sensors": [1], "start": 1000}])", 4000);
    const RunArtifacts art = run_scenario(cfg);
    for (const TestSummary& t : art.summary.tests) {
        std::size_t verdicts = 0, alarms = 0;
        for (const auto& row : art.monitors) {
            if (const auto a = row[t.sensor].alarm(t.test)) {
                ++verdicts;
                alarms += *a;
            }
        }
        CHECK(t.verdicts == verdicts);
        CHECK(t.alarms == alarms);
    }

    std::istringstream in(csv_of(art));
    const IngestedRun back = read_csv(in);
    CHECK(back.schema_version == kOutputSchemaVersion);
    CHECK(back.config_hash == art.config_hash);
    CHECK(back.seed == cfg.seed);
    CHECK(back.rows == art.steps.size());
    const std::vector<TestSummary> again = summarize_tests(cfg, back.monitors);
    REQUIRE(again.size() == art.summary.tests.size());
    for (std::size_t i = 0; i < again.size(); ++i) {
        CHECK(again[i].alarm_rate == art.summary.tests[i].alarm_rate);
        CHECK(again[i].max_window_rate == art.summary.tests[i].max_window_rate);
        CHECK(again[i].compromised_steps == art.summary.tests[i].compromised_steps);
        CHECK(again[i].final_window_rate == art.summary.tests[i].final_window_rate);
    }
    // The attacked sensor is flagged by the run test only.
    const auto rate = [&](TestKind test, std::size_t sensor) {
        for (const TestSummary& t : art.summary.tests) {
            if (t.test == test && t.sensor == sensor) {
                return t.alarm_rate;
            }
        }
        return -1.0;
    };
    CHECK(rate(TestKind::sir, 1) > 0.5);
    CHECK(rate(TestKind::wsr, 1) < 0.15);
    CHECK(rate(TestKind::bdd, 1) < 0.15);
}

TEST_CASE("monitors observe without changing the trajectory") {
    ScenarioConfig with = ugv("", 1500);
    ScenarioConfig without = with;
    without.monitors.enabled = false;
    without.detectors.cusum = false;
    const RunArtifacts a = run_scenario(with);
    const RunArtifacts b = run_scenario(without);
    for (std::size_t k = 0; k < a.steps.size(); ++k) {
        CHECK(a.steps[k].x == b.steps[k].x);
        CHECK(a.steps[k].r == b.steps[k].r);
    }
    CHECK(enabled_tests(without) == std::vector<TestKind>{TestKind::bdd});
}

TEST_CASE("CSV layout") {
    const RunArtifacts art = run_scenario(ugv("", 200));
    std::istringstream in(csv_of(art));
    std::string line;
    std::getline(in, line);
    CHECK(line == "# schema_version=1");
    std::getline(in, line);
    CHECK(line == "# config_hash=" + art.config_hash);
    std::getline(in, line);
    CHECK(line == "# seed=5");
    std::getline(in, line);
    CHECK(line.rfind("k,x_0,x_1,x_2,xhat_0,xhat_1,xhat_2,r_0,r_1,r_2,xi_0,xi_1,xi_2,wsr_p_0,wsr_alarm_0,", 0) == 0);
    CHECK(line.find("cusum_s_2,cusum_alarm_2") != std::string::npos);
    CHECK(line.find("cusum_rate_2") != std::string::npos);
    std::size_t rows = 0;
    while (std::getline(in, line)) {
        ++rows;
    }
    CHECK(rows == 200);
}

TEST_CASE("JSONL carries steps and a summary") {
    const RunArtifacts art = run_scenario(ugv("", 250));
    std::ostringstream os;
    write_jsonl(art, os);
    std::istringstream in(os.str());
    std::string line;
    std::size_t steps = 0;
    nlohmann::json last;
    while (std::getline(in, line)) {
        last = nlohmann::json::parse(line);
        steps += last["record"] == "step";
    }
    CHECK(steps == 250);
    CHECK(last["record"] == "summary");
    CHECK(last["schema_version"] == kOutputSchemaVersion);
    CHECK(last["config_hash"] == art.config_hash);
    CHECK(nlohmann::json::parse(summary_json(art))["record"] == "summary");
}

TEST_CASE("emit_outputs reports unwritable paths") {
    const RunArtifacts art = run_scenario(ugv("", 200));
    CHECK_THROWS_AS(emit_outputs(art, OutputFormat::csv, "/proc/definitely/not/here.csv"), IoError);
    const auto path = std::filesystem::temp_directory_path() / "randmon_emit_test.csv";
    emit_outputs(art, OutputFormat::csv, path);
    CHECK(read_csv(path).rows == 200);
    std::filesystem::remove(path);
    std::istringstream junk("not a csv\n");
    CHECK_THROWS_AS((void)read_csv(junk), IoError);
}

TEST_CASE("deviation summary on an unstable plant is declined") {
    const ScenarioConfig cfg = ugv(R"(, "attacks": [{"kind": "worst_case_bdd", "sensors": [0]}])", 400);
    const RunArtifacts art = run_scenario(cfg);
    CHECK(!art.summary.deviation.available);
    CHECK(art.summary.deviation.note.find("no finite limit") != std::string::npos);
}

TEST_CASE("budget curve") {
    std::vector<std::size_t> ells;
    for (std::size_t l = 20; l <= 2000; l += 20) {
        ells.push_back(l);
    }
    const std::vector<BudgetRow> rows = budget_curve({0.01, 0.05, 0.2}, ells);
    CHECK(rows.size() == 3 * ells.size());
    for (const BudgetRow& r : rows) {
        CHECK(r.ratio >= 0.0);
        CHECK(r.ratio <= 0.56);
        const SaturationBudget b = saturation_budget(r.ell, r.alpha);
        CHECK(r.beta == b.beta);
        CHECK(r.gamma == b.gamma);
    }
    CHECK(std::abs(rows.back().ratio - kBudgetAsymptote) < 0.02);
    std::ostringstream os;
    write_budget_csv(rows, os);
    CHECK(os.str().rfind("ell,alpha,gamma,beta,ratio,asymptote\n", 0) == 0);
}

TEST_CASE("sweep cells run the requested grid") {
    SweepConfig sweep = parse_sweep_config(R"({"base": {"horizon": 600, "monitors": {"alpha_wsr": 0.3},
                                                         "detectors": {"mc_samples": 100000}},
                                                "alphas": [0.05, 0.2], "attacks": ["none", "pattern_runs"],
                                                "workers": 2})");
    const ScenarioConfig cell = sweep_scenario(sweep, 0.2, AttackKind::pattern_runs);
    CHECK(!cell.monitors.alpha_wsr);
    CHECK(cell.alpha_des == 0.2);
    CHECK(cell.attacks.size() == 1);
    const std::vector<SweepCell> cells = run_sweep(sweep);
    REQUIRE(cells.size() == 4);
    CHECK(cells[0].alpha == 0.05);
    CHECK(cells[0].attack == AttackKind::none);
    CHECK(cells[3].alpha == 0.2);
    CHECK(cells[3].attack == AttackKind::pattern_runs);
    sweep.workers = 1;
    const std::vector<SweepCell> serial = run_sweep(sweep);
    for (std::size_t i = 0; i < cells.size(); ++i) {
        CHECK(serial[i].config_hash == cells[i].config_hash);
        for (std::size_t j = 0; j < cells[i].tests.size(); ++j) {
            CHECK(serial[i].tests[j].alarm_rate == cells[i].tests[j].alarm_rate);
        }
    }
}
