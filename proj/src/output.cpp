#include "randmon/output.hpp"

#include <fstream>
#include <iterator>
#include <map>
#include <sstream>

#include <fmt/format.h>
#include <json.hpp>

#include "randmon/errors.hpp"

namespace randmon {

using nlohmann::json;

namespace {

struct Column {
    std::string name;
    std::size_t sensor = 0;
    enum class Field { wsr_p, wsr_alarm, sir_p, sir_alarm, bdd_alarm, cusum_s, cusum_alarm, rate } field;
    TestKind test = TestKind::wsr;  // for rate columns
};

std::vector<Column> monitor_columns(const std::vector<TestKind>& tests, std::size_t sensors) {
    std::vector<Column> out;
    using F = Column::Field;
    for (std::size_t i = 0; i < sensors; ++i) {
        for (TestKind t : tests) {
            switch (t) {
                case TestKind::wsr:
                    out.push_back({fmt::format("wsr_p_{}", i), i, F::wsr_p});
                    out.push_back({fmt::format("wsr_alarm_{}", i), i, F::wsr_alarm});
                    break;
                case TestKind::sir:
                    out.push_back({fmt::format("sir_p_{}", i), i, F::sir_p});
                    out.push_back({fmt::format("sir_alarm_{}", i), i, F::sir_alarm});
                    break;
                case TestKind::bdd:
                    out.push_back({fmt::format("bdd_alarm_{}", i), i, F::bdd_alarm});
                    break;
                case TestKind::cusum:
                    out.push_back({fmt::format("cusum_s_{}", i), i, F::cusum_s});
                    out.push_back({fmt::format("cusum_alarm_{}", i), i, F::cusum_alarm});
                    break;
            }
        }
        for (TestKind t : tests) {
            out.push_back({fmt::format("{}_rate_{}", to_string(t), i), i, F::rate, t});
        }
    }
    return out;
}

void append_number(fmt::memory_buffer& buf, const std::optional<double>& v) {
    buf.push_back(',');
    if (v) {
        fmt::format_to(std::back_inserter(buf), "{:.17g}", *v);
    }
}

void append_flag(fmt::memory_buffer& buf, const std::optional<bool>& v) {
    buf.push_back(',');
    if (v) {
        buf.push_back(*v ? '1' : '0');
    }
}

void append_vector(fmt::memory_buffer& buf, const Vector& v) {
    for (Eigen::Index j = 0; j < v.size(); ++j) {
        fmt::format_to(std::back_inserter(buf), ",{:.17g}", v(j));
    }
}

json optional_json(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }
json optional_json(const std::optional<bool>& v) { return v ? json(*v) : json(nullptr); }

json vector_json(const Vector& v) { return json(std::vector<double>(v.data(), v.data() + v.size())); }

json summary_document(const RunArtifacts& art) {
    const RunSummary& s = art.summary;
    json tests = json::array();
    for (const TestSummary& t : s.tests) {
        tests.push_back({
            {"test", std::string(to_string(t.test))},
            {"sensor", t.sensor},
            {"alpha_des", t.alpha_des},
            {"alpha_threshold", t.threshold},
            {"verdicts", t.verdicts},
            {"alarms", t.alarms},
            {"alarm_rate", t.alarm_rate},
            {"final_window_rate", optional_json(t.final_window_rate)},
            {"max_window_rate", t.max_window_rate},
            {"compromised_steps", t.compromised_steps},
            {"compromised_final", t.compromised_final},
        });
    }
    json doc = {
        {"record", "summary"},
        {"schema_version", kOutputSchemaVersion},
        {"config_hash", art.config_hash},
        {"seed", art.config.seed},
        {"name", art.config.name},
        {"horizon", art.config.horizon},
        {"tests", std::move(tests)},
        {"sigma", s.sigma},
        {"tau_bdd", s.tau_bdd},
        {"tau_cusum", s.tau_cusum},
        {"cusum_bias", s.cusum_bias},
        {"cusum_attainable", s.cusum_attainable},
    };
    if (s.budget) {
        doc["saturation_budget"] = {
            {"ell", s.budget->ell}, {"gamma", s.budget->gamma}, {"beta", s.budget->beta}, {"ratio", s.budget->ratio}};
    }
    const DeviationSummary& d = s.deviation;
    json dev = {{"available", d.available}, {"note", d.note}};
    if (d.available) {
        dev["attack"] = std::string(to_string(d.kind));
        dev["from"] = d.from;
        dev["to"] = d.to;
        dev["expected_residual_formula"] = vector_json(d.expected_residual_formula);
        dev["expected_residual_measured"] = vector_json(d.expected_residual_measured);
        dev["delta_formula"] = vector_json(d.delta_formula);
        dev["delta_from_measured_residual"] = vector_json(d.delta_from_measured);
        dev["measured_deviation"] = vector_json(d.measured);
    }
    doc["deviation"] = std::move(dev);
    return doc;
}

std::vector<std::string> split_csv(const std::string& line) {
    std::vector<std::string> out;
    std::string field;
    std::istringstream in(line);
    while (std::getline(in, field, ',')) {
        out.push_back(field);
    }
    if (!line.empty() && line.back() == ',') {
        out.emplace_back();
    }
    return out;
}

std::optional<double> parse_number(const std::string& s, std::size_t row) {
    if (s.empty()) {
        return std::nullopt;
    }
    try {
        std::size_t used = 0;
        const double v = std::stod(s, &used);
        if (used != s.size()) {
            throw std::invalid_argument(s);
        }
        return v;
    } catch (const std::exception&) {
        throw IoError(fmt::format("row {}: '{}' is not a number", row, s));
    }
}

std::optional<bool> parse_flag(const std::string& s, std::size_t row) {
    if (s.empty()) {
        return std::nullopt;
    }
    if (s == "0" || s == "1") {
        return s == "1";
    }
    throw IoError(fmt::format("row {}: '{}' is not a 0/1 flag", row, s));
}

}  // namespace

void write_csv(const RunArtifacts& art, std::ostream& out) {
    const std::size_t n = art.states();
    const std::size_t s = art.sensors();
    const std::vector<Column> cols = monitor_columns(enabled_tests(art.config), s);

    fmt::memory_buffer buf;
    fmt::format_to(std::back_inserter(buf), "# schema_version={}\n# config_hash={}\n# seed={}\n",
                   kOutputSchemaVersion, art.config_hash, art.config.seed);
    fmt::format_to(std::back_inserter(buf), "k");
    for (const char* prefix : {"x", "xhat"}) {
        for (std::size_t j = 0; j < n; ++j) {
            fmt::format_to(std::back_inserter(buf), ",{}_{}", prefix, j);
        }
    }
    for (const char* prefix : {"r", "xi"}) {
        for (std::size_t i = 0; i < s; ++i) {
            fmt::format_to(std::back_inserter(buf), ",{}_{}", prefix, i);
        }
    }
    for (const Column& c : cols) {
        fmt::format_to(std::back_inserter(buf), ",{}", c.name);
    }
    buf.push_back('\n');
    out.write(buf.data(), static_cast<std::streamsize>(buf.size()));

    using F = Column::Field;
    for (std::size_t row = 0; row < art.steps.size(); ++row) {
        buf.clear();
        const StepRecord& rec = art.steps[row];
        fmt::format_to(std::back_inserter(buf), "{}", rec.k);
        append_vector(buf, rec.x);
        append_vector(buf, rec.xhat);
        append_vector(buf, rec.r);
        append_vector(buf, rec.xi);
        for (const Column& c : cols) {
            const SensorStep& cell = art.monitors[row][c.sensor];
            switch (c.field) {
                case F::wsr_p: append_number(buf, cell.wsr_p); break;
                case F::wsr_alarm: append_flag(buf, cell.wsr_alarm); break;
                case F::sir_p: append_number(buf, cell.sir_p); break;
                case F::sir_alarm: append_flag(buf, cell.sir_alarm); break;
                case F::bdd_alarm: append_flag(buf, cell.bdd_alarm); break;
                case F::cusum_s: append_number(buf, cell.cusum_s); break;
                case F::cusum_alarm: append_flag(buf, cell.cusum_alarm); break;
                case F::rate: append_number(buf, cell.rate[static_cast<std::size_t>(c.test)]); break;
            }
        }
        buf.push_back('\n');
        out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
    }
}

void write_jsonl(const RunArtifacts& art, std::ostream& out) {
    const std::vector<TestKind> tests = enabled_tests(art.config);
    for (std::size_t row = 0; row < art.steps.size(); ++row) {
        const StepRecord& rec = art.steps[row];
        json sensors = json::array();
        for (const SensorStep& cell : art.monitors[row]) {
            json c = json::object();
            for (TestKind t : tests) {
                switch (t) {
                    case TestKind::wsr:
                        c["wsr_p"] = optional_json(cell.wsr_p);
                        c["wsr_alarm"] = optional_json(cell.wsr_alarm);
                        break;
                    case TestKind::sir:
                        c["sir_p"] = optional_json(cell.sir_p);
                        c["sir_alarm"] = optional_json(cell.sir_alarm);
                        break;
                    case TestKind::bdd:
                        c["bdd_alarm"] = optional_json(cell.bdd_alarm);
                        break;
                    case TestKind::cusum:
                        c["cusum_s"] = optional_json(cell.cusum_s);
                        c["cusum_alarm"] = optional_json(cell.cusum_alarm);
                        break;
                }
                c[fmt::format("{}_rate", to_string(t))] = optional_json(cell.rate[static_cast<std::size_t>(t)]);
            }
            sensors.push_back(std::move(c));
        }
        const json record = {
            {"record", "step"},       {"k", rec.k},           {"x", vector_json(rec.x)},
            {"xhat", vector_json(rec.xhat)}, {"r", vector_json(rec.r)}, {"xi", vector_json(rec.xi)},
            {"sensors", std::move(sensors)},
        };
        out << record.dump() << '\n';
    }
    out << summary_document(art).dump() << '\n';
}

std::string summary_json(const RunArtifacts& art, int indent) { return summary_document(art).dump(indent); }

void emit_outputs(const RunArtifacts& art, OutputFormat format, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw IoError(fmt::format("cannot open {} for writing", path.string()));
    }
    if (format == OutputFormat::csv) {
        write_csv(art, out);
    } else {
        write_jsonl(art, out);
    }
    out.flush();
    if (!out) {
        throw IoError(fmt::format("failed while writing {}", path.string()));
    }
}

IngestedRun read_csv(std::istream& in) {
    IngestedRun run;
    std::string line;
    std::vector<std::string> header;
    while (std::getline(in, line)) {
        if (line.rfind("# ", 0) == 0) {
            const std::string body = line.substr(2);
            const std::size_t eq = body.find('=');
            if (eq == std::string::npos) {
                continue;
            }
            const std::string key = body.substr(0, eq);
            const std::string value = body.substr(eq + 1);
            try {
                if (key == "schema_version") {
                    run.schema_version = std::stoi(value);
                } else if (key == "config_hash") {
                    run.config_hash = value;
                } else if (key == "seed") {
                    run.seed = std::stoull(value);
                }
            } catch (const std::exception&) {
                throw IoError(fmt::format("malformed header line '{}'", line));
            }
            continue;
        }
        header = split_csv(line);
        break;
    }
    if (header.empty() || header.front() != "k") {
        throw IoError("missing CSV column row");
    }
    if (run.schema_version != kOutputSchemaVersion) {
        throw IoError(fmt::format("unsupported CSV schema_version {}", run.schema_version));
    }

    // Map monitor columns back onto (sensor, field).
    struct Slot {
        std::size_t sensor;
        std::string field;
    };
    std::map<std::size_t, Slot> slots;
    std::size_t sensors = 0;
    for (std::size_t c = 1; c < header.size(); ++c) {
        const std::string& name = header[c];
        const std::size_t us = name.rfind('_');
        if (us == std::string::npos) {
            throw IoError(fmt::format("unexpected column '{}'", name));
        }
        const std::string field = name.substr(0, us);
        const std::size_t sensor = std::stoul(name.substr(us + 1));
        if (field == "r") {
            sensors = std::max(sensors, sensor + 1);
        }
        if (field != "x" && field != "xhat" && field != "r" && field != "xi") {
            slots[c] = {sensor, field};
        }
    }

    std::size_t row = 0;
    while (std::getline(in, line)) {
        if (line.empty()) {
            continue;
        }
        const std::vector<std::string> cells = split_csv(line);
        if (cells.size() != header.size()) {
            throw IoError(fmt::format("row {}: {} fields, expected {}", row, cells.size(), header.size()));
        }
        std::vector<SensorStep> out(sensors);
        for (const auto& [col, slot] : slots) {
            if (slot.sensor >= sensors) {
                throw IoError(fmt::format("column '{}' names an unknown sensor", header[col]));
            }
            SensorStep& cell = out[slot.sensor];
            const std::string& v = cells[col];
            if (slot.field == "wsr_p") cell.wsr_p = parse_number(v, row);
            else if (slot.field == "wsr_alarm") cell.wsr_alarm = parse_flag(v, row);
            else if (slot.field == "sir_p") cell.sir_p = parse_number(v, row);
            else if (slot.field == "sir_alarm") cell.sir_alarm = parse_flag(v, row);
            else if (slot.field == "bdd_alarm") cell.bdd_alarm = parse_flag(v, row);
            else if (slot.field == "cusum_s") cell.cusum_s = parse_number(v, row);
            else if (slot.field == "cusum_alarm") cell.cusum_alarm = parse_flag(v, row);
            else if (slot.field == "wsr_rate") cell.rate[0] = parse_number(v, row);
            else if (slot.field == "sir_rate") cell.rate[1] = parse_number(v, row);
            else if (slot.field == "bdd_rate") cell.rate[2] = parse_number(v, row);
            else if (slot.field == "cusum_rate") cell.rate[3] = parse_number(v, row);
            else throw IoError(fmt::format("unexpected column '{}'", header[col]));
        }
        run.monitors.push_back(std::move(out));
        ++row;
    }
    run.rows = row;
    return run;
}

IngestedRun read_csv(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw IoError(fmt::format("cannot open {}", path.string()));
    }
    return read_csv(in);
}

}  // namespace randmon
