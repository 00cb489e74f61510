#include "randmon/config.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <sstream>
#include <type_traits>

#include <fmt/format.h>
#include <json.hpp>

#include "randmon/errors.hpp"

namespace randmon {

using nlohmann::json;

namespace {

bool same_matrix(const Matrix& a, const Matrix& b) {
    return a.rows() == b.rows() && a.cols() == b.cols() && (a.size() == 0 || a == b);
}

bool same_waypoints(const std::vector<Waypoint>& a, const std::vector<Waypoint>& b) {
    if (a.size() != b.size()) {
        return false;
    }
    for (std::size_t i = 0; i < a.size(); ++i) {
        if (a[i].step != b[i].step || !same_matrix(a[i].value, b[i].value)) {
            return false;
        }
    }
    return true;
}

// Collects problems instead of stopping at the first one.
class Reader {
public:
    std::vector<std::string> issues;

    void fail(const std::string& path, const std::string& what) { issues.push_back(fmt::format("{}: {}", path, what)); }

    bool object(const json& j, const std::string& path, std::initializer_list<std::string_view> allowed) {
        if (!j.is_object()) {
            fail(path, "expected an object");
            return false;
        }
        for (const auto& item : j.items()) {
            if (std::find(allowed.begin(), allowed.end(), item.key()) == allowed.end()) {
                fail(join(path, item.key()), "unknown key");
            }
        }
        return true;
    }

    static std::string join(const std::string& path, std::string_view key) {
        return path.empty() ? std::string(key) : fmt::format("{}.{}", path, key);
    }

    template <typename T>
    void get(const json& j, const std::string& path, std::string_view key, T& out) {
        const auto it = j.find(key);
        if (it == j.end()) {
            return;
        }
        read(*it, join(path, key), out);
    }

    template <typename T>
    void get(const json& j, const std::string& path, std::string_view key, std::optional<T>& out) {
        const auto it = j.find(key);
        if (it == j.end() || it->is_null()) {
            return;
        }
        T value{};
        if (read(*it, join(path, key), value)) {
            out = value;
        }
    }

    bool read(const json& j, const std::string& path, double& out) {
        if (!j.is_number()) {
            fail(path, "expected a number");
            return false;
        }
        out = j.get<double>();
        return true;
    }

    bool read(const json& j, const std::string& path, bool& out) {
        if (!j.is_boolean()) {
            fail(path, "expected true or false");
            return false;
        }
        out = j.get<bool>();
        return true;
    }

    bool read(const json& j, const std::string& path, std::string& out) {
        if (!j.is_string()) {
            fail(path, "expected a string");
            return false;
        }
        out = j.get<std::string>();
        return true;
    }

    bool read(const json& j, const std::string& path, std::int64_t& out) {
        if (!j.is_number_integer()) {
            fail(path, "expected an integer");
            return false;
        }
        out = j.get<std::int64_t>();
        return true;
    }

    bool read(const json& j, const std::string& path, std::uint64_t& out) {
        if (!j.is_number_unsigned() && !(j.is_number_integer() && j.get<std::int64_t>() >= 0)) {
            fail(path, "expected a non-negative integer");
            return false;
        }
        out = j.get<std::uint64_t>();
        return true;
    }

    static_assert(std::is_same_v<std::size_t, std::uint64_t>, "index fields are read as uint64");

    bool read(const json& j, const std::string& path, int& out) {
        std::int64_t v = 0;
        if (!read(j, path, v)) {
            return false;
        }
        out = static_cast<int>(v);
        return true;
    }

    bool read(const json& j, const std::string& path, std::vector<std::size_t>& out) {
        if (!j.is_array()) {
            fail(path, "expected an array of indices");
            return false;
        }
        out.clear();
        for (std::size_t i = 0; i < j.size(); ++i) {
            std::size_t v = 0;
            if (read(j[i], fmt::format("{}[{}]", path, i), v)) {
                out.push_back(v);
            }
        }
        return true;
    }

    bool read(const json& j, const std::string& path, std::vector<double>& out) {
        if (!j.is_array()) {
            fail(path, "expected an array of numbers");
            return false;
        }
        out.clear();
        for (std::size_t i = 0; i < j.size(); ++i) {
            double v = 0.0;
            if (read(j[i], fmt::format("{}[{}]", path, i), v)) {
                out.push_back(v);
            }
        }
        return true;
    }

    bool read(const json& j, const std::string& path, Vector& out) {
        std::vector<double> values;
        if (!read(j, path, values)) {
            return false;
        }
        out = Eigen::Map<const Vector>(values.data(), static_cast<Eigen::Index>(values.size()));
        return true;
    }

    bool read(const json& j, const std::string& path, Matrix& out) {
        if (!j.is_array() || j.empty()) {
            fail(path, "expected a non-empty array of rows");
            return false;
        }
        std::vector<std::vector<double>> rows;
        for (std::size_t r = 0; r < j.size(); ++r) {
            std::vector<double> row;
            if (!read(j[r], fmt::format("{}[{}]", path, r), row)) {
                return false;
            }
            rows.push_back(std::move(row));
        }
        const std::size_t cols = rows.front().size();
        if (cols == 0 || std::any_of(rows.begin(), rows.end(), [&](const auto& row) { return row.size() != cols; })) {
            fail(path, "rows must be non-empty and of equal length");
            return false;
        }
        out.resize(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(cols));
        for (std::size_t r = 0; r < rows.size(); ++r) {
            for (std::size_t c = 0; c < cols; ++c) {
                out(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = rows[r][c];
            }
        }
        return true;
    }
};

json to_json(const Matrix& M) {
    json rows = json::array();
    for (Eigen::Index r = 0; r < M.rows(); ++r) {
        json row = json::array();
        for (Eigen::Index c = 0; c < M.cols(); ++c) {
            row.push_back(M(r, c));
        }
        rows.push_back(std::move(row));
    }
    return rows;
}

json to_json(const Vector& v) {
    json out = json::array();
    for (Eigen::Index i = 0; i < v.size(); ++i) {
        out.push_back(v(i));
    }
    return out;
}

void read_plant(Reader& rd, const json& j, PlantSpec& plant) {
    const std::string path = "plant";
    if (!rd.object(j, path, {"type", "ugv", "ts", "A", "B", "C", "Q", "R"})) {
        return;
    }
    std::string type = "ugv";
    rd.get(j, path, "type", type);
    if (type == "ugv") {
        plant.type = PlantSpec::Type::ugv;
    } else if (type == "matrices") {
        plant.type = PlantSpec::Type::matrices;
    } else {
        rd.fail("plant.type", fmt::format("expected \"ugv\" or \"matrices\", got \"{}\"", type));
    }
    rd.get(j, path, "ts", plant.ts);
    if (const auto it = j.find("ugv"); it != j.end()) {
        if (plant.type != PlantSpec::Type::ugv) {
            rd.fail("plant.ugv", "only valid with type \"ugv\"");
        } else if (rd.object(*it, "plant.ugv",
                             {"mass", "inertia", "width", "rolling_resistance", "turning_resistance"})) {
            rd.get(*it, "plant.ugv", "mass", plant.ugv.mass);
            rd.get(*it, "plant.ugv", "inertia", plant.ugv.inertia);
            rd.get(*it, "plant.ugv", "width", plant.ugv.width);
            rd.get(*it, "plant.ugv", "rolling_resistance", plant.ugv.rolling_resistance);
            rd.get(*it, "plant.ugv", "turning_resistance", plant.ugv.turning_resistance);
        }
    }
    for (const char* key : {"A", "B", "C", "Q", "R"}) {
        Matrix* target = nullptr;
        switch (key[0]) {
            case 'A': target = &plant.A; break;
            case 'B': target = &plant.B; break;
            case 'C': target = &plant.C; break;
            case 'Q': target = &plant.Q; break;
            default: target = &plant.R; break;
        }
        const bool derived = plant.type == PlantSpec::Type::ugv && (key[0] == 'A' || key[0] == 'B');
        if (j.contains(key)) {
            if (derived) {
                rd.fail(fmt::format("plant.{}", key), "derived from the UGV parameters; remove it");
            } else {
                rd.get(j, path, key, *target);
            }
        } else if (plant.type == PlantSpec::Type::matrices) {
            rd.fail(fmt::format("plant.{}", key), "required for type \"matrices\"");
        }
    }
}

// Fills the UGV-derived matrices and every default that depends on dimensions.
void fill_plant_defaults(PlantSpec& plant) {
    if (plant.type != PlantSpec::Type::ugv) {
        return;
    }
    if (plant.ts > 0.0 && plant.ugv.mass > 0.0 && plant.ugv.inertia > 0.0) {
        const UgvContinuous ct = ugv_continuous(plant.ugv);
        const ZohResult d = zoh_discretize(ct.Ac, ct.Bc, plant.ts);
        plant.A = d.Ad;
        plant.B = d.Bd;
    }
    if (plant.C.size() == 0) {
        plant.C = Matrix::Identity(3, 3);
    }
    if (plant.Q.size() == 0) {
        plant.Q = Vector((Vector(3) << 1e-4, 1e-5, 1e-4).finished()).asDiagonal();
    }
    if (plant.R.size() == 0) {
        const Vector diag = (Vector(plant.C.rows()).setConstant(1e-3));
        plant.R = diag.asDiagonal();
    }
}

Vector default_reference(const PlantSpec& plant, Eigen::Index m) {
    Vector ref = Vector::Zero(m);
    if (plant.type == PlantSpec::Type::ugv && m >= 1) {
        ref(0) = 0.15;  // cruise velocity, m/s
    }
    return ref;
}

void read_controller(Reader& rd, const json* j, const PlantSpec& plant, ControllerSpec& ctl) {
    const std::string path = "controller";
    const Eigen::Index n = plant.A.rows();
    const Eigen::Index m = plant.B.cols();
    if (j != nullptr && rd.object(*j, path, {"K", "state_weight", "input_weight", "kr", "tracked_states", "reference"})) {
        rd.get(*j, path, "K", ctl.K);
        rd.get(*j, path, "state_weight", ctl.state_weight);
        rd.get(*j, path, "input_weight", ctl.input_weight);
        rd.get(*j, path, "kr", ctl.kr);
        rd.get(*j, path, "tracked_states", ctl.tracked_states);
        if (const auto it = j->find("reference"); it != j->end()) {
            if (!it->is_array() || it->empty()) {
                rd.fail("controller.reference", "expected a non-empty array of {step, value}");
            } else {
                for (std::size_t w = 0; w < it->size(); ++w) {
                    const std::string wp = fmt::format("controller.reference[{}]", w);
                    Waypoint point;
                    if (rd.object((*it)[w], wp, {"step", "value"})) {
                        rd.get((*it)[w], wp, "step", point.step);
                        rd.get((*it)[w], wp, "value", point.value);
                    }
                    ctl.reference.push_back(std::move(point));
                }
            }
        }
    }
    if (!ctl.K) {
        if (ctl.state_weight.size() == 0) {
            ctl.state_weight = Matrix::Identity(n, n);
        }
        if (ctl.input_weight.size() == 0) {
            ctl.input_weight = 0.01 * Matrix::Identity(m, m);
        }
    }
    if (!ctl.kr && ctl.tracked_states.empty()) {
        for (Eigen::Index i = 0; i < m; ++i) {
            ctl.tracked_states.push_back(static_cast<std::size_t>(i));
        }
    }
    if (ctl.reference.empty()) {
        ctl.reference.push_back({0, default_reference(plant, m)});
    }
}

AttackParams read_params(Reader& rd, const json& j, const std::string& path) {
    AttackParams p;
    if (!rd.object(j, path,
                   {"concentrate_mode", "sign_bias", "mean_scale", "std_scale", "pattern_mode", "pattern_amplitude",
                    "violation_scale", "epsilon_scale", "cusum_nonsaturating"})) {
        return p;
    }
    std::string name;
    try {
        if (j.contains("concentrate_mode") && rd.read(j["concentrate_mode"], path + ".concentrate_mode", name)) {
            p.concentrate_mode = parse_concentrate_mode(name);
        }
        if (j.contains("pattern_mode") && rd.read(j["pattern_mode"], path + ".pattern_mode", name)) {
            p.pattern_mode = parse_pattern_mode(name);
        }
        if (j.contains("cusum_nonsaturating") &&
            rd.read(j["cusum_nonsaturating"], path + ".cusum_nonsaturating", name)) {
            p.cusum_nonsaturating = parse_nonsaturating(name);
        }
    } catch (const InvalidParams& e) {
        rd.fail(path, e.what());
    }
    rd.get(j, path, "sign_bias", p.sign_bias);
    rd.get(j, path, "mean_scale", p.mean_scale);
    rd.get(j, path, "std_scale", p.std_scale);
    rd.get(j, path, "pattern_amplitude", p.pattern_amplitude);
    rd.get(j, path, "violation_scale", p.violation_scale);
    rd.get(j, path, "epsilon_scale", p.epsilon_scale);
    return p;
}

void read_attacks(Reader& rd, const json& j, std::int64_t horizon, std::vector<AttackPlan>& out) {
    if (!j.is_array()) {
        rd.fail("attacks", "expected an array");
        return;
    }
    for (std::size_t a = 0; a < j.size(); ++a) {
        const std::string path = fmt::format("attacks[{}]", a);
        AttackPlan plan;
        plan.stop = horizon;
        if (rd.object(j[a], path, {"kind", "sensors", "start", "stop", "params"})) {
            std::string kind;
            if (!j[a].contains("kind")) {
                rd.fail(path + ".kind", "required");
            } else if (rd.read(j[a]["kind"], path + ".kind", kind)) {
                try {
                    plan.kind = parse_attack_kind(kind);
                } catch (const InvalidParams& e) {
                    rd.fail(path + ".kind", e.what());
                }
            }
            rd.get(j[a], path, "sensors", plan.target_sensors);
            rd.get(j[a], path, "start", plan.start);
            rd.get(j[a], path, "stop", plan.stop);
            if (const auto it = j[a].find("params"); it != j[a].end()) {
                plan.params = read_params(rd, *it, path + ".params");
            }
        }
        out.push_back(std::move(plan));
    }
}

json plan_to_json(const AttackPlan& plan) {
    const AttackParams& p = plan.params;
    return json{
        {"kind", std::string(to_string(plan.kind))},
        {"sensors", plan.target_sensors},
        {"start", plan.start},
        {"stop", plan.stop},
        {"params",
         {{"concentrate_mode", std::string(to_string(p.concentrate_mode))},
          {"sign_bias", p.sign_bias},
          {"mean_scale", p.mean_scale},
          {"std_scale", p.std_scale},
          {"pattern_mode", std::string(to_string(p.pattern_mode))},
          {"pattern_amplitude", p.pattern_amplitude},
          {"violation_scale", p.violation_scale},
          {"epsilon_scale", p.epsilon_scale},
          {"cusum_nonsaturating", std::string(to_string(p.cusum_nonsaturating))}}},
    };
}

json config_to_json(const ScenarioConfig& cfg) {
    json plant;
    const PlantSpec& ps = cfg.plant;
    plant["type"] = ps.type == PlantSpec::Type::ugv ? "ugv" : "matrices";
    plant["ts"] = ps.ts;
    if (ps.type == PlantSpec::Type::ugv) {
        plant["ugv"] = {{"mass", ps.ugv.mass},
                        {"inertia", ps.ugv.inertia},
                        {"width", ps.ugv.width},
                        {"rolling_resistance", ps.ugv.rolling_resistance},
                        {"turning_resistance", ps.ugv.turning_resistance}};
    } else {
        plant["A"] = to_json(ps.A);
        plant["B"] = to_json(ps.B);
    }
    plant["C"] = to_json(ps.C);
    plant["Q"] = to_json(ps.Q);
    plant["R"] = to_json(ps.R);

    json ctl = json::object();
    const ControllerSpec& cs = cfg.controller;
    if (cs.K) {
        ctl["K"] = to_json(*cs.K);
    } else {
        ctl["state_weight"] = to_json(cs.state_weight);
        ctl["input_weight"] = to_json(cs.input_weight);
    }
    if (cs.kr) {
        ctl["kr"] = to_json(*cs.kr);
    } else {
        ctl["tracked_states"] = cs.tracked_states;
    }
    json ref = json::array();
    for (const Waypoint& w : cs.reference) {
        ref.push_back({{"step", w.step}, {"value", to_json(w.value)}});
    }
    ctl["reference"] = std::move(ref);

    json mon = {{"enabled", cfg.monitors.enabled},
                {"window", cfg.monitors.window},
                {"rate_window", cfg.monitors.rate_window}};
    if (cfg.monitors.alpha_wsr) mon["alpha_wsr"] = *cfg.monitors.alpha_wsr;
    if (cfg.monitors.alpha_sir) mon["alpha_sir"] = *cfg.monitors.alpha_sir;
    if (cfg.monitors.alpha_threshold) mon["alpha_threshold"] = *cfg.monitors.alpha_threshold;

    json det = {{"bdd", cfg.detectors.bdd},
                {"cusum", cfg.detectors.cusum},
                {"bias_scale", cfg.detectors.bias_scale},
                {"mc_samples", cfg.detectors.mc_samples}};
    if (cfg.detectors.alpha_bdd) det["alpha_bdd"] = *cfg.detectors.alpha_bdd;
    if (cfg.detectors.alpha_cusum) det["alpha_cusum"] = *cfg.detectors.alpha_cusum;

    json attacks = json::array();
    for (const AttackPlan& plan : cfg.attacks) {
        attacks.push_back(plan_to_json(plan));
    }

    return json{
        {"schema_version", kSchemaVersion},
        {"name", cfg.name},
        {"alpha_des", cfg.alpha_des},
        {"plant", std::move(plant)},
        {"controller", std::move(ctl)},
        {"monitors", std::move(mon)},
        {"detectors", std::move(det)},
        {"attacks", std::move(attacks)},
        {"omniscient_attacker", cfg.omniscient_attacker},
        {"horizon", cfg.horizon},
        {"seed", cfg.seed},
        {"output",
         {{"dir", cfg.output.dir}, {"stem", cfg.output.stem}, {"format", std::string(to_string(cfg.output.format))}}},
    };
}

json parse_json_text(const std::string& text) {
    try {
        return json::parse(text);
    } catch (const json::parse_error& e) {
        const std::size_t byte = std::min<std::size_t>(e.byte, text.size());
        const std::size_t line = 1 + static_cast<std::size_t>(std::count(text.begin(), text.begin() + static_cast<std::ptrdiff_t>(byte > 0 ? byte - 1 : 0), '\n'));
        const std::size_t last_nl = text.rfind('\n', byte > 0 ? byte - 1 : 0);
        const std::size_t column = last_nl == std::string::npos || byte == 0 ? byte : byte - last_nl - 1;
        throw ParseError(fmt::format("line {}, column {}: {}", line, column, e.what()));
    }
}

ScenarioConfig read_scenario(Reader& rd, const json& doc) {
    ScenarioConfig cfg;
    if (!rd.object(doc, "", {"schema_version", "name", "alpha_des", "plant", "controller", "monitors", "detectors",
                             "attacks", "omniscient_attacker", "horizon", "seed", "output"})) {
        return cfg;
    }
    int version = kSchemaVersion;
    rd.get(doc, "", "schema_version", version);
    if (version != kSchemaVersion) {
        rd.fail("schema_version", fmt::format("unsupported version {} (expected {})", version, kSchemaVersion));
    }
    rd.get(doc, "", "name", cfg.name);
    rd.get(doc, "", "alpha_des", cfg.alpha_des);
    rd.get(doc, "", "omniscient_attacker", cfg.omniscient_attacker);
    rd.get(doc, "", "horizon", cfg.horizon);
    rd.get(doc, "", "seed", cfg.seed);

    if (const auto it = doc.find("plant"); it != doc.end()) {
        read_plant(rd, *it, cfg.plant);
    }
    fill_plant_defaults(cfg.plant);
    if (cfg.plant.A.size() > 0 && cfg.plant.B.size() > 0) {
        const auto it = doc.find("controller");
        read_controller(rd, it == doc.end() ? nullptr : &*it, cfg.plant, cfg.controller);
    }

    if (const auto it = doc.find("monitors"); it != doc.end()) {
        if (rd.object(*it, "monitors", {"enabled", "window", "rate_window", "alpha_wsr", "alpha_sir", "alpha_threshold"})) {
            rd.get(*it, "monitors", "enabled", cfg.monitors.enabled);
            rd.get(*it, "monitors", "window", cfg.monitors.window);
            rd.get(*it, "monitors", "rate_window", cfg.monitors.rate_window);
            rd.get(*it, "monitors", "alpha_wsr", cfg.monitors.alpha_wsr);
            rd.get(*it, "monitors", "alpha_sir", cfg.monitors.alpha_sir);
            rd.get(*it, "monitors", "alpha_threshold", cfg.monitors.alpha_threshold);
        }
    }
    if (const auto it = doc.find("detectors"); it != doc.end()) {
        if (rd.object(*it, "detectors", {"bdd", "alpha_bdd", "cusum", "alpha_cusum", "bias_scale", "mc_samples"})) {
            rd.get(*it, "detectors", "bdd", cfg.detectors.bdd);
            rd.get(*it, "detectors", "alpha_bdd", cfg.detectors.alpha_bdd);
            rd.get(*it, "detectors", "cusum", cfg.detectors.cusum);
            rd.get(*it, "detectors", "alpha_cusum", cfg.detectors.alpha_cusum);
            rd.get(*it, "detectors", "bias_scale", cfg.detectors.bias_scale);
            rd.get(*it, "detectors", "mc_samples", cfg.detectors.mc_samples);
        }
    }
    if (const auto it = doc.find("attacks"); it != doc.end()) {
        read_attacks(rd, *it, cfg.horizon, cfg.attacks);
    }
    if (const auto it = doc.find("output"); it != doc.end()) {
        if (rd.object(*it, "output", {"dir", "stem", "format"})) {
            rd.get(*it, "output", "dir", cfg.output.dir);
            rd.get(*it, "output", "stem", cfg.output.stem);
            std::string format = "csv";
            rd.get(*it, "output", "format", format);
            try {
                cfg.output.format = parse_output_format(format);
            } catch (const ValidationError& e) {
                rd.fail("output.format", e.what());
            }
        }
    }
    return cfg;
}

void check_unit_alpha(std::vector<std::string>& issues, const std::string& field, double alpha) {
    if (!(alpha > 0.0 && alpha < 1.0)) {
        issues.push_back(fmt::format("{}: must be in (0, 1), got {}", field, alpha));
    }
}

std::vector<std::string> collect_issues(const ScenarioConfig& cfg) {
    std::vector<std::string> issues;
    check_unit_alpha(issues, "alpha_des", cfg.alpha_des);
    if (cfg.monitors.alpha_wsr) check_unit_alpha(issues, "monitors.alpha_wsr", *cfg.monitors.alpha_wsr);
    if (cfg.monitors.alpha_sir) check_unit_alpha(issues, "monitors.alpha_sir", *cfg.monitors.alpha_sir);
    if (cfg.monitors.alpha_threshold) check_unit_alpha(issues, "monitors.alpha_threshold", *cfg.monitors.alpha_threshold);
    if (cfg.detectors.alpha_bdd) check_unit_alpha(issues, "detectors.alpha_bdd", *cfg.detectors.alpha_bdd);
    if (cfg.detectors.alpha_cusum) check_unit_alpha(issues, "detectors.alpha_cusum", *cfg.detectors.alpha_cusum);

    const PlantSpec& ps = cfg.plant;
    if (!(ps.ts > 0.0) && ps.type == PlantSpec::Type::ugv) {
        issues.push_back("plant.ts: must be positive");
    }
    if (ps.type == PlantSpec::Type::ugv) {
        const UgvParams& u = ps.ugv;
        if (!(u.mass > 0.0)) issues.push_back("plant.ugv.mass: must be positive");
        if (!(u.inertia > 0.0)) issues.push_back("plant.ugv.inertia: must be positive");
        if (!(u.width > 0.0)) issues.push_back("plant.ugv.width: must be positive");
    }
    bool dims_ok = ps.A.size() > 0 && ps.B.size() > 0 && ps.C.size() > 0 && ps.Q.size() > 0 && ps.R.size() > 0;
    if (dims_ok) {
        const Eigen::Index n = ps.A.rows();
        const Eigen::Index m = ps.B.cols();
        const Eigen::Index s = ps.C.rows();
        const auto need = [&](const char* field, const Matrix& M, Eigen::Index r, Eigen::Index c) {
            if (M.rows() != r || M.cols() != c) {
                issues.push_back(fmt::format("{}: expected {}x{}, got {}x{}", field, r, c, M.rows(), M.cols()));
                dims_ok = false;
            }
        };
        need("plant.A", ps.A, n, n);
        need("plant.B", ps.B, n, m);
        need("plant.C", ps.C, s, n);
        need("plant.Q", ps.Q, n, n);
        need("plant.R", ps.R, s, s);
        const ControllerSpec& cs = cfg.controller;
        if (cs.K) {
            need("controller.K", *cs.K, m, n);
        } else {
            need("controller.state_weight", cs.state_weight, n, n);
            need("controller.input_weight", cs.input_weight, m, m);
        }
        if (cs.kr) {
            need("controller.kr", *cs.kr, m, m);
        } else {
            if (static_cast<Eigen::Index>(cs.tracked_states.size()) != m) {
                issues.push_back(fmt::format("controller.tracked_states: need exactly {} entries", m));
            }
            for (std::size_t i : cs.tracked_states) {
                if (static_cast<Eigen::Index>(i) >= n) {
                    issues.push_back(fmt::format("controller.tracked_states: state {} out of range", i));
                }
            }
        }
        for (std::size_t w = 0; w < cs.reference.size(); ++w) {
            const Waypoint& wp = cs.reference[w];
            if (wp.value.size() != m) {
                issues.push_back(fmt::format("controller.reference[{}].value: expected {} entries", w, m));
            }
            if (w == 0 && wp.step != 0) {
                issues.push_back("controller.reference[0].step: must be 0");
            }
            if (w > 0 && wp.step <= cs.reference[w - 1].step) {
                issues.push_back(fmt::format("controller.reference[{}].step: must increase", w));
            }
        }
        for (std::size_t a = 0; a < cfg.attacks.size(); ++a) {
            const AttackPlan& plan = cfg.attacks[a];
            if (plan.kind == AttackKind::none) {
                continue;
            }
            if (plan.target_sensors.empty()) {
                issues.push_back(fmt::format("attacks[{}].sensors: at least one sensor required", a));
            }
            for (std::size_t i : plan.target_sensors) {
                if (static_cast<Eigen::Index>(i) >= s) {
                    issues.push_back(fmt::format("attacks[{}].sensors: sensor {} out of range (0..{})", a, i, s - 1));
                }
            }
        }
    }
    for (std::size_t a = 0; a < cfg.attacks.size(); ++a) {
        const AttackPlan& plan = cfg.attacks[a];
        if (plan.kind != AttackKind::none && !(plan.start < plan.stop)) {
            issues.push_back(fmt::format("attacks[{}]: start {} must be below stop {}", a, plan.start, plan.stop));
        }
        if (plan.start < 0) {
            issues.push_back(fmt::format("attacks[{}].start: must be non-negative", a));
        }
        const bool omniscient = plan.kind != AttackKind::none && plan.kind != AttackKind::boundary_violation;
        if (omniscient && !cfg.omniscient_attacker) {
            issues.push_back(fmt::format("attacks[{}].kind: {} needs omniscient_attacker = true", a, to_string(plan.kind)));
        }
        const bool bdd_kind = plan.kind == AttackKind::worst_case_bdd || plan.kind == AttackKind::worst_case_bdd_randaware;
        const bool cusum_kind =
            plan.kind == AttackKind::worst_case_cusum || plan.kind == AttackKind::worst_case_cusum_randaware;
        if (bdd_kind && !cfg.detectors.bdd) {
            issues.push_back(fmt::format("attacks[{}].kind: {} needs detectors.bdd = true", a, to_string(plan.kind)));
        }
        if (cusum_kind && !cfg.detectors.cusum) {
            issues.push_back(fmt::format("attacks[{}].kind: {} needs detectors.cusum = true", a, to_string(plan.kind)));
        }
    }
    if (cfg.monitors.window < 2) {
        issues.push_back("monitors.window: must be at least 2");
    }
    if (cfg.monitors.rate_window < 1) {
        issues.push_back("monitors.rate_window: must be at least 1");
    }
    if (cfg.horizon < 1) {
        issues.push_back("horizon: must be positive");
    }
    if (cfg.monitors.enabled &&
        cfg.horizon < static_cast<std::int64_t>(cfg.monitors.window + cfg.monitors.rate_window)) {
        issues.push_back(fmt::format("horizon: {} is below window + rate_window = {}", cfg.horizon,
                                     cfg.monitors.window + cfg.monitors.rate_window));
    }
    if (cfg.detectors.cusum && !(cfg.detectors.bias_scale > std::sqrt(2.0 / std::numbers::pi))) {
        issues.push_back(fmt::format("detectors.bias_scale: must exceed sqrt(2/pi) = {:.6f}", std::sqrt(2.0 / std::numbers::pi)));
    }
    if (cfg.detectors.mc_samples < 1000) {
        issues.push_back("detectors.mc_samples: must be at least 1000");
    }
    if (cfg.output.stem.empty()) {
        issues.push_back("output.stem: must not be empty");
    }
    return issues;
}

std::string join_issues(const std::vector<std::string>& issues) {
    std::string out = fmt::format("{} configuration problem{}:", issues.size(), issues.size() == 1 ? "" : "s");
    for (const std::string& issue : issues) {
        out += "\n  " + issue;
    }
    return out;
}

}  // namespace

bool PlantSpec::operator==(const PlantSpec& o) const {
    return type == o.type && ugv.mass == o.ugv.mass && ugv.inertia == o.ugv.inertia && ugv.width == o.ugv.width &&
           ugv.rolling_resistance == o.ugv.rolling_resistance &&
           ugv.turning_resistance == o.ugv.turning_resistance && ts == o.ts && same_matrix(A, o.A) &&
           same_matrix(B, o.B) && same_matrix(C, o.C) && same_matrix(Q, o.Q) && same_matrix(R, o.R);
}

bool ControllerSpec::operator==(const ControllerSpec& o) const {
    const auto same_opt = [](const std::optional<Matrix>& a, const std::optional<Matrix>& b) {
        return a.has_value() == b.has_value() && (!a || same_matrix(*a, *b));
    };
    return same_opt(K, o.K) && same_matrix(state_weight, o.state_weight) && same_matrix(input_weight, o.input_weight) &&
           same_opt(kr, o.kr) && tracked_states == o.tracked_states && same_waypoints(reference, o.reference);
}

std::string_view to_string(OutputFormat format) noexcept { return format == OutputFormat::csv ? "csv" : "jsonl"; }

OutputFormat parse_output_format(std::string_view name) {
    if (name == "csv") {
        return OutputFormat::csv;
    }
    if (name == "jsonl") {
        return OutputFormat::jsonl;
    }
    throw ValidationError(fmt::format("format must be \"csv\" or \"jsonl\", got \"{}\"", name));
}

void validate_config(const ScenarioConfig& cfg) {
    const std::vector<std::string> issues = collect_issues(cfg);
    if (!issues.empty()) {
        throw ValidationError(join_issues(issues));
    }
}

ScenarioConfig parse_config(const std::string& text) {
    const json doc = parse_json_text(text);
    Reader rd;
    ScenarioConfig cfg = read_scenario(rd, doc);
    if (rd.issues.empty()) {
        rd.issues = collect_issues(cfg);
    }
    if (!rd.issues.empty()) {
        throw ValidationError(join_issues(rd.issues));
    }
    return cfg;
}

namespace detail {

std::string read_text_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw ParseError(fmt::format("cannot open {}", path.string()));
    }
    std::ostringstream buffer;
    buffer << in.rdbuf();
    return buffer.str();
}

}  // namespace detail

ScenarioConfig load_config(const std::filesystem::path& path) { return parse_config(detail::read_text_file(path)); }

std::string serialize_config(const ScenarioConfig& cfg, int indent) { return config_to_json(cfg).dump(indent); }

std::string config_hash(const ScenarioConfig& cfg) {
    json doc = config_to_json(cfg);
    doc.erase("seed");
    doc.erase("output");
    const std::string canonical = doc.dump();
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (const unsigned char c : canonical) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return fmt::format("{:016x}", h);
}

SweepConfig parse_sweep_config(const std::string& text) {
    const json doc = parse_json_text(text);
    Reader rd;
    SweepConfig sweep;
    if (rd.object(doc, "", {"base", "alphas", "attacks", "target_sensors", "attack_start", "params", "workers"})) {
        if (const auto it = doc.find("base"); it == doc.end()) {
            rd.fail("base", "required");
        } else {
            Reader base_reader;
            sweep.base = read_scenario(base_reader, *it);
            for (const std::string& issue : base_reader.issues) {
                rd.issues.push_back("base." + issue);
            }
        }
        rd.get(doc, "", "alphas", sweep.alphas);
        std::vector<std::string> kinds{"none", "bias_concentrate", "pattern_runs"};
        if (const auto it = doc.find("attacks"); it != doc.end()) {
            kinds.clear();
            if (!it->is_array()) {
                rd.fail("attacks", "expected an array of attack kinds");
            } else {
                for (std::size_t i = 0; i < it->size(); ++i) {
                    std::string name;
                    if (rd.read((*it)[i], fmt::format("attacks[{}]", i), name)) {
                        kinds.push_back(name);
                    }
                }
            }
        }
        for (const std::string& name : kinds) {
            try {
                sweep.attacks.push_back(parse_attack_kind(name));
            } catch (const InvalidParams& e) {
                rd.fail("attacks", e.what());
            }
        }
        rd.get(doc, "", "target_sensors", sweep.target_sensors);
        rd.get(doc, "", "attack_start", sweep.attack_start);
        rd.get(doc, "", "workers", sweep.workers);
        if (const auto it = doc.find("params"); it != doc.end()) {
            sweep.params = read_params(rd, *it, "params");
        }
    }
    if (sweep.alphas.empty()) {
        sweep.alphas = {0.05, 0.20};
    }
    if (rd.issues.empty()) {
        for (const std::string& issue : collect_issues(sweep.base)) {
            rd.issues.push_back("base." + issue);
        }
        for (std::size_t i = 0; i < sweep.alphas.size(); ++i) {
            check_unit_alpha(rd.issues, fmt::format("alphas[{}]", i), sweep.alphas[i]);
        }
        if (sweep.attack_start < 0 || sweep.attack_start >= sweep.base.horizon) {
            rd.issues.push_back("attack_start: must lie inside the base horizon");
        }
        const auto s = static_cast<std::size_t>(sweep.base.plant.C.rows());
        for (std::size_t i : sweep.target_sensors) {
            if (i >= s) {
                rd.issues.push_back(fmt::format("target_sensors: sensor {} out of range", i));
            }
        }
    }
    if (!rd.issues.empty()) {
        throw ValidationError(join_issues(rd.issues));
    }
    return sweep;
}

SweepConfig load_sweep_config(const std::filesystem::path& path) {
    return parse_sweep_config(detail::read_text_file(path));
}

}  // namespace randmon
