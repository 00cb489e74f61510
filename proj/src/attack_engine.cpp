#include "randmon/attack_engine.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <random>
#include <string>

#include <fmt/format.h>

#include "randmon/boundary_detectors.hpp"
#include "randmon/errors.hpp"
#include "randmon/randomness_monitors.hpp"

namespace randmon {

namespace {

// ξ = target − r_nat, moved one ulp at a time toward zero residual until the
// residual the filter will form, r_nat + ξ, passes `inside`.
template <typename Inside>
double settle(double natural_residual, double target, Inside inside) noexcept {
    const double toward = target >= 0.0 ? -std::numeric_limits<double>::infinity()
                                        : std::numeric_limits<double>::infinity();
    double xi = target - natural_residual;
    for (int i = 0; i < 64 && !inside(natural_residual + xi); ++i) {
        xi = std::nextafter(xi, toward);
    }
    return xi;
}

double settle_bdd(double natural_residual, double target, double tau) noexcept {
    return settle(natural_residual, target, [tau](double r) { return std::abs(r) <= tau; });
}

// Same arithmetic as cusum_step, so S_k ≤ τ^C holds bit for bit.
double settle_cusum(double natural_residual, double target, double s_prev, double tau, double bias) noexcept {
    return settle(natural_residual, target,
                  [=](double r) { return std::max(0.0, s_prev + std::abs(r) - bias) <= tau; });
}
constexpr int kScheduleCandidates = 512;
constexpr std::size_t kPatternGroup = 4;

template <typename Enum, std::size_t N>
Enum parse_named(std::string_view name, const std::array<std::pair<std::string_view, Enum>, N>& table,
                 std::string_view what) {
    for (const auto& [key, value] : table) {
        if (key == name) {
            return value;
        }
    }
    std::string known;
    for (const auto& entry : table) {
        known += known.empty() ? "" : ", ";
        known += entry.first;
    }
    throw InvalidParams(fmt::format("unknown {} '{}' (expected one of: {})", what, name, known));
}

constexpr std::array<std::pair<std::string_view, AttackKind>, 8> kKindNames{{
    {"none", AttackKind::none},
    {"bias_concentrate", AttackKind::bias_concentrate},
    {"pattern_runs", AttackKind::pattern_runs},
    {"boundary_violation", AttackKind::boundary_violation},
    {"worst_case_bdd", AttackKind::worst_case_bdd},
    {"worst_case_cusum", AttackKind::worst_case_cusum},
    {"worst_case_bdd_randaware", AttackKind::worst_case_bdd_randaware},
    {"worst_case_cusum_randaware", AttackKind::worst_case_cusum_randaware},
}};

constexpr std::array<std::pair<std::string_view, ConcentrateMode>, 2> kConcentrateNames{{
    {"sign_flip", ConcentrateMode::sign_flip},
    {"gaussian", ConcentrateMode::gaussian},
}};

constexpr std::array<std::pair<std::string_view, PatternMode>, 2> kPatternNames{{
    {"sorted_groups", PatternMode::sorted_groups},
    {"sawtooth", PatternMode::sawtooth},
}};

constexpr std::array<std::pair<std::string_view, NonSaturating>, 2> kNonSaturatingNames{{
    {"zero", NonSaturating::zero},
    {"bias", NonSaturating::bias},
}};

template <typename Enum, std::size_t N>
std::string_view name_of(Enum value, const std::array<std::pair<std::string_view, Enum>, N>& table) noexcept {
    for (const auto& [key, v] : table) {
        if (v == value) {
            return key;
        }
    }
    return "?";
}

bool is_randaware(AttackKind kind) noexcept {
    return kind == AttackKind::worst_case_bdd_randaware || kind == AttackKind::worst_case_cusum_randaware;
}

bool needs_bdd(AttackKind kind) noexcept {
    return kind == AttackKind::worst_case_bdd || kind == AttackKind::worst_case_bdd_randaware;
}

bool needs_cusum(AttackKind kind) noexcept {
    return kind == AttackKind::worst_case_cusum || kind == AttackKind::worst_case_cusum_randaware;
}

// Threshold the scripted attacks must respect: the deployed BDD, or the BDD
// that would be tuned at the monitor's α when none is deployed.
double scripted_bound(const DetectorKnowledge& knowledge, std::size_t sensor) {
    if (!knowledge.tau_bdd.empty()) {
        return knowledge.tau_bdd[sensor];
    }
    return tune_bdd(knowledge.sigma[sensor], knowledge.wsr_alpha);
}

// Ideal CUSUM residual levels (δ = 0) of the randomness-aware attack, in the
// cyclic steady state of the schedule.
ResidualTemplate cusum_template(double tau, double bias, NonSaturating mode) {
    return [=](const std::vector<bool>& schedule) {
        std::vector<double> levels(schedule.size());
        double s = 0.0;
        for (int pass = 0; pass < 2; ++pass) {
            for (std::size_t j = 0; j < schedule.size(); ++j) {
                double r = 0.0;
                if (schedule[j]) {
                    r = bias + tau - s;
                } else if (mode == NonSaturating::bias) {
                    r = bias;
                }
                s = std::max(0.0, s + std::abs(r) - bias);
                levels[j] = r;
            }
        }
        return levels;
    };
}

}  // namespace

std::string_view to_string(AttackKind kind) noexcept { return name_of(kind, kKindNames); }
std::string_view to_string(ConcentrateMode mode) noexcept { return name_of(mode, kConcentrateNames); }
std::string_view to_string(PatternMode mode) noexcept { return name_of(mode, kPatternNames); }
std::string_view to_string(NonSaturating mode) noexcept { return name_of(mode, kNonSaturatingNames); }

AttackKind parse_attack_kind(std::string_view name) { return parse_named(name, kKindNames, "attack kind"); }
ConcentrateMode parse_concentrate_mode(std::string_view name) {
    return parse_named(name, kConcentrateNames, "concentrate mode");
}
PatternMode parse_pattern_mode(std::string_view name) { return parse_named(name, kPatternNames, "pattern mode"); }
NonSaturating parse_nonsaturating(std::string_view name) {
    return parse_named(name, kNonSaturatingNames, "non-saturating mode");
}

SaturationBudget saturation_budget(std::size_t ell, double alpha_des) {
    if (ell < 20) {
        throw DomainError(fmt::format("saturation_budget requires ell >= 20, got {}", ell));
    }
    const double omega_minus = wsr_bounds(ell, alpha_des).omega_minus;
    const auto rank_sum = [](std::size_t j) { return 0.5 * static_cast<double>(j) * static_cast<double>(j + 1); };

    // j(j+1)/2 > Ω solved in closed form, then nudged onto the exact integer.
    std::size_t j = 0;
    if (omega_minus > 0.0) {
        j = static_cast<std::size_t>(std::floor((std::sqrt(1.0 + 8.0 * omega_minus) - 1.0) / 2.0));
    }
    while (j <= ell && !(rank_sum(j) > omega_minus)) {
        ++j;
    }
    while (j > 0 && rank_sum(j - 1) > omega_minus) {
        --j;
    }
    if (j > ell) {
        throw InfeasibleBudget(fmt::format("no non-saturating count keeps W- above {} for ell = {}", omega_minus, ell));
    }
    SaturationBudget out;
    out.ell = ell;
    out.gamma = j;
    out.beta = ell - j;
    out.ratio = static_cast<double>(out.beta) / static_cast<double>(ell);
    return out;
}

std::vector<double> boundary_template(const std::vector<bool>& schedule) {
    std::vector<double> levels(schedule.size());
    std::transform(schedule.begin(), schedule.end(), levels.begin(), [](bool sat) { return sat ? 1.0 : 0.0; });
    return levels;
}

double expected_turning_points(const std::vector<double>& levels) {
    const std::size_t n = levels.size();
    if (n < 3) {
        return 0.0;
    }
    double scale = 0.0;
    for (double v : levels) {
        scale = std::max(scale, std::abs(v));
    }
    const double tol = 1e-9 * std::max(scale, 1.0);
    const auto tied = [tol](double a, double b) { return std::abs(a - b) <= tol; };

    double total = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
        const double a = levels[(j + n - 1) % n];
        const double b = levels[j];
        const double c = levels[(j + 1) % n];
        const bool left = tied(a, b);
        const bool right = tied(b, c);
        if (left && right) {
            total += 2.0 / 3.0;
        } else if (left || right) {
            total += 0.5;
        } else if ((b > a && b > c) || (b < a && b < c)) {
            total += 1.0;
        }
    }
    return total;
}

std::vector<bool> schedule_saturation(const SaturationBudget& budget, CounterRng& rng, const ResidualTemplate& levels) {
    if (budget.beta + budget.gamma != budget.ell) {
        throw InvalidParams("saturation budget does not sum to its window length");
    }
    std::vector<bool> candidate(budget.ell, false);
    std::fill_n(candidate.begin(), budget.beta, true);
    if (budget.beta == 0 || budget.gamma == 0) {
        return candidate;
    }
    const double target = 2.0 * static_cast<double>(budget.ell) / 3.0;
    std::vector<bool> best;
    double best_score = std::numeric_limits<double>::infinity();
    for (int attempt = 0; attempt < kScheduleCandidates; ++attempt) {
        std::shuffle(candidate.begin(), candidate.end(), rng);
        const double score = std::abs(expected_turning_points(levels(candidate)) - target);
        if (score < best_score) {
            best_score = score;
            best = candidate;
        }
        if (best_score < 0.5) {
            break;
        }
    }
    return best;
}

double attack_worst_case_bdd(double natural_residual, double tau_bdd) noexcept {
    return settle_bdd(natural_residual, tau_bdd, tau_bdd);
}

double attack_worst_case_bdd_randaware(double natural_residual, double tau_bdd, bool saturating,
                                       double delta) noexcept {
    return settle_bdd(natural_residual, saturating ? tau_bdd - delta : -delta, tau_bdd);
}

double attack_worst_case_cusum(double natural_residual, double s_prev, double tau_cusum, double bias) noexcept {
    return settle_cusum(natural_residual, bias + tau_cusum - s_prev, s_prev, tau_cusum, bias);
}

double attack_worst_case_cusum_randaware(double natural_residual, double s_prev, double tau_cusum, double bias,
                                         bool saturating, double delta, NonSaturating mode) noexcept {
    double target = -delta;
    if (saturating) {
        target = bias + tau_cusum - s_prev - delta;
    } else if (mode == NonSaturating::bias) {
        target = bias - delta;
    }
    return settle_cusum(natural_residual, target, s_prev, tau_cusum, bias);
}

void validate_plan(const AttackPlan& plan, const DetectorKnowledge& knowledge) {
    if (plan.kind == AttackKind::none) {
        return;
    }
    const std::string kind{to_string(plan.kind)};
    if (!(plan.start < plan.stop)) {
        throw InvalidParams(fmt::format("{}: start {} must be below stop {}", kind, plan.start, plan.stop));
    }
    if (plan.start < 0) {
        throw InvalidParams(fmt::format("{}: start must be non-negative", kind));
    }
    if (plan.target_sensors.empty()) {
        throw InvalidParams(fmt::format("{}: no target sensors", kind));
    }
    std::vector<std::size_t> sorted = plan.target_sensors;
    std::sort(sorted.begin(), sorted.end());
    if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end()) {
        throw InvalidParams(fmt::format("{}: duplicate target sensor", kind));
    }
    if (sorted.back() >= knowledge.sigma.size()) {
        throw InvalidParams(fmt::format("{}: sensor {} out of range (plant has {})", kind, sorted.back(),
                                        knowledge.sigma.size()));
    }
    if (needs_bdd(plan.kind) && knowledge.tau_bdd.size() != knowledge.sigma.size()) {
        throw InvalidParams(fmt::format("{} requires a deployed bad-data detector", kind));
    }
    if (needs_cusum(plan.kind)) {
        if (knowledge.tau_cusum.size() != knowledge.sigma.size() ||
            knowledge.cusum_bias.size() != knowledge.sigma.size()) {
            throw InvalidParams(fmt::format("{} requires a deployed CUSUM detector", kind));
        }
    }
    const AttackParams& p = plan.params;
    if (is_randaware(plan.kind) && !(p.epsilon_scale > 0.0 && p.epsilon_scale < 1e-2)) {
        throw InvalidParams(fmt::format("{}: epsilon_scale must be in (0, 0.01), got {}", kind, p.epsilon_scale));
    }
    for (std::size_t i : sorted) {
        const double sigma = knowledge.sigma[i];
        switch (plan.kind) {
            case AttackKind::bias_concentrate:
                if (p.concentrate_mode == ConcentrateMode::sign_flip) {
                    if (!(p.sign_bias >= 0.0 && p.sign_bias <= 1.0)) {
                        throw InvalidParams(fmt::format("{}: sign_bias must be in [0, 1]", kind));
                    }
                } else {
                    const double tau = scripted_bound(knowledge, i);
                    const double mu = p.mean_scale * tau;
                    const double sd = p.std_scale * sigma;
                    if (mu == 0.0 || !(sd >= 0.0) || !(sd < sigma) || std::abs(mu) + 3.0 * sd > tau) {
                        throw InvalidParams(fmt::format(
                            "{}: need mean != 0, 0 <= std < sigma and |mean| + 3 std <= tau_bdd on sensor {} "
                            "(mean {}, std {}, sigma {}, tau {})",
                            kind, i, mu, sd, sigma, tau));
                    }
                }
                break;
            case AttackKind::pattern_runs:
                if (p.pattern_mode == PatternMode::sawtooth &&
                    !(p.pattern_amplitude > 0.0 && p.pattern_amplitude * sigma < scripted_bound(knowledge, i))) {
                    throw InvalidParams(
                        fmt::format("{}: sawtooth amplitude must be positive and below tau_bdd on sensor {}", kind, i));
                }
                break;
            case AttackKind::boundary_violation:
                if (!(p.violation_scale > 0.0)) {
                    throw InvalidParams(fmt::format("{}: violation_scale must be positive", kind));
                }
                break;
            case AttackKind::worst_case_cusum:
            case AttackKind::worst_case_cusum_randaware:
                if (!(knowledge.tau_cusum[i] > 0.0)) {
                    throw InvalidParams(fmt::format("{}: CUSUM threshold on sensor {} is not positive", kind, i));
                }
                break;
            default:
                break;
        }
    }
}

Attacker::Attacker(std::vector<AttackPlan> plans, DetectorKnowledge knowledge, std::uint64_t seed)
    : plans_(std::move(plans)), knowledge_(std::move(knowledge)) {
    for (const AttackPlan& plan : plans_) {
        validate_plan(plan, knowledge_);
    }
    for (std::size_t a = 0; a < plans_.size(); ++a) {
        for (std::size_t b = a + 1; b < plans_.size(); ++b) {
            const AttackPlan& pa = plans_[a];
            const AttackPlan& pb = plans_[b];
            if (pa.kind == AttackKind::none || pb.kind == AttackKind::none) {
                continue;
            }
            const bool overlap_time = pa.start < pb.stop && pb.start < pa.stop;
            for (std::size_t i : pa.target_sensors) {
                if (overlap_time && std::find(pb.target_sensors.begin(), pb.target_sensors.end(), i) !=
                                        pb.target_sensors.end()) {
                    throw InvalidParams(fmt::format("attack plans {} and {} overlap on sensor {}", a, b, i));
                }
            }
        }
    }

    for (std::size_t p = 0; p < plans_.size(); ++p) {
        const AttackPlan& plan = plans_[p];
        if (plan.kind == AttackKind::none) {
            continue;
        }
        if (is_randaware(plan.kind) && !budget_) {
            budget_ = saturation_budget(knowledge_.window, knowledge_.wsr_alpha);
        }
        for (std::size_t i : plan.target_sensors) {
            Channel ch;
            ch.plan = p;
            ch.sensor = i;
            ch.rng = CounterRng(seed, (std::uint64_t{0xA7} << 40) | (std::uint64_t{p} << 20) | std::uint64_t{i});
            if (plan.kind == AttackKind::worst_case_bdd_randaware) {
                ch.schedule = schedule_saturation(*budget_, ch.rng);
            } else if (plan.kind == AttackKind::worst_case_cusum_randaware) {
                ch.schedule = schedule_saturation(
                    *budget_, ch.rng,
                    cusum_template(knowledge_.tau_cusum[i], knowledge_.cusum_bias[i], plan.params.cusum_nonsaturating));
            }
            channels_.push_back(std::move(ch));
        }
    }
}

Vector Attacker::attack(const AttackerView& view) {
    const auto s = static_cast<Eigen::Index>(knowledge_.sigma.size());
    if (view.natural_residual.size() != s) {
        throw DimensionMismatch(
            fmt::format("attacker view has {} residuals, expected {}", view.natural_residual.size(), s));
    }
    Vector xi = Vector::Zero(s);
    for (Channel& ch : channels_) {
        if (plans_[ch.plan].active(view.k)) {
            xi(static_cast<Eigen::Index>(ch.sensor)) = channel_attack(ch, view);
        }
    }
    return xi;
}

double Attacker::channel_attack(Channel& ch, const AttackerView& view) {
    const AttackPlan& plan = plans_[ch.plan];
    const AttackParams& p = plan.params;
    const std::size_t i = ch.sensor;
    const double sigma = knowledge_.sigma[i];
    const double r_nat = view.natural_residual(static_cast<Eigen::Index>(i));
    const auto offset = static_cast<std::size_t>(view.k - plan.start);

    const auto s_prev = [&] {
        if (view.cusum_s_prev.size() != knowledge_.sigma.size()) {
            throw DimensionMismatch("attacker view lacks the CUSUM statistics");
        }
        return view.cusum_s_prev[i];
    };
    const auto delta = [&] { return ch.rng.uniform_open() * p.epsilon_scale * sigma; };
    const auto saturating = [&] { return ch.schedule[offset % ch.schedule.size()]; };

    switch (plan.kind) {
        case AttackKind::none:
            return 0.0;
        case AttackKind::bias_concentrate: {
            if (p.concentrate_mode == ConcentrateMode::sign_flip) {
                // The magnitude is drawn afresh: reusing |r_nat| would feed the
                // estimation error back into the attack and diverge.
                const double sign = ch.rng.uniform_open() < p.sign_bias ? 1.0 : -1.0;
                return sign * std::abs(sigma * ch.normal(ch.rng)) - r_nat;
            }
            const double tau = scripted_bound(knowledge_, i);
            const double draw = p.mean_scale * tau + p.std_scale * sigma * ch.normal(ch.rng);
            return settle_bdd(r_nat, std::clamp(draw, -tau, tau), tau);
        }
        case AttackKind::pattern_runs: {
            const std::size_t phase = offset % kPatternGroup;
            if (p.pattern_mode == PatternMode::sawtooth) {
                static constexpr std::array<double, kPatternGroup> kRamp{-1.0, -1.0 / 3.0, 1.0 / 3.0, 1.0};
                return p.pattern_amplitude * sigma * kRamp[phase] - r_nat;
            }
            if (phase == 0 || ch.group.size() != kPatternGroup) {
                ch.group.resize(kPatternGroup);
                for (double& g : ch.group) {
                    g = sigma * ch.normal(ch.rng);
                }
                std::sort(ch.group.begin(), ch.group.end());
            }
            return ch.group[phase] - r_nat;
        }
        case AttackKind::boundary_violation: {
            const double sign = ch.rng.uniform_open() < 0.5 ? 1.0 : -1.0;
            return sign * p.violation_scale * sigma;
        }
        case AttackKind::worst_case_bdd:
            return attack_worst_case_bdd(r_nat, knowledge_.tau_bdd[i]);
        case AttackKind::worst_case_cusum:
            return attack_worst_case_cusum(r_nat, s_prev(), knowledge_.tau_cusum[i], knowledge_.cusum_bias[i]);
        case AttackKind::worst_case_bdd_randaware:
            return attack_worst_case_bdd_randaware(r_nat, knowledge_.tau_bdd[i], saturating(), delta());
        case AttackKind::worst_case_cusum_randaware:
            return attack_worst_case_cusum_randaware(r_nat, s_prev(), knowledge_.tau_cusum[i],
                                                     knowledge_.cusum_bias[i], saturating(), delta(),
                                                     p.cusum_nonsaturating);
    }
    return 0.0;
}

}  // namespace randmon
