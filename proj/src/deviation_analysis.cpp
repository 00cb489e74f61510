#include "randmon/deviation_analysis.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <fmt/format.h>

#include "randmon/errors.hpp"

namespace randmon {

namespace {

constexpr double kIllConditioned = 1e10;
constexpr std::size_t kMinRuns = 10;

double condition_number(const Matrix& M) {
    const Eigen::JacobiSVD<Matrix> svd(M);
    const Vector& s = svd.singularValues();
    if (s.size() == 0) {
        return 1.0;
    }
    const double smallest = s(s.size() - 1);
    return smallest > 0.0 ? s(0) / smallest : std::numeric_limits<double>::infinity();
}

}  // namespace

Vector expected_residual(BoundaryKind /*kind*/, const std::vector<double>& tau, const std::vector<std::size_t>& attacked,
                         const SaturationBudget& budget) {
    Vector out = Vector::Zero(static_cast<Eigen::Index>(tau.size()));
    for (std::size_t i : attacked) {
        if (i >= tau.size()) {
            throw DimensionMismatch(fmt::format("attacked sensor {} out of range ({} thresholds)", i, tau.size()));
        }
        out(static_cast<Eigen::Index>(i)) = tau[i] * budget.ratio;
    }
    return out;
}

DeviationPrediction deviation_limit(const LtiPlant& plant, const KalmanSteadyState& kss, const ControllerGains& gains,
                                    const Vector& e_r) {
    if (e_r.size() != plant.sensors()) {
        throw DimensionMismatch(fmt::format("E[r] has {} entries, plant has {} sensors", e_r.size(), plant.sensors()));
    }
    const Eigen::Index n = plant.states();
    const Matrix I = Matrix::Identity(n, n);
    const Matrix open = I - plant.A();
    const Matrix BK = plant.B() * gains.K();
    const Matrix closed = open - BK;

    DeviationPrediction out;
    out.expected_residual = e_r;
    out.cond_open_loop = condition_number(open);
    out.cond_closed_loop = condition_number(closed);
    out.ill_conditioned = out.cond_open_loop > kIllConditioned || out.cond_closed_loop > kIllConditioned;
    out.stable = spectral_radius(plant.A()) < 1.0 && gains.closed_loop_radius() < 1.0;
    if (!out.stable) {
        return out;
    }
    out.error_limit = open.partialPivLu().solve(kss.L * e_r);
    out.delta = closed.partialPivLu().solve(BK * out.error_limit);
    return out;
}

std::size_t burn_in_steps(const LtiPlant& plant, const ControllerGains& gains) {
    const double rho = std::max(spectral_radius(plant.A()), gains.closed_loop_radius());
    if (!(rho < 1.0)) {
        throw InvalidParameter(fmt::format("burn-in undefined for spectral radius {}", rho));
    }
    if (rho <= 0.0) {
        return 1;
    }
    return std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(5.0 / -std::log(rho))));
}

ValidationReport validate_against_simulation(const DeviationPrediction& prediction, const std::vector<Trajectory>& attacked,
                                             const std::vector<Trajectory>& baseline, std::size_t burn_in,
                                             std::size_t horizon, double rel_tol) {
    if (attacked.size() < kMinRuns) {
        throw InsufficientEnsemble(fmt::format("need at least {} runs, got {}", kMinRuns, attacked.size()));
    }
    if (!baseline.empty() && baseline.size() != attacked.size()) {
        throw DimensionMismatch("baseline ensemble size differs from the attacked ensemble");
    }
    if (!prediction.stable || prediction.delta.size() == 0) {
        throw InvalidParameter("cannot validate an unstable prediction");
    }
    if (!(burn_in < horizon)) {
        throw InvalidParameter(fmt::format("burn_in {} must be below horizon {}", burn_in, horizon));
    }
    const Eigen::Index n = prediction.delta.size();
    const auto first = static_cast<Eigen::Index>(burn_in);
    const auto count = static_cast<Eigen::Index>(horizon - burn_in);

    const std::size_t runs = attacked.size();
    Matrix per_run(n, static_cast<Eigen::Index>(runs));
    for (std::size_t r = 0; r < runs; ++r) {
        const Trajectory& xa = attacked[r];
        if (xa.rows() != n || xa.cols() < static_cast<Eigen::Index>(horizon)) {
            throw DimensionMismatch(fmt::format("run {} has shape {}x{}, need {}x{}", r, xa.rows(), xa.cols(), n, horizon));
        }
        Vector mean = xa.middleCols(first, count).rowwise().mean();
        if (!baseline.empty()) {
            const Trajectory& xb = baseline[r];
            if (xb.rows() != n || xb.cols() < static_cast<Eigen::Index>(horizon)) {
                throw DimensionMismatch(fmt::format("baseline run {} has the wrong shape", r));
            }
            mean -= xb.middleCols(first, count).rowwise().mean();
        }
        per_run.col(static_cast<Eigen::Index>(r)) = mean;
    }

    ValidationReport out;
    out.runs = runs;
    out.predicted = prediction.delta;
    out.measured = per_run.rowwise().mean();
    const Matrix centered = per_run.colwise() - out.measured;
    const double dof = static_cast<double>(runs - 1);
    out.standard_error =
        (centered.array().square().rowwise().sum() / dof).sqrt() / std::sqrt(static_cast<double>(runs));
    out.relative_error = Vector(n);
    out.within.assign(static_cast<std::size_t>(n), false);
    out.all_within = true;
    for (Eigen::Index j = 0; j < n; ++j) {
        const double gap = std::abs(out.measured(j) - out.predicted(j));
        const double scale = std::abs(out.predicted(j));
        out.relative_error(j) = scale > 0.0 ? gap / scale : std::numeric_limits<double>::infinity();
        const bool ok = gap <= std::max(rel_tol * scale, 4.0 * out.standard_error(j));
        out.within[static_cast<std::size_t>(j)] = ok;
        out.all_within = out.all_within && ok;
    }
    return out;
}

}  // namespace randmon
