#include "randmon/lti_core.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <utility>

#include <fmt/format.h>

#include "randmon/errors.hpp"

namespace randmon {

namespace {

void require_symmetric_psd(const Matrix& M, const char* name) {
    if (M.rows() != M.cols()) {
        throw DimensionMismatch(fmt::format("{} must be square, got {}x{}", name, M.rows(), M.cols()));
    }
    if (!M.allFinite()) {
        throw InvalidParameter(fmt::format("{} has non-finite entries", name));
    }
    const double scale = std::max(1.0, M.cwiseAbs().maxCoeff());
    if ((M - M.transpose()).cwiseAbs().maxCoeff() > 1e-10 * scale) {
        throw InvalidParameter(fmt::format("{} is not symmetric", name));
    }
    if (M.size() == 0) {
        return;
    }
    const Eigen::SelfAdjointEigenSolver<Matrix> eig(0.5 * (M + M.transpose()));
    if (eig.eigenvalues().minCoeff() < -1e-10 * scale) {
        throw InvalidParameter(fmt::format("{} is not positive semidefinite (min eigenvalue {})", name,
                                           eig.eigenvalues().minCoeff()));
    }
}

double symmetric_condition(const Matrix& S) {
    const Eigen::SelfAdjointEigenSolver<Matrix> eig(S);
    const double lo = eig.eigenvalues().minCoeff();
    const double hi = eig.eigenvalues().maxCoeff();
    if (lo <= 0.0) {
        return std::numeric_limits<double>::infinity();
    }
    return hi / lo;
}

constexpr double kMaxInnovationCondition = 1e12;

// P⁺ = A·P·Aᵀ + Q − A·P·Gᵀ(G·P·Gᵀ + R)⁻¹·G·P·Aᵀ, iterated from P₀ = Q.
Matrix riccati_fixed_point(const Matrix& A, const Matrix& G, const Matrix& Q, const Matrix& R,
                           RiccatiOptions options, int& iterations) {
    Matrix P = Q;
    for (int it = 1; it <= options.max_iterations; ++it) {
        const Matrix S = G * P * G.transpose() + R;
        const Eigen::LLT<Matrix> llt(S);
        if (llt.info() != Eigen::Success || llt.rcond() < 1.0 / kMaxInnovationCondition) {
            throw SingularInnovation(
                fmt::format("innovation covariance is numerically singular at iteration {}", it));
        }
        const Matrix APGt = A * P * G.transpose();
        Matrix next = A * P * A.transpose() + Q - APGt * llt.solve(APGt.transpose());
        next = 0.5 * (next + next.transpose());
        const double change = (next - P).norm();
        const double size = next.norm();
        P = std::move(next);
        if (change <= options.tolerance * size || change == 0.0) {
            iterations = it;
            return P;
        }
    }
    throw NonConvergence(
        fmt::format("Riccati iteration did not converge in {} iterations", options.max_iterations));
}

}  // namespace

LtiPlant::LtiPlant(Matrix A, Matrix B, Matrix C, Matrix Q, Matrix R, double ts)
    : A_(std::move(A)), B_(std::move(B)), C_(std::move(C)), Q_(std::move(Q)), R_(std::move(R)), ts_(ts) {
    const auto n = A_.rows();
    if (A_.cols() != n || n == 0) {
        throw DimensionMismatch(fmt::format("A must be square and non-empty, got {}x{}", A_.rows(), A_.cols()));
    }
    if (B_.rows() != n) {
        throw DimensionMismatch(fmt::format("B must have {} rows, got {}", n, B_.rows()));
    }
    if (C_.cols() != n || C_.rows() == 0) {
        throw DimensionMismatch(fmt::format("C must be s x {}, got {}x{}", n, C_.rows(), C_.cols()));
    }
    if (Q_.rows() != n) {
        throw DimensionMismatch(fmt::format("Q must be {}x{}, got {}x{}", n, n, Q_.rows(), Q_.cols()));
    }
    if (R_.rows() != C_.rows()) {
        throw DimensionMismatch(
            fmt::format("R must be {}x{}, got {}x{}", C_.rows(), C_.rows(), R_.rows(), R_.cols()));
    }
    if (!A_.allFinite() || !B_.allFinite() || !C_.allFinite()) {
        throw InvalidParameter("plant matrices must be finite");
    }
    require_symmetric_psd(Q_, "Q");
    require_symmetric_psd(R_, "R");
}

KalmanSteadyState solve_dare(const LtiPlant& plant, RiccatiOptions options) {
    KalmanSteadyState kss;
    kss.P = riccati_fixed_point(plant.A(), plant.C(), plant.Q(), plant.R(), options, kss.iterations);
    kss.Sigma = plant.R() + plant.C() * kss.P * plant.C().transpose();
    if (symmetric_condition(0.5 * (kss.Sigma + kss.Sigma.transpose())) > kMaxInnovationCondition) {
        throw SingularInnovation("steady-state residual covariance is numerically singular");
    }
    // L = A·P·Cᵀ·Σ⁻¹, computed as (Σ⁻¹·C·P·Aᵀ)ᵀ with Σ symmetric.
    const Eigen::LLT<Matrix> llt(kss.Sigma);
    kss.L = llt.solve(plant.C() * kss.P * plant.A().transpose()).transpose();
    kss.sigma = kss.Sigma.diagonal().cwiseSqrt();
    return kss;
}

double dare_residual(const LtiPlant& plant, const Matrix& P) {
    const Matrix& A = plant.A();
    const Matrix& C = plant.C();
    const Matrix S = C * P * C.transpose() + plant.R();
    const Matrix APCt = A * P * C.transpose();
    const Matrix rhs = A * P * A.transpose() + plant.Q() - APCt * S.ldlt().solve(APCt.transpose());
    return (rhs - P).norm() / std::max(P.norm(), std::numeric_limits<double>::min());
}

Matrix lqr_gain(const Matrix& A, const Matrix& B, const Matrix& state_weight, const Matrix& input_weight,
                RiccatiOptions options) {
    if (A.rows() != A.cols() || B.rows() != A.rows() || state_weight.rows() != A.rows() ||
        state_weight.cols() != A.rows() || input_weight.rows() != B.cols() ||
        input_weight.cols() != B.cols()) {
        throw DimensionMismatch("lqr_gain: inconsistent A, B, weight dimensions");
    }
    int iterations = 0;
    const Matrix X = riccati_fixed_point(A.transpose(), B.transpose(), state_weight, input_weight, options,
                                         iterations);
    const Matrix H = input_weight + B.transpose() * X * B;
    return -H.ldlt().solve(B.transpose() * X * A);
}

double spectral_radius(const Matrix& M) {
    if (M.rows() != M.cols()) {
        throw DimensionMismatch("spectral_radius requires a square matrix");
    }
    if (M.size() == 0) {
        return 0.0;
    }
    const Eigen::EigenSolver<Matrix> eig(M, false);
    return eig.eigenvalues().cwiseAbs().maxCoeff();
}

// Relative size of the last kept Taylor term before squaring.
constexpr double kSeriesTolerance = 1e-16;

Matrix expm(const Matrix& M) {
    if (M.rows() != M.cols()) {
        throw DimensionMismatch("expm requires a square matrix");
    }
    const auto n = M.rows();
    const double norm = M.cwiseAbs().colwise().sum().maxCoeff();
    int squarings = 0;
    if (norm > 0.5) {
        squarings = static_cast<int>(std::ceil(std::log2(norm / 0.5)));
    }
    const Matrix scaled = M / std::ldexp(1.0, squarings);

    Matrix sum = Matrix::Identity(n, n);
    Matrix term = Matrix::Identity(n, n);
    for (int j = 1; j < 64; ++j) {
        term = term * scaled / static_cast<double>(j);
        sum += term;
        if (term.cwiseAbs().maxCoeff() <= kSeriesTolerance * sum.cwiseAbs().maxCoeff()) {
            break;
        }
    }
    for (int s = 0; s < squarings; ++s) {
        sum = sum * sum;
    }
    return sum;
}

ZohResult zoh_discretize(const Matrix& Ac, const Matrix& Bc, double ts) {
    if (Ac.rows() != Ac.cols() || Bc.rows() != Ac.rows()) {
        throw DimensionMismatch("zoh_discretize: Ac must be square and Bc must match its rows");
    }
    if (!(ts > 0.0)) {
        throw InvalidParameter(fmt::format("sample period must be positive, got {}", ts));
    }
    const auto n = Ac.rows();
    const auto m = Bc.cols();
    Matrix block = Matrix::Zero(n + m, n + m);
    block.topLeftCorner(n, n) = Ac * ts;
    block.topRightCorner(n, m) = Bc * ts;
    const Matrix E = expm(block);
    return {E.topLeftCorner(n, n), E.topRightCorner(n, m)};
}

UgvContinuous ugv_continuous(const UgvParams& p) {
    const auto positive = [](double v) { return std::isfinite(v) && v > 0.0; };
    if (!positive(p.mass) || !positive(p.inertia) || !positive(p.width) || !positive(p.rolling_resistance) ||
        !positive(p.turning_resistance)) {
        throw InvalidParameter("UGV physical parameters must all be positive");
    }
    UgvContinuous c{Matrix::Zero(3, 3), Matrix::Zero(3, 2)};
    // state [v, θ, ω]
    c.Ac(0, 0) = -p.rolling_resistance / p.mass;
    c.Ac(1, 2) = 1.0;
    c.Ac(2, 2) = -p.turning_resistance / p.inertia;
    c.Bc(0, 0) = 1.0 / p.mass;
    c.Bc(0, 1) = 1.0 / p.mass;
    c.Bc(2, 0) = p.width / (2.0 * p.inertia);
    c.Bc(2, 1) = -p.width / (2.0 * p.inertia);
    return c;
}

LtiPlant discretize_ugv(const UgvParams& params, double ts, Matrix C, Matrix Q, Matrix R) {
    if (!(ts > 0.0)) {
        throw InvalidParameter(fmt::format("sample period must be positive, got {}", ts));
    }
    const UgvContinuous c = ugv_continuous(params);
    ZohResult d = zoh_discretize(c.Ac, c.Bc, ts);
    return LtiPlant(std::move(d.Ad), std::move(d.Bd), std::move(C), std::move(Q), std::move(R), ts);
}

ReferenceProvider constant_reference(Vector value) {
    return [value = std::move(value)](std::int64_t) { return value; };
}

ReferenceProvider waypoint_reference(std::vector<Waypoint> waypoints) {
    if (waypoints.empty() || waypoints.front().step != 0) {
        throw InvalidParameter("waypoint reference needs a first waypoint at step 0");
    }
    for (std::size_t i = 1; i < waypoints.size(); ++i) {
        if (waypoints[i].step <= waypoints[i - 1].step) {
            throw InvalidParameter("waypoints must be strictly increasing in step");
        }
        if (waypoints[i].value.size() != waypoints[0].value.size()) {
            throw DimensionMismatch("waypoints must all have the same dimension");
        }
    }
    return [wps = std::move(waypoints)](std::int64_t k) {
        auto it = std::upper_bound(wps.begin(), wps.end(), k,
                                   [](std::int64_t step, const Waypoint& w) { return step < w.step; });
        return std::prev(it)->value;
    };
}

ControllerGains::ControllerGains(const LtiPlant& plant, Matrix K, Matrix kr, ReferenceProvider reference)
    : K_(std::move(K)), kr_(std::move(kr)), reference_(std::move(reference)) {
    if (K_.rows() != plant.inputs() || K_.cols() != plant.states()) {
        throw DimensionMismatch(fmt::format("K must be {}x{}, got {}x{}", plant.inputs(), plant.states(),
                                            K_.rows(), K_.cols()));
    }
    if (kr_.rows() != plant.inputs()) {
        throw DimensionMismatch(fmt::format("k_r must have {} rows, got {}", plant.inputs(), kr_.rows()));
    }
    if (!reference_) {
        throw InvalidParameter("reference provider is empty");
    }
    if (reference_(0).size() != kr_.cols()) {
        throw DimensionMismatch(
            fmt::format("reference has size {}, k_r expects {}", reference_(0).size(), kr_.cols()));
    }
    radius_ = spectral_radius(plant.A() + plant.B() * K_);
    if (!(radius_ < 1.0)) {
        throw InvalidParameter(fmt::format("closed loop A + B·K is not Schur stable (ρ = {})", radius_));
    }
}

Matrix reference_gain(const LtiPlant& plant, const Matrix& K, const Matrix& selector) {
    const auto n = plant.states();
    if (selector.rows() != plant.inputs() || selector.cols() != n) {
        throw DimensionMismatch(
            fmt::format("tracking selector must be {}x{}, got {}x{}", plant.inputs(), n, selector.rows(),
                        selector.cols()));
    }
    const Matrix closed = Matrix::Identity(n, n) - plant.A() - plant.B() * K;
    const Matrix dc = selector * closed.partialPivLu().solve(plant.B());
    const Eigen::FullPivLU<Matrix> lu(dc);
    if (!lu.isInvertible()) {
        throw InvalidParameter("tracked outputs have a singular DC gain; cannot build k_r");
    }
    return lu.inverse();
}

Vector closed_loop_equilibrium(const LtiPlant& plant, const ControllerGains& gains, const Vector& reference) {
    const auto n = plant.states();
    const Matrix closed = Matrix::Identity(n, n) - plant.A() - plant.B() * gains.K();
    return closed.partialPivLu().solve(plant.B() * gains.kr() * reference);
}

namespace {

constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ULL;

constexpr std::uint64_t splitmix64(std::uint64_t z) noexcept {
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

}  // namespace

CounterRng::CounterRng(std::uint64_t seed, std::uint64_t stream) noexcept
    : key_(splitmix64(seed ^ splitmix64(stream * kGolden + 0x632BE59BD9B4E019ULL))) {}

CounterRng::result_type CounterRng::operator()() noexcept {
    ++counter_;
    return splitmix64(key_ + counter_ * kGolden);
}

double CounterRng::uniform_open() noexcept {
    return (static_cast<double>((*this)() >> 11) + 0.5) * 0x1.0p-53;
}

Matrix psd_sqrt(const Matrix& M) {
    const Eigen::LLT<Matrix> llt(M);
    if (llt.info() == Eigen::Success) {
        return llt.matrixL();
    }
    const Eigen::SelfAdjointEigenSolver<Matrix> eig(0.5 * (M + M.transpose()));
    const Vector root = eig.eigenvalues().cwiseMax(0.0).cwiseSqrt();
    return eig.eigenvectors() * root.asDiagonal();
}

NoiseSource::NoiseSource(const LtiPlant& plant, std::uint64_t seed, std::uint64_t stream)
    : q_sqrt_(psd_sqrt(plant.Q())), r_sqrt_(psd_sqrt(plant.R())), rng_(seed, stream) {}

Vector NoiseSource::standard_normal(Eigen::Index size) {
    Vector z(size);
    for (Eigen::Index i = 0; i < size; ++i) {
        z[i] = normal_(rng_);
    }
    return z;
}

NoiseDraw NoiseSource::draw() {
    NoiseDraw d;
    d.process = q_sqrt_ * standard_normal(q_sqrt_.cols());
    d.measurement = r_sqrt_ * standard_normal(r_sqrt_.cols());
    return d;
}

StepResult step(const LtiPlant& plant, const KalmanSteadyState& kss, const ControllerGains& gains,
                const SimState& state, const Vector& attack, const NoiseDraw& noise) {
    const auto n = plant.states();
    const auto s = plant.sensors();
    if (state.x.size() != n || state.xhat.size() != n || noise.process.size() != n) {
        throw DimensionMismatch(fmt::format("step: state vectors must have size {}", n));
    }
    if (attack.size() != s || noise.measurement.size() != s) {
        throw DimensionMismatch(fmt::format("step: attack and measurement noise must have size {}", s));
    }
    if (kss.L.rows() != n || kss.L.cols() != s) {
        throw DimensionMismatch("step: Kalman gain does not match the plant");
    }

    StepResult out;
    StepRecord& rec = out.record;
    rec.k = state.k;
    rec.x = state.x;
    rec.xhat = state.xhat;
    rec.e = state.x - state.xhat;
    rec.xi = attack;
    rec.y = plant.C() * state.x + noise.measurement + attack;
    // Formed as (C·e + η) + ξ: algebraically y − C·x̂, and bitwise the residual
    // an omniscient attacker computes before choosing ξ.
    const Vector natural = plant.C() * rec.e + noise.measurement;
    rec.r = natural + attack;
    rec.u = gains.K() * state.xhat + gains.kr() * gains.reference(state.k);

    out.next.k = state.k + 1;
    out.next.x = plant.A() * state.x + plant.B() * rec.u + noise.process;
    out.next.xhat = plant.A() * state.xhat + plant.B() * rec.u + kss.L * rec.r;
    return out;
}

}  // namespace randmon
