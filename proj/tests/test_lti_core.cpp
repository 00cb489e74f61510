#include <cmath>
#include <numbers>

#include <doctest.h>

#include "randmon/errors.hpp"
#include "randmon/lti_core.hpp"

using namespace randmon;

namespace {

Matrix scalar(double v) { return Matrix::Constant(1, 1, v); }

LtiPlant ugv_plant(double ts = 0.05) {
    Matrix Q = Matrix::Zero(3, 3);
    Q.diagonal() << 1e-4, 1e-5, 1e-4;
    return discretize_ugv(UgvParams{}, ts, Matrix::Identity(3, 3), Q, 1e-3 * Matrix::Identity(3, 3));
}

ControllerGains ugv_gains(const LtiPlant& plant) {
    const Matrix K = lqr_gain(plant.A(), plant.B(), Matrix::Identity(3, 3), 0.01 * Matrix::Identity(2, 2));
    Matrix selector = Matrix::Zero(2, 3);
    selector(0, 0) = 1.0;
    selector(1, 1) = 1.0;
    const Matrix kr = reference_gain(plant, K, selector);
    Vector ref(2);
    ref << 0.15, 0.0;
    return ControllerGains(plant, K, kr, constant_reference(ref));
}

// exp(M) as a plain truncated power series.
Matrix taylor_exp(const Matrix& M, int terms) {
    Matrix sum = Matrix::Identity(M.rows(), M.cols());
    Matrix term = sum;
    for (int j = 1; j < terms; ++j) {
        term = term * M / j;
        sum += term;
    }
    return sum;
}

}  // namespace

TEST_CASE("DARE with A = 0 is one Riccati step") {
    const double q = 0.3, r = 0.7;
    const LtiPlant plant(scalar(0.0), scalar(1.0), scalar(1.0), scalar(q), scalar(r));
    const KalmanSteadyState kss = solve_dare(plant);
    CHECK(kss.P(0, 0) == doctest::Approx(q).epsilon(1e-14));
    CHECK(kss.L(0, 0) == 0.0);
    CHECK(kss.Sigma(0, 0) == doctest::Approx(q + r).epsilon(1e-14));
}

TEST_CASE("scalar DARE matches the quadratic root") {
    const double a = 0.9, q = 0.1, r = 0.2;
    const LtiPlant plant(scalar(a), scalar(1.0), scalar(1.0), scalar(q), scalar(r));
    const KalmanSteadyState kss = solve_dare(plant);
    // p² + p·(r − a²r − q) − q·r = 0
    const double bq = r - a * a * r - q;
    const double p = (-bq + std::sqrt(bq * bq + 4 * q * r)) / 2;
    CHECK(std::abs(kss.P(0, 0) - p) < 1e-9);
    CHECK(std::abs(kss.L(0, 0) - a * p / (p + r)) < 1e-9);
    CHECK(std::abs(kss.sigma(0) - std::sqrt(p + r)) < 1e-9);
    CHECK(dare_residual(plant, kss.P) < 1e-11);
}

TEST_CASE("UGV residual covariance is symmetric PSD and dominates R") {
    const LtiPlant plant = ugv_plant();
    const KalmanSteadyState kss = solve_dare(plant);
    CHECK((kss.Sigma - kss.Sigma.transpose()).cwiseAbs().maxCoeff() < 1e-15);
    const Eigen::SelfAdjointEigenSolver<Matrix> eig(kss.Sigma);
    CHECK(eig.eigenvalues().minCoeff() > 0.0);
    for (Eigen::Index i = 0; i < 3; ++i) {
        CHECK(kss.Sigma(i, i) >= plant.R()(i, i));
    }
    CHECK(dare_residual(plant, kss.P) < 1e-10);
}

TEST_CASE("DARE failure modes") {
    const LtiPlant plant(scalar(0.9), scalar(1.0), scalar(1.0), scalar(0.1), scalar(0.2));
    CHECK_THROWS_AS((void)solve_dare(plant, RiccatiOptions{1e-12, 2}), NonConvergence);
    const LtiPlant singular(scalar(0.9), scalar(1.0), scalar(1.0), scalar(0.0), scalar(0.0));
    CHECK_THROWS_AS((void)solve_dare(singular), SingularInnovation);
}

TEST_CASE("plant construction validates its matrices") {
    const Matrix I = Matrix::Identity(2, 2);
    CHECK_THROWS_AS(LtiPlant(I, Matrix::Zero(3, 1), I, I, I), DimensionMismatch);
    CHECK_THROWS_AS(LtiPlant(I, Matrix::Zero(2, 1), I, I, Matrix::Identity(3, 3)), DimensionMismatch);
    Matrix asym = I;
    asym(0, 1) = 0.5;
    CHECK_THROWS_AS(LtiPlant(I, Matrix::Zero(2, 1), I, asym, I), InvalidParameter);
    CHECK_THROWS_AS(LtiPlant(I, Matrix::Zero(2, 1), I, -I, I), InvalidParameter);
}

TEST_CASE("ZOH limits and series oracle") {
    const UgvContinuous c = ugv_continuous(UgvParams{});
    SUBCASE("ts -> 0") {
        const ZohResult d = zoh_discretize(c.Ac, c.Bc, 1e-8);
        CHECK((d.Ad - Matrix::Identity(3, 3)).cwiseAbs().maxCoeff() < 1e-6);
        CHECK(d.Bd.cwiseAbs().maxCoeff() < 1e-6);
    }
    SUBCASE("heading integrates the yaw rate") {
        const LtiPlant plant = ugv_plant(0.05);
        CHECK(std::abs(plant.A()(1, 2) / 0.05 - 1.0) < 0.05);
        CHECK(plant.A()(1, 1) == doctest::Approx(1.0));
    }
    SUBCASE("Ad and Bd against independent series") {
        const double ts = 0.05;
        const ZohResult d = zoh_discretize(c.Ac, c.Bc, ts);
        CHECK((d.Ad - taylor_exp(c.Ac * ts, 20)).cwiseAbs().maxCoeff() < 1e-9);
        // Bd = Σ Ac^k ts^(k+1) / (k+1)! · Bc
        Matrix integral = Matrix::Zero(3, 3);
        Matrix power = Matrix::Identity(3, 3);
        double factor = ts;
        for (int k = 0; k < 20; ++k) {
            integral += power * factor;
            power = power * c.Ac;
            factor *= ts / (k + 2);
        }
        CHECK((d.Bd - integral * c.Bc).cwiseAbs().maxCoeff() < 1e-9);
    }
    SUBCASE("large-norm exponential uses squaring") {
        Matrix M(2, 2);
        M << 0.0, 3.0, -3.0, 0.0;  // rotation by 3 rad
        const Matrix E = expm(M);
        CHECK(E(0, 0) == doctest::Approx(std::cos(3.0)).epsilon(1e-12));
        CHECK(E(0, 1) == doctest::Approx(std::sin(3.0)).epsilon(1e-12));
    }
}

TEST_CASE("UGV parameters must be positive") {
    UgvParams p;
    p.mass = 0.0;
    CHECK_THROWS_AS((void)ugv_continuous(p), InvalidParameter);
    p = UgvParams{};
    p.turning_resistance = -1.0;
    CHECK_THROWS_AS((void)discretize_ugv(p, 0.05, Matrix::Identity(3, 3), Matrix::Identity(3, 3),
                                         Matrix::Identity(3, 3)),
                    InvalidParameter);
    CHECK_THROWS_AS((void)discretize_ugv(UgvParams{}, 0.0, Matrix::Identity(3, 3), Matrix::Identity(3, 3),
                                         Matrix::Identity(3, 3)),
                    InvalidParameter);
}

TEST_CASE("spectral radius") {
    CHECK(spectral_radius(Matrix::Identity(3, 3)) == doctest::Approx(1.0).epsilon(1e-12));
    Matrix D = Matrix::Zero(2, 2);
    D.diagonal() << 0.5, -0.9;
    CHECK(std::abs(spectral_radius(D) - 0.9) < 1e-12);
    Matrix companion(2, 2);
    companion << 1.0, 1.0, 1.0, 0.0;
    CHECK(std::abs(spectral_radius(companion) - std::numbers::phi) < 1e-8);
    Matrix rotation(2, 2);
    rotation << 0.0, -2.0, 2.0, 0.0;
    CHECK(std::abs(spectral_radius(rotation) - 2.0) < 1e-12);
}

TEST_CASE("LQR and reference gain on the UGV") {
    const LtiPlant plant = ugv_plant();
    const ControllerGains gains = ugv_gains(plant);
    CHECK(gains.closed_loop_radius() < 1.0);
    CHECK(spectral_radius(plant.A()) == doctest::Approx(1.0).epsilon(1e-12));
    const Vector xeq = closed_loop_equilibrium(plant, gains, gains.reference(0));
    CHECK(std::abs(xeq(0) - 0.15) < 1e-12);
    CHECK(std::abs(xeq(1)) < 1e-12);
    // Fixed point of the noise-free loop.
    const Vector next = plant.A() * xeq + plant.B() * (gains.K() * xeq + gains.kr() * gains.reference(0));
    CHECK((next - xeq).norm() < 1e-12);
}

TEST_CASE("controller rejects an unstable loop") {
    const LtiPlant plant(scalar(1.2), scalar(1.0), scalar(1.0), scalar(0.1), scalar(0.1));
    CHECK_THROWS_AS(ControllerGains(plant, scalar(0.0), scalar(0.0), constant_reference(Vector::Zero(1))),
                    InvalidParameter);
    CHECK_NOTHROW(ControllerGains(plant, scalar(-0.5), scalar(0.0), constant_reference(Vector::Zero(1))));
}

TEST_CASE("waypoint reference") {
    Vector a(1), b(1);
    a << 1.0;
    b << 2.0;
    const ReferenceProvider ref = waypoint_reference({{0, a}, {10, b}});
    CHECK(ref(0)(0) == 1.0);
    CHECK(ref(9)(0) == 1.0);
    CHECK(ref(10)(0) == 2.0);
    CHECK(ref(1000)(0) == 2.0);
    CHECK_THROWS_AS((void)waypoint_reference({{5, a}}), InvalidParameter);
    CHECK_THROWS_AS((void)waypoint_reference({{0, a}, {0, b}}), InvalidParameter);
}

TEST_CASE("counter RNG streams") {
    CounterRng a(7, 1);
    CounterRng copy = a;
    CounterRng other(7, 2);
    bool differs = false;
    for (int i = 0; i < 100; ++i) {
        const auto x = a();
        CHECK(x == copy());
        differs = differs || x != other();
    }
    CHECK(differs);
    CHECK(a.counter() == 100);
    for (int i = 0; i < 10000; ++i) {
        const double u = a.uniform_open();
        CHECK(u > 0.0);
        CHECK(u < 1.0);
    }
}

TEST_CASE("PSD square root handles semidefinite input") {
    Matrix M = Matrix::Zero(3, 3);
    M(0, 0) = 4.0;
    M(2, 2) = 1e-6;
    const Matrix S = psd_sqrt(M);
    CHECK((S * S.transpose() - M).cwiseAbs().maxCoeff() < 1e-14);
    Matrix full(2, 2);
    full << 2.0, 0.5, 0.5, 1.0;
    const Matrix F = psd_sqrt(full);
    CHECK((F * F.transpose() - full).cwiseAbs().maxCoeff() < 1e-14);
}

TEST_CASE("noiseless step from a consistent state") {
    const LtiPlant plant = ugv_plant();
    const KalmanSteadyState kss = solve_dare(plant);
    const ControllerGains gains = ugv_gains(plant);
    Vector x(3);
    x << 0.1, 0.2, -0.05;
    const SimState state{0, x, x};
    const NoiseDraw none{Vector::Zero(3), Vector::Zero(3)};
    const StepResult res = step(plant, kss, gains, state, Vector::Zero(3), none);
    CHECK(res.record.r.norm() == 0.0);
    CHECK((res.next.x - res.next.xhat).norm() == 0.0);
    CHECK(res.next.k == 1);

    Vector xi(3);
    xi << 0.3, -0.2, 0.0;
    const StepResult attacked = step(plant, kss, gains, state, xi, none);
    CHECK(attacked.record.r(0) == 0.3);
    CHECK(attacked.record.r(1) == -0.2);
    CHECK(attacked.record.r(2) == 0.0);

    CHECK_THROWS_AS((void)step(plant, kss, gains, state, Vector::Zero(2), none), DimensionMismatch);
}

TEST_CASE("error recursion holds at every step") {
    const LtiPlant plant = ugv_plant();
    const KalmanSteadyState kss = solve_dare(plant);
    const ControllerGains gains = ugv_gains(plant);
    NoiseSource noise(plant, 11);
    CounterRng attack_rng(3);
    std::normal_distribution<double> normal;
    SimState state{0, Vector::Zero(3), Vector::Constant(3, 0.01)};
    const Matrix ALC = plant.A() - kss.L * plant.C();
    for (int k = 0; k < 1000; ++k) {
        Vector xi(3);
        for (Eigen::Index i = 0; i < 3; ++i) {
            xi(i) = 0.05 * normal(attack_rng);
        }
        const NoiseDraw draw = noise.draw();
        const Vector e = state.x - state.xhat;
        const StepResult res = step(plant, kss, gains, state, xi, draw);
        const Vector predicted = ALC * e - kss.L * (xi + draw.measurement) + draw.process;
        const Vector actual = res.next.x - res.next.xhat;
        CHECK((predicted - actual).cwiseAbs().maxCoeff() < 1e-12);
        state = res.next;
    }
}

TEST_CASE("unattacked residuals are zero-mean with covariance Sigma") {
    const LtiPlant plant = ugv_plant();
    const KalmanSteadyState kss = solve_dare(plant);
    const ControllerGains gains = ugv_gains(plant);
    NoiseSource noise(plant, 2024);
    const Vector xeq = closed_loop_equilibrium(plant, gains, gains.reference(0));
    SimState state{0, xeq, xeq};
    const int N = 50'000;
    const int burn = 200;
    Vector sum = Vector::Zero(3);
    Matrix outer = Matrix::Zero(3, 3);
    for (int k = 0; k < N + burn; ++k) {
        const StepResult res = step(plant, kss, gains, state, Vector::Zero(3), noise.draw());
        if (k >= burn) {
            sum += res.record.r;
            outer += res.record.r * res.record.r.transpose();
        }
        state = res.next;
    }
    const Vector mean = sum / N;
    const Matrix cov = outer / N - mean * mean.transpose();
    for (Eigen::Index i = 0; i < 3; ++i) {
        CHECK(std::abs(mean(i)) < 4 * kss.sigma(i) / std::sqrt(N));
        CHECK(std::abs(cov(i, i) / kss.Sigma(i, i) - 1.0) < 0.05);
    }
    CHECK((cov - kss.Sigma).norm() / kss.Sigma.norm() < 0.05);
}

TEST_CASE("seeded noise is reproducible") {
    const LtiPlant plant = ugv_plant();
    NoiseSource a(plant, 5), b(plant, 5), c(plant, 6);
    bool differs = false;
    for (int i = 0; i < 100; ++i) {
        const NoiseDraw da = a.draw();
        const NoiseDraw db = b.draw();
        const NoiseDraw dc = c.draw();
        CHECK(da.process == db.process);
        CHECK(da.measurement == db.measurement);
        differs = differs || da.process != dc.process;
    }
    CHECK(differs);
}
