#pragma once

#include <cstdint>
#include <functional>
#include <random>
#include <vector>

#include <Eigen/Dense>

namespace randmon {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// Discrete LTI plant x⁺ = A·x + B·u + ν, y = C·x + η with ν ~ N(0,Q), η ~ N(0,R).
///
/// Construction validates dimensions and that Q and R are symmetric PSD
/// (relative symmetry tolerance 1e-10, eigenvalues ≥ −1e-10).
class LtiPlant {
public:
    LtiPlant(Matrix A, Matrix B, Matrix C, Matrix Q, Matrix R, double ts = 0.0);

    [[nodiscard]] const Matrix& A() const noexcept { return A_; }
    [[nodiscard]] const Matrix& B() const noexcept { return B_; }
    [[nodiscard]] const Matrix& C() const noexcept { return C_; }
    [[nodiscard]] const Matrix& Q() const noexcept { return Q_; }
    [[nodiscard]] const Matrix& R() const noexcept { return R_; }
    [[nodiscard]] double ts() const noexcept { return ts_; }

    [[nodiscard]] Eigen::Index states() const noexcept { return A_.rows(); }
    [[nodiscard]] Eigen::Index inputs() const noexcept { return B_.cols(); }
    [[nodiscard]] Eigen::Index sensors() const noexcept { return C_.rows(); }

private:
    Matrix A_, B_, C_, Q_, R_;
    double ts_;
};

/// Steady-state quantities of the one-step predictor Kalman filter.
struct KalmanSteadyState {
    Matrix P;      // prediction error covariance
    Matrix L;      // predictor gain A·P·Cᵀ·Σ⁻¹
    Matrix Sigma;  // residual covariance R + C·P·Cᵀ
    Vector sigma;  // per-sensor residual standard deviations
    int iterations = 0;
};

struct RiccatiOptions {
    double tolerance = 1e-12;
    int max_iterations = 100'000;
};

/// Filter DARE P = A·P·Aᵀ + Q − A·P·Cᵀ(R + C·P·Cᵀ)⁻¹C·P·Aᵀ by fixed-point
/// iteration from P₀ = Q.
///
/// Throws NonConvergence when the iteration cap is reached and
/// SingularInnovation when R + C·P·Cᵀ has condition number above 1e12.
[[nodiscard]] KalmanSteadyState solve_dare(const LtiPlant& plant, RiccatiOptions options = {});

/// Relative Frobenius residual of the filter DARE at P.
[[nodiscard]] double dare_residual(const LtiPlant& plant, const Matrix& P);

/// Discrete LQR gain for u = K·x (note the sign: K already contains the minus).
[[nodiscard]] Matrix lqr_gain(const Matrix& A, const Matrix& B, const Matrix& state_weight,
                              const Matrix& input_weight, RiccatiOptions options = {});

/// Largest eigenvalue modulus.
[[nodiscard]] double spectral_radius(const Matrix& M);

/// Matrix exponential by scaling and squaring with a Taylor series truncated
/// once terms fall below 1e-16 relative.
[[nodiscard]] Matrix expm(const Matrix& M);

struct ZohResult {
    Matrix Ad;
    Matrix Bd;
};

/// Zero-order-hold discretization through the exponential of [[Ac, Bc], [0, 0]]·ts.
[[nodiscard]] ZohResult zoh_discretize(const Matrix& Ac, const Matrix& Bc, double ts);

/// Physical constants of the skid-steer UGV model. State [v, θ, ω], inputs [F_l, F_r].
struct UgvParams {
    double mass = 17.0;               // kg
    double inertia = 0.55;            // kg·m²
    double width = 0.43;              // m
    double rolling_resistance = 8.0;  // N·s/m
    double turning_resistance = 1.0;  // N·m·s
};

struct UgvContinuous {
    Matrix Ac;
    Matrix Bc;
};

[[nodiscard]] UgvContinuous ugv_continuous(const UgvParams& params);

/// Discretized UGV plant. Q, R and C are caller supplied.
[[nodiscard]] LtiPlant discretize_ugv(const UgvParams& params, double ts, Matrix C, Matrix Q,
                                      Matrix R);

/// Maps a step index to the reference vector fed through k_r.
using ReferenceProvider = std::function<Vector(std::int64_t)>;

[[nodiscard]] ReferenceProvider constant_reference(Vector value);

struct Waypoint {
    std::int64_t step = 0;
    Vector value;
};

/// Piecewise-constant reference: the value of the last waypoint whose step is ≤ k.
/// Waypoints must be sorted by step and the first one must start at step 0.
[[nodiscard]] ReferenceProvider waypoint_reference(std::vector<Waypoint> waypoints);

/// u = K·x̂ + k_r·x_ref(k).
class ControllerGains {
public:
    /// Throws InvalidParameter unless ρ[A + B·K] < 1.
    ControllerGains(const LtiPlant& plant, Matrix K, Matrix kr, ReferenceProvider reference);

    [[nodiscard]] const Matrix& K() const noexcept { return K_; }
    [[nodiscard]] const Matrix& kr() const noexcept { return kr_; }
    [[nodiscard]] Vector reference(std::int64_t k) const { return reference_(k); }
    [[nodiscard]] double closed_loop_radius() const noexcept { return radius_; }

private:
    Matrix K_;
    Matrix kr_;
    ReferenceProvider reference_;
    double radius_;
};

/// Reference gain that makes selector·x track the reference at steady state:
/// k_r = [selector·(I − A − B·K)⁻¹·B]⁻¹. The selector must be m×n.
[[nodiscard]] Matrix reference_gain(const LtiPlant& plant, const Matrix& K, const Matrix& selector);

/// Noise-free equilibrium of the closed loop for a constant reference.
[[nodiscard]] Vector closed_loop_equilibrium(const LtiPlant& plant, const ControllerGains& gains,
                                             const Vector& reference);

/// Counter-based 64-bit generator: output j is SplitMix64(key + j·φ).
/// Satisfies UniformRandomBitGenerator; copies replay the same stream.
class CounterRng {
public:
    using result_type = std::uint64_t;

    explicit CounterRng(std::uint64_t seed, std::uint64_t stream = 0) noexcept;

    static constexpr result_type min() noexcept { return 0; }
    static constexpr result_type max() noexcept { return ~result_type{0}; }
    result_type operator()() noexcept;

    /// Uniform double in the open interval (0, 1).
    double uniform_open() noexcept;

    [[nodiscard]] std::uint64_t counter() const noexcept { return counter_; }

private:
    std::uint64_t key_;
    std::uint64_t counter_ = 0;
};

/// Square root factor S with S·Sᵀ = M. Cholesky, falling back to the
/// symmetric eigendecomposition for semidefinite inputs.
[[nodiscard]] Matrix psd_sqrt(const Matrix& M);

struct NoiseDraw {
    Vector process;      // ν
    Vector measurement;  // η
};

/// ν ~ N(0,Q) and η ~ N(0,R) from a seeded counter-based stream.
class NoiseSource {
public:
    NoiseSource(const LtiPlant& plant, std::uint64_t seed, std::uint64_t stream = 1);

    NoiseDraw draw();
    Vector standard_normal(Eigen::Index size);

private:
    Matrix q_sqrt_;
    Matrix r_sqrt_;
    CounterRng rng_;
    std::normal_distribution<double> normal_;
};

/// Simulation state at step k, before the measurement of step k is taken.
struct SimState {
    std::int64_t k = 0;
    Vector x;     // true state
    Vector xhat;  // one-step prediction x̂_k
};

/// Everything produced while advancing from k to k + 1.
struct StepRecord {
    std::int64_t k = 0;
    Vector x;     // x_k
    Vector xhat;  // x̂_k
    Vector e;     // x_k − x̂_k
    Vector y;     // C·x_k + η_k + ξ_k
    Vector r;     // y_k − C·x̂_k
    Vector u;     // K·x̂_k + k_r·x_ref(k)
    Vector xi;    // ξ_k
};

struct StepResult {
    StepRecord record;
    SimState next;
};

/// One closed-loop step in predictor form:
///   y = C·x + η + ξ,  r = y − C·x̂,  u = K·x̂ + k_r·x_ref(k),
///   x⁺ = A·x + B·u + ν,  x̂⁺ = A·x̂ + B·u + L·r.
/// Throws DimensionMismatch when any vector has the wrong size.
[[nodiscard]] StepResult step(const LtiPlant& plant, const KalmanSteadyState& kss,
                              const ControllerGains& gains, const SimState& state,
                              const Vector& attack, const NoiseDraw& noise);

}  // namespace randmon
