#pragma once

namespace randmon {

/// Standard normal CDF Φ(z), computed through erfc so both tails keep
/// full relative precision.
[[nodiscard]] double std_normal_cdf(double z) noexcept;

/// Upper tail 1 − Φ(z) without cancellation.
[[nodiscard]] double std_normal_sf(double z) noexcept;

/// Two-sided tail probability 2·(1 − Φ(|z|)).
[[nodiscard]] double two_sided_p(double z) noexcept;

/// Φ⁻¹(p) for p in (0, 1). Acklam's rational approximation followed by one
/// Newton step on the CDF. Throws DomainError outside (0, 1).
[[nodiscard]] double std_normal_quantile(double p);

/// erf⁻¹(x) for x in (−1, 1), via erf⁻¹(x) = Φ⁻¹((x + 1)/2)/√2.
[[nodiscard]] double erf_inv(double x);

}  // namespace randmon
