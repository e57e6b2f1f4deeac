//! Standard normal distribution and the scalar optimisation `max_{δ>0} δ Φ(-δ)`.
//!
//! Φ is evaluated as `Φ(x) = erfc(-x/√2) / 2` with `erfc` from the FreeBSD
//! msun implementation (via the `libm` crate): piecewise rational minimax
//! approximations on `[0, 0.84375]`, `[0.84375, 1.25]`, `[1.25, 1/0.35]` and
//! `[1/0.35, 28]`, each with relative error below 2^-57. Working through
//! `erfc` rather than `1 + erf` keeps full relative accuracy in the lower tail,
//! and the absolute error of Φ stays well inside 1e-12 on the whole line.

use serde::{Deserialize, Serialize};

use crate::error::{ensure_finite, ensure_positive, Result};
use crate::optimize::bisect_decreasing;

/// `1/√(2π)`.
pub const FRAC_1_SQRT_2PI: f64 = 0.398_942_280_401_432_7;

/// Upper end of the bracket for the standardized-gap maximiser.
///
/// `g(5) < 5 Φ(-5) < 1.5e-6` while `g(1) ≈ 0.159`, so the maximiser is interior.
pub const DELTA_BRACKET_HI: f64 = 5.0;

/// Tolerance used when constants are built without an explicit tolerance.
pub const DEFAULT_TOLERANCE: f64 = 1e-10;

/// Φ(x) for finite `x`.
pub fn std_normal_cdf(x: f64) -> Result<f64> {
    ensure_finite("x", x)?;
    Ok(cdf(x))
}

/// Unchecked Φ; infinities map to 0 and 1.
#[inline]
pub fn cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x * std::f64::consts::FRAC_1_SQRT_2)
}

/// Standard normal density φ(x).
#[inline]
pub fn pdf(x: f64) -> f64 {
    FRAC_1_SQRT_2PI * (-0.5 * x * x).exp()
}

/// `g(δ) = δ Φ(-δ)`: regret of a standardized gap `δ` at the Neyman fraction.
#[inline]
pub fn gap_objective(delta: f64) -> f64 {
    delta * cdf(-delta)
}

/// `g'(δ) = Φ(-δ) - δ φ(δ)`.
#[inline]
fn gap_objective_slope(delta: f64) -> f64 {
    cdf(-delta) - delta * pdf(delta)
}

/// Maximiser of `δ Φ(-δ)` and the attained maximum.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DeltaStar {
    pub delta_star: f64,
    pub objective_value: f64,
}

/// Solves `Φ(-δ) = δ φ(δ)` on `[0, 5]` by bisection on the derivative.
///
/// `g` is log-concave on `(0, ∞)` so the derivative changes sign exactly once.
pub fn solve_delta_star(tolerance: f64) -> Result<DeltaStar> {
    ensure_positive("tolerance", tolerance)?;
    let delta_star = bisect_decreasing(gap_objective_slope, 0.0, DELTA_BRACKET_HI, tolerance);
    Ok(DeltaStar { delta_star, objective_value: gap_objective(delta_star) })
}

/// Equilibrium constants for one `(σ₁, σ₀)` pair.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EquilibriumConstants {
    /// Maximiser of `δ Φ(-δ)`.
    pub delta_star: f64,
    /// `δ* Φ(-δ*)`.
    pub objective_value: f64,
    /// Separation of the least-favorable prior, `2 δ*`.
    pub delta_prior: f64,
    /// Nature's optimal raw gap, `(σ₁ + σ₀) δ*`.
    pub eta_star: f64,
    /// Minimax regret, `(σ₁ + σ₀) δ* Φ(-δ*)`.
    pub v_star: f64,
    pub sigma1: f64,
    pub sigma0: f64,
}

impl EquilibriumConstants {
    pub fn new(sigma1: f64, sigma0: f64) -> Result<Self> {
        Self::with_tolerance(sigma1, sigma0, DEFAULT_TOLERANCE)
    }

    pub fn with_tolerance(sigma1: f64, sigma0: f64, tolerance: f64) -> Result<Self> {
        ensure_positive("sigma1", sigma1)?;
        ensure_positive("sigma0", sigma0)?;
        let DeltaStar { delta_star, objective_value } = solve_delta_star(tolerance)?;
        let scale = sigma1 + sigma0;
        Ok(Self {
            delta_star,
            objective_value,
            delta_prior: 2.0 * delta_star,
            eta_star: scale * delta_star,
            v_star: scale * objective_value,
            sigma1,
            sigma0,
        })
    }
}

/// Minimax regret value `V* = (σ₁ + σ₀) max_δ δ Φ(-δ)`.
pub fn v_star(sigma1: f64, sigma0: f64) -> Result<f64> {
    Ok(EquilibriumConstants::new(sigma1, sigma0)?.v_star)
}
