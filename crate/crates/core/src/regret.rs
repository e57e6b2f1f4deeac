//! Frequentist regret of threshold policies, in closed form and by simulation.

use serde::{Deserialize, Serialize};

use crate::diffusion::{exact_terminal_draw, simulate_path_with, Environment, DEFAULT_STEPS};
use crate::error::{ensure_finite, ensure_positive, Error, Result};
use crate::normal::cdf;
use crate::policy::{threshold_decision, Arm, PolicySpec};
use crate::seed::map_replications;
use crate::stats::Summary;

/// Below this many replications an estimate carries a warning flag.
pub const LOW_REPLICATION_THRESHOLD: u64 = 1000;

/// Upper end of the gap bracket, in units of `σ₁ + σ₀`, for the inner maximisation.
///
/// At `c = 0` the objective there is `20 (σ₁+σ₀) Φ(-20) < 1e-87`, far below
/// 1e-15 of the peak.
pub const GAP_BRACKET_MULTIPLE: f64 = 20.0;

/// Monte Carlo estimate of expected regret.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegretEstimate {
    pub mean: f64,
    pub std_error: f64,
    pub replications: u64,
    /// Set when `replications` is below [`LOW_REPLICATION_THRESHOLD`].
    pub low_replication_warning: bool,
}

impl RegretEstimate {
    pub(crate) fn from_samples(samples: &[f64]) -> Result<Self> {
        let s = Summary::of(samples)?;
        Ok(Self {
            mean: s.mean,
            std_error: s.std_error,
            replications: s.count,
            low_replication_warning: s.count < LOW_REPLICATION_THRESHOLD,
        })
    }
}

/// Regret of implementing `arm` when the means differ by `gap = μ₁ - μ₀`.
#[inline]
pub fn realized_regret(gap: f64, arm: Arm) -> f64 {
    gap.max(0.0) - gap * arm.indicator()
}

/// Mean of the standardized statistic `x₁/σ₁ - x₀/σ₀` at fraction `gamma`; its variance is 1.
#[inline]
pub fn standardized_drift(gamma: f64, mu1: f64, mu0: f64, sigma1: f64, sigma0: f64) -> f64 {
    mu1 * gamma / sigma1 - mu0 * (1.0 - gamma) / sigma0
}

/// Expected regret of the policy `(γ, c)` in `env`.
///
/// With `d` the standardized drift, arm 1 is chosen with probability
/// `Φ(d - c)`, so regret is `(μ₁-μ₀) Φ(c - d)` when arm 1 is best and
/// `(μ₀-μ₁) Φ(d - c)` when arm 0 is best.
pub fn regret_closed_form(gamma: f64, c: f64, env: &Environment) -> Result<f64> {
    if !(0.0..=1.0).contains(&gamma) {
        return Err(Error::domain(format!("sampling fraction must lie in [0, 1], got {gamma}")));
    }
    ensure_finite("c", c)?;
    Ok(regret_unchecked(gamma, c, env))
}

pub(crate) fn regret_unchecked(gamma: f64, c: f64, env: &Environment) -> f64 {
    let gap = env.gap();
    let drift = standardized_drift(gamma, env.mu1, env.mu0, env.sigma1, env.sigma0);
    if gap > 0.0 {
        gap * cdf(c - drift)
    } else if gap < 0.0 {
        -gap * cdf(drift - c)
    } else {
        0.0
    }
}

/// Monte Carlo regret with the default Euler grid for data-dependent rules.
pub fn regret_monte_carlo(
    policy: &PolicySpec,
    env: &Environment,
    replications: u64,
    master_seed: u64,
) -> Result<RegretEstimate> {
    regret_monte_carlo_with_steps(policy, env, replications, master_seed, DEFAULT_STEPS)
}

/// Monte Carlo regret. Constant-fraction rules use the exact terminal
/// sampler; other rules are simulated on an Euler grid of `steps` intervals.
pub fn regret_monte_carlo_with_steps(
    policy: &PolicySpec,
    env: &Environment,
    replications: u64,
    master_seed: u64,
    steps: u32,
) -> Result<RegretEstimate> {
    if replications < 2 {
        return Err(Error::domain("Monte Carlo regret needs at least two replications"));
    }
    if steps == 0 {
        return Err(Error::domain("a path needs at least one step"));
    }
    let gap = env.gap();
    let c = policy.threshold_c;
    let samples = match policy.sampling.constant_fraction() {
        Some(gamma) => map_replications(master_seed, replications, |rng| {
            let state = exact_terminal_draw(env, gamma, rng);
            realized_regret(gap, threshold_decision(&state, env.sigma1, env.sigma0, c))
        }),
        None => map_replications(master_seed, replications, |rng| {
            let path = simulate_path_with(env, policy, steps, rng);
            let (s1, s0) = path.decision_sigmas;
            realized_regret(gap, threshold_decision(&path.terminal, s1, s0, c))
        }),
    };
    RegretEstimate::from_samples(&samples)
}

/// Which branch of the max-regret problem attains the maximum.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Side {
    /// `max_δ δ Φ(c - δ/(σ₁+σ₀))`: nature makes arm 1 best.
    Plus,
    /// `max_δ δ Φ(-c - δ/(σ₁+σ₀))`: nature makes arm 0 best.
    Minus,
}

/// Worst-case regret of the Neyman fraction with threshold `c`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NeymanMaxRegret {
    pub value: f64,
    pub argmax_delta: f64,
    pub side: Side,
    pub plus_value: f64,
    pub minus_value: f64,
}

/// `max_{δ>0} δ Φ(shift - δ/scale)`, returned as `(argmax, max)`.
///
/// The objective is log-concave in δ, so bisection on the sign of its
/// derivative `Φ(u) - (δ/scale) φ(u)`, `u = shift - δ/scale`, is exact.
pub(crate) fn max_gap_regret(shift: f64, scale: f64) -> (f64, f64) {
    use crate::normal::pdf;
    use crate::optimize::bisect_decreasing;

    let slope = |delta: f64| {
        let u = shift - delta / scale;
        cdf(u) - (delta / scale) * pdf(u)
    };
    // Once δ/scale exceeds shift + 10 the slope is negative, whatever the shift.
    let hi = scale * GAP_BRACKET_MULTIPLE.max(shift.abs() + 10.0);
    debug_assert!(slope(hi) < 0.0);
    let delta = bisect_decreasing(slope, 0.0, hi, 1e-11 * scale.max(1.0));
    (delta, delta * cdf(shift - delta / scale))
}

/// Max regret over nature's choices when the agent samples at the Neyman
/// fraction with threshold `c`. Ties between the two branches report `Plus`.
pub fn max_regret_at_neyman(c: f64, sigma1: f64, sigma0: f64) -> Result<NeymanMaxRegret> {
    ensure_finite("c", c)?;
    ensure_positive("sigma1", sigma1)?;
    ensure_positive("sigma0", sigma0)?;
    let scale = sigma1 + sigma0;
    let (plus_arg, plus_value) = max_gap_regret(c, scale);
    let (minus_arg, minus_value) = max_gap_regret(-c, scale);
    let (value, argmax_delta, side) = if plus_value >= minus_value {
        (plus_value, plus_arg, Side::Plus)
    } else {
        (minus_value, minus_arg, Side::Minus)
    };
    Ok(NeymanMaxRegret { value, argmax_delta, side, plus_value, minus_value })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::normal::{gap_objective, v_star};
    use crate::policy::SamplingRule;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn env(mu1: f64, mu0: f64, s1: f64, s0: f64) -> Environment {
        Environment::new(mu1, mu0, s1, s0).unwrap()
    }

    #[test]
    fn closed_form_examples() {
        let phi_m05 = 0.308_537_538_725_986_9;
        assert_abs_diff_eq!(regret_closed_form(0.5, 0.0, &env(1.0, 0.0, 1.0, 1.0)).unwrap(), phi_m05, epsilon = 1e-12);
        assert_abs_diff_eq!(regret_closed_form(0.5, 0.0, &env(0.0, 1.0, 1.0, 1.0)).unwrap(), phi_m05, epsilon = 1e-12);
        assert_eq!(regret_closed_form(0.3, 0.4, &env(0.7, 0.7, 2.0, 1.0)).unwrap(), 0.0);
        assert!(regret_closed_form(1.5, 0.0, &env(1.0, 0.0, 1.0, 1.0)).is_err());
    }

    #[test]
    fn monte_carlo_matches_closed_form() {
        let e = env(1.0, 0.0, 1.0, 1.0);
        let policy = PolicySpec::neyman(1.0, 1.0).unwrap();
        let est = regret_monte_carlo(&policy, &e, 100_000, 17).unwrap();
        let exact = regret_closed_form(0.5, 0.0, &e).unwrap();
        assert!((est.mean - exact).abs() <= 3.0 * est.std_error, "{est:?} vs {exact}");
        assert!(!est.low_replication_warning);
    }

    #[test]
    fn monte_carlo_zero_gap_and_determinism() {
        let e = env(0.4, 0.4, 1.0, 2.0);
        let policy = PolicySpec::neyman(1.0, 2.0).unwrap();
        let est = regret_monte_carlo(&policy, &e, 1000, 3).unwrap();
        assert_eq!(est.mean, 0.0);
        let a = regret_monte_carlo(&policy, &env(1.0, 0.2, 1.0, 2.0), 5000, 99).unwrap();
        let b = regret_monte_carlo(&policy, &env(1.0, 0.2, 1.0, 2.0), 5000, 99).unwrap();
        assert_eq!(a, b);
        assert!(regret_monte_carlo(&policy, &e, 1, 3).is_err());
        assert!(regret_monte_carlo(&policy, &e, 500, 3).unwrap().low_replication_warning);
    }

    #[test]
    fn adaptive_monte_carlo_runs_on_paths() {
        let e = env(0.5, -0.5, 2.0, 1.0);
        let policy = PolicySpec::new(SamplingRule::adaptive(20).unwrap(), 0.0).unwrap();
        let est = regret_monte_carlo_with_steps(&policy, &e, 4000, 5, 200).unwrap();
        let neyman = regret_closed_form(2.0 / 3.0, 0.0, &e).unwrap();
        assert!((est.mean - neyman).abs() <= 4.0 * est.std_error, "{est:?} vs {neyman}");
    }

    #[test]
    fn max_regret_examples() {
        let r = max_regret_at_neyman(0.0, 1.0, 1.0).unwrap();
        assert_abs_diff_eq!(r.value, 0.33994, epsilon = 1e-5);
        assert_abs_diff_eq!(r.argmax_delta, 1.503_583_049_387_129, epsilon = 1e-8);
        assert_eq!(r.plus_value, r.minus_value);
        assert!(max_regret_at_neyman(0.5, 1.0, 1.0).unwrap().value > r.value);
        assert_abs_diff_eq!(max_regret_at_neyman(0.0, 2.0, 1.0).unwrap().value, 0.50991, epsilon = 1e-5);
        assert_eq!(max_regret_at_neyman(-0.5, 1.0, 1.0).unwrap().side, Side::Minus);
    }

    #[test]
    fn max_regret_minimised_at_zero() {
        let values: Vec<f64> =
            [-1.0, -0.5, 0.0, 0.5, 1.0].iter().map(|&c| max_regret_at_neyman(c, 1.0, 1.0).unwrap().value).collect();
        let min = values.iter().cloned().fold(f64::INFINITY, f64::min);
        assert_eq!(min, values[2]);
        assert!((values[2] - v_star(1.0, 1.0).unwrap()).abs() <= 1e-8);
    }

    #[test]
    fn bracket_end_is_negligible() {
        for (s1, s0) in [(1.0, 1.0), (2.0, 1.0), (0.3, 0.7)] {
            let scale: f64 = s1 + s0;
            let r = max_regret_at_neyman(0.0, s1, s0).unwrap();
            let at_end = GAP_BRACKET_MULTIPLE * scale * cdf(-GAP_BRACKET_MULTIPLE);
            assert!(at_end < 1e-15 * r.value);
            assert_abs_diff_eq!(r.value, scale * gap_objective(r.argmax_delta / scale), epsilon = 1e-15);
        }
    }

    proptest! {
        #[test]
        fn closed_form_scale_equivariant(
            gamma in 0.0f64..=1.0, c in -2.0f64..2.0,
            mu1 in -3.0f64..3.0, mu0 in -3.0f64..3.0,
            s1 in 0.1f64..3.0, s0 in 0.1f64..3.0, k in 0.1f64..10.0,
        ) {
            let base = regret_closed_form(gamma, c, &env(mu1, mu0, s1, s0)).unwrap();
            let scaled = regret_closed_form(gamma, c, &env(k * mu1, k * mu0, k * s1, k * s0)).unwrap();
            prop_assert!((scaled - k * base).abs() <= 1e-12 * (1.0 + k * base));
            prop_assert!(base >= 0.0);
        }

        #[test]
        fn neyman_max_regret_matches_v_star(s1 in 0.05f64..10.0, s0 in 0.05f64..10.0) {
            let r = max_regret_at_neyman(0.0, s1, s0).unwrap();
            prop_assert!((r.value - v_star(s1, s0).unwrap()).abs() <= 1e-8);
        }
    }
}
